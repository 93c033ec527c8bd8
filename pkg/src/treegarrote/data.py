"""Dataset container, CSV ingestion with dummy encoding, splitting and
synthetic data.

A factor column with ``k`` levels becomes ``k`` one-hot dummy columns (no
reference level is dropped). Everything downstream works on the encoded
matrix; :meth:`Dataset.variable_of` maps an encoded column back to the
original variable so that selection counts can be reported per variable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .seeding import rng_for


class DataError(ValueError):
    """Raised for unusable input data (missing file, bad target, NaNs...)."""


@dataclass(frozen=True)
class Column:
    """One encoded column.

    ``kind`` is ``"numeric"`` or ``"dummy"``; dummy columns carry the name of
    the factor they were expanded from and the level they indicate.
    """

    name: str
    kind: str = "numeric"
    factor: str | None = None
    level: str | None = None

    @property
    def variable(self) -> str:
        return self.factor if self.kind == "dummy" else self.name

    def to_json(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "dummy":
            d["factor"] = self.factor
            d["level"] = self.level
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Column":
        return cls(d["name"], d.get("kind", "numeric"), d.get("factor"), d.get("level"))


@dataclass
class Dataset:
    columns: list[Column]
    X: np.ndarray
    y: np.ndarray
    target: str = "y"
    name: str = ""
    rows: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        if self.X.ndim != 2:
            raise DataError("X must be two-dimensional")
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}")
        if self.X.shape[1] != len(self.columns):
            raise DataError(f"X has {self.X.shape[1]} columns but {len(self.columns)} names")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataError("missing or non-finite values are not supported")
        if self.rows is None:
            self.rows = np.arange(self.n)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def variables(self) -> list[str]:
        """Original (pre-encoding) variable names in first-appearance order."""
        return variables_of(self.columns)

    def variable_of(self, j: int) -> int:
        return variable_index(self.columns)[j]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.columns, self.X[idx], self.y[idx], self.target, self.name, self.rows[idx])

    @classmethod
    def from_arrays(cls, X, y, names: Sequence[str] | None = None, target: str = "y", name: str = "") -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if names is None:
            names = [f"x{j + 1}" for j in range(X.shape[1])]
        return cls([Column(nm) for nm in names], X, y, target, name)

    def to_frame(self) -> pd.DataFrame:
        """Decoded frame: dummy groups collapse back to one factor column."""
        out = {}
        for var in self.variables:
            idx = [j for j, c in enumerate(self.columns) if c.variable == var]
            c0 = self.columns[idx[0]]
            if c0.kind == "dummy":
                levels = np.array([self.columns[j].level for j in idx], dtype=object)
                out[var] = levels[np.argmax(self.X[:, idx], axis=1)]
            else:
                out[var] = self.X[:, idx[0]]
        out[self.target] = self.y
        return pd.DataFrame(out)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def variables_of(columns: Sequence[Column]) -> list[str]:
    seen: dict[str, None] = {}
    for c in columns:
        seen.setdefault(c.variable, None)
    return list(seen)


def variable_index(columns: Sequence[Column]) -> list[int]:
    """Encoded column index -> original variable index."""
    order = {v: i for i, v in enumerate(variables_of(columns))}
    return [order[c.variable] for c in columns]


def _encode(frame: pd.DataFrame, target: str, reference: Sequence[Column] | None):
    columns: list[Column] = []
    blocks = []
    if reference is None:
        for name in frame.columns:
            if name == target:
                continue
            s = frame[name]
            if pd.api.types.is_numeric_dtype(s) and not pd.api.types.is_bool_dtype(s):
                columns.append(Column(str(name)))
                blocks.append(s.to_numpy(dtype=np.float64))
                continue
            levels = sorted(s.astype(str).unique())
            if len(levels) < 2:
                raise DataError(
                    f"factor column {name!r} has a single level {levels[0]!r}; "
                    "its dummy expansion would be a constant all-ones column"
                )
            vals = s.astype(str).to_numpy()
            for lev in levels:
                columns.append(Column(f"{name}={lev}", "dummy", str(name), lev))
                blocks.append((vals == lev).astype(np.float64))
        return columns, blocks
    done: set[str] = set()
    for c in reference:
        var = c.variable
        if var not in frame.columns:
            raise DataError(f"column {var!r} missing from data")
        if c.kind == "numeric":
            s = frame[var]
            if not pd.api.types.is_numeric_dtype(s):
                raise DataError(f"column {var!r} must be numeric")
            blocks.append(s.to_numpy(dtype=np.float64))
        else:
            if var not in done:
                known = {r.level for r in reference if r.kind == "dummy" and r.factor == var}
                vals = frame[var].astype(str)
                unseen = set(vals.unique()) - known
                if unseen:
                    raise DataError(f"factor {var!r} has levels unseen in training: {sorted(unseen)}")
                done.add(var)
            blocks.append((frame[var].astype(str).to_numpy() == c.level).astype(np.float64))
    return list(reference), blocks


def load_csv(path, target: str | None, columns: Sequence[Column] | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Non-numeric predictor columns are one-hot encoded. When ``columns`` is
    given (the encoding of a training set) the file is encoded against it,
    which is what prediction on new data needs. ``target=None`` is allowed
    only together with ``columns`` and yields ``y`` filled with NaN-free
    zeros.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise DataError(f"{path} is empty") from None
    if frame.shape[0] == 0:
        raise DataError(f"{path} has a header but no rows")
    if frame.isna().any().any():
        bad = list(frame.columns[frame.isna().any()])
        raise DataError(f"missing values in columns {bad}")
    if target is not None:
        if target not in frame.columns:
            raise DataError(f"target column {target!r} not in {list(frame.columns)}")
        if not pd.api.types.is_numeric_dtype(frame[target]):
            raise DataError(f"target column {target!r} is not numeric")
        y = frame[target].to_numpy(dtype=np.float64)
    else:
        if columns is None:
            raise DataError("a target column is required")
        y = np.zeros(frame.shape[0])
    cols, blocks = _encode(frame, target, columns)
    if not cols:
        raise DataError("no predictor columns")
    X = np.column_stack(blocks)
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(cols, X, y, target or "y", name)


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    train_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def split_indices(n: int, s: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise DataError("need at least two rows to split")
    n_train = math.ceil(s.train_fraction * n)
    if n_train >= n:
        raise DataError(f"train fraction {s.train_fraction} leaves no test rows out of {n}")
    perm = rng_for(s.seed, "split").permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split(d: Dataset, s: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``ceil(f*n)`` rows train, the rest test."""
    tr, te = split_indices(d.n, s)
    return d.take(tr), d.take(te)


def friedman1_response(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def friedman1(n: int, noise_sd: float = 1.0, extra_noise_vars: int = 5, seed: int = 0) -> Dataset:
    """Friedman's first synthetic benchmark.

    Five relevant uniform predictors plus ``extra_noise_vars`` irrelevant
    ones; the default of 5 extras gives the usual 10-column version.
    """
    if n < 1:
        raise DataError("n must be positive")
    if noise_sd < 0:
        raise DataError("noise_sd must be non-negative")
    rng = rng_for(seed, "datagen")
    X = rng.uniform(size=(n, 5 + extra_noise_vars))
    y = friedman1_response(X) + noise_sd * rng.standard_normal(n)
    return Dataset.from_arrays(X, y, name="friedman1")
