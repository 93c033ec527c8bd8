"""Benchmark dataset registry.

Public regression datasets are taken from pinned, checksummed wheel files
on PyPI that bundle them, and written as clean CSV files into a cache
directory (``$TREEGARROTE_DATA``, default ``~/.cache/treegarrote``). Nothing
is committed to the repository.
"""

from __future__ import annotations

import hashlib
import io
import os
import urllib.request
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import pandas as pd

from .data import DataError, Dataset, friedman1, load_csv

CACHE_ENV = "TREEGARROTE_DATA"


@dataclass(frozen=True)
class Wheel:
    url: str
    sha256: str

    @property
    def filename(self) -> str:
        return self.url.rsplit("/", 1)[-1]


_PYPI = "https://pypi.org/packages"

WHEELS = {
    "scikit-lego": Wheel(
        f"{_PYPI}/c1/84/faa0ebdd72002c297024a3799c990bb01d0acf1bbb73308f4b0dddabbd17/scikit_lego-0.9.10-py3-none-any.whl",
        "fd68b9fe4aca6080d992a74770f1666cf2fe449d4f0d849ed8b0b8a8a56bb2e4"),
    "islp": Wheel(
        f"{_PYPI}/52/75/32fbb4fee997971aa0535790fe2e161cfb6307171ae882aa47c36d7a4719/islp-0.4.1-py3-none-any.whl",
        "191606d2d989239ced24422d3e99c6226ad249603b4ec967427a2990e9fcf5f3"),
    "rdatasets": Wheel(
        f"{_PYPI}/c0/42/1572a692094df2631b07b6e0e196f1d2257583ea704d97470f01cf2c4f62/rdatasets-0.2.10-py3-none-any.whl",
        "6fa2b311d8a30e059cba18a7b5b17e8aab7d16013d700f2754032e47718693a1"),
    "keel-ds": Wheel(
        f"{_PYPI}/77/88/c99136c61bb85663bd8cfb328fada55846eb10bd7271058160526e9674bf/keel_ds-0.2.5-py3-none-any.whl",
        "79faf1bd2f3ac2082d16eb9c8c49b2b1a60a5182e94464c5d32c7c642ea9650e"),
    "orange3": Wheel(
        f"{_PYPI}/4c/40/258c24c83149eb1d4d08ab2a375170666f9ad802a06ee85be7ce747df940/"
        "orange3-3.39.0-cp310-cp310-manylinux_2_27_x86_64.manylinux_2_28_x86_64.whl",
        "4dcfe3234c6cfea7d4cb5fa6a7d1cb92355d73d778d565c1f5b85178b216a941"),
}


def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "treegarrote"))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch_wheel(name: str, root: Path | None = None) -> Path:
    """Download (once) and checksum-verify a pinned wheel."""
    w = WHEELS[name]
    root = Path(root) if root is not None else cache_dir()
    path = root / "wheels" / w.filename
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".part")
        with urllib.request.urlopen(w.url, timeout=120) as r, open(tmp, "wb") as f:
            while chunk := r.read(1 << 20):
                f.write(chunk)
        tmp.replace(path)
    got = _sha256(path)
    if got != w.sha256:
        path.unlink()
        raise DataError(f"checksum mismatch for {w.filename}: {got}")
    return path


def _member(wheel: Path, name: str) -> bytes:
    with zipfile.ZipFile(wheel) as z:
        return z.read(name)


def _abalone(w: Path) -> pd.DataFrame:
    inner = zipfile.ZipFile(io.BytesIO(_member(w, "sklego/data/abalone.zip")))
    with inner.open(inner.namelist()[0]) as f:
        return pd.read_csv(f)


def _islp(member: str, drop: list[str]) -> Callable[[Path], pd.DataFrame]:
    return lambda w: pd.read_csv(io.BytesIO(_member(w, member))).drop(columns=drop)


def _rdata(member: str, drop: list[str]) -> Callable[[Path], pd.DataFrame]:
    def load(w: Path) -> pd.DataFrame:
        return pd.read_pickle(io.BytesIO(_member(w, member)), compression="xz").drop(columns=drop)
    return load


def _orange(member: str, drop: list[str]) -> Callable[[Path], pd.DataFrame]:
    def load(w: Path) -> pd.DataFrame:
        # header row, then two rows of Orange type/role annotations
        df = pd.read_csv(io.BytesIO(_member(w, member)), sep="\t", skiprows=[1, 2], na_values=["?"])
        df.columns = [c.strip() for c in df.columns]
        df = df.drop(columns=drop).dropna().reset_index(drop=True)
        return df
    return load


_MARKETING_COLUMNS = ["Sex", "MaritalStatus", "Age", "Education", "Occupation", "YearsInSf", "DualIncome",
                      "HouseholdMembers", "Under18", "HouseholdStatus", "TypeOfHome", "EthnicClass",
                      "Language", "Income"]


def _marketing(w: Path) -> pd.DataFrame:
    text = _member(w, "keel_ds/data/balanced/raw/marketing.dat").decode()
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("@")]
    return pd.read_csv(io.StringIO("\n".join(rows)), header=None, names=_MARKETING_COLUMNS)


def _diabetes(_: Path | None) -> pd.DataFrame:
    from sklearn.datasets import load_diabetes

    b = load_diabetes(as_frame=True, scaled=False)
    return b.frame


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    target: str
    wheel: str | None  # None: bundled with an installed package or synthetic
    loader: Callable | None = field(repr=False, default=None)
    note: str = ""


REGISTRY: dict[str, DatasetInfo] = {d.name: d for d in [
    DatasetInfo("abalone", "rings", "scikit-lego", _abalone),
    DatasetInfo("auto-mpg", "mpg", "islp", _islp("ISLP/data/Auto.csv", ["name"]),
                "rows with missing horsepower already removed upstream (392 rows)"),
    DatasetInfo("housing", "MEDV", "orange3", _orange("Orange/datasets/housing.tab", [])),
    DatasetInfo("machine", "perf", "rdatasets", _rdata("rdatasets/_data/MASS/cpus.pkl.compress",
                                                       ["rownames", "name", "estperf"])),
    DatasetInfo("concrete", "compressive_strength", "rdatasets",
                _rdata("rdatasets/_data/modeldata/concrete.pkl.compress", ["rownames"])),
    DatasetInfo("auto", "price", "orange3", _orange("Orange/tests/datasets/imports-85.tab", ["engine-location"]),
                "complete cases only; engine-location is constant on them"),
    DatasetInfo("marketing", "Income", "keel-ds", _marketing),
    DatasetInfo("diabetes", "target", None, _diabetes, "bundled with scikit-learn"),
    DatasetInfo("friedman", "y", None, None, "synthetic: n=300, noise sd 1, 5 extra noise columns"),
    DatasetInfo("prostate", "lpsa", None, None, "no pinned offline source"),
    DatasetInfo("ozone", "ozone", None, None, "no pinned offline source"),
    DatasetInfo("bone", "spnbmd", None, None, "no pinned offline source"),
    DatasetInfo("galaxy", "velocity", None, None, "no pinned offline source"),
]}

ALIASES = {"boston": "housing", "mpg": "auto-mpg", "bones": "bone", "galaxies": "galaxy"}


def resolve(name: str) -> DatasetInfo:
    key = ALIASES.get(name, name)
    if key not in REGISTRY:
        raise DataError(f"unknown dataset {name!r}; known: {', '.join(REGISTRY)}")
    return REGISTRY[key]


def csv_path(name: str, root: Path | None = None) -> Path:
    root = Path(root) if root is not None else cache_dir()
    return root / "csv" / f"{resolve(name).name}.csv"


def fetch(name: str, root: Path | None = None) -> Path:
    """Materialise ``name`` as a clean CSV in the cache and return its path."""
    info = resolve(name)
    out = csv_path(info.name, root)
    if out.exists():
        return out
    if info.name == "friedman":
        d = friedman1(300, noise_sd=1.0, extra_noise_vars=5, seed=0)
        out.parent.mkdir(parents=True, exist_ok=True)
        d.to_csv(out)
        return out
    if info.loader is None:
        raise DataError(f"dataset {info.name!r} is not available: {info.note}")
    wheel = fetch_wheel(info.wheel, root) if info.wheel else None
    df = info.loader(wheel)
    out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False)
    return out


def load(name: str, root: Path | None = None) -> Dataset:
    info = resolve(name)
    d = load_csv(fetch(info.name, root), info.target)
    d.name = info.name
    return d
