"""Benchmark harness: forest vs. garrote (default and cross-validated) vs.
rule lasso on 50/50 train/test splits.

Each (dataset, seed) cell splits the data, tunes ``mtry`` by out-of-bag
error, fits the forest, extracts and groups its rules, runs the selected
methods and scores them on the held-out half. Only the selection solves are
timed.
"""

from __future__ import annotations

import json
import math
import time
import traceback
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from .data import Dataset, SplitSpec, friedman1, split
from .datasets import REGISTRY, load, resolve
from .forest import ForestParams, fit_forest
from .garrote import (DEFAULT_CV_GRID, build_design, predict_garrote, selected_variables,
                      solve_garrote, solve_garrote_cv)
from .ruleens import predict_rule_lasso, rule_design, solve_rule_lasso
from .ruleens import selected_variables as lasso_selected_variables
from .ruleset import decompose_rules, extract_rules, group_rules

METHODS = ("fg", "fgcv", "re")


@dataclass(frozen=True)
class BenchParams:
    forest: ForestParams = ForestParams()
    train_fraction: float = 0.5
    folds: int = 10
    lambda_grid: tuple[float, ...] = DEFAULT_CV_GRID
    methods: tuple[str, ...] = METHODS
    friedman_n: int = 300


@dataclass
class BenchRow:
    dataset: str
    seed: int
    n_train: int = 0
    p: int = 0  # original variables
    p_encoded: int = 0
    mtry: int = 0
    J: int = 0  # non-root rules (rule-lasso design columns)
    R: int = 0  # one-sided rules after interval decomposition
    G: int = 0  # active non-intercept patterns
    uv_rf: float = math.nan
    uv_fg: float = math.nan
    uv_fgcv: float = math.nan
    uv_re: float = math.nan
    sel_rf: int = -1
    sel_fg: int = -1
    sel_fgcv: int = -1
    sel_re: int = -1
    train_sse_rf: float = math.nan
    train_sse_fg: float = math.nan
    budget_fg: float = math.nan
    lambda_fgcv: float = math.nan
    n_groups_fg: int = -1
    gamma_min_fg: float = math.nan
    vars_fg: str = ""  # selected variable names, ";"-separated
    n_rules_re: int = -1
    time_fg: float = math.nan
    time_fgcv: float = math.nan
    time_re: float = math.nan
    error: str = ""


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=[f.name for f in fields(BenchRow)])

    def medians(self) -> pd.DataFrame:
        df = self.frame()
        df = df[df["error"] == ""]
        num = [c for c in df.columns if c not in ("dataset", "seed", "error", "vars_fg")]
        return df.groupby("dataset", sort=False)[num].median()


def unexplained_variance(y: np.ndarray, pred: np.ndarray) -> float:
    """Test SSE over the total sum of squares of ``y``; NaN when ``y`` is
    constant."""
    tot = float(((y - y.mean()) ** 2).sum())
    sse = float(((y - pred) ** 2).sum())
    if tot == 0.0:
        warnings.warn("test response is constant; unexplained variance is undefined (NaN)", stacklevel=2)
        return math.nan
    return sse / tot


def _timed(fn: Callable, *a, **k):
    t = time.perf_counter()
    out = fn(*a, **k)
    return out, time.perf_counter() - t


def run_cell(d: Dataset, seed: int, params: BenchParams = BenchParams(), name: str | None = None) -> BenchRow:
    """One benchmark cell on an already loaded dataset."""
    row = BenchRow(name or d.name, seed)
    tr, te = split(d, SplitSpec(seed=seed, train_fraction=params.train_fraction))
    row.n_train, row.p, row.p_encoded = tr.n, len(tr.variables), tr.p
    f = fit_forest(tr, replace(params.forest, seed=seed))
    row.mtry = f.params.mtry
    row.uv_rf = unexplained_variance(te.y, f.predict(te.X))
    row.sel_rf = len(f.selected_variables())
    row.train_sse_rf = float(((tr.y - f.predict(tr.X)) ** 2).sum())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        raw = extract_rules(f)
    canonical = decompose_rules(raw)
    groups = group_rules(canonical, tr.p)
    row.R = len(canonical)
    design = build_design(groups, tr.X)
    row.G = design.G
    if "fg" in params.methods:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            (m, _), row.time_fg = _timed(solve_garrote, design, tr.y, 1.0)
        row.uv_fg = unexplained_variance(te.y, predict_garrote(m, groups, te.X))
        sel = selected_variables(m, tr.columns)
        row.sel_fg = len(sel)
        row.vars_fg = ";".join(tr.variables[k] for k in sorted(sel))
        row.gamma_min_fg = min(m.gamma.values(), default=0.0)
        row.train_sse_fg = m.training_sse
        row.budget_fg = m.budget_used
        row.n_groups_fg = len(m.gamma)
    if "fgcv" in params.methods:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mcv, row.time_fgcv = _timed(solve_garrote_cv, design, tr.y, params.folds, params.lambda_grid, seed)
        row.uv_fgcv = unexplained_variance(te.y, predict_garrote(mcv, groups, te.X))
        row.sel_fgcv = len(selected_variables(mcv, tr.columns))
        row.lambda_fgcv = mcv.lam
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rdesign = rule_design(raw, tr.X)
    row.J = rdesign.J
    if "re" in params.methods:
        lm, row.time_re = _timed(solve_rule_lasso, raw, tr.X, tr.y, folds=params.folds, seed=seed,
                                 design=rdesign)
        row.uv_re = unexplained_variance(te.y, predict_rule_lasso(lm, raw, te.X))
        row.sel_re = len(lasso_selected_variables(lm, raw, tr.columns))
        row.n_rules_re = lm.n_rules
    return row


def load_bench_dataset(name: str, seed: int, params: BenchParams = BenchParams()) -> Dataset:
    """Registry dataset by name; the synthetic set is drawn afresh per seed."""
    info = resolve(name)
    if info.name == "friedman":
        d = friedman1(params.friedman_n, noise_sd=1.0, extra_noise_vars=5, seed=seed)
        d.name = "friedman"
        return d
    return load(info.name)


def run_bench(datasets: Sequence[str], seeds: Sequence[int], params: BenchParams = BenchParams(),
              progress: Callable[[BenchRow], None] | None = None) -> BenchReport:
    """Every (dataset, seed) cell, in order. A dataset that fails to load or
    run yields a row with ``error`` set and the run continues."""
    if not seeds:
        raise ValueError("need at least one seed")
    bad = [m for m in params.methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
    report = BenchReport(seeds=list(seeds), params=_params_json(params))
    for name in datasets:
        for seed in seeds:
            try:
                d = load_bench_dataset(name, seed, params)
                row = run_cell(d, seed, params, name=resolve(name).name)
            except Exception as e:  # reported per row; the run goes on
                row = BenchRow(name, seed, error=f"{type(e).__name__}: {e}")
                if not isinstance(e, (ValueError, OSError, KeyError)):
                    row.error += " | " + traceback.format_exc(limit=1).strip().splitlines()[-1]
            report.rows.append(row)
            if progress is not None:
                progress(row)
    return report


def _params_json(p: BenchParams) -> dict:
    d = asdict(p)
    d["lambda_grid"] = list(p.lambda_grid)
    d["methods"] = list(p.methods)
    return d


def all_datasets() -> list[str]:
    """Registry entries that can actually be loaded."""
    return [n for n, i in REGISTRY.items() if i.loader is not None or n == "friedman"]


def _markdown(report: BenchReport) -> str:
    def table(df: pd.DataFrame) -> list[str]:
        cols = list(df.columns)
        out = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for _, r in df.iterrows():
            cells = []
            for c in cols:
                v = r[c]
                cells.append(f"{v:.4g}" if isinstance(v, float) else str(v))
            out.append("| " + " | ".join(cells) + " |")
        return out

    lines = ["# Benchmark report", "", f"seeds: {report.seeds}", "", "## Per seed", ""]
    lines += table(report.frame())
    med = report.medians()
    if len(med):
        lines += ["", "## Medians over seeds", ""]
        lines += table(med.reset_index())
    return "\n".join(lines) + "\n"


def report_to_json(report: BenchReport) -> dict:
    def clean(v):
        return None if isinstance(v, float) and math.isnan(v) else v

    return {
        "schema_version": 1,
        "kind": "bench",
        "seeds": report.seeds,
        "params": report.params,
        "rows": [{k: clean(v) for k, v in asdict(r).items()} for r in report.rows],
    }


def report_from_json(d: dict) -> BenchReport:
    rows = []
    for item in d["rows"]:
        item = {k: (math.nan if v is None else v) for k, v in item.items()}
        rows.append(BenchRow(**item))
    return BenchReport(rows, list(d["seeds"]), dict(d["params"]))


def emit_report(report: BenchReport, path, format: str | None = None) -> Path:
    """Write the report as csv, json or markdown (inferred from the
    suffix when ``format`` is None)."""
    if not report.rows:
        raise ValueError("benchmark report is empty")
    path = Path(path)
    fmt = format or {".json": "json", ".md": "markdown"}.get(path.suffix, "csv")
    if fmt == "csv":
        report.frame().to_csv(path, index=False, float_format="%.10g")
    elif fmt == "json":
        path.write_text(json.dumps(report_to_json(report), indent=2))
    elif fmt in ("markdown", "md"):
        path.write_text(_markdown(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path
