"""Reproduce the benchmark comparison (forest, garrote, CV garrote, rule
lasso) on every loadable dataset and write csv, json and markdown reports.

    python scripts/run_bench.py --out results/bench --seeds 1..5
"""

import argparse
import sys
import warnings
from pathlib import Path

from treegarrote.bench import BenchParams, all_datasets, emit_report, run_bench
from treegarrote.forest import ForestParams


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/bench")
    ap.add_argument("--datasets", default="all")
    ap.add_argument("--seeds", default="1..5")
    ap.add_argument("--methods", default="fg,fgcv,re")
    ap.add_argument("--trees", type=int, default=500)
    a = ap.parse_args()
    lo, _, hi = a.seeds.partition("..")
    seeds = list(range(int(lo), int(hi or lo) + 1))
    names = all_datasets() if a.datasets == "all" else a.datasets.split(",")
    params = BenchParams(forest=ForestParams(num_trees=a.trees), methods=tuple(a.methods.split(",")))
    warnings.simplefilter("ignore")
    report = run_bench(names, seeds, params,
                       progress=lambda r: print(f"{r.dataset:10s} seed {r.seed}  uv rf {r.uv_rf:.3f} "
                                                f"fg {r.uv_fg:.3f} {r.error}", file=sys.stderr, flush=True))
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    for suffix in (".csv", ".json", ".md"):
        emit_report(report, out.with_suffix(suffix))
    print(report.medians()[["uv_rf", "uv_fg", "uv_fgcv", "uv_re", "sel_rf", "sel_fg", "G", "J"]].to_string())


if __name__ == "__main__":
    main()
