"""Selection-step timings (garrote, CV garrote, rule lasso) and dictionary
sizes on one split of each given dataset.

    python scripts/solver_timing.py abalone concrete
"""

import sys
import warnings

from treegarrote.bench import BenchParams, load_bench_dataset, run_cell


def main(names: list[str]) -> None:
    warnings.simplefilter("ignore")
    print(f"{'dataset':10s} {'|G|':>7s} {'J':>8s} {'FG s':>8s} {'FG-CV s':>8s} {'RE s':>8s}")
    for name in names or ["abalone", "concrete"]:
        r = run_cell(load_bench_dataset(name, 1), 1, BenchParams(), name=name)
        print(f"{name:10s} {r.G:7d} {r.J:8d} {r.time_fg:8.2f} {r.time_fgcv:8.2f} {r.time_re:8.2f}")


if __name__ == "__main__":
    main(sys.argv[1:])
