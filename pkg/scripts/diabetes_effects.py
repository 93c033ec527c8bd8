"""Fit forest and garrote on the diabetes data and export main effects and
pairwise interaction surfaces for plotting.

    python scripts/diabetes_effects.py --out results/diabetes_effects
"""

import argparse
import json
import warnings

from treegarrote.datasets import load
from treegarrote.effects import export_effects
from treegarrote.forest import ForestParams, fit_forest
from treegarrote.garrote import build_design, selected_variables, solve_garrote
from treegarrote.ruleset import canonical_rules, group_rules


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/diabetes_effects")
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()
    warnings.simplefilter("ignore")
    d = load("diabetes")
    f = fit_forest(d, ForestParams(seed=a.seed))
    groups = group_rules(canonical_rules(f), f.p)
    m, _ = solve_garrote(build_design(groups, d.X), d.y, 1.0)
    out = export_effects(groups, m, d.columns, a.out)
    names = d.variables
    chosen = sorted(m.gamma.items(), key=lambda kv: -kv[1])[:15]
    print(f"{len(m.gamma)} of {m.n_groups} groups selected; variables "
          f"{[names[k] for k in sorted(selected_variables(m, d.columns))]}")
    for s, g in chosen:
        print(f"  gamma {g:8.4f}  {[names[k] for k in s.variables]}  {s}")
    man = json.loads((out / "manifest.json").read_text())
    print(f"wrote {out}: {len(man['variables'])} main effects, {len(man['pairs'])} pairs")


if __name__ == "__main__":
    main()
