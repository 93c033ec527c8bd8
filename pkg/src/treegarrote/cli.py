"""Command-line interface.

Stages pass versioned JSON artifacts to each other::

    treegarrote fit      --data train.csv --target y --out forest.json
    treegarrote rules extract --model forest.json --out rules.json
    treegarrote select   --rules rules.json --data train.csv --out garrote.json
    treegarrote predict  --model garrote.json --data test.csv --out preds.csv

``run`` does the first three in one go. Exit codes: 0 success, 1 usage
error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .data import Column, DataError, Dataset, friedman1, load_csv
from .forest import SCHEMA_VERSION, Forest, ForestParams, ModelError, check_schema, fit_forest
from .garrote import (DEFAULT_CV_GRID, build_design, garrote_from_json, garrote_to_json, predict_garrote,
                      solve_garrote, solve_garrote_cv)
from .ruleset import (ExtractionReport, RuleError, RuleSet, decompose_rules, extract_rules, group_rules,
                      groups_from_json, groups_to_json)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read_json(path) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: not valid JSON ({e})") from e


def _write_json(obj: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f)


def _load_with(path, columns: list[Column], target: str | None) -> Dataset:
    """Load ``path`` encoded like ``columns``; the target is optional."""
    header = pd.read_csv(path, nrows=0, skipinitialspace=True).columns
    tgt = target if target is not None and target in header else None
    return load_csv(path, tgt, columns=columns)


def _forest_params(a) -> ForestParams:
    mtry = None if a.mtry == "auto" else int(a.mtry)
    return ForestParams(num_trees=a.trees, mtry=mtry, min_node_size=a.min_node, seed=a.seed)


def _rules_doc(f: Forest, raw: RuleSet, canonical: RuleSet, groups, rep: ExtractionReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "rules",
        "p": f.p,
        "target": f.target,
        "columns": [c.to_json() for c in f.columns],
        "extraction": {"n_nodes": rep.n_nodes, "n_empty": rep.n_empty, "n_zero_beta": rep.n_zero_beta},
        "node_rules": raw.to_json(),
        "rules": canonical.to_json(),
        "groups": groups_to_json(groups),
    }


def _extract(f: Forest):
    rep = ExtractionReport()
    raw = extract_rules(f, rep)
    canonical = decompose_rules(raw)
    return raw, canonical, group_rules(canonical, f.p), rep


def _read_rules(path):
    d = _read_json(path)
    check_schema(d, "rules")
    columns = [Column.from_json(c) for c in d["columns"]]
    p = len(columns)
    canonical = RuleSet.from_json(d["rules"], p)
    raw = RuleSet.from_json(d["node_rules"], p)
    groups = groups_from_json(d["groups"], canonical)
    if any(len(g["signs"]) != p for g in d["groups"]):
        raise ModelError("group patterns do not match the column count")
    return d, columns, raw, canonical, groups


def _select(groups, d: Dataset, a):
    design = build_design(groups, d.X)
    if a.cv:
        grid = DEFAULT_CV_GRID if a.grid is None else tuple(float(v) for v in a.grid.split(","))
        return solve_garrote_cv(design, d.y, a.folds, grid, a.seed)
    return solve_garrote(design, d.y, a.lam)[0]


# subcommands -----------------------------------------------------------------

def cmd_fit(a) -> int:
    d = load_csv(a.data, a.target)
    f = fit_forest(d, _forest_params(a))
    _write_json(f.to_json(), a.out)
    return 0


def cmd_rules(a) -> int:
    f = Forest.from_json(_read_json(a.model))
    raw, canonical, groups, rep = _extract(f)
    _write_json(_rules_doc(f, raw, canonical, groups, rep), a.out)
    print(f"{len(raw)} node rules, {len(canonical)} one-sided rules, {len(groups)} groups", file=sys.stderr)
    return 0


def cmd_select(a) -> int:
    doc, columns, _, _, groups = _read_rules(a.rules)
    d = _load_with(a.data, columns, a.target or doc["target"])
    if a.target is None and doc["target"] not in pd.read_csv(a.data, nrows=0, skipinitialspace=True).columns:
        raise DataError(f"target column {doc['target']!r} not found in {a.data}")
    m = _select(groups, d, a)
    _write_json(garrote_to_json(m, groups, columns, doc["target"]), a.out)
    print(f"{len(m.gamma)} of {m.n_groups} groups selected, budget used {m.budget_used:.4g}", file=sys.stderr)
    return 0


def cmd_predict(a) -> int:
    doc = _read_json(a.model)
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind == "forest":
        f = Forest.from_json(doc)
        d = _load_with(a.data, f.columns, f.target)
        pred = f.predict(d.X)
    elif kind == "rule-lasso":
        from .ruleens import lasso_from_json, predict_rule_lasso

        m, rules, columns, target = lasso_from_json(doc)
        d = _load_with(a.data, columns, target)
        pred = predict_rule_lasso(m, rules, d.X)
    else:
        m, groups, columns = garrote_from_json(doc)
        d = _load_with(a.data, columns, doc.get("target"))
        pred = predict_garrote(m, groups, d.X)
    pd.DataFrame({"prediction": pred}).to_csv(a.out, index=False, float_format="%.17g")
    return 0


def _parse_pairs(specs, columns: list[Column]):
    if specs is None or specs == ["all"]:
        return "all"
    names = [c.name for c in columns]
    out = []
    for s in specs:
        parts = s.split(",")
        if len(parts) != 2:
            raise UsageError(f"--pairs expects 'k,l', got {s!r}")
        idx = []
        for q in parts:
            q = q.strip()
            if q in names:
                idx.append(names.index(q))
            elif q.isdigit() and int(q) < len(names):
                idx.append(int(q))
            else:
                raise DataError(f"unknown variable {q!r}")
        out.append(tuple(idx))
    return out


def cmd_effects(a) -> int:
    from .effects import export_effects

    _, columns, _, _, groups = _read_rules(a.rules)
    model = None
    if a.model:
        model, _, mcols = garrote_from_json(_read_json(a.model))
        if [c.name for c in mcols] != [c.name for c in columns]:
            raise ModelError("model and rules were built on different columns")
    out = export_effects(groups, model, columns, a.out, _parse_pairs(a.pairs, columns))
    print(f"wrote {out / 'effects.csv'} and {out / 'manifest.json'}", file=sys.stderr)
    return 0


def cmd_baseline(a) -> int:
    from .ruleens import lasso_to_json, solve_rule_lasso

    doc, columns, raw, _, _ = _read_rules(a.rules)
    d = _load_with(a.data, columns, a.target or doc["target"])
    folds = a.folds if a.cv else 0
    m = solve_rule_lasso(raw, d.X, d.y, folds=folds, seed=a.seed)
    _write_json(lasso_to_json(m, raw, columns, doc["target"]), a.out)
    print(f"{m.n_rules} rules selected, penalty {m.penalty:.4g}", file=sys.stderr)
    return 0


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def cmd_bench(a) -> int:
    from . import bench, datasets

    names = bench.all_datasets() if a.datasets == "all" else [s.strip() for s in a.datasets.split(",")]
    if a.cache:
        import os

        os.environ[datasets.CACHE_ENV] = a.cache
    if a.action == "fetch":
        failed = 0
        for n in names:
            try:
                print(f"{n}: {datasets.fetch(n)}", file=sys.stderr)
            except (DataError, OSError) as e:
                failed += 1
                print(f"{n}: not fetched ({e})", file=sys.stderr)
        return 2 if failed == len(names) else 0
    if a.out is None:
        raise UsageError("bench needs --out")
    params = bench.BenchParams(
        forest=ForestParams(num_trees=a.trees, min_node_size=a.min_node),
        folds=a.folds,
        methods=tuple(s.strip() for s in a.methods.split(",")),
    )
    report = bench.run_bench(names, _parse_seeds(a.seeds), params,
                             progress=lambda r: print(f"{r.dataset} seed {r.seed}: "
                                                      f"{r.error or 'ok'}", file=sys.stderr))
    bench.emit_report(report, a.out, a.format)
    return 0


def cmd_datagen(a) -> int:
    d = friedman1(a.n, noise_sd=a.noise_sd, extra_noise_vars=a.extra_noise, seed=a.seed)
    d.to_csv(a.out)
    return 0


def cmd_run(a) -> int:
    d = load_csv(a.data, a.target)
    f = fit_forest(d, _forest_params(a))
    _, _, groups, _ = _extract(f)
    m = _select(groups, d, a)
    _write_json(garrote_to_json(m, groups, f.columns, f.target), a.out)
    if a.rules_out:
        raw, canonical, groups, rep = _extract(f)
        _write_json(_rules_doc(f, raw, canonical, groups, rep), a.rules_out)
    print(f"{len(m.gamma)} of {m.n_groups} groups selected, budget used {m.budget_used:.4g}", file=sys.stderr)
    return 0


# parser ---------------------------------------------------------------------

def _forest_flags(p) -> None:
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--min-node", type=int, default=5)
    p.add_argument("--mtry", default="auto", help="'auto' (out-of-bag tuning) or an integer")
    p.add_argument("--seed", type=int, default=0)


def _select_flags(p) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--cv", action="store_true", help="choose lambda by cross-validation")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid", default=None, help="comma-separated lambda grid for --cv")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="treegarrote", description="Sparse rule-group selection for random forests.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    q = sub.add_parser("fit", help="fit a random forest")
    q.add_argument("--data", required=True)
    q.add_argument("--target", required=True)
    q.add_argument("--out", required=True)
    _forest_flags(q)
    q.set_defaults(fn=cmd_fit)

    q = sub.add_parser("rules", help="extract weighted rules and their groups")
    q.add_argument("action", choices=["extract"])
    q.add_argument("--model", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_rules)

    q = sub.add_parser("select", help="garrote selection over rule groups")
    q.add_argument("--rules", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--target", default=None)
    q.add_argument("--out", required=True)
    q.add_argument("--seed", type=int, default=0)
    _select_flags(q)
    q.set_defaults(fn=cmd_select)

    q = sub.add_parser("predict", help="predict from a forest, garrote or rule-lasso model")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_predict)

    q = sub.add_parser("effects", help="export main effects and interaction surfaces")
    q.add_argument("--rules", required=True)
    q.add_argument("--model", default=None, help="garrote model; forest effects only when omitted")
    q.add_argument("--pairs", action="append", default=None, help="'all' or 'k,l' (names or indices); repeatable")
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_effects)

    q = sub.add_parser("baseline", help="comparison baselines")
    q.add_argument("method", choices=["rule-lasso"])
    q.add_argument("--rules", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--target", default=None)
    q.add_argument("--cv", action="store_true")
    q.add_argument("--folds", type=int, default=10)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_baseline)

    q = sub.add_parser("bench", help="benchmark harness ('bench fetch' downloads datasets)")
    q.add_argument("action", nargs="?", choices=["run", "fetch"], default="run")
    q.add_argument("--datasets", default="all")
    q.add_argument("--seeds", default="1..5")
    q.add_argument("--out", default=None)
    q.add_argument("--format", choices=["csv", "json", "markdown"], default=None)
    q.add_argument("--methods", default="fg,fgcv,re")
    q.add_argument("--trees", type=int, default=500)
    q.add_argument("--min-node", type=int, default=5)
    q.add_argument("--folds", type=int, default=10)
    q.add_argument("--cache", default=None, help="dataset cache directory")
    q.set_defaults(fn=cmd_bench)

    q = sub.add_parser("datagen", help="synthetic data")
    q.add_argument("kind", choices=["friedman1"])
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--noise-sd", type=float, default=1.0)
    q.add_argument("--extra-noise", type=int, default=5)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_datagen)

    q = sub.add_parser("run", help="fit, extract and select in one step")
    q.add_argument("--data", required=True)
    q.add_argument("--target", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--rules-out", default=None)
    _forest_flags(q)
    _select_flags(q)
    q.set_defaults(fn=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_help(sys.stderr)
        return 1
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            parser.print_help(sys.stderr)
            return 1
        return a.fn(a)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except (DataError, ModelError, RuleError, FileNotFoundError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
