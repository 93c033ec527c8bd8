"""Plot-ready main effects and pairwise interaction surfaces.

Degree-1 groups on a variable are step functions of that variable, and
degree-2 groups on a pair are piecewise constant on the grid spanned by
their thresholds, so both are exported exactly: breakpoints plus one value
per segment (or cell). Values are scaled by the garrote multipliers when a
model is given, and taken as-is (the forest) otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .data import Column
from .garrote import GarroteModel
from .ruleset import GroupFit

CATEGORIES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass
class EffectCurve:
    variable: int
    breakpoints: np.ndarray
    values: np.ndarray  # one per segment: len(breakpoints) + 1
    source: str  # "forest" or "garrote"
    part: int | str = "combined"  # +1, -1 or "combined"

    def __call__(self, x) -> np.ndarray:
        return self.values[np.searchsorted(self.breakpoints, np.asarray(x, float), side="right")]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


@dataclass
class EffectSurface:
    variables: tuple[int, int]
    x_breakpoints: np.ndarray
    y_breakpoints: np.ndarray
    values: np.ndarray  # (len(x_breakpoints) + 1, len(y_breakpoints) + 1)
    source: str
    part: tuple[int, int] | str = "combined"

    def __call__(self, x, y) -> np.ndarray:
        i = np.searchsorted(self.x_breakpoints, np.asarray(x, float), side="right")
        j = np.searchsorted(self.y_breakpoints, np.asarray(y, float), side="right")
        return self.values[i, j]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


def _scale(g: GroupFit, model: GarroteModel | None) -> float:
    return 1.0 if model is None else model.gamma.get(g.pattern, 0.0)


def _segment_masks(lower: np.ndarray, thr: np.ndarray, bp: np.ndarray) -> np.ndarray:
    """``(R, len(bp)+1)`` activity of one-sided conditions per segment."""
    rank = np.searchsorted(bp, thr)
    seg = np.arange(bp.size + 1)
    return np.where(lower[:, None], seg[None, :] > rank[:, None], seg[None, :] <= rank[:, None])


def _conditions(g: GroupFit, k: int):
    rs = g.rules
    sel = rs.var == k
    # canonical rules hold exactly one condition per constrained variable
    return rs.lower[sel], rs.thr[sel]


def main_effect(groups: Sequence[GroupFit], model: GarroteModel | None, k: int,
                part: int | str = "combined") -> EffectCurve:
    """Step function of variable ``k`` collected from its degree-1 groups."""
    if part not in ("combined", 1, -1):
        raise ValueError("part must be +1, -1 or 'combined'")
    sel = [g for g in groups if g.degree == 1 and g.pattern.signs[k] != 0
           and (part == "combined" or g.pattern.signs[k] == part)]
    source = "forest" if model is None else "garrote"
    if not sel:
        return EffectCurve(k, np.zeros(0), np.zeros(1), source, part)
    lowers, thrs, betas = [], [], []
    for g in sel:
        lo, t = _conditions(g, k)
        lowers.append(lo)
        thrs.append(t)
        betas.append(g.rules.beta * _scale(g, model))
    lower, thr, beta = np.concatenate(lowers), np.concatenate(thrs), np.concatenate(betas)
    bp = np.unique(thr)
    values = beta @ _segment_masks(lower, thr, bp)
    return EffectCurve(k, bp, values, source, part)


def interaction_surface(groups: Sequence[GroupFit], model: GarroteModel | None, k: int, l: int,
                        part: tuple[int, int] | str = "combined") -> EffectSurface:
    """Piecewise-constant surface over ``(x[k], x[l])`` from the degree-2
    groups on exactly that pair. ``part`` picks one sign category
    ``(sign_k, sign_l)`` or sums all four."""
    if k == l:
        raise ValueError("need two distinct variables")
    if part != "combined" and tuple(part) not in CATEGORIES:
        raise ValueError(f"part must be one of {CATEGORIES} or 'combined'")
    sel = [g for g in groups if g.degree == 2 and g.pattern.signs[k] != 0 and g.pattern.signs[l] != 0
           and (part == "combined" or (g.pattern.signs[k], g.pattern.signs[l]) == tuple(part))]
    source = "forest" if model is None else "garrote"
    part = part if part == "combined" else tuple(part)
    if not sel:
        return EffectSurface((k, l), np.zeros(0), np.zeros(0), np.zeros((1, 1)), source, part)
    parts = {v: ([], []) for v in (k, l)}
    betas = []
    for g in sel:
        for v in (k, l):
            lo, t = _conditions(g, v)
            parts[v][0].append(lo)
            parts[v][1].append(t)
        betas.append(g.rules.beta * _scale(g, model))
    beta = np.concatenate(betas)
    masks, bps = [], []
    for v in (k, l):
        lower, thr = np.concatenate(parts[v][0]), np.concatenate(parts[v][1])
        bp = np.unique(thr)
        bps.append(bp)
        masks.append(_segment_masks(lower, thr, bp).astype(np.float64))
    values = (masks[0] * beta[:, None]).T @ masks[1]
    return EffectSurface((k, l), bps[0], bps[1], values, source, part)


def _part_label(part) -> str:
    if part == "combined":
        return "combined"
    if isinstance(part, tuple):
        return "(" + ",".join("+" if s > 0 else "-" for s in part) + ")"
    return "+" if part > 0 else "-"


def _segments(bp: np.ndarray):
    lo = np.concatenate([[-np.inf], bp])
    hi = np.concatenate([bp, [np.inf]])
    return lo, hi


def effects_table(curves: Sequence[EffectCurve], surfaces: Sequence[EffectSurface],
                  names: Sequence[str]) -> pd.DataFrame:
    """Long-form table: one row per curve segment or surface cell."""
    rows = []
    for c in curves:
        lo, hi = _segments(c.breakpoints)
        for a, b, v in zip(lo, hi, c.values):
            rows.append(("main", names[c.variable], a, b, "", np.nan, np.nan, v, c.source, _part_label(c.part)))
    for s in surfaces:
        xlo, xhi = _segments(s.x_breakpoints)
        ylo, yhi = _segments(s.y_breakpoints)
        k, l = s.variables
        for i in range(xlo.size):
            for j in range(ylo.size):
                rows.append(("interaction", names[k], xlo[i], xhi[i], names[l], ylo[j], yhi[j],
                             s.values[i, j], s.source, _part_label(s.part)))
    return pd.DataFrame(rows, columns=["kind", "var1", "var1_lo", "var1_hi", "var2", "var2_lo", "var2_hi",
                                       "value", "source", "part"])


def export_effects(groups: Sequence[GroupFit], model: GarroteModel | None, columns: Sequence[Column],
                   out_dir, pairs: str | Sequence[tuple[int, int]] = "all",
                   variables: Sequence[int] | None = None) -> Path:
    """Write ``effects.csv`` (long form) and ``manifest.json`` to ``out_dir``.

    Curves and surfaces are exported for the forest and, when ``model`` is
    given, for the garrote fit, each as sign parts and combined. Groups of
    degree three and higher are listed in the manifest with their l1 mass
    and multiplier only.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [c.name for c in columns]
    p = len(columns)
    if variables is None:
        variables = sorted({g.pattern.variables[0] for g in groups if g.degree == 1})
    if pairs == "all":
        pairs = sorted({tuple(g.pattern.variables) for g in groups if g.degree == 2})
    sources = [None] if model is None else [None, model]
    curves, surfaces = [], []
    for m in sources:
        for k in variables:
            for part in (1, -1, "combined"):
                curves.append(main_effect(groups, m, k, part))
        for k, l in pairs:
            for part in CATEGORIES + ("combined",):
                surfaces.append(interaction_surface(groups, m, k, l, part))
    table = effects_table(curves, surfaces, names)
    table.to_csv(out / "effects.csv", index=False, float_format="%.17g")
    higher = [{
        "signs": list(g.pattern.signs),
        "degree": g.degree,
        "variables": [names[k] for k in g.pattern.variables],
        "l1_mass": g.l1_mass(),
        "n_rules": len(g.rules),
        "gamma": None if model is None else model.gamma.get(g.pattern, 0.0),
    } for g in groups if g.degree >= 3]
    manifest = {
        "schema_version": 1,
        "kind": "effects",
        "table": "effects.csv",
        "columns": list(table.columns),
        "p": p,
        "variables": [names[k] for k in variables],
        "pairs": [[names[k], names[l]] for k, l in pairs],
        "sources": ["forest"] + (["garrote"] if model is not None else []),
        "zero_main_effects": [
            {"variable": names[c.variable], "source": c.source} for c in curves
            if c.part == "combined" and c.is_zero],
        "zero_interactions": [
            {"pair": [names[s.variables[0]], names[s.variables[1]]], "source": s.source}
            for s in surfaces if s.part == "combined" and s.is_zero],
        "higher_degree_groups": higher,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out
