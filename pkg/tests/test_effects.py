import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treegarrote.effects import CATEGORIES, export_effects, interaction_surface, main_effect
from treegarrote.garrote import build_design, solve_garrote


@pytest.fixture(scope="module")
def model(small_data, small_groups):
    return solve_garrote(build_design(small_groups, small_data.X), small_data.y, 1.0)[0]


def _points(p, k, values, l=None, other=None):
    X = np.full((len(values), p), 0.5)
    X[:, k] = values
    if l is not None:
        X[:, l] = other
    return X


def test_main_effect_matches_groups(small_data, small_groups, model):
    p = small_data.p
    xs = np.linspace(-0.1, 1.1, 57)
    for k in range(3):
        deg1 = [g for g in small_groups if g.degree == 1 and g.pattern.signs[k]]
        X = _points(p, k, xs)
        for m in (None, model):
            scale = (lambda g: 1.0) if m is None else (lambda g: m.gamma.get(g.pattern, 0.0))
            want = sum((scale(g) * g(X) for g in deg1), np.zeros(xs.size))
            np.testing.assert_allclose(main_effect(small_groups, m, k)(xs), want, atol=1e-12)
            parts = main_effect(small_groups, m, k, 1)(xs) + main_effect(small_groups, m, k, -1)(xs)
            np.testing.assert_allclose(parts, want, atol=1e-12)


@given(x=st.floats(-0.2, 1.2), y=st.floats(-0.2, 1.2))
@settings(max_examples=50, deadline=None)
def test_surface_matches_groups(small_data, small_groups, x, y):
    k, l = 0, 1
    pair = [g for g in small_groups if g.degree == 2 and g.pattern.signs[k] and g.pattern.signs[l]]
    X = _points(small_data.p, k, [x], l, [y])
    want = sum(float(g(X)[0]) for g in pair)
    s = interaction_surface(small_groups, None, k, l)
    assert float(s(x, y)) == pytest.approx(want, abs=1e-12)
    total = sum(float(interaction_surface(small_groups, None, k, l, c)(x, y)) for c in CATEGORIES)
    assert total == pytest.approx(want, abs=1e-12)


def test_missing_effects_are_zero(small_groups):
    c = main_effect([g for g in small_groups if g.degree != 1], None, 0)
    assert c.is_zero and c(0.3) == 0.0
    assert interaction_surface(small_groups[:1], None, 0, 1).is_zero
    with pytest.raises(ValueError):
        interaction_surface(small_groups, None, 1, 1)
    with pytest.raises(ValueError):
        main_effect(small_groups, None, 0, part=2)


def test_export(tmp_path, small_data, small_groups, model):
    out = export_effects(small_groups, model, small_data.columns, tmp_path / "fx", pairs=[(0, 1)])
    table = pd.read_csv(out / "effects.csv", float_precision="round_trip")
    man = json.loads((out / "manifest.json").read_text())
    assert set(table["source"]) == {"forest", "garrote"}
    assert set(table["kind"]) <= {"main", "interaction"}
    assert man["pairs"] == [["x1", "x2"]]
    assert len(man["higher_degree_groups"]) == sum(g.degree >= 3 for g in small_groups)
    # the combined forest curve of x1 reproduces the in-memory one
    sub = table[(table.kind == "main") & (table.var1 == "x1") & (table.source == "forest") & (table.part == "combined")]
    c = main_effect(small_groups, None, 0)
    np.testing.assert_allclose(sub["value"].to_numpy(), c.values, rtol=0)
