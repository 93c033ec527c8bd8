"""Sparse, interpretable regression by garrote selection of the functional
rule groups of a random forest."""

from .data import Column, DataError, Dataset, SplitSpec, friedman1, load_csv, split
from .forest import Forest, ForestParams, fit_forest, predict_forest, tune_mtry
from .ruleset import (
    Box,
    GroupFit,
    InteractionPattern,
    RuleSet,
    WeightedRule,
    decompose_intervals,
    eval_group,
    extract_rules,
    group_rules,
    pattern_of,
)
from .garrote import (
    GarroteModel,
    GroupDesign,
    SolverPath,
    build_design,
    predict_garrote,
    selected_variables,
    solve_garrote,
    solve_garrote_cv,
)

__version__ = "0.1.0"
