"""Gradient tree-boosted Tweedie compound Poisson regression."""
from .boost import BoostConfig, BoostedModel, CVResult, cv_tune, fit, init_intercept, leaf_eta
from .data import Column, Dataset, ingest_csv
from .kernels import BACKEND
from .tree import RegressionTree, SplitRule, fit_tree, route
from .tweedie import (
    CompoundPoissonParams,
    TweedieParams,
    WeightedObservation,
    log_density,
    to_compound_poisson,
)

__version__ = "0.1.0"
