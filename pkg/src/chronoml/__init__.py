"""Automated time-series forecasting.

Searches a templated pipeline space (statistical, reduced-regression and
neural templates) with prior-weighted Bayesian optimization, evaluates
candidates on reverse-expanding windows with successive halving,
warm-starts from earlier runs on similar datasets, and returns a greedy
ensemble of refitted pipelines.
"""
from .config_space import ConfigSpace, Configuration, default_space
from .data import PanelDataset, TimeSeriesRecord, from_arrays, load_dataset, temporal_holdout
from .engine import (
    FULL,
    TEMPLATES_MF,
    TEMPLATES_ONLY,
    TEMPLATES_WS,
    AutoForecaster,
    OptimizationResult,
    RunConfig,
    build_priors,
    optimize,
)
from .ensemble import EnsembleModel, ensemble_select
from .metalearn import MetaKnowledgeBase, build_prior
from .metrics import LossKind, mase, panel_loss, rmse, smape

__version__ = "0.1.0"

__all__ = [
    "AutoForecaster",
    "ConfigSpace",
    "Configuration",
    "EnsembleModel",
    "FULL",
    "LossKind",
    "MetaKnowledgeBase",
    "OptimizationResult",
    "PanelDataset",
    "RunConfig",
    "TEMPLATES_MF",
    "TEMPLATES_ONLY",
    "TEMPLATES_WS",
    "TimeSeriesRecord",
    "build_prior",
    "build_priors",
    "default_space",
    "ensemble_select",
    "from_arrays",
    "load_dataset",
    "mase",
    "optimize",
    "panel_loss",
    "rmse",
    "smape",
    "temporal_holdout",
]
