"""Forecasting models used as the final step of pipeline templates."""
from .autoregressive import AutoRegressive
from .base import LocalForecaster, PerSeriesForecaster
from .mlp import MLPNetwork, MLPRegressor, mlp_train_step
from .naive import DriftForecaster, NaiveForecaster, SeasonalNaiveForecaster
from .regression import BaggedTreesRegressor, ReducedForecaster, RidgeRegressor
from .smoothing import HoltLinear, HoltWinters, SimpleExpSmoothing

__all__ = [
    "AutoRegressive",
    "BaggedTreesRegressor",
    "DriftForecaster",
    "HoltLinear",
    "HoltWinters",
    "LocalForecaster",
    "MLPNetwork",
    "MLPRegressor",
    "NaiveForecaster",
    "PerSeriesForecaster",
    "ReducedForecaster",
    "RidgeRegressor",
    "SeasonalNaiveForecaster",
    "SimpleExpSmoothing",
    "mlp_train_step",
]
