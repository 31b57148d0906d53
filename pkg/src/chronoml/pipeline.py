"""Materialize configurations of the joint space into forecasting pipelines."""
from sklearn.base import BaseEstimator

from ._validation import as_deadline, check_is_fitted, check_positive_int
from .config_space import DNN, ML, STATISTICAL
from .forecasters import (
    AutoRegressive,
    BaggedTreesRegressor,
    DriftForecaster,
    HoltLinear,
    HoltWinters,
    MLPRegressor,
    NaiveForecaster,
    PerSeriesForecaster,
    ReducedForecaster,
    RidgeRegressor,
    SeasonalNaiveForecaster,
    SimpleExpSmoothing,
)
from .transforms import Deseasonalizer, Detrender, Imputer, OrdinalEncoder, Scaler, drop_categorical


class DropCategorical(BaseEstimator):
    """Stateless step removing categorical feature columns."""

    def fit(self, dataset):
        self.fitted_ = True
        return self

    def transform(self, dataset):
        return drop_categorical(dataset)

    def fit_transform(self, dataset):
        return self.fit(dataset).transform(dataset)

    def inverse_forecast(self, forecasts):
        return forecasts


class ForecastPipeline(BaseEstimator):
    """Chain of panel transforms followed by a panel forecaster.

    Forecasts are mapped back through the transforms in reverse order.

    Parameters
    ----------
    steps : list of transforms
    forecaster : estimator with ``fit(dataset, deadline)`` and
        ``predict(dataset, horizon, deadline)``
    """

    def __init__(self, steps, forecaster):
        self.steps = steps
        self.forecaster = forecaster

    def _apply(self, dataset, fit, deadline):
        for step in self.steps:
            deadline.check()
            dataset = step.fit_transform(dataset) if fit else step.transform(dataset)
        return dataset

    def fit(self, dataset, deadline=None):
        deadline = as_deadline(deadline)
        transformed = self._apply(dataset, True, deadline)
        self.forecaster.fit(transformed, deadline=deadline)
        self.n_series_ = len(dataset.series)
        return self

    def predict(self, dataset, horizon=None, deadline=None):
        """Forecast ``horizon`` steps past the end of ``dataset``.

        ``dataset`` must be the panel the pipeline was fitted on, optionally
        carrying future values of future-known features.
        """
        check_is_fitted(self, "n_series_")
        deadline = as_deadline(deadline)
        horizon = check_positive_int(dataset.horizon if horizon is None else horizon, "horizon")
        transformed = self._apply(dataset, False, deadline)
        forecasts = self.forecaster.predict(transformed, horizon=horizon, deadline=deadline)
        for step in reversed(self.steps):
            forecasts = step.inverse_forecast(forecasts)
        return forecasts


def _statistical_forecaster(config, m):
    name = config["stat.forecaster"]
    if name == "naive":
        return NaiveForecaster()
    if name == "seasonal_naive":
        return SeasonalNaiveForecaster(m=m)
    if name == "drift":
        return DriftForecaster()
    if name == "ses":
        return SimpleExpSmoothing()
    if name == "holt":
        return HoltLinear(damped=config["stat.holt_damped"])
    if name == "holt_winters":
        trend = config["stat.hw_trend"]
        return HoltWinters(m=m, trend=trend, damped=trend and config["stat.hw_damped"])
    if name == "ar":
        return AutoRegressive(p=config["stat.ar_p"])
    raise ValueError(f"unknown statistical forecaster {name!r}")


def build_pipeline(config, seasonal_period=1, seed=0):
    """Pipeline for ``config`` (a :class:`~chronoml.config_space.Configuration`)."""
    template = config["template"]
    m = max(int(seasonal_period), 1)
    if template == STATISTICAL:
        steps = []
        if config["stat.use_imputer"]:
            steps.append(Imputer(config["stat.imputer"]))
        if config["stat.use_detrender"]:
            steps.append(Detrender(degree=config["stat.detrender_degree"]))
        if config["stat.use_deseasonalizer"]:
            steps.append(Deseasonalizer(m=m))
        return ForecastPipeline(steps, PerSeriesForecaster(_statistical_forecaster(config, m)))
    if template == ML:
        steps = [Imputer(config["ml.imputer"])]
        steps.append(OrdinalEncoder() if config["ml.use_encoder"] else DropCategorical())
        if config["ml.use_scaler"]:
            steps.append(Scaler(config["ml.scaler"]))
        if config["ml.regressor"] == "ridge":
            reg = RidgeRegressor(alpha=config["ml.ridge_alpha"])
        else:
            reg = BaggedTreesRegressor(
                n_trees=config["ml.trees_n"],
                max_depth=config["ml.trees_max_depth"],
                random_state=seed,
            )
        return ForecastPipeline(steps, ReducedForecaster(reg, window_length=config["ml.window_length"]))
    if template == DNN:
        steps = [Imputer(config["dnn.imputer"]), DropCategorical(), Scaler(config["dnn.scaler"])]
        reg = MLPRegressor(
            hidden_size=config["dnn.hidden_size"],
            n_layers=config["dnn.n_layers"],
            learning_rate=config["dnn.learning_rate"],
            epochs=config["dnn.epochs"],
            batch_size=config["dnn.batch_size"],
            random_state=seed,
        )
        return ForecastPipeline(steps, ReducedForecaster(reg, window_length=config["dnn.window_length"]))
    raise ValueError(f"unknown template {template!r}")
