"""Base classes for forecasters.

Local forecasters (``fit(y)`` on one univariate series, ``predict(h)``)
are lifted to panels by :class:`PerSeriesForecaster`, which fits one clone
per series and target dimension.
"""
import numpy as np
from sklearn.base import BaseEstimator, clone

from .._validation import as_deadline, check_1d, check_finite_forecast, check_is_fitted, check_positive_int
from ..exceptions import DataError


class LocalForecaster(BaseEstimator):
    """A model of a single univariate series."""

    min_length = 1

    def fit(self, y, deadline=None):
        y = self._validate_series(y)
        self._fit(y, as_deadline(deadline))
        self.n_obs_ = y.size
        return self

    def predict(self, h):
        check_is_fitted(self, "n_obs_")
        h = check_positive_int(h, "h")
        return check_finite_forecast(self._predict(h), type(self).__name__)

    def _validate_series(self, y):
        try:
            y = check_1d(y, "y")
        except ValueError as exc:
            raise DataError(f"{type(self).__name__}: {exc}") from None
        need = self.required_length()
        if y.size < need:
            from ..exceptions import InsufficientLengthError

            raise InsufficientLengthError(
                f"{type(self).__name__} needs at least {need} observations, got {y.size}"
            )
        return y

    def required_length(self):
        return self.min_length

    def _fit(self, y, deadline):
        raise NotImplementedError

    def _predict(self, h):
        raise NotImplementedError


class PerSeriesForecaster(BaseEstimator):
    """Fit an independent copy of ``estimator`` to every series and dimension."""

    def __init__(self, estimator):
        self.estimator = estimator

    def fit(self, dataset, deadline=None):
        deadline = as_deadline(deadline)
        models = []
        for s in dataset.series:
            row = []
            for k in range(s.n_dims):
                deadline.check()
                row.append(clone(self.estimator).fit(s.targets[:, k], deadline=deadline))
            models.append(row)
        self.models_ = models
        return self

    def predict(self, dataset, horizon=None, deadline=None):
        check_is_fitted(self, "models_")
        horizon = dataset.horizon if horizon is None else horizon
        if len(dataset.series) != len(self.models_):
            raise DataError("dataset does not match the fitted panel")
        return [
            np.column_stack([m.predict(horizon) for m in row]) for row in self.models_
        ]
