"""Tabular regressors and the recursive window-reduction forecaster."""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.tree import DecisionTreeRegressor

from .._validation import as_deadline, check_finite_forecast, check_is_fitted
from ..transforms import WindowReducer
from .autoregressive import solve_least_squares


class RidgeRegressor(RegressorMixin, BaseEstimator):
    """L2-penalised least squares with an unpenalised intercept."""

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y, deadline=None):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        self.intercept_, self.coef_ = solve_least_squares(X, y, ridge=float(self.alpha))
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_


class BaggedTreesRegressor(RegressorMixin, BaseEstimator):
    """Bootstrap-aggregated CART regression trees (variance-reduction splits)."""

    def __init__(self, n_trees=10, max_depth=None, random_state=None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.random_state = random_state

    def fit(self, X, y, deadline=None):
        deadline = as_deadline(deadline)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.random_state)
        n = X.shape[0]
        trees = []
        for _ in range(int(self.n_trees)):
            deadline.check()
            idx = rng.integers(0, n, size=n)
            tree = DecisionTreeRegressor(
                max_depth=self.max_depth, random_state=int(rng.integers(2**31))
            )
            trees.append(tree.fit(X[idx], y[idx]))
        self.trees_ = trees
        return self

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict(X) for t in self.trees_], axis=0)


class ReducedForecaster(BaseEstimator):
    """Forecast a panel with a tabular regressor over lag windows.

    One regressor per target dimension is fitted on the pooled rows of all
    series; multi-step forecasts feed predictions back recursively.
    """

    def __init__(self, regressor, window_length=12):
        self.regressor = regressor
        self.window_length = window_length

    def fit(self, dataset, deadline=None):
        deadline = as_deadline(deadline)
        self.reducer_ = WindowReducer(self.window_length).fit(dataset)
        models = []
        for dim in range(dataset.n_dims):
            X, y = self.reducer_.design(dataset, dim)
            deadline.check()
            models.append(clone(self.regressor).fit(X, y, deadline=deadline))
        self.models_ = models
        return self

    def predict(self, dataset, horizon=None, deadline=None):
        check_is_fitted(self, "models_")
        deadline = as_deadline(deadline)
        horizon = dataset.horizon if horizon is None else horizon
        w = self.window_length
        exog = [self.reducer_.future_exog(s, horizon) for s in dataset.series]
        out = [np.empty((horizon, dataset.n_dims)) for _ in dataset.series]
        for dim, model in enumerate(self.models_):
            windows = np.array([s.targets[-w:, dim] for s in dataset.series])
            for step in range(horizon):
                deadline.check()
                X = windows
                if exog[0] is not None:
                    X = np.hstack([windows, np.array([e[step] for e in exog])])
                pred = np.asarray(model.predict(X), dtype=float)
                for i, value in enumerate(pred):
                    out[i][step, dim] = value
                windows = np.hstack([windows[:, 1:], pred[:, None]])
        return [check_finite_forecast(o, type(self.regressor).__name__) for o in out]
