"""Autoregressive model fitted by least squares."""
import numpy as np

from .._validation import check_positive_int
from ..exceptions import NumericalFailure
from ..transforms import window_reduce
from .base import LocalForecaster


def solve_least_squares(X, y, ridge=0.0):
    """Least-squares coefficients with an unpenalised intercept.

    A rank-deficient design is retried once with a small ridge penalty;
    a non-finite solution raises :class:`NumericalFailure`.

    Returns
    -------
    intercept : float
    coef : ndarray of shape (n_features,)
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc, yc = X - x_mean, y - y_mean
    p = X.shape[1]
    rank = np.linalg.matrix_rank(Xc) if ridge == 0.0 else p
    if ridge == 0.0 and rank < p:
        ridge = 1e-8 * max(float(np.trace(Xc.T @ Xc)), 1.0)
    if ridge > 0.0:
        A = np.vstack([Xc, np.sqrt(ridge) * np.eye(p)])
        b = np.concatenate([yc, np.zeros(p)])
    else:
        A, b = Xc, yc
    coef = np.linalg.lstsq(A, b, rcond=None)[0]
    if not np.all(np.isfinite(coef)):
        raise NumericalFailure("least-squares solution is not finite")
    return float(y_mean - x_mean @ coef), coef


class AutoRegressive(LocalForecaster):
    """AR(p) with intercept: ``y[t] = c + sum_k coef[k] * y[t-k]``.

    ``coef_[0]`` multiplies lag 1.
    """

    def __init__(self, p=1):
        self.p = p

    def required_length(self):
        return check_positive_int(self.p, "p") + 1

    def _fit(self, y, deadline):
        X, target = window_reduce(y, self.p)
        # window_reduce orders lags oldest first
        intercept, coef = solve_least_squares(X[:, ::-1], target)
        self.intercept_, self.coef_ = intercept, coef
        self.history_ = y[-self.p:][::-1].copy()

    def _predict(self, h):
        hist = list(self.history_)
        out = np.empty(h)
        for k in range(h):
            value = self.intercept_ + float(np.dot(self.coef_, hist[: self.p]))
            out[k] = value
            hist.insert(0, value)
        return out
