"""Preprocessing steps used inside pipeline templates.

Every transform follows the same protocol: ``fit(dataset)`` learns
per-series state from training data only, ``transform(dataset)`` returns a
new :class:`~chronoml.data.PanelDataset` and ``inverse_forecast(forecasts)``
maps forecasts for the ``H`` steps after the fitted data back to the
original scale. Invertible transforms also provide ``inverse_transform``.
"""
from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_is_fitted, check_positive_int
from .data import CATEGORICAL, NUMERIC
from .exceptions import DataError, InsufficientLengthError

IMPUTE_STRATEGIES = ("forward_fill", "mean", "zero")
SCALE_STRATEGIES = ("standard", "minmax", "none")
UNKNOWN_CODE = -1.0


class SeriesTransform(BaseEstimator):
    """Base class: stores one state entry per series in ``states_``."""

    invertible = False

    def fit(self, dataset):
        self.states_ = [self._fit_series(s, dataset) for s in dataset.series]
        self.lengths_ = [s.length for s in dataset.series]
        return self

    def transform(self, dataset):
        check_is_fitted(self, "states_")
        self._check_aligned(dataset)
        series = [
            self._transform_series(s, st, dataset)
            for s, st in zip(dataset.series, self.states_)
        ]
        return dataset.with_series(series, **self._schema_changes(dataset))

    def fit_transform(self, dataset):
        return self.fit(dataset).transform(dataset)

    def inverse_transform(self, dataset):
        check_is_fitted(self, "states_")
        self._check_aligned(dataset)
        series = []
        for s, st in zip(dataset.series, self.states_):
            t = np.arange(s.length)
            series.append(replace(s, targets=self._inverse(s.targets, t, st)))
        return dataset.with_series(series)

    def inverse_forecast(self, forecasts):
        """Undo the transform on forecasts that continue the fitted series."""
        check_is_fitted(self, "states_")
        out = []
        for fc, st, T in zip(forecasts, self.states_, self.lengths_):
            fc = np.asarray(fc, dtype=float)
            t = np.arange(T, T + fc.shape[0])
            out.append(self._inverse(fc, t, st))
        return out

    def _check_aligned(self, dataset):
        if len(dataset.series) != len(self.states_):
            raise DataError(
                f"{type(self).__name__} was fitted on {len(self.states_)} series, "
                f"got {len(dataset.series)}"
            )

    def _schema_changes(self, dataset):
        return {}

    def _inverse(self, values, t, state):
        return values

    def _fit_series(self, series, dataset):
        raise NotImplementedError

    def _transform_series(self, series, state, dataset):
        raise NotImplementedError


def _ffill(values):
    """Forward fill along axis 0; leading gaps take the first observed value."""
    out = np.array(values, dtype=float, copy=True)
    for k in range(out.shape[1]):
        col = out[:, k]
        mask = np.isfinite(col)
        if not mask.any():
            return None
        idx = np.where(mask, np.arange(len(col)), 0)
        np.maximum.accumulate(idx, out=idx)
        filled = col[idx]
        first = col[np.argmax(mask)]
        filled[: np.argmax(mask)] = first
        out[:, k] = filled
    return out


class Imputer(SeriesTransform):
    """Fill missing targets and numeric features.

    Parameters
    ----------
    strategy : {"forward_fill", "mean", "zero"}
    """

    def __init__(self, strategy="forward_fill"):
        self.strategy = strategy

    def _fit_series(self, series, dataset):
        if self.strategy not in IMPUTE_STRATEGIES:
            raise ValueError(f"unknown imputation strategy {self.strategy!r}")
        y = series.targets
        if self.strategy != "zero" and not np.isfinite(y).any(axis=0).all():
            raise DataError(
                f"series {series.series_id!r} has no observed values to impute from"
            )
        state = {"mean": np.nanmean(y, axis=0) if self.strategy == "mean" else None}
        feats = {}
        for name, kind in dataset.feature_kinds.items():
            if kind != NUMERIC:
                continue
            col = np.asarray(series.past_features[name], dtype=float)
            obs = col[np.isfinite(col)]
            feats[name] = {
                "mean": float(obs.mean()) if obs.size else 0.0,
                "last": float(obs[-1]) if obs.size else 0.0,
            }
        state["features"] = feats
        return state

    def _fill(self, values, mean):
        values = np.asarray(values, dtype=float)
        if np.isfinite(values).all():
            return values
        if self.strategy == "zero":
            return np.where(np.isfinite(values), values, 0.0)
        if self.strategy == "mean":
            return np.where(np.isfinite(values), values, mean)
        filled = _ffill(values)
        if filled is None:
            raise DataError("cannot forward-fill an all-missing column")
        return filled

    def _transform_series(self, series, state, dataset):
        targets = self._fill(series.targets, state["mean"])
        past, future = series.past_features, series.future_features
        if state["features"]:
            past = dict(past)
            for name, fs in state["features"].items():
                col = np.asarray(past[name], dtype=float)[:, None]
                if np.isfinite(col).any():
                    past[name] = self._fill(col, fs["mean"])[:, 0]
                else:
                    past[name] = np.zeros(len(col))
            if future is not None:
                future = dict(future)
                for name in future:
                    if name not in state["features"]:
                        continue
                    col = np.asarray(future[name], dtype=float)
                    fill = 0.0 if self.strategy == "zero" else (
                        state["features"][name]["mean"] if self.strategy == "mean"
                        else state["features"][name]["last"])
                    future[name] = np.where(np.isfinite(col), col, fill)
        return replace(series, targets=targets, past_features=past, future_features=future)


class Scaler(SeriesTransform):
    """Per-series, per-dimension scaling of the targets.

    ``standard`` uses the population standard deviation; a constant series
    keeps scale 1.
    """

    invertible = True

    def __init__(self, strategy="standard"):
        self.strategy = strategy

    def _fit_series(self, series, dataset):
        if self.strategy not in SCALE_STRATEGIES:
            raise ValueError(f"unknown scaling strategy {self.strategy!r}")
        y = series.targets
        d = y.shape[1]
        if self.strategy == "none" or not np.isfinite(y).any():
            return np.zeros(d), np.ones(d)
        if self.strategy == "standard":
            loc = np.nanmean(y, axis=0)
            scale = np.nanstd(y, axis=0)
        else:
            loc = np.nanmin(y, axis=0)
            scale = np.nanmax(y, axis=0) - loc
        scale = np.where(scale > 0, scale, 1.0)
        return loc, scale

    def _transform_series(self, series, state, dataset):
        loc, scale = state
        return replace(series, targets=(series.targets - loc) / scale)

    def _inverse(self, values, t, state):
        loc, scale = state
        return values * scale + loc


class Detrender(SeriesTransform):
    """Remove a least-squares polynomial trend of degree 0 (mean) or 1 (line)."""

    invertible = True

    def __init__(self, degree=1):
        self.degree = degree

    def _fit_series(self, series, dataset):
        if self.degree not in (0, 1):
            raise ValueError(f"degree must be 0 or 1, got {self.degree!r}")
        y = series.targets
        t = np.arange(series.length, dtype=float)
        coefs = []
        for k in range(y.shape[1]):
            mask = np.isfinite(y[:, k])
            if mask.sum() <= self.degree:
                coefs.append(np.zeros(self.degree + 1))
                continue
            if self.degree == 0:
                coefs.append(np.array([y[mask, k].mean()]))
            else:
                coefs.append(np.polyfit(t[mask], y[mask, k], 1)[::-1])
        return np.array(coefs)

    @staticmethod
    def _trend(coefs, t):
        t = np.asarray(t, dtype=float)
        powers = np.vander(t, coefs.shape[1], increasing=True)
        return powers @ coefs.T

    def _transform_series(self, series, state, dataset):
        trend = self._trend(state, np.arange(series.length))
        return replace(series, targets=series.targets - trend)

    def _inverse(self, values, t, state):
        return values + self._trend(state, t)


class Deseasonalizer(SeriesTransform):
    """Subtract additive seasonal indices of period ``m``.

    ``m=None`` takes the dataset's seasonal period.
    """

    invertible = True

    def __init__(self, m=None):
        self.m = m

    def _fit_series(self, series, dataset):
        m = check_positive_int(self.m if self.m is not None else dataset.seasonal_period, "m")
        y = series.targets
        phase = np.arange(series.length) % m
        indices = np.zeros((m, y.shape[1]))
        if m > 1:
            centre = np.nanmean(y, axis=0)
            for p in range(m):
                block = y[phase == p]
                if block.size and np.isfinite(block).any():
                    indices[p] = np.nanmean(block, axis=0) - centre
            indices = np.nan_to_num(indices)
        return indices

    def _seasonal(self, indices, t):
        return indices[np.asarray(t) % indices.shape[0]]

    def _transform_series(self, series, state, dataset):
        return replace(
            series, targets=series.targets - self._seasonal(state, np.arange(series.length))
        )

    def _inverse(self, values, t, state):
        return values + self._seasonal(state, t)


class OrdinalEncoder(SeriesTransform):
    """Encode categorical features as integer codes learned on training data.

    Categories unseen during fit, and missing categories, map to ``-1``.
    """

    def fit(self, dataset):
        cats = {}
        for name, kind in dataset.feature_kinds.items():
            if kind != CATEGORICAL:
                continue
            seen = set()
            for s in dataset.series:
                seen.update(v for v in s.past_features[name] if v is not None)
            cats[name] = {c: float(k) for k, c in enumerate(sorted(seen, key=str))}
        self.categories_ = cats
        return super().fit(dataset)

    def _fit_series(self, series, dataset):
        return None

    def _encode(self, name, values):
        mapping = self.categories_[name]
        return np.array([mapping.get(v, UNKNOWN_CODE) for v in values], dtype=float)

    def _transform_series(self, series, state, dataset):
        if not self.categories_:
            return series
        past = dict(series.past_features)
        for name in self.categories_:
            past[name] = self._encode(name, past[name])
        future = series.future_features
        if future is not None:
            future = dict(future)
            for name in self.categories_:
                if name in future:
                    future[name] = self._encode(name, future[name])
        return replace(series, past_features=past, future_features=future)

    def _schema_changes(self, dataset):
        kinds = {k: (NUMERIC if k in self.categories_ else v)
                 for k, v in dataset.feature_kinds.items()}
        return {"feature_kinds": kinds}


def drop_categorical(dataset):
    """Remove categorical feature columns (used when no encoder is active)."""
    keep = [k for k, v in dataset.feature_kinds.items() if v == NUMERIC]
    if len(keep) == len(dataset.feature_kinds):
        return dataset
    series = []
    for s in dataset.series:
        past = {k: s.past_features[k] for k in keep} or None
        fut = None
        if s.future_features is not None:
            fut = {k: v for k, v in s.future_features.items() if k in keep} or None
        series.append(replace(s, past_features=past, future_features=fut))
    return dataset.with_series(
        series,
        feature_kinds={k: NUMERIC for k in keep},
        future_known=tuple(k for k in dataset.future_known if k in keep),
    )


# -- windowed tabular reduction ----------------------------------------------


def window_reduce(targets, w, exog=None):
    """Turn a univariate series into a lag design matrix.

    Row ``t`` (for ``t = w .. T-1``) holds ``[y[t-w], ..., y[t-1]]`` followed
    by the exogenous values at ``t``; its target is ``y[t]``.

    Parameters
    ----------
    targets : array of shape (T,)
    w : int
        Window length; must be smaller than ``T``.
    exog : array of shape (T, e), optional

    Returns
    -------
    X : ndarray of shape (T - w, w + e)
    y : ndarray of shape (T - w,)
    """
    y = np.asarray(targets, dtype=float).ravel()
    w = check_positive_int(w, "w")
    T = y.size
    if T <= w:
        raise InsufficientLengthError(f"series of length {T} is too short for window {w}")
    lags = np.lib.stride_tricks.sliding_window_view(y, w)[:-1]
    X = lags
    if exog is not None:
        exog = np.asarray(exog, dtype=float).reshape(T, -1)
        X = np.hstack([lags, exog[w:]])
    return np.ascontiguousarray(X), y[w:].copy()


class WindowReducer(BaseEstimator):
    """Build a pooled design matrix from every series of a panel.

    Lags come from each target dimension separately; exogenous columns are
    the future-known numeric features at the target time step.
    """

    def __init__(self, window_length=12):
        self.window_length = window_length

    def fit(self, dataset):
        for s in dataset.series:
            if s.length <= self.window_length:
                raise InsufficientLengthError(
                    f"series {s.series_id!r} (length {s.length}) is too short for "
                    f"window {self.window_length}",
                    series_id=s.series_id,
                )
        self.exog_names_ = [
            k for k in dataset.future_known if dataset.feature_kinds[k] == NUMERIC
        ]
        return self

    def exog(self, series):
        if not self.exog_names_:
            return None
        return np.column_stack(
            [np.asarray(series.past_features[k], dtype=float) for k in self.exog_names_]
        )

    def future_exog(self, series, horizon):
        if not self.exog_names_:
            return None
        if series.future_features is None:
            raise DataError(
                f"series {series.series_id!r} needs future values of "
                f"{self.exog_names_} to forecast"
            )
        cols = [np.asarray(series.future_features[k], dtype=float) for k in self.exog_names_]
        out = np.column_stack(cols)
        if out.shape[0] < horizon:
            raise DataError(f"future features cover {out.shape[0]} < {horizon} steps")
        return out[:horizon]

    def design(self, dataset, dim):
        Xs, ys = [], []
        for s in dataset.series:
            X, y = window_reduce(s.targets[:, dim], self.window_length, self.exog(s))
            Xs.append(X)
            ys.append(y)
        return np.vstack(Xs), np.concatenate(ys)
