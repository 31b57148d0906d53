"""Forecast accuracy measures: MASE (primary), sMAPE and RMSE."""
import enum
import warnings

import numpy as np

from ._validation import check_1d, check_positive_int, check_same_length
from .exceptions import UndefinedScaleError


class LossKind(str, enum.Enum):
    MASE = "mase"
    SMAPE = "smape"
    RMSE = "rmse"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown metric {value!r}; expected one of "
                             f"{[k.value for k in cls]}") from None


def mase_scale(insample, m):
    """In-sample mean absolute error of the lag-``m`` seasonal naive forecast."""
    insample = check_1d(insample, "insample", allow_nan=True)
    m = check_positive_int(m, "m")
    if insample.size <= m:
        raise UndefinedScaleError(
            f"insample needs more than m={m} observations, got {insample.size}"
        )
    diffs = np.abs(insample[m:] - insample[:-m])
    diffs = diffs[np.isfinite(diffs)]
    if diffs.size == 0:
        raise UndefinedScaleError("no complete lag pairs in the insample data")
    scale = float(np.mean(diffs))
    if not scale > 0.0:
        raise UndefinedScaleError("seasonal naive in-sample error is zero")
    return scale


def mase(actual, forecast, insample, m=1):
    """Mean absolute scaled error.

    ``mean(|actual - forecast|)`` divided by the mean absolute lag-``m``
    difference of ``insample``.
    """
    actual = check_1d(actual, "actual")
    forecast = check_1d(forecast, "forecast")
    check_same_length(actual, forecast)
    scale = mase_scale(insample, m)
    return float(np.mean(np.abs(actual - forecast)) / scale)


def smape(actual, forecast):
    """Symmetric MAPE on the [0, 2] scale; a 0/0 step contributes 0."""
    actual = check_1d(actual, "actual")
    forecast = check_1d(forecast, "forecast")
    check_same_length(actual, forecast)
    denom = np.abs(actual) + np.abs(forecast)
    num = 2.0 * np.abs(actual - forecast)
    ratio = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    return float(np.mean(ratio))


def rmse(actual, forecast):
    actual = check_1d(actual, "actual")
    forecast = check_1d(forecast, "forecast")
    check_same_length(actual, forecast)
    return float(np.sqrt(np.mean((actual - forecast) ** 2)))


def series_loss(kind, actual, forecast, insample, m):
    """Loss of one series, averaged over target dimensions.

    ``actual``/``forecast`` have shape (H, d), ``insample`` (T, d). Steps
    whose actual value is missing are ignored.
    """
    kind = LossKind.parse(kind)
    actual = np.asarray(actual, dtype=float).reshape(len(actual), -1)
    forecast = np.asarray(forecast, dtype=float).reshape(len(forecast), -1)
    insample = np.asarray(insample, dtype=float).reshape(len(insample), -1)
    if actual.shape != forecast.shape:
        raise ValueError(f"shape mismatch: actual {actual.shape}, forecast {forecast.shape}")
    losses = []
    for k in range(actual.shape[1]):
        mask = np.isfinite(actual[:, k])
        if not mask.any():
            continue
        a, f = actual[mask, k], forecast[mask, k]
        if kind is LossKind.MASE:
            losses.append(mase(a, f, insample[:, k], m))
        elif kind is LossKind.SMAPE:
            losses.append(smape(a, f))
        else:
            losses.append(rmse(a, f))
    if not losses:
        raise UndefinedScaleError("no observed actual values to score")
    return float(np.mean(losses))


def panel_losses(kind, dataset, forecasts):
    """Per-series losses; ``None`` marks a series whose scale is undefined.

    ``dataset`` holds the actual values as the final ``H`` observations of
    each series, where ``H`` is the forecast length; everything before them
    is the in-sample history.
    """
    if len(forecasts) != len(dataset.series):
        raise ValueError(
            f"expected {len(dataset.series)} forecasts, got {len(forecasts)}"
        )
    out = []
    for s, fc in zip(dataset.series, forecasts):
        fc = np.asarray(fc, dtype=float).reshape(len(fc), -1)
        h = fc.shape[0]
        if s.length <= h:
            raise ValueError(f"series {s.series_id!r} too short for horizon {h}")
        actual, insample = s.targets[-h:], s.targets[:-h]
        try:
            out.append(series_loss(kind, actual, fc, insample, dataset.seasonal_period))
        except UndefinedScaleError:
            out.append(None)
    return out


def panel_loss(kind, dataset, forecasts):
    """Unweighted mean of per-series losses.

    Series with an undefined MASE scale are skipped (with a warning); an
    error is raised only when every series is skipped.
    """
    losses = panel_losses(kind, dataset, forecasts)
    valid = [l for l in losses if l is not None]
    if not valid:
        raise UndefinedScaleError("loss is undefined for every series")
    skipped = len(losses) - len(valid)
    if skipped:
        warnings.warn(f"{skipped} series skipped: undefined loss scale", RuntimeWarning)
    return float(np.mean(valid))
