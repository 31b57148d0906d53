"""Small input-validation helpers shared by estimators."""
import numbers
import time

import numpy as np

from .exceptions import NotFittedError, TrialTimeout


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_unit_interval(value, name, low_open=True, high_open=False):
    value = float(value)
    lo_ok = value > 0.0 if low_open else value >= 0.0
    hi_ok = value < 1.0 if high_open else value <= 1.0
    if not (lo_ok and hi_ok):
        raise ValueError(f"{name} out of range: {value}")
    return value


def check_1d(values, name="values", allow_nan=False):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not allow_nan and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains missing or non-finite values")
    return arr


def check_same_length(a, b, names=("actual", "forecast")):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {names[0]}={len(a)}, {names[1]}={len(b)}")


def check_is_fitted(estimator, attributes):
    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(getattr(estimator, attr, None) is not None for attr in attributes):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call 'fit' first"
        )


def check_finite_forecast(values, who="forecaster"):
    from .exceptions import NumericalFailure

    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"{who} produced non-finite forecasts")
    return arr


class Deadline:
    """Cooperative wall-clock deadline.

    Long-running loops call :meth:`check` periodically; it raises
    :class:`TrialTimeout` once the deadline has passed. ``Deadline(None)``
    never expires.
    """

    __slots__ = ("at",)

    def __init__(self, at=None):
        self.at = at

    @classmethod
    def after(cls, seconds):
        return cls(None if seconds is None else time.monotonic() + seconds)

    def remaining(self):
        if self.at is None:
            return float("inf")
        return self.at - time.monotonic()

    def expired(self):
        return self.at is not None and time.monotonic() >= self.at

    def check(self):
        if self.expired():
            raise TrialTimeout("deadline exceeded")

    def earliest(self, other):
        if other is None or other.at is None:
            return self
        if self.at is None:
            return other
        return self if self.at <= other.at else other


NO_DEADLINE = Deadline(None)


def as_deadline(deadline):
    return NO_DEADLINE if deadline is None else deadline
