"""Benchmark forecasters: naive, seasonal naive and drift."""
import numpy as np

from .._validation import check_positive_int
from .base import LocalForecaster


class NaiveForecaster(LocalForecaster):
    """Repeat the last observation."""

    def _fit(self, y, deadline):
        self.last_ = float(y[-1])

    def _predict(self, h):
        return np.full(h, self.last_)


class SeasonalNaiveForecaster(LocalForecaster):
    """Repeat the last observed season of length ``m``."""

    def __init__(self, m=1):
        self.m = m

    def required_length(self):
        return check_positive_int(self.m, "m")

    def _fit(self, y, deadline):
        self.season_ = y[-self.m:].copy()

    def _predict(self, h):
        reps = -(-h // self.m)
        return np.tile(self.season_, reps)[:h]


class DriftForecaster(LocalForecaster):
    """Extrapolate the line through the first and last observations."""

    min_length = 2

    def _fit(self, y, deadline):
        self.last_ = float(y[-1])
        self.slope_ = float(y[-1] - y[0]) / (y.size - 1)

    def _predict(self, h):
        return self.last_ + self.slope_ * np.arange(1, h + 1)
