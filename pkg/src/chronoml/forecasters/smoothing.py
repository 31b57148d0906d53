"""Additive exponential smoothing: SES, Holt (optionally damped), Holt-Winters.

Smoothing parameters left as ``None`` are estimated by bounded
Nelder-Mead on the in-sample one-step-ahead sum of squared errors.
"""
import numba
import numpy as np
from scipy.optimize import minimize

from .._validation import check_positive_int
from ..exceptions import NumericalFailure
from .base import LocalForecaster

PARAM_BOUNDS = {
    "alpha": (1e-4, 1.0 - 1e-4),
    "beta": (1e-4, 1.0 - 1e-4),
    "gamma": (1e-4, 1.0 - 1e-4),
    "phi": (0.8, 0.98),
}
INITIAL_GUESS = {"alpha": 0.3, "beta": 0.1, "gamma": 0.1, "phi": 0.9}
XTOL = 1e-8
MAX_ITER = 500


@numba.njit(cache=True)
def _smooth(y, start, level, trend, season, alpha, beta, gamma, phi):
    """Run the additive error-correction recursion over ``y[start:]``.

    ``season`` holds the seasonal states of times ``start-m .. start-1`` and
    is updated in place; non-seasonal models pass a single zero state with
    ``gamma = 0``. Returns the one-step SSE, final level and final trend.
    """
    m = season.shape[0]
    sse = 0.0
    for t in range(start, y.shape[0]):
        p = (t - start) % m
        s = season[p]
        err = y[t] - (level + phi * trend + s)
        sse += err * err
        new_level = alpha * (y[t] - s) + (1.0 - alpha) * (level + phi * trend)
        trend = beta * (new_level - level) + (1.0 - beta) * phi * trend
        season[p] = s + gamma * err
        level = new_level
    return sse, level, trend


class _ExponentialSmoothing(LocalForecaster):
    """Shared fitting machinery; subclasses define the model structure."""

    def _param_names(self):
        """Names of the smoothing parameters used by this structure."""
        raise NotImplementedError

    def _structure(self):
        """Return (use_trend, damped, m)."""
        raise NotImplementedError

    def _initial_states(self, y, m, use_trend):
        raise NotImplementedError

    def _run(self, y, params):
        use_trend, damped, m = self._structure()
        start, level, trend, season = self._initial_states(y, m, use_trend)
        season = season.copy()
        beta = params["beta"] if use_trend else 0.0
        gamma = params["gamma"] if m > 1 else 0.0
        phi = params["phi"] if (use_trend and damped) else 1.0
        sse, level, trend = _smooth(y, start, level, trend, season, params["alpha"], beta, gamma, phi)
        return sse, level, trend, season, start, phi

    def _fit(self, y, deadline):
        fixed = {name: getattr(self, name) for name in self._param_names()}
        free = [n for n in fixed if fixed[n] is None]
        if free:
            bounds = [PARAM_BOUNDS[n] for n in free]
            x0 = np.array([INITIAL_GUESS[n] for n in free])

            def objective(x):
                deadline.check()
                params = dict(fixed)
                params.update(zip(free, x))
                sse = self._run(y, params)[0]
                return sse if np.isfinite(sse) else 1e300

            res = minimize(
                objective,
                x0,
                method="Nelder-Mead",
                bounds=bounds,
                options={"xatol": XTOL, "fatol": XTOL, "maxiter": MAX_ITER},
            )
            fixed.update(zip(free, np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])))
        self.params_ = {k: float(v) for k, v in fixed.items()}
        sse, level, trend, season, start, phi = self._run(y, self.params_)
        if not (np.isfinite(sse) and np.isfinite(level) and np.isfinite(trend)):
            raise NumericalFailure(f"{type(self).__name__} diverged")
        self.level_, self.trend_, self.phi_ = float(level), float(trend), float(phi)
        self.season_ = season
        self.offset_ = (y.size - start) % season.shape[0]
        self.sse_ = float(sse)

    def _predict(self, h):
        steps = np.arange(1, h + 1)
        if self.phi_ == 1.0:
            damp = steps.astype(float)
        else:
            damp = np.cumsum(self.phi_ ** steps)
        m = self.season_.shape[0]
        seasonal = self.season_[(self.offset_ + steps - 1) % m]
        return self.level_ + damp * self.trend_ + seasonal


class SimpleExpSmoothing(_ExponentialSmoothing):
    """Simple exponential smoothing; ``alpha=1`` reproduces the naive forecast."""

    def __init__(self, alpha=None):
        self.alpha = alpha

    def _param_names(self):
        return ("alpha",)

    def _structure(self):
        return False, False, 1

    def _initial_states(self, y, m, use_trend):
        return 1, float(y[0]), 0.0, np.zeros(1)


class HoltLinear(_ExponentialSmoothing):
    """Holt's linear trend method, optionally damped.

    The trend starts at zero, so ``beta=0`` gives exactly the simple
    exponential smoothing forecast.
    """

    min_length = 2

    def __init__(self, alpha=None, beta=None, damped=False, phi=None):
        self.alpha = alpha
        self.beta = beta
        self.damped = damped
        self.phi = phi

    def _structure(self):
        return True, bool(self.damped), 1

    def _param_names(self):
        return ("alpha", "beta", "phi") if self.damped else ("alpha", "beta")

    def _initial_states(self, y, m, use_trend):
        return 1, float(y[0]), 0.0, np.zeros(1)


class HoltWinters(_ExponentialSmoothing):
    """Additive Holt-Winters with period ``m``.

    States are initialised from the first two seasons (requires
    ``T >= 2m``): the trend is the difference of their means divided by
    ``m`` and the seasonal states are deviations from that line.
    """

    def __init__(self, m=12, alpha=None, beta=None, gamma=None, trend=True, damped=False, phi=None):
        self.m = m
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.trend = trend
        self.damped = damped
        self.phi = phi

    def required_length(self):
        return 2 * check_positive_int(self.m, "m")

    def _structure(self):
        return bool(self.trend), bool(self.damped), int(self.m)

    def _param_names(self):
        names = ["alpha", "gamma"]
        if self.trend:
            names.insert(1, "beta")
            if self.damped:
                names.append("phi")
        return tuple(names)

    def _initial_states(self, y, m, use_trend):
        mean0 = y[:m].mean()
        slope = (y[m:2 * m].mean() - mean0) / m if use_trend else 0.0
        if not use_trend:
            season = y[:m] - mean0
            return m, float(mean0), 0.0, season
        offsets = np.arange(m) - (m - 1) / 2.0
        season = y[:m] - (mean0 + slope * offsets)
        level = mean0 + slope * (m - 1) / 2.0
        return m, float(level), float(slope), season
