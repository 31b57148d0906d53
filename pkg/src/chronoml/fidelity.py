"""Reverse-expanding-window budgets and successive halving.

A budget ``b`` in ``(0, 1]`` keeps only the most recent observations of
each series; the window grows backwards in time as ``b`` increases and
covers the whole series at ``b = 1``. Series no longer than ``l_min``
are always used in full.
"""
import math
from dataclasses import dataclass

from ._validation import check_positive_int


@dataclass(frozen=True)
class BudgetSpec:
    """Budget range, halving rate ``eta`` and deactivation length ``l_min``."""

    b_min: float = 1.0 / 9.0
    b_max: float = 1.0
    eta: int = 3
    l_min: int = 500

    def __post_init__(self):
        if not 0.0 < self.b_min < self.b_max <= 1.0:
            raise ValueError(f"need 0 < b_min < b_max <= 1, got {self.b_min}, {self.b_max}")
        check_positive_int(self.eta, "eta", minimum=2)
        check_positive_int(self.l_min, "l_min")

    @property
    def n_rungs(self):
        # small tolerance so 1/9 * 3**2 == 1 counts as reaching b_max
        return int(math.floor(math.log(self.b_max / self.b_min, self.eta) + 1e-9)) + 1

    def budgets(self):
        return [min(self.b_min * self.eta ** j, self.b_max) for j in range(self.n_rungs)]


def window_length(b, T, l_min):
    """Number of trailing observations used at budget ``b``.

    Series with ``T <= l_min`` are never shortened. Otherwise the window is
    ``max(ceil(b * T), l_min)`` capped at ``T``.
    """
    if not 0.0 < b <= 1.0:
        raise ValueError(f"budget must lie in (0, 1], got {b}")
    T = check_positive_int(T, "T")
    if T <= l_min:
        return T
    # guard against float noise such as 0.3 * 10 = 3.0000000000000004
    n = math.ceil(round(b * T, 9))
    return min(max(n, l_min), T)


def truncate(dataset, b, l_min):
    """Keep the last ``window_length(b, T_i, l_min)`` observations of every series.

    Future features are untouched. At full length the input object is
    returned unchanged.
    """
    series = []
    changed = False
    for s in dataset.series:
        n = window_length(b, s.length, l_min)
        if n < s.length:
            changed = True
            series.append(s.slice(s.length - n))
        else:
            series.append(s)
    return dataset.with_series(series) if changed else dataset


@dataclass(frozen=True)
class Rung:
    index: int
    budget: float
    n_configs: int


def sh_schedule(spec, n_initial):
    """Rung plan of one successive-halving bracket.

    Rung ``j`` runs ``max(n_initial // eta**j, 1)`` configurations at budget
    ``min(b_min * eta**j, b_max)``.
    """
    n_initial = check_positive_int(n_initial, "n_initial")
    return [
        Rung(j, b, max(n_initial // spec.eta ** j, 1))
        for j, b in enumerate(spec.budgets())
    ]


def promote(results, n):
    """Indices of the ``n`` lowest-loss entries of ``results``.

    ``results`` is a list of ``(item, loss)`` in evaluation order; ties and
    failures (``loss=None``, ranked last) fall back to evaluation order.
    """
    order = sorted(
        range(len(results)),
        key=lambda k: (results[k][1] is None, results[k][1] if results[k][1] is not None else 0.0, k),
    )
    return [results[k][0] for k in order[:n]]
