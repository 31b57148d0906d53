"""Greedy forward ensemble selection over evaluated pipelines."""
import json
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int
from .metrics import LossKind, series_loss

DEFAULT_K = 10


@dataclass
class Candidate:
    """One evaluated configuration with its validation forecasts (one (H, d) array per series)."""

    id: int
    forecasts: list
    loss: float = float("nan")
    config: object = None


@dataclass
class CandidatePool:
    """Candidates sharing the same validation windows.

    ``actuals`` and ``insample`` hold, per series, the validation targets and
    the training history used for the metric scale.
    """

    actuals: list
    insample: list
    candidates: list
    seasonal_period: int = 1

    def __len__(self):
        return len(self.candidates)

    @classmethod
    def from_split(cls, split, candidates):
        return cls(
            actuals=split.validation_targets,
            insample=[s.targets for s in split.train.series],
            candidates=list(candidates),
            seasonal_period=split.train.seasonal_period,
        )

    def loss_of(self, forecasts, kind):
        """Mean per-series loss of ``forecasts``; series with undefined scale are skipped."""
        vals = []
        for a, f, y in zip(self.actuals, forecasts, self.insample):
            try:
                vals.append(series_loss(kind, a, f, y, self.seasonal_period))
            except ArithmeticError:
                continue
        if not vals:
            return float("inf")
        return float(np.mean(vals))


@dataclass
class EnsembleModel:
    """Multiset of candidate ids; the combined forecast weights members by multiplicity."""

    members: dict
    loss: float
    k: int = DEFAULT_K
    trace: list = field(default_factory=list)

    @property
    def size(self):
        return sum(self.members.values())

    def weights(self):
        total = self.size
        return {cid: m / total for cid, m in self.members.items()}

    def to_json(self):
        return {
            "members": [{"id": cid, "multiplicity": m} for cid, m in sorted(self.members.items())],
            "validation_loss": self.loss,
            "k": self.k,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            members={int(m["id"]): int(m["multiplicity"]) for m in data["members"]},
            loss=float(data["validation_loss"]),
            k=int(data.get("k", DEFAULT_K)),
        )


def average_forecasts(forecast_sets, multiplicities):
    """Per-series weighted mean of several forecast sets."""
    w = np.asarray(multiplicities, dtype=float)
    w = w / w.sum()
    n_series = len(forecast_sets[0])
    return [
        sum(wi * np.asarray(fs[i], dtype=float) for wi, fs in zip(w, forecast_sets))
        for i in range(n_series)
    ]


def ensemble_select(pool, k=DEFAULT_K, loss=LossKind.MASE):
    """Caruana-style greedy forward selection with replacement.

    Starts from the single best candidate and adds, for up to ``k - 1``
    steps, the candidate minimizing the loss of the averaged forecast. Stops
    as soon as no addition improves and returns the best ensemble seen.
    Ties go to the candidate listed first.
    """
    if len(pool) == 0:
        raise ValueError("cannot select an ensemble from an empty pool")
    k = check_positive_int(k, "k")
    kind = LossKind.parse(loss)
    cands = pool.candidates
    preds = [[np.asarray(f, dtype=float) for f in c.forecasts] for c in cands]
    single = [pool.loss_of(p, kind) for p in preds]
    best = int(np.argmin(single))
    counts = Counter({best: 1})
    running = [f.copy() for f in preds[best]]  # sum of member forecasts
    best_loss = single[best]
    trace = [best]
    for size in range(2, k + 1):
        trial = [
            pool.loss_of([(r + p) / size for r, p in zip(running, preds[j])], kind)
            for j in range(len(cands))
        ]
        j = int(np.argmin(trial))
        if not trial[j] < best_loss:
            break
        counts[j] += 1
        running = [r + p for r, p in zip(running, preds[j])]
        best_loss = trial[j]
        trace.append(j)
    members = {cands[i].id: m for i, m in sorted(counts.items())}
    return EnsembleModel(members=members, loss=float(best_loss), k=k, trace=[cands[i].id for i in trace])


def ensemble_forecast(ens, member_forecasts):
    """Combine forecasts of fitted members.

    ``member_forecasts`` maps candidate id to that member's forecasts, or to
    ``None`` when the member could not be refitted; such members are dropped
    with a warning.
    """
    ids, sets, mult = [], [], []
    for cid, m in sorted(ens.members.items()):
        fc = member_forecasts.get(cid)
        if fc is None:
            warnings.warn(f"ensemble member {cid} is unavailable and was dropped", RuntimeWarning)
            continue
        ids.append(cid)
        sets.append(fc)
        mult.append(m)
    if not sets:
        raise RuntimeError("every ensemble member failed")
    return average_forecasts(sets, mult)


def write_manifest(ens, path, extra=None):
    data = ens.to_json()
    if extra:
        data.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)


def read_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
