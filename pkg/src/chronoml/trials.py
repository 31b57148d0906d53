"""Trial records and their JSONL persistence."""
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config_space import Configuration

OK, FAILED, TIMED_OUT = "ok", "failed", "timed_out"
STATUSES = (OK, FAILED, TIMED_OUT)
DEFAULT_PENALTY = 1e6


@dataclass
class TrialRecord:
    """One evaluation of a configuration at a fidelity budget.

    ``loss`` is finite for ``ok`` trials and ``None`` otherwise; failed and
    timed-out trials carry a separate ``penalty_loss`` used by the optimizer.
    ``wall_ms`` is kept out of the JSONL log so that logs of identical runs
    are byte-identical; it is written to a separate timings file.
    """

    index: int
    config: Configuration
    budget: float
    status: str
    loss: Optional[float] = None
    penalty_loss: Optional[float] = None
    wall_ms: float = 0.0
    rung: int = 0
    bracket: int = 0
    n_train_obs: int = 0
    error: Optional[str] = None
    forecasts: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == OK and (self.loss is None or not math.isfinite(self.loss)):
            raise ValueError("ok trials need a finite loss")

    @property
    def ok(self):
        return self.status == OK

    @property
    def effective_loss(self):
        return self.loss if self.ok else self.penalty_loss

    def to_json(self, space=None):
        out = {
            "index": self.index,
            "config": self.config.to_dict(),
            "budget": self.budget,
            "status": self.status,
            "loss": self.loss,
            "penalty_loss": self.penalty_loss,
            "rung": self.rung,
            "bracket": self.bracket,
            "n_train_obs": self.n_train_obs,
            "error": self.error,
        }
        if space is not None:
            out["encoded"] = [float(v) for v in space.encode(self.config)]
        return out

    @classmethod
    def from_json(cls, data):
        return cls(
            index=data["index"],
            config=Configuration(data["config"]),
            budget=data["budget"],
            status=data["status"],
            loss=data.get("loss"),
            penalty_loss=data.get("penalty_loss"),
            rung=data.get("rung", 0),
            bracket=data.get("bracket", 0),
            n_train_obs=data.get("n_train_obs", 0),
            error=data.get("error"),
            wall_ms=data.get("wall_ms", 0.0),
        )


class TrialHistory:
    """Evaluation-ordered list of trial records."""

    def __init__(self, records=()):
        self.records = list(records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record):
        self.records.append(record)

    @property
    def n(self):
        return len(self.records)

    @property
    def n_ok(self):
        return sum(r.ok for r in self.records)

    def worst_finite_loss(self):
        losses = [r.loss for r in self.records if r.ok]
        return max(losses) if losses else None

    def penalty(self):
        """Loss assigned to failed trials: twice the worst finite loss so far."""
        worst = self.worst_finite_loss()
        return DEFAULT_PENALTY if worst is None else 2.0 * worst

    def max_budget(self):
        return max((r.budget for r in self.records), default=None)

    def incumbent_loss(self):
        """Best loss among ``ok`` trials at the highest budget evaluated so far."""
        ok = [r for r in self.records if r.ok]
        if not ok:
            return None
        top = max(r.budget for r in ok)
        return min(r.loss for r in ok if r.budget == top)

    def training_data(self, space):
        """Surrogate inputs (encoding plus budget column) and effective losses."""
        rows = [r for r in self.records if r.effective_loss is not None]
        if not rows:
            return np.empty((0, space.dimension + 1)), np.empty(0)
        X = np.column_stack([space.encode_many([r.config for r in rows]),
                             [r.budget for r in rows]])
        y = np.array([r.effective_loss for r in rows], dtype=float)
        return X, y

    def evaluated_keys(self, budget=None):
        return {r.config.key() for r in self.records if budget is None or r.budget == budget}

    def best_configs(self, k):
        """Up to ``k`` distinct configurations with the lowest effective loss."""
        seen, out = set(), []
        ranked = sorted(
            (r for r in self.records if r.effective_loss is not None),
            key=lambda r: (-r.budget, r.effective_loss, r.index),
        )
        for r in ranked:
            key = r.config.key()
            if key not in seen:
                seen.add(key)
                out.append(r.config)
            if len(out) == k:
                break
        return out

    def write_jsonl(self, path, space=None):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_json(space), sort_keys=True) + "\n")

    def write_timings(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps({"index": r.index, "wall_ms": r.wall_ms}) + "\n")

    @classmethod
    def read_jsonl(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(TrialRecord.from_json(json.loads(line)) for line in fh if line.strip())
