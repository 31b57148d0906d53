"""Conditional hyperparameter space over the three pipeline templates.

A root selector ``template`` picks the statistical, ML or DNN template;
every other parameter is active only when its parent has a given value,
so the active set is a function of the selector values alone.
"""
import hashlib
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .exceptions import SpaceError

SIG_DIGITS = 10
INACTIVE = -1.0
NEIGHBOR_STEP = 0.2


def _round_sig(x, digits=SIG_DIGITS):
    if x == 0 or not math.isfinite(x):
        return float(x)
    return float(f"{x:.{digits - 1}e}")


@dataclass(frozen=True)
class Float:
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SpaceError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.log and self.lo <= 0:
            raise SpaceError("log domains need lo > 0")

    def to_unit(self, value):
        if self.log:
            return (math.log(value) - math.log(self.lo)) / (math.log(self.hi) - math.log(self.lo))
        return (value - self.lo) / (self.hi - self.lo)

    def from_unit(self, u):
        u = min(max(float(u), 0.0), 1.0)
        if self.log:
            v = math.exp(math.log(self.lo) + u * (math.log(self.hi) - math.log(self.lo)))
        else:
            v = self.lo + u * (self.hi - self.lo)
        return min(max(_round_sig(v), self.lo), self.hi)

    def contains(self, value):
        return isinstance(value, (int, float)) and not isinstance(value, bool) and self.lo <= value <= self.hi

    def to_json(self):
        return {"type": "float", "lo": self.lo, "hi": self.hi, "log": self.log}


@dataclass(frozen=True)
class Integer(Float):
    lo: int
    hi: int
    log: bool = False

    def to_unit(self, value):
        # integers map to the centre of their cell so rounding is stable
        if self.log:
            lo, hi = math.log(self.lo - 0.5), math.log(self.hi + 0.5)
            return (math.log(value) - lo) / (hi - lo)
        return (value - self.lo + 0.5) / (self.hi - self.lo + 1)

    def from_unit(self, u):
        u = min(max(float(u), 0.0), 1.0)
        if self.log:
            lo, hi = math.log(self.lo - 0.5), math.log(self.hi + 0.5)
            v = math.exp(lo + u * (hi - lo))
        else:
            v = self.lo - 0.5 + u * (self.hi - self.lo + 1)
        return int(min(max(round(v), self.lo), self.hi))

    def __post_init__(self):
        super().__post_init__()
        if self.log and self.lo < 1:
            raise SpaceError("log integer domains need lo >= 1")

    def contains(self, value):
        return isinstance(value, (int, np.integer)) and not isinstance(value, bool) and self.lo <= value <= self.hi

    def to_json(self):
        return {"type": "int", "lo": self.lo, "hi": self.hi, "log": self.log}


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        if not self.choices:
            raise SpaceError("categorical needs at least one choice")
        if len(set(self.choices)) != len(self.choices):
            raise SpaceError("duplicate categorical choices")

    def index(self, value):
        for k, c in enumerate(self.choices):
            if c == value and type(c) is type(value):
                return k
        raise SpaceError(f"{value!r} is not one of {self.choices}")

    def to_unit(self, value):
        n = len(self.choices)
        return 0.0 if n == 1 else self.index(value) / (n - 1)

    def from_unit(self, u):
        n = len(self.choices)
        k = int(round(min(max(float(u), 0.0), 1.0) * (n - 1)))
        return self.choices[k]

    def contains(self, value):
        try:
            self.index(value)
            return True
        except SpaceError:
            return False

    def to_json(self):
        return {"type": "categorical", "choices": list(self.choices)}


@dataclass(frozen=True)
class HyperParam:
    name: str
    domain: Any
    condition: Optional[tuple] = None

    @property
    def is_categorical(self):
        return isinstance(self.domain, Categorical)

    def to_json(self):
        out = {"name": self.name, **self.domain.to_json()}
        if self.condition is not None:
            out["condition"] = list(self.condition)
        return out


class Configuration(Mapping):
    """Immutable assignment of values to exactly the active parameters."""

    __slots__ = ("_values", "_hash")

    def __init__(self, values):
        self._values = dict(values)
        self._hash = None

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __eq__(self, other):
        if not isinstance(other, Mapping):
            return NotImplemented
        if set(self) != set(other):
            return False
        return all(self[k] == other[k] and type(self[k]) is type(other[k]) for k in self)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def key(self):
        """Canonical JSON string, usable as a dictionary key."""
        return json.dumps(self._values, sort_keys=True)

    def to_dict(self):
        return dict(self._values)

    def __repr__(self):
        return f"Configuration({self._values!r})"


class ConfigSpace:
    """An ordered set of hyperparameters with single-parent conditions.

    Parameters must be listed parents-first; conditions are
    ``(parent_name, value)`` pairs.
    """

    def __init__(self, params, root="template"):
        self.params = tuple(params)
        self.root = root
        self._by_name = {}
        for p in self.params:
            if p.name in self._by_name:
                raise SpaceError(f"duplicate parameter {p.name!r}")
            if p.condition is not None:
                parent, value = p.condition
                if parent not in self._by_name:
                    raise SpaceError(
                        f"{p.name!r}: parent {parent!r} must be declared before its children"
                    )
                parent_dom = self._by_name[parent].domain
                if not isinstance(parent_dom, Categorical) or not parent_dom.contains(value):
                    raise SpaceError(f"{p.name!r}: condition value {value!r} not in parent domain")
            self._by_name[p.name] = p
        if root not in self._by_name or self._by_name[root].condition is not None:
            raise SpaceError(f"root selector {root!r} must be an unconditional parameter")

    def __len__(self):
        return len(self.params)

    def __getitem__(self, name):
        return self._by_name[name]

    def __contains__(self, name):
        return name in self._by_name

    @property
    def names(self):
        return [p.name for p in self.params]

    @property
    def dimension(self):
        return len(self.params)

    @property
    def templates(self):
        return self._by_name[self.root].domain.choices

    def is_active(self, param, values):
        if param.condition is None:
            return True
        parent, value = param.condition
        return parent in values and values[parent] == value

    def active_names(self, values):
        """Active parameter names implied by the selector values in ``values``."""
        active = {}
        for p in self.params:
            if self.is_active(p, active):
                active[p.name] = values.get(p.name) if p.name in values else None
        return list(active)

    # -- construction ----------------------------------------------------

    def _complete(self, values, fill):
        """Walk parameters in order keeping active ones; ``fill(p)`` supplies missing values."""
        out = {}
        for p in self.params:
            if not self.is_active(p, out):
                continue
            out[p.name] = values[p.name] if p.name in values else fill(p)
        return Configuration(out)

    def sample(self, rng):
        """Uniform sample: selectors first, then active parameters (log-uniform on log domains)."""
        return self._complete({}, lambda p: self._uniform(p, rng))

    def _uniform(self, p, rng):
        dom = p.domain
        if isinstance(dom, Categorical):
            return dom.choices[int(rng.integers(len(dom.choices)))]
        return dom.from_unit(rng.random())

    def default(self, template=None):
        """Mid-range numerics and first categorical choices for one template."""
        fixed = {}
        if template is not None:
            fixed[self.root] = template
        return self._complete(fixed, self._default_value)

    @staticmethod
    def _default_value(p):
        dom = p.domain
        if isinstance(dom, Categorical):
            return dom.choices[0]
        return dom.from_unit(0.5)

    def validate(self, config):
        values = dict(config)
        active = self.active_names(values)
        missing = [n for n in active if n not in values]
        extra = [n for n in values if n not in active]
        if missing or extra:
            raise SpaceError(f"invalid configuration: missing {missing}, inactive {extra}")
        for name in active:
            if not self._by_name[name].domain.contains(values[name]):
                raise SpaceError(f"{name}={values[name]!r} outside its domain")
        return config

    def is_valid(self, config):
        try:
            self.validate(config)
            return True
        except SpaceError:
            return False

    # -- numeric encoding ------------------------------------------------

    def encode(self, config):
        """Fixed-length vector in [0, 1] with ``-1`` for inactive parameters."""
        for name in config:
            if name not in self._by_name:
                raise SpaceError(f"unknown parameter {name!r}")
        vec = np.full(self.dimension, INACTIVE)
        for k, p in enumerate(self.params):
            if p.name in config:
                vec[k] = p.domain.to_unit(config[p.name])
        return vec

    def encode_many(self, configs):
        return np.array([self.encode(c) for c in configs]).reshape(len(configs), self.dimension)

    def decode(self, vector):
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.dimension,):
            raise SpaceError(f"expected vector of length {self.dimension}")
        out = {}
        for k, p in enumerate(self.params):
            if self.is_active(p, out):
                u = vector[k] if vector[k] >= 0 else 0.5
                out[p.name] = p.domain.from_unit(u)
        return Configuration(out)

    # -- local moves -----------------------------------------------------

    def neighbors(self, config, k, rng):
        """``k`` configurations that each differ from ``config`` in one parameter."""
        out = []
        if k <= 0:
            return out
        movable = [
            n for n in config
            if not (self._by_name[n].is_categorical
                    and len(self._by_name[n].domain.choices) < 2)
        ]
        if not movable:
            return [config] * k
        for _ in range(k):
            name = movable[int(rng.integers(len(movable)))]
            p = self._by_name[name]
            values = dict(config)
            if p.is_categorical:
                current = values[name]
                choices = [c for c in p.domain.choices
                           if not (c == current and type(c) is type(current))]
                values[name] = choices[int(rng.integers(len(choices)))]
            else:
                base = p.domain.to_unit(values[name])
                for _ in range(10):
                    moved = p.domain.from_unit(min(max(base + rng.normal(0.0, NEIGHBOR_STEP), 0.0), 1.0))
                    if moved != values[name]:
                        break
                values[name] = moved
            # drop deactivated children, sample newly activated ones
            out.append(self._complete(values, lambda q: self._uniform(q, rng)))
        return out

    # -- serialisation ---------------------------------------------------

    def to_json(self):
        return {"root": self.root, "params": [p.to_json() for p in self.params]}

    @property
    def version(self):
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_json(cls, data):
        params = []
        for item in data["params"]:
            kind = item["type"]
            if kind == "float":
                dom = Float(item["lo"], item["hi"], item.get("log", False))
            elif kind == "int":
                dom = Integer(int(item["lo"]), int(item["hi"]), item.get("log", False))
            elif kind == "categorical":
                dom = Categorical(tuple(item["choices"]))
            else:
                raise SpaceError(f"unknown parameter type {kind!r}")
            cond = tuple(item["condition"]) if item.get("condition") is not None else None
            params.append(HyperParam(item["name"], dom, cond))
        return cls(params, root=data.get("root", "template"))


def sample(space, rng):
    return space.sample(rng)


def encode(config, space):
    return space.encode(config)


def neighbors(config, space, k, rng):
    return space.neighbors(config, k, rng)


STATISTICAL, ML, DNN = "statistical", "ml", "dnn"
TEMPLATES = (STATISTICAL, ML, DNN)
STAT_FORECASTERS = ("naive", "seasonal_naive", "drift", "ses", "holt", "holt_winters", "ar")
IMPUTERS = ("forward_fill", "mean", "zero")


def default_space():
    """The joint search space over the statistical, ML and DNN templates."""
    T = "template"

    def under(template, name, domain, parent=None):
        return HyperParam(name, domain, parent or (T, template))

    P = HyperParam
    params = [
        P(T, Categorical(TEMPLATES)),
        # statistical: [Imputer?, Detrender?, Deseasonalizer?, forecaster]
        under(STATISTICAL, "stat.use_imputer", Categorical((True, False))),
        P("stat.imputer", Categorical(IMPUTERS), ("stat.use_imputer", True)),
        under(STATISTICAL, "stat.use_detrender", Categorical((False, True))),
        P("stat.detrender_degree", Categorical((1, 0)), ("stat.use_detrender", True)),
        under(STATISTICAL, "stat.use_deseasonalizer", Categorical((False, True))),
        under(STATISTICAL, "stat.forecaster", Categorical(STAT_FORECASTERS)),
        P("stat.holt_damped", Categorical((False, True)), ("stat.forecaster", "holt")),
        P("stat.hw_trend", Categorical((True, False)), ("stat.forecaster", "holt_winters")),
        P("stat.hw_damped", Categorical((False, True)), ("stat.hw_trend", True)),
        P("stat.ar_p", Integer(1, 30), ("stat.forecaster", "ar")),
        # ml: [Imputer, OrdinalEncoder?, Scaler?, WindowReducer, regressor]
        under(ML, "ml.imputer", Categorical(IMPUTERS)),
        under(ML, "ml.use_encoder", Categorical((True, False))),
        under(ML, "ml.use_scaler", Categorical((True, False))),
        P("ml.scaler", Categorical(("standard", "minmax")), ("ml.use_scaler", True)),
        under(ML, "ml.window_length", Integer(2, 48)),
        under(ML, "ml.regressor", Categorical(("ridge", "bagged_trees"))),
        P("ml.ridge_alpha", Float(1e-6, 10.0, log=True), ("ml.regressor", "ridge")),
        P("ml.trees_n", Integer(5, 50), ("ml.regressor", "bagged_trees")),
        P("ml.trees_max_depth", Integer(2, 12), ("ml.regressor", "bagged_trees")),
        # dnn: [Imputer, Scaler, WindowReducer, MLP]
        under(DNN, "dnn.imputer", Categorical(IMPUTERS)),
        under(DNN, "dnn.scaler", Categorical(("standard", "minmax"))),
        under(DNN, "dnn.window_length", Integer(2, 48)),
        under(DNN, "dnn.hidden_size", Integer(4, 64, log=True)),
        under(DNN, "dnn.n_layers", Integer(1, 2)),
        under(DNN, "dnn.learning_rate", Float(1e-4, 1e-1, log=True)),
        under(DNN, "dnn.epochs", Integer(10, 100)),
        under(DNN, "dnn.batch_size", Integer(16, 128, log=True)),
    ]
    return ConfigSpace(params, root=T)
