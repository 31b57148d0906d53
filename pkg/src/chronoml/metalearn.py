"""Warm-starting priors from earlier optimization runs.

Datasets are compared by the mean dynamic-time-warping cost between the
z-normalised tails of all their series. Configurations from the closest
historic datasets are pooled, weighted by relative distance, and every
hyperparameter gets an independent weighted density in the unit-cube
coordinates of the search space encoding.
"""
import json
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.stats import norm

from ._validation import check_positive_int
from .config_space import Configuration
from .exceptions import SchemaError, SpaceError
from .trials import OK

LAPLACE_FLOOR = 0.1
BANDWIDTH_FLOOR = 0.02
DEFAULT_N_C = 10
DEFAULT_N_D = 5
DEFAULT_H = 200


# -- distances ----------------------------------------------------------------


@numba.njit(cache=True)
def _dtw_kernel(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.full(m + 1, np.inf)
    prev[0] = 0.0
    cur = np.empty(m + 1)
    for i in range(1, n + 1):
        cur[0] = np.inf
        for j in range(1, m + 1):
            cost = 0.0
            for k in range(a.shape[1]):
                cost += abs(a[i - 1, k] - b[j - 1, k])
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = cost + best
        prev, cur = cur, prev
    return prev[m]


def _as_2d(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty sequence")
    return np.ascontiguousarray(arr)


def dtw(a, b):
    """Dynamic time warping cost with absolute-difference local cost.

    Full alignment without a warping window. Multivariate inputs of shape
    (T, d) use the L1 distance between observations.
    """
    a, b = _as_2d(a, "a"), _as_2d(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError("sequences differ in dimension")
    return float(_dtw_kernel(a, b))


def znormalize(x):
    """Per-dimension z-score; constant dimensions are only centred. NaNs are dropped."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x = x[np.isfinite(x).all(axis=1)]
    if x.shape[0] == 0:
        return x
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    return (x - mu) / np.where(sd > 0, sd, 1.0)


def dataset_tails(dataset, h):
    """z-normalised last ``h`` observations of every series."""
    h = check_positive_int(h, "h")
    out = []
    for s in dataset.series:
        t = znormalize(s.targets[-h:])
        if t.shape[0]:
            out.append(t)
    if not out:
        raise ValueError(f"dataset {dataset.name!r} has no observed tail values")
    return out


def tail_distance(tails_e, tails_f):
    """Mean DTW cost over all cross pairs of two lists of tails."""
    total = 0.0
    for a in tails_e:
        for b in tails_f:
            total += dtw(a, b)
    return total / (len(tails_e) * len(tails_f))


def dataset_distance(E, F, h):
    """Mean pairwise DTW between the normalised last-``h`` tails of two panels."""
    return tail_distance(dataset_tails(E, h), dataset_tails(F, h))


def distance_weights(distances):
    """``1 - (d - min d) / (max d - min d)``; all ones when the distances coincide."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        return d
    span = d.max() - d.min()
    if span <= 0:
        return np.ones_like(d)
    return 1.0 - (d - d.min()) / span


# -- knowledge base ---------------------------------------------------------


@dataclass
class KBEntry:
    name: str
    tails: list
    configs: list = field(default_factory=list)  # [(Configuration, loss)]

    def to_json(self):
        return {
            "name": self.name,
            "tails": [np.asarray(t).tolist() for t in self.tails],
            "configs": [{"assignments": c.to_dict(), "loss": l} for c, l in self.configs],
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            name=data["name"],
            tails=[np.asarray(t, dtype=float) for t in data["tails"]],
            configs=[(Configuration(c["assignments"]), float(c["loss"])) for c in data["configs"]],
        )


def top_configs(records, n_c):
    """Best ``n_c`` distinct configurations, each scored at its highest evaluated budget."""
    best = {}
    for r in records:
        if r.status != OK:
            continue
        key = r.config.key()
        cur = best.get(key)
        if cur is None or r.budget > cur[1] or (r.budget == cur[1] and r.loss < cur[2]):
            best[key] = (r.config, r.budget, r.loss, r.index)
    ranked = sorted(best.values(), key=lambda v: (-v[1], v[2], v[3]))
    return [(c, float(l)) for c, _, l, _ in ranked[:n_c]]


class MetaKnowledgeBase:
    """Best configurations and normalised tails of historic datasets."""

    def __init__(self, space_version, entries=()):
        self.space_version = space_version
        self.entries = {}
        for e in entries:
            self.entries[e.name] = e

    def __len__(self):
        return len(self.entries)

    def __contains__(self, name):
        return name in self.entries

    def add_run(self, dataset, records, n_c=DEFAULT_N_C, h=DEFAULT_H):
        """Record the results of one optimization run, merging with earlier runs."""
        entry = KBEntry(dataset.name, dataset_tails(dataset, h), top_configs(records, n_c))
        self._merge_entry(entry, n_c)
        return self

    def _merge_entry(self, entry, n_c):
        old = self.entries.get(entry.name)
        if old is None:
            self.entries[entry.name] = KBEntry(entry.name, entry.tails, list(entry.configs)[:n_c])
            return
        pooled = {}
        for c, l in list(old.configs) + list(entry.configs):
            key = c.key()
            if key not in pooled or l < pooled[key][1]:
                pooled[key] = (c, l)
        ranked = sorted(pooled.values(), key=lambda cl: (cl[1], cl[0].key()))
        self.entries[entry.name] = KBEntry(entry.name, entry.tails, ranked[:n_c])

    def merge(self, other, n_c=DEFAULT_N_C):
        if other.space_version != self.space_version:
            raise SchemaError(
                f"knowledge base space version {other.space_version} does not match "
                f"{self.space_version}"
            )
        for entry in other.entries.values():
            self._merge_entry(entry, n_c)
        return self

    def exclude(self, name):
        """Copy without the entry for ``name`` (leave-one-out)."""
        return MetaKnowledgeBase(
            self.space_version, [e for n, e in self.entries.items() if n != name]
        )

    def to_json(self):
        return {
            "space_version": self.space_version,
            "entries": [e.to_json() for e in self.entries.values()],
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def from_json(cls, data, space=None):
        if space is not None and data["space_version"] != space.version:
            raise SchemaError(
                f"knowledge base was built for space {data['space_version']}, current "
                f"space is {space.version}"
            )
        entries = [KBEntry.from_json(e) for e in data["entries"]]
        if space is not None:
            for e in entries:
                for c, _ in e.configs:
                    space.validate(c)
        return cls(data["space_version"], entries)

    @classmethod
    def load(cls, path, space=None):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh), space)


# -- densities ----------------------------------------------------------------


def _weighted_quantile(x, w, q):
    order = np.argsort(x)
    x, w = x[order], w[order]
    cw = np.cumsum(w) - 0.5 * w
    return np.interp(q, cw / w.sum(), x)


def silverman_bandwidth(x, w, floor=BANDWIDTH_FLOOR):
    """Silverman's rule with weighted spread and effective sample size."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    total = w.sum()
    mean = np.sum(w * x) / total
    sd = np.sqrt(np.sum(w * (x - mean) ** 2) / total)
    n_eff = total ** 2 / np.sum(w ** 2)
    iqr = _weighted_quantile(x, w, 0.75) - _weighted_quantile(x, w, 0.25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return max(0.9 * spread * n_eff ** -0.2, floor)


class WeightedKDE:
    """Weighted Gaussian KDE on [0, 1] with per-kernel truncation.

    Each kernel is renormalised to unit mass inside the interval, so the
    density integrates to one over [0, 1].
    """

    def __init__(self, samples, weights, bandwidth=None, floor=BANDWIDTH_FLOOR):
        samples = np.asarray(samples, dtype=float)
        weights = np.asarray(weights, dtype=float)
        keep = weights > 0
        self.samples = samples[keep]
        self.weights = weights[keep] / weights[keep].sum()
        self.bandwidth = (
            float(bandwidth) if bandwidth is not None
            else silverman_bandwidth(self.samples, self.weights, floor)
        )
        h = self.bandwidth
        self._mass = norm.cdf((1.0 - self.samples) / h) - norm.cdf(-self.samples / h)

    def pdf(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        z = (u[:, None] - self.samples[None, :]) / self.bandwidth
        k = norm.pdf(z) / (self.bandwidth * self._mass[None, :])
        dens = k @ self.weights
        return np.where((u >= 0) & (u <= 1), dens, 0.0)

    def sample(self, rng, max_tries=100):
        i = rng.choice(self.samples.size, p=self.weights)
        for _ in range(max_tries):
            u = rng.normal(self.samples[i], self.bandwidth)
            if 0.0 <= u <= 1.0:
                return float(u)
        return float(min(max(self.samples[i], 0.0), 1.0))


class CategoricalMass:
    """Weighted choice frequencies with an additive (Laplace) floor."""

    def __init__(self, n_choices, codes, weights, floor=LAPLACE_FLOOR):
        counts = np.zeros(n_choices)
        np.add.at(counts, np.asarray(codes, dtype=int), np.asarray(weights, dtype=float))
        self.masses = (counts + floor) / (counts.sum() + n_choices * floor)

    def pmf(self, codes):
        return self.masses[np.asarray(codes, dtype=int)]

    def sample(self, rng):
        return int(rng.choice(self.masses.size, p=self.masses))


class PriorModel:
    """Product of independent per-parameter densities over the search space.

    Parameters without (positively weighted) observations fall back to the
    uniform density: 1 for numerics in unit coordinates, ``1/n`` for
    categoricals.
    """

    def __init__(self, space, marginals):
        self.space = space
        self.marginals = dict(marginals)

    def _categorical_code(self, p, u):
        n = len(p.domain.choices)
        return np.rint(np.asarray(u) * (n - 1)).astype(int) if n > 1 else np.zeros(np.shape(u), dtype=int)

    def log_density_encoded(self, X):
        """Log prior density of encoded configurations (rows of ``X``)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        logd = np.zeros(X.shape[0])
        for k, p in enumerate(self.space.params):
            col = X[:, k]
            active = col >= 0
            if not active.any():
                continue
            marginal = self.marginals.get(p.name)
            if p.is_categorical:
                if marginal is None:
                    vals = np.full(active.sum(), 1.0 / len(p.domain.choices))
                else:
                    vals = marginal.pmf(self._categorical_code(p, col[active]))
            else:
                vals = np.ones(active.sum()) if marginal is None else marginal.pdf(col[active])
            with np.errstate(divide="ignore"):
                logd[active] += np.log(vals)
        return logd

    def density_encoded(self, X):
        return np.exp(self.log_density_encoded(X))

    def density(self, config):
        return float(self.density_encoded(self.space.encode(config)[None, :])[0])

    def sample(self, rng):
        values = {}
        for p in self.space.params:
            if not self.space.is_active(p, values):
                continue
            marginal = self.marginals.get(p.name)
            if marginal is None:
                values[p.name] = self.space._uniform(p, rng)
            elif p.is_categorical:
                values[p.name] = p.domain.choices[marginal.sample(rng)]
            else:
                values[p.name] = p.domain.from_unit(marginal.sample(rng))
        return Configuration(values)


def fit_prior(space, configs, weights, laplace_floor=LAPLACE_FLOOR,
              bandwidth_floor=BANDWIDTH_FLOOR, bandwidth=None):
    """Fit univariate densities using, per parameter, only configurations where it is active."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    encoded = space.encode_many(configs) if configs else np.empty((0, space.dimension))
    marginals = {}
    for k, p in enumerate(space.params):
        col = encoded[:, k]
        active = col >= 0
        w = weights[active]
        if w.sum() <= 0:
            continue
        if p.is_categorical:
            n = len(p.domain.choices)
            codes = np.rint(col[active] * (n - 1)).astype(int) if n > 1 else np.zeros(active.sum(), dtype=int)
            marginals[p.name] = CategoricalMass(n, codes, w, laplace_floor)
        else:
            marginals[p.name] = WeightedKDE(col[active], w, bandwidth, bandwidth_floor)
    return PriorModel(space, marginals)


def prior_density(prior, config):
    return prior.density(config)


def sample_prior(prior, rng, space=None):
    """Draw from ``prior``; ``None`` falls back to a uniform sample of ``space``."""
    if prior is None:
        if space is None:
            raise SpaceError("a space is needed to sample without a prior")
        return space.sample(rng)
    return prior.sample(rng)


@dataclass
class PriorReport:
    distances: dict
    selected: list
    weights: dict


def build_prior(kb, new_dataset, space, n_d=DEFAULT_N_D, h=DEFAULT_H,
                laplace_floor=LAPLACE_FLOOR, bandwidth_floor=BANDWIDTH_FLOOR,
                return_report=False):
    """Prior for ``new_dataset`` from the ``n_d`` closest knowledge-base entries.

    The caller is responsible for leave-one-out exclusion of the dataset's
    own entry.
    """
    if len(kb) == 0:
        raise ValueError("knowledge base is empty")
    n_d = check_positive_int(n_d, "n_d")
    new_tails = dataset_tails(new_dataset, h)
    names = list(kb.entries)
    dists = np.array([
        tail_distance([t[-h:] for t in kb.entries[n].tails], new_tails) for n in names
    ])
    order = np.argsort(dists, kind="stable")[:n_d]
    selected = [names[i] for i in order]
    w_sel = distance_weights(dists[order])
    configs, weights = [], []
    for name, w in zip(selected, w_sel):
        for c, _ in kb.entries[name].configs:
            if space.is_valid(c):
                configs.append(c)
                weights.append(w)
    prior = fit_prior(space, configs, weights, laplace_floor, bandwidth_floor)
    if return_report:
        report = PriorReport(
            distances=dict(zip(names, dists.tolist())),
            selected=selected,
            weights=dict(zip(selected, w_sel.tolist())),
        )
        return prior, report
    return prior
