"""Seeded synthetic panels: trend plus seasonality, autoregressive noise, and
families of related panels for warm-starting experiments."""
import os

import numpy as np

from ._validation import check_positive_int
from .data import from_arrays, write_dataset

KINDS = ("trend_season", "ar_process", "panel_family")


def trend_season_values(length, period, amplitude, slope, level, noise, rng, phase=0.0):
    t = np.arange(length)
    clean = level + slope * t + amplitude * np.sin(2 * np.pi * t / period + phase)
    return clean + (rng.normal(0.0, noise, length) if noise > 0 else 0.0)


def trend_season(seed=0, length=300, period=12, amplitude=10.0, slope=0.05, level=50.0,
                 noise=None, n_series=1, horizon=12, name=None):
    """Linear trend + additive sinusoid + Gaussian noise.

    ``noise`` is the noise standard deviation; by default 10% of the
    amplitude.
    """
    length = check_positive_int(length, "length", minimum=2)
    noise = 0.1 * amplitude if noise is None else float(noise)
    rng = np.random.default_rng(seed)
    arrays = [
        trend_season_values(length, period, amplitude, slope, level, noise, rng)
        for _ in range(check_positive_int(n_series, "n_series"))
    ]
    return from_arrays(name or f"trend_season_{seed}", arrays, horizon, period)


def ar_process(seed=0, length=300, coefs=(0.6,), sigma=1.0, level=0.0, n_series=1,
               horizon=12, burn_in=100, name=None):
    """Stationary AR(p) series started after a burn-in period."""
    coefs = np.asarray(coefs, dtype=float)
    p = coefs.size
    rng = np.random.default_rng(seed)
    arrays = []
    for _ in range(check_positive_int(n_series, "n_series")):
        y = np.zeros(length + burn_in + p)
        eps = rng.normal(0.0, sigma, y.size)
        for t in range(p, y.size):
            y[t] = coefs @ y[t - p:t][::-1] + eps[t]
        arrays.append(level + y[-length:])
    return from_arrays(name or f"ar_process_{seed}", arrays, horizon, 1)


def panel_family(seed=0, n_datasets=5, n_series=3, length=300, period=12, noise_frac=0.1,
                 horizon=12, prefix="family"):
    """Related panels sharing one seasonal shape (period and phase) and trend.

    Series differ in amplitude and level; noise is ``noise_frac`` times the
    series amplitude.
    """
    n_datasets = check_positive_int(n_datasets, "n_datasets")
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * np.pi)
    slope = rng.uniform(0.0, 0.1)
    out = []
    for k in range(n_datasets):
        arrays = []
        for _ in range(check_positive_int(n_series, "n_series")):
            amplitude = rng.uniform(5.0, 20.0)
            arrays.append(trend_season_values(
                length, period, amplitude, slope=slope, level=rng.uniform(20.0, 100.0),
                noise=noise_frac * amplitude, rng=rng, phase=phase,
            ))
        out.append(from_arrays(f"{prefix}_{seed}_{k}", arrays, horizon, period))
    return out


def generate(kind, seed=0, **params):
    """Datasets (always a list) of the given ``kind``."""
    if kind == "trend_season":
        return [trend_season(seed=seed, **params)]
    if kind == "ar_process":
        return [ar_process(seed=seed, **params)]
    if kind == "panel_family":
        return panel_family(seed=seed, **params)
    raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {', '.join(KINDS)}")


def write_all(datasets, out_dir):
    """Write each dataset as ``<name>.csv`` + ``<name>.json``; return the path pairs."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for ds in datasets:
        csv_path = os.path.join(out_dir, f"{ds.name}.csv")
        meta_path = os.path.join(out_dir, f"{ds.name}.json")
        write_dataset(ds, csv_path, meta_path)
        paths.append((csv_path, meta_path))
    return paths
