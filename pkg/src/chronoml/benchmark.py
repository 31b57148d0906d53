"""Seeded benchmark harness with failure imputation and average ranks."""
import csv
import json
import logging
import math
import os
import warnings

import numpy as np
from scipy.stats import rankdata

from .data import load_dataset, temporal_holdout
from .engine import RunConfig, optimize, parse_mode
from .metrics import panel_loss

logger = logging.getLogger(__name__)

EPS_RANK = 1e-6


def impute_failures(values, eps=EPS_RANK):
    """Replace missing or non-finite entries by the worst finite value plus ``eps``.

    ``values`` is a list of metric values (lower is better) of the competing
    modes on one dataset. With no finite value at all every entry becomes
    ``inf``.
    """
    finite = [v for v in values if v is not None and math.isfinite(v)]
    fill = max(finite) + eps if finite else math.inf
    return [v if (v is not None and math.isfinite(v)) else fill for v in values]


def average_ranks(values):
    """Rank of every entry, 1 = best, ties sharing the average rank."""
    return rankdata(np.asarray(values, dtype=float), method="average").tolist()


def run_cell(dataset, mode, seed, run_config, kb=None):
    """Metric of one (dataset, mode, seed) on the final ``horizon`` steps; ``None`` on failure."""
    split = temporal_holdout(dataset, dataset.horizon)
    rc = run_config.replace(ablation_mode=mode, seed=seed)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = optimize(split.train, rc, kb=kb)
            forecasts = result.forecast(dataset.horizon)
        value = float(panel_loss(rc.metric, dataset, forecasts))
        return value if math.isfinite(value) else None
    except Exception as exc:
        logger.warning("%s / %s / seed %d failed: %s", dataset.name, mode, seed, exc)
        return None


def tabulate(raw, modes, eps=EPS_RANK):
    """Impute and rank raw results ``{(dataset, seed): {mode: value|None}}``.

    Imputation uses the worst finite result of any mode on the same dataset
    (over all seeds); ranks are computed per (dataset, seed).
    """
    worst = {}
    for (ds, _), cells in raw.items():
        for v in cells.values():
            if v is not None and math.isfinite(v):
                worst[ds] = max(worst.get(ds, -math.inf), v)
    rows = []
    for (ds, seed), cells in sorted(raw.items()):
        fill = worst[ds] + eps if ds in worst else math.inf
        values = [cells.get(m) for m in modes]
        imputed = [v if (v is not None and math.isfinite(v)) else fill for v in values]
        ranks = average_ranks(imputed)
        for m, v, iv, r in zip(modes, values, imputed, ranks):
            rows.append({
                "dataset": ds, "mode": m, "seed": seed, "metric": iv,
                "imputed": v is None or not math.isfinite(v), "rank": r,
            })
    summary = {}
    for m in modes:
        vals = [r["metric"] for r in rows if r["mode"] == m]
        ranks = [r["rank"] for r in rows if r["mode"] == m]
        summary[m] = {
            "mean": float(np.mean(vals)) if vals else None,
            "std": float(np.std(vals)) if vals else None,
            "mean_rank": float(np.mean(ranks)) if ranks else None,
            "n_imputed": sum(r["imputed"] for r in rows if r["mode"] == m),
        }
    return rows, summary


def benchmark(datasets, modes, run_config, seeds=(0,), kb=None, out_dir=None, cell_fn=run_cell):
    """Run every (dataset, mode, seed) cell and write ``results.csv`` and ``summary.json``."""
    if not datasets or not modes:
        raise ValueError("benchmark needs at least one dataset and one mode")
    modes = [parse_mode(m) for m in modes]
    raw = {}
    for ds in datasets:
        for seed in seeds:
            raw[(ds.name, seed)] = {m: cell_fn(ds, m, seed, run_config, kb) for m in modes}
    rows, summary = tabulate(raw, modes)
    per_dataset = {}
    for r in rows:
        per_dataset.setdefault(r["dataset"], {}).setdefault(r["mode"], []).append(r["metric"])
    table = {ds: {m: float(np.mean(v)) for m, v in cells.items()} for ds, cells in per_dataset.items()}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, ["dataset", "mode", "seed", "metric", "imputed", "rank"])
            writer.writeheader()
            writer.writerows(rows)
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump({"modes": summary, "per_dataset": table}, fh, indent=2, sort_keys=True)
    return rows, summary


def load_suite(path):
    """Read a suite file: ``{"datasets": [{"csv", "meta"}], "modes": [...], "run": {...}, "kb": path}``.

    Relative paths are resolved against the suite file's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as fh:
        suite = json.load(fh)

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    datasets = [load_dataset(resolve(d["csv"]), resolve(d["meta"])) for d in suite["datasets"]]
    modes = suite.get("modes", ["TEMPLATES_ONLY"])
    run = RunConfig(**suite.get("run", {}))
    kb_path = suite.get("kb")
    return datasets, modes, run, (resolve(kb_path) if kb_path else None)
