"""Command line interface: ``chronoml {fit,forecast,benchmark,build-priors,synth}``.

Run settings can also come from a plain ``key = value`` file passed with
``--config``; keys are run-config field names or the long flag names
(``budget_s``, ``grace_s``, ``mode``, ``kb`` ...). Blank lines and lines
starting with ``#`` are ignored, values are parsed as JSON when possible
and kept as strings otherwise. Command-line flags override file values.
"""
import argparse
import csv
import json
import logging
import os
import pickle
import sys
import warnings

from .benchmark import benchmark, load_suite
from .data import load_dataset
from .engine import RunConfig, build_priors, optimize
from .ensemble import ensemble_forecast, read_manifest
from .metalearn import MetaKnowledgeBase
from .synth import KINDS, generate, write_all

FLAG_ALIASES = {
    "budget_s": "time_budget_s",
    "grace_s": "grace_period_s",
    "mode": "ablation_mode",
    "kb": "kb_path",
    "k": "ensemble_k",
}


def read_config_file(path):
    """Parse a ``key = value`` run configuration file into a dict of run-config fields."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            key = FLAG_ALIASES.get(key, key)
            if key not in RunConfig.field_names():
                raise ValueError(f"{path}:{lineno}: unknown setting {key!r}")
            try:
                out[key] = json.loads(value)
            except json.JSONDecodeError:
                out[key] = value.strip("'\"")
    return out


def _run_config(args, overrides=None):
    settings = read_config_file(args.config) if getattr(args, "config", None) else {}
    settings.update(overrides or {})
    for flag, field_name in (
        ("budget_s", "time_budget_s"), ("grace_s", "grace_period_s"), ("seed", "seed"),
        ("metric", "metric"), ("mode", "ablation_mode"), ("kb", "kb_path"),
        ("max_trials", "max_trials"), ("workers", "workers"), ("k", "ensemble_k"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            settings[field_name] = value
    return RunConfig(**settings)


def _load_kb(path):
    if not path:
        return None
    from .config_space import default_space

    return MetaKnowledgeBase.load(path, default_space())


def cmd_fit(args):
    dataset = load_dataset(args.data, args.meta)
    rc = _run_config(args)
    kb = _load_kb(rc.kb_path)
    paths = {"csv": os.path.abspath(args.data), "meta": os.path.abspath(args.meta)}
    result = optimize(dataset, rc, kb=kb, out_dir=args.out, data_paths=paths)
    rep = result.report
    print(f"trials: {rep['n_trials']} {rep['status_counts']}")
    print(f"best validation {rep['metric']}: {rep['best_loss']}")
    print(f"ensemble: {result.ensemble.members} (validation {rep['metric']} {result.ensemble.loss:.6g})")
    print(f"artifacts written to {args.out}")
    return 0


def cmd_forecast(args):
    manifest = read_manifest(args.model)
    run_dir = os.path.dirname(os.path.abspath(args.model))
    with open(os.path.join(run_dir, manifest["models"]), "rb") as fh:
        bundle = pickle.load(fh)
    data = manifest.get("data")
    if not data:
        raise SystemExit("the model manifest does not record its dataset files")
    dataset = load_dataset(data["csv"], data["meta"], name=manifest["dataset"],
                           future_csv=args.future)
    horizon = args.horizon or manifest["horizon"]
    member_fc = {}
    for cid, pipe in bundle["members"].items():
        try:
            member_fc[cid] = pipe.predict(dataset, horizon=horizon)
        except Exception as exc:
            warnings.warn(f"member {cid} failed: {exc}", RuntimeWarning)
            member_fc[cid] = None
    forecasts = ensemble_forecast(bundle["ensemble"], member_fc)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        d = forecasts[0].shape[1]
        writer.writerow(["series_id", "step"] + (["forecast"] if d == 1 else [f"forecast_{k}" for k in range(d)]))
        for s, fc in zip(dataset.series, forecasts):
            for step, row in enumerate(fc, 1):
                writer.writerow([s.series_id, step] + [repr(float(v)) for v in row])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_benchmark(args):
    datasets, modes, rc, kb_path = load_suite(args.suite)
    if args.config:
        rc = rc.replace(**read_config_file(args.config))
    kb = _load_kb(kb_path)
    seeds = list(range(args.seeds))
    _, summary = benchmark(datasets, args.modes or modes, rc, seeds=seeds, kb=kb, out_dir=args.out)
    for mode, s in summary.items():
        print(f"{mode:16s} mean {s['mean']:.4f} ± {s['std']:.4f}  mean rank {s['mean_rank']:.2f}")
    return 0


def cmd_build_priors(args):
    from .config_space import default_space

    base = MetaKnowledgeBase.load(args.base, default_space()) if args.base else None
    kb = build_priors(args.runs, n_c=args.n_c, h=args.h, base=base)
    kb.save(args.out)
    print(f"knowledge base with {len(kb)} datasets written to {args.out}")
    return 0


def cmd_synth(args):
    params = json.loads(args.params) if args.params else {}
    datasets = generate(args.kind, seed=args.seed, **params)
    for csv_path, meta_path in write_all(datasets, args.out):
        print(csv_path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="chronoml", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="search pipelines for a dataset and fit the ensemble")
    fit.add_argument("--data", required=True, help="long-format CSV")
    fit.add_argument("--meta", required=True, help="JSON metadata")
    fit.add_argument("--budget-s", dest="budget_s", type=float)
    fit.add_argument("--grace-s", dest="grace_s", type=float)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--metric", choices=["mase", "smape", "rmse"])
    fit.add_argument("--mode", help="TEMPLATES_ONLY, TEMPLATES_MF, TEMPLATES_WS or FULL")
    fit.add_argument("--kb", help="knowledge base JSON (warm-starting modes)")
    fit.add_argument("--max-trials", dest="max_trials", type=int)
    fit.add_argument("--workers", type=int)
    fit.add_argument("--k", type=int, help="ensemble size")
    fit.add_argument("--config", help="key = value settings file")
    fit.add_argument("--out", required=True, help="run directory")
    fit.set_defaults(func=cmd_fit)

    fc = sub.add_parser("forecast", help="forecast with a fitted ensemble")
    fc.add_argument("--model", required=True, help="path to ensemble.json of a run")
    fc.add_argument("--horizon", type=int)
    fc.add_argument("--future", help="CSV with future values of future-known features")
    fc.add_argument("--out", help="output CSV (default: stdout)")
    fc.set_defaults(func=cmd_forecast)

    bench = sub.add_parser("benchmark", help="run a seeded benchmark suite")
    bench.add_argument("--suite", required=True)
    bench.add_argument("--seeds", type=int, default=5)
    bench.add_argument("--modes", nargs="+")
    bench.add_argument("--config")
    bench.add_argument("--out", required=True)
    bench.set_defaults(func=cmd_benchmark)

    bp = sub.add_parser("build-priors", help="build a knowledge base from run directories")
    bp.add_argument("--runs", nargs="+", required=True)
    bp.add_argument("--out", required=True)
    bp.add_argument("--base", help="existing knowledge base to merge into")
    bp.add_argument("--n-c", dest="n_c", type=int, default=10)
    bp.add_argument("--h", type=int, default=200)
    bp.set_defaults(func=cmd_build_priors)

    sy = sub.add_parser("synth", help="write synthetic datasets")
    sy.add_argument("--kind", required=True, choices=KINDS)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--params", help="JSON object of generator parameters")
    sy.add_argument("--out", required=True)
    sy.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
