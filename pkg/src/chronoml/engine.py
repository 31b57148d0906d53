"""Search loop: initial design, successive-halving brackets, BO proposals,
ensemble selection, member refitting and run artifacts."""
import json
import logging
import math
import os
import pickle
import time
import traceback
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import NO_DEADLINE, Deadline, check_finite_forecast, check_is_fitted, check_positive_int
from .config_space import TEMPLATES, default_space
from .data import temporal_holdout
from .ensemble import Candidate, CandidatePool, ensemble_forecast, ensemble_select, write_manifest
from .exceptions import TrialTimeout
from .fidelity import BudgetSpec, promote, sh_schedule, truncate
from .metalearn import build_prior, sample_prior
from .metrics import LossKind, panel_loss
from .pipeline import build_pipeline
from .surrogate import DEFAULT_BETA, fit_surrogate, propose
from .trials import FAILED, OK, TIMED_OUT, TrialHistory, TrialRecord

logger = logging.getLogger(__name__)

TEMPLATES_ONLY = "TEMPLATES_ONLY"
TEMPLATES_MF = "TEMPLATES_MF"
TEMPLATES_WS = "TEMPLATES_WS"
FULL = "FULL"
MODES = (TEMPLATES_ONLY, TEMPLATES_MF, TEMPLATES_WS, FULL)
N_INITIAL = 10
REFIT_SLACK_S = 3.0
WORKERS_ENV = "CHRONO_WORKERS"


def parse_mode(value):
    key = str(value).strip().upper().replace("-", "_")
    aliases = {"ONLY": TEMPLATES_ONLY, "MF": TEMPLATES_MF, "WS": TEMPLATES_WS}
    key = aliases.get(key, key)
    if key not in MODES:
        raise ValueError(f"unknown mode {value!r}; expected one of {', '.join(MODES)}")
    return key


@dataclass
class RunConfig:
    """Knobs of one optimization run.

    ``max_trials`` and ``max_configs`` are optional caps next to the wall
    clock budget; with them, runs can be made independent of machine speed.
    ``max_configs`` bounds the number of distinct configurations started,
    while promotions inside an open bracket still run.
    """

    time_budget_s: float = 300
    grace_period_s: float = 60
    seed: int = 0
    metric: str = "mase"
    ablation_mode: str = FULL
    beta: float = DEFAULT_BETA
    n_d: int = 5
    n_c: int = 10
    h: int = 200
    eta: int = 3
    b_min: float = 1.0 / 9.0
    b_max: float = 1.0
    l_min: int = 500
    ensemble_k: int = 10
    workers: int = 1
    max_trials: Optional[int] = None
    max_configs: Optional[int] = None
    trial_timeout_s: Optional[float] = None
    n_initial: int = N_INITIAL
    kb_path: Optional[str] = None

    def __post_init__(self):
        self.ablation_mode = parse_mode(self.ablation_mode)
        self.metric = LossKind.parse(self.metric).value
        if self.time_budget_s <= 0:
            raise ValueError("time_budget_s must be positive")
        if not 0 <= self.grace_period_s <= self.time_budget_s:
            raise ValueError("grace_period_s must lie in [0, time_budget_s]")
        check_positive_int(self.workers, "workers")
        check_positive_int(self.ensemble_k, "ensemble_k")
        check_positive_int(self.n_initial, "n_initial")
        BudgetSpec(self.b_min, self.b_max, self.eta, self.l_min)

    @property
    def uses_prior(self):
        return self.ablation_mode in (TEMPLATES_WS, FULL)

    @property
    def uses_fidelity(self):
        return self.ablation_mode in (TEMPLATES_MF, FULL)

    @property
    def budget_spec(self):
        return BudgetSpec(self.b_min, self.b_max, self.eta, self.l_min)

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return RunConfig(**data)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def resolve_workers(configured):
    env = os.environ.get(WORKERS_ENV)
    if env:
        return check_positive_int(int(env), WORKERS_ENV)
    return configured


# -- single trial -------------------------------------------------------------


def evaluate_trial(config, budget, split, deadline=NO_DEADLINE, metric="mase", l_min=500,
                   seed=0, index=0, penalty=None, pipeline_factory=build_pipeline,
                   rung=0, bracket=0, keep_forecasts=False):
    """Fit ``config`` on the (possibly truncated) train part and score the validation window.

    Never raises: exceptions, non-finite forecasts and deadline breaches are
    recorded as ``failed`` or ``timed_out`` with ``penalty`` as loss for the
    optimizer. The metric scale always comes from the full training part.
    """
    penalty = 1e6 if penalty is None else penalty
    t0 = time.perf_counter()
    train = truncate(split.train, budget, l_min)
    status, loss, error, forecasts = OK, None, None, None
    try:
        pipe = pipeline_factory(config, split.train.seasonal_period, seed)
        pipe.fit(train, deadline=deadline)
        forecasts = pipe.predict(train, horizon=split.validation_horizon, deadline=deadline)
        forecasts = [check_finite_forecast(f, "pipeline") for f in forecasts]
        loss = float(panel_loss(metric, split.full, forecasts))
        if not math.isfinite(loss):
            raise ArithmeticError("validation loss is not finite")
        if deadline.expired():
            raise TrialTimeout("trial finished after its deadline")
    except TrialTimeout as exc:
        status, error, forecasts = TIMED_OUT, str(exc), None
    except Exception as exc:  # any pipeline fault becomes a failed trial
        status, error, forecasts = FAILED, f"{type(exc).__name__}: {exc}", None
        logger.debug("trial %d failed:\n%s", index, traceback.format_exc())
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return TrialRecord(
        index=index,
        config=config,
        budget=float(budget),
        status=status,
        loss=loss if status == OK else None,
        penalty_loss=None if status == OK else float(penalty),
        wall_ms=wall_ms,
        rung=rung,
        bracket=bracket,
        n_train_obs=int(train.n_observations),
        error=error,
        forecasts=forecasts if (status == OK and keep_forecasts) else None,
    )


# -- optimization loop --------------------------------------------------------


@dataclass
class OptimizationResult:
    history: TrialHistory
    ensemble: object
    members: dict
    report: dict
    split: object
    space: object
    prior_report: object = None
    dataset: object = None
    run_config: object = None

    def forecast(self, horizon=None, dataset=None, deadline=NO_DEADLINE):
        """Ensemble forecast past the end of the full dataset."""
        dataset = self.dataset if dataset is None else dataset
        horizon = dataset.horizon if horizon is None else horizon
        out = {}
        for cid, pipe in self.members.items():
            try:
                out[cid] = pipe.predict(dataset, horizon=horizon, deadline=deadline)
            except Exception as exc:
                warnings.warn(f"member {cid} failed to forecast: {exc}", RuntimeWarning)
                out[cid] = None
        return ensemble_forecast(self.ensemble, out)


class _Search:
    """Coordinator state of one optimization run."""

    def __init__(self, dataset, rc, kb, pipeline_factory, space):
        self.rc = rc
        self.space = space
        self.factory = pipeline_factory
        self.t_start = time.monotonic()
        self.soft = Deadline(self.t_start + rc.time_budget_s)
        self.hard = Deadline(self.t_start + rc.time_budget_s + rc.grace_period_s)
        self.split = temporal_holdout(dataset, dataset.horizon)
        self.history = TrialHistory()
        self.rng = np.random.default_rng(rc.seed)
        self.workers = resolve_workers(rc.workers)
        self.n_configs = 0
        self.prior, self.prior_report = None, None
        self.model = None
        if rc.uses_prior:
            if kb is None:
                raise ValueError(f"mode {rc.ablation_mode} needs a knowledge base")
            kb = kb.exclude(dataset.name)
            if len(kb):
                self.prior, self.prior_report = build_prior(
                    kb, self.split.train, space, n_d=rc.n_d, h=rc.h, return_report=True
                )
            else:
                logger.warning("knowledge base has no entry besides %r; running without prior",
                               dataset.name)
        spec = rc.budget_spec
        longest = max(s.length for s in self.split.train.series)
        self.fidelity = rc.uses_fidelity and longest > rc.l_min
        self.spec = spec
        self.initial = self._initial_design()

    # stopping rules
    def may_start_trial(self):
        if self.history.n == 0:
            return True
        if self.soft.expired():
            return False
        return self.rc.max_trials is None or self.history.n < self.rc.max_trials

    def may_start_config(self):
        if self.history.n == 0:
            return True
        if not self.may_start_trial():
            return False
        return self.rc.max_configs is None or self.n_configs < self.rc.max_configs

    def _initial_design(self):
        configs = [self.space.default(t) for t in TEMPLATES]
        seen = {c.key() for c in configs}
        tries = 0
        while len(configs) < self.rc.n_initial and tries < 100 * self.rc.n_initial:
            tries += 1
            c = sample_prior(self.prior, self.rng, self.space)
            if c.key() not in seen:
                seen.add(c.key())
                configs.append(c)
        return configs

    def next_config(self):
        if self.initial:
            return self.initial.pop(0)
        f_min = self.history.incumbent_loss()
        return propose(
            self.model,
            self.space,
            self.history,
            prior=self.prior,
            beta=self.rc.beta,
            rng=self.rng,
            budget=self.rc.b_max,
            f_min=f_min,
            exclude=self.history.evaluated_keys(),
        )

    def _trial_deadline(self):
        if self.rc.trial_timeout_s is None:
            return self.hard
        return self.hard.earliest(Deadline.after(self.rc.trial_timeout_s))

    def _record(self, rec):
        self.history.append(rec)
        self.model = fit_surrogate(self.history, self.space, seed=self.rc.seed + rec.index,
                                   log_target=True)

    def run_trials(self, tasks):
        """Evaluate ``[(config, budget, rung, bracket)]``; return the records in task order."""
        records = []
        if self.workers == 1 or len(tasks) == 1:
            for config, budget, rung, bracket in tasks:
                rec = evaluate_trial(
                    config, budget, self.split, self._trial_deadline(), self.rc.metric,
                    self.rc.l_min, self.rc.seed, self.history.n, self.history.penalty(),
                    self.factory, rung, bracket, keep_forecasts=budget >= self.rc.b_max,
                )
                self._record(rec)
                records.append(rec)
            return records
        penalty = self.history.penalty()
        base = self.history.n
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [
                pool.submit(
                    evaluate_trial, config, budget, self.split, self._trial_deadline(),
                    self.rc.metric, self.rc.l_min, self.rc.seed, base + i, penalty,
                    self.factory, rung, bracket, budget >= self.rc.b_max,
                )
                for i, (config, budget, rung, bracket) in enumerate(tasks)
            ]
            for fut in futures:
                rec = fut.result()
                self._record(rec)
                records.append(rec)
        return records

    def _new_configs(self, n):
        """Up to ``n`` fresh configurations, respecting the stopping rules."""
        out = []
        while len(out) < n and self.may_start_config():
            c = self.next_config()
            self.n_configs += 1
            out.append(c)
            if self.workers == 1:
                break
        return out

    def run(self):
        if self.fidelity:
            self._run_brackets()
        else:
            self._run_single_budget()

    def _run_single_budget(self):
        while self.may_start_config():
            configs = self._new_configs(1 if self.workers == 1 else self.workers)
            if not configs:
                break
            self.run_trials([(c, self.rc.b_max, 0, 0) for c in configs])

    def _run_brackets(self):
        size = self.spec.eta ** (self.spec.n_rungs - 1)
        schedule = sh_schedule(self.spec, size)
        bracket = 0
        while self.may_start_config():
            results = []
            # rung 0: fresh configurations, one proposal per completed trial
            while len(results) < schedule[0].n_configs and self.may_start_config():
                want = schedule[0].n_configs - len(results)
                configs = self._new_configs(min(want, self.workers))
                if not configs:
                    break
                recs = self.run_trials([(c, schedule[0].budget, 0, bracket) for c in configs])
                results.extend((r.config, r.loss) for r in recs)
            for rung in schedule[1:]:
                survivors = promote(results, min(rung.n_configs, len(results)))
                if not survivors:
                    break
                results = []
                for k in range(0, len(survivors), self.workers):
                    if not self.may_start_trial():
                        break
                    chunk = survivors[k:k + self.workers]
                    recs = self.run_trials([(c, rung.budget, rung.index, bracket) for c in chunk])
                    results.extend((r.config, r.loss) for r in recs)
                if not results:
                    break
            bracket += 1


def _select_ensemble(search, rc):
    top = rc.b_max
    eligible = [r for r in search.history if r.ok and r.budget >= top and r.forecasts is not None]
    if not eligible:
        # fall back to the highest budget with a successful evaluation
        ok = [r for r in search.history if r.ok and r.forecasts is not None]
        if not ok:
            return None, []
        top = max(r.budget for r in ok)
        eligible = [r for r in ok if r.budget == top]
    pool = CandidatePool.from_split(
        search.split, [Candidate(r.index, r.forecasts, r.loss, r.config) for r in eligible]
    )
    return ensemble_select(pool, rc.ensemble_k, rc.metric), eligible


def _refit_members(search, ens, eligible, dataset, rc):
    by_id = {r.index: r for r in eligible}
    deadline = Deadline(search.hard.at + REFIT_SLACK_S)
    members = {}
    for cid in sorted(ens.members):
        rec = by_id[cid]
        pipe = search.factory(rec.config, dataset.seasonal_period, rc.seed)
        try:
            members[cid] = pipe.fit(dataset, deadline=deadline)
        except Exception as exc:
            warnings.warn(f"ensemble member {cid} failed to refit and was dropped: {exc}",
                          RuntimeWarning)
    return members


def optimize(dataset, run_config=None, kb=None, pipeline_factory=build_pipeline, out_dir=None,
             space=None, data_paths=None):
    """Search the joint space for ``dataset`` and return the fitted ensemble.

    Parameters
    ----------
    dataset : PanelDataset
        Training data; its final ``horizon`` steps serve as validation window.
    run_config : RunConfig
    kb : MetaKnowledgeBase, optional
        Required by the warm-starting modes; the entry named like ``dataset``
        is excluded before building the prior.
    pipeline_factory : callable
        ``(config, seasonal_period, seed) -> pipeline``.
    out_dir : path, optional
        Directory for ``trials.jsonl``, ``timings.jsonl``, ``ensemble.json``,
        ``members.pkl`` and ``report.json``.
    """
    rc = run_config or RunConfig()
    space = space or default_space()
    search = _Search(dataset, rc, kb, pipeline_factory, space)
    search.run()

    ens, eligible = _select_ensemble(search, rc)
    members = {}
    if ens is not None:
        members = _refit_members(search, ens, eligible, dataset, rc)
        if not members:
            warnings.warn("every ensemble member failed to refit", RuntimeWarning)
    wall = time.monotonic() - search.t_start
    report = _report(search, ens, rc, wall, dataset, members)
    result = OptimizationResult(
        history=search.history, ensemble=ens, members=members, report=report,
        split=search.split, space=space, prior_report=search.prior_report,
        dataset=dataset, run_config=rc,
    )
    if out_dir is not None:
        write_artifacts(result, out_dir, data_paths)
    if ens is None:
        raise RuntimeError(
            "every trial failed; see the trial log"
            + (f" in {out_dir}" if out_dir is not None else "")
        )
    return result


def _report(search, ens, rc, wall, dataset, members):
    hist = search.history
    counts = {s: sum(r.status == s for r in hist) for s in (OK, FAILED, TIMED_OUT)}
    best = min((r.loss for r in hist if r.ok and r.budget >= rc.b_max), default=None)
    return {
        "dataset": dataset.name,
        "mode": rc.ablation_mode,
        "seed": rc.seed,
        "metric": rc.metric,
        "n_trials": hist.n,
        "n_configs": search.n_configs,
        "status_counts": counts,
        "best_loss": best,
        "ensemble_loss": None if ens is None else ens.loss,
        "ensemble_size": 0 if ens is None else ens.size,
        "n_refitted_members": len(members),
        "multi_fidelity": search.fidelity,
        "warm_start": search.prior is not None,
        "total_train_obs": int(sum(r.n_train_obs for r in hist)),
        "wall_time_s": wall,
        "space_version": search.space.version,
        "run_config": asdict(rc),
    }


def write_artifacts(result, out_dir, data_paths=None):
    os.makedirs(out_dir, exist_ok=True)
    space = result.space
    result.history.write_jsonl(os.path.join(out_dir, "trials.jsonl"), space)
    result.history.write_timings(os.path.join(out_dir, "timings.jsonl"))
    report = dict(result.report)
    if data_paths:
        report["data"] = dict(data_paths)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    if result.ensemble is None:
        return
    by_id = {r.index: r for r in result.history}
    extra = {
        "configs": {str(cid): by_id[cid].config.to_dict() for cid in result.ensemble.members},
        "refitted": sorted(result.members),
        "models": "members.pkl",
        "dataset": result.dataset.name,
        "horizon": result.dataset.horizon,
    }
    if data_paths:
        extra["data"] = dict(data_paths)
    write_manifest(result.ensemble, os.path.join(out_dir, "ensemble.json"), extra)
    with open(os.path.join(out_dir, "members.pkl"), "wb") as fh:
        pickle.dump({"ensemble": result.ensemble, "members": result.members}, fh)


# -- estimator facade ---------------------------------------------------------


class AutoForecaster(BaseEstimator):
    """Estimator wrapper around :func:`optimize`.

    Examples
    --------
    >>> model = AutoForecaster(time_budget_s=30, grace_period_s=5)   # doctest: +SKIP
    >>> model.fit(panel).predict()                                   # doctest: +SKIP
    """

    def __init__(self, time_budget_s=300, grace_period_s=60, seed=0, metric="mase",
                 ablation_mode=TEMPLATES_MF, max_trials=None, ensemble_k=10, kb=None):
        self.time_budget_s = time_budget_s
        self.grace_period_s = grace_period_s
        self.seed = seed
        self.metric = metric
        self.ablation_mode = ablation_mode
        self.max_trials = max_trials
        self.ensemble_k = ensemble_k
        self.kb = kb

    def fit(self, dataset):
        rc = RunConfig(
            time_budget_s=self.time_budget_s, grace_period_s=self.grace_period_s,
            seed=self.seed, metric=self.metric, ablation_mode=self.ablation_mode,
            max_trials=self.max_trials, ensemble_k=self.ensemble_k,
        )
        self.result_ = optimize(dataset, rc, kb=self.kb)
        self.dataset_ = dataset
        return self

    def predict(self, horizon=None, dataset=None):
        check_is_fitted(self, "result_")
        return self.result_.forecast(horizon=horizon, dataset=dataset)


# -- knowledge base from run directories --------------------------------------


def build_priors(run_dirs, n_c=10, h=200, base=None, space=None):
    """Knowledge base from the artifacts of finished runs.

    Every run directory must hold ``trials.jsonl`` and a ``report.json``
    whose ``data`` entry points at the dataset files. Runs on the same
    dataset are merged and re-ranked; ``base`` (a knowledge base) is merged
    into. A run made with another search space version is an error.
    """
    from .data import load_dataset
    from .exceptions import SchemaError
    from .metalearn import MetaKnowledgeBase

    space = space or default_space()
    kb = base if base is not None else MetaKnowledgeBase(space.version)
    if kb.space_version != space.version:
        raise SchemaError(f"knowledge base space {kb.space_version} != current {space.version}")
    for run_dir in run_dirs:
        with open(os.path.join(run_dir, "report.json"), encoding="utf-8") as fh:
            report = json.load(fh)
        if report.get("space_version") != space.version:
            raise SchemaError(
                f"run {run_dir} used search space {report.get('space_version')}, current "
                f"space is {space.version}"
            )
        data = report.get("data")
        if not data:
            raise SchemaError(f"run {run_dir} does not record its dataset files")
        dataset = load_dataset(data["csv"], data["meta"], name=report["dataset"])
        history = TrialHistory.read_jsonl(os.path.join(run_dir, "trials.jsonl"))
        for r in history:
            space.validate(r.config)
        kb.add_run(dataset, history.records, n_c=n_c, h=h)
    return kb
