"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest -m acceptance -s`` to see the lines as they are produced;
they are also collected in the "acceptance criteria" summary section.
"""
import itertools
import math
import time
import warnings

import numpy as np
import pytest

from chronoml.benchmark import tabulate
from chronoml.config_space import default_space
from chronoml.data import from_arrays, temporal_holdout
from chronoml.engine import (
    FULL,
    TEMPLATES_MF,
    TEMPLATES_ONLY,
    TEMPLATES_WS,
    RunConfig,
    evaluate_trial,
    optimize,
)
from chronoml.ensemble import Candidate, CandidatePool, average_forecasts, ensemble_select
from chronoml.exceptions import UndefinedScaleError
from chronoml.fidelity import BudgetSpec, sh_schedule, window_length
from chronoml.forecasters import MLPNetwork
from chronoml.metalearn import MetaKnowledgeBase, distance_weights, dtw, fit_prior
from chronoml.metrics import mase, panel_loss, rmse, smape
from chronoml.pipeline import build_pipeline
from chronoml.surrogate import RandomForestSurrogate, ei_from_moments, expected_improvement, prior_weighted_acquisition
from chronoml.synth import ar_process, panel_family, trend_season
from chronoml.trials import FAILED, OK, TIMED_OUT

pytestmark = pytest.mark.acceptance

SPACE = default_space()


def quiet_optimize(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return optimize(*args, **kwargs)


# -- 1 ------------------------------------------------------------------------


def test_ac01_metric_oracles(criterion):
    t0 = time.perf_counter()
    checks = [
        abs(mase([5, 6], [5, 6], [1, 2, 3, 4], 1) - 0.0) <= 1e-9,
        abs(mase([5, 6], [4, 4], [1, 2, 3, 4], 1) - 1.5) <= 1e-9,
        abs(smape([1, 2], [1, 2]) - 0.0) <= 1e-9,
        abs(smape([1], [3]) - 1.0) <= 1e-9,
        abs(smape([0], [0]) - 0.0) <= 1e-9,
        abs(rmse([0, 0], [3, 4]) - math.sqrt(12.5)) <= 1e-9,
        abs(rmse([1], [2]) - 1.0) <= 1e-9,
    ]
    try:
        mase([1], [1], [2, 2, 2], 1)
        checks.append(False)
    except UndefinedScaleError:
        checks.append(True)
    elapsed = time.perf_counter() - t0
    criterion(1, "metric oracles", all(checks) and elapsed < 1.0,
              f"{sum(checks)}/{len(checks)} fixtures, {elapsed:.3f}s")


# -- 2 ------------------------------------------------------------------------


def enumerate_alignments(a, b):
    """Minimum L1 cost over all monotone alignment paths, by explicit enumeration."""
    n, m = len(a), len(b)
    best = math.inf
    stack = [(0, 0, abs(a[0] - b[0]))]
    while stack:
        i, j, cost = stack.pop()
        if i == n - 1 and j == m - 1:
            best = min(best, cost)
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            u, v = i + di, j + dj
            if u < n and v < m:
                stack.append((u, v, cost + abs(a[u] - b[v])))
    return best


def test_ac02_dtw_oracle(criterion):
    gen = np.random.default_rng(2)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        a = gen.normal(size=gen.integers(1, 7)).tolist()
        b = gen.normal(size=gen.integers(1, 7)).tolist()
        if dtw(a, b) != enumerate_alignments(a, b):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    criterion(2, "DTW equals exhaustive alignment minimum", mismatches == 0 and elapsed < 10.0,
              f"{mismatches} mismatches over 200 pairs, {elapsed:.2f}s")


# -- 3 ------------------------------------------------------------------------


def test_ac03_distance_weights(criterion):
    w = distance_weights([2.0, 4.0, 6.0]).tolist()
    flat = distance_weights([3.0, 3.0, 3.0]).tolist()
    criterion(3, "distance weights", w == [1.0, 0.5, 0.0] and flat == [1.0, 1.0, 1.0], f"{w}, {flat}")


# -- 4 ------------------------------------------------------------------------


def test_ac04_prior_validity(criterion):
    gen = np.random.default_rng(4)
    grid = (np.arange(10_000) + 0.5) / 10_000
    worst_integral, worst_mass = 0.0, 0.0
    for _ in range(10):
        configs = [SPACE.sample(gen) for _ in range(int(gen.integers(1, 30)))]
        prior = fit_prior(SPACE, configs, gen.random(len(configs)))
        for name, marginal in prior.marginals.items():
            if SPACE[name].is_categorical:
                worst_mass = max(worst_mass, abs(math.fsum(marginal.masses) - 1.0))
            else:
                worst_integral = max(worst_integral, abs(marginal.pdf(grid).mean() - 1.0))

    class ConstantPrior:
        def density_encoded(self, X):
            return np.full(len(X), 3.7)

    invariant = 0
    for trial in range(100):
        xs = gen.random(6)
        model = RandomForestSurrogate(seed=trial).fit(np.column_stack([np.zeros(6), xs, np.ones(6)]),
                                                      (xs - gen.random()) ** 2)
        X = np.column_stack([np.zeros(50), gen.random(50), np.ones(50)])
        f_min = float(gen.uniform(0.0, 0.2))
        n = int(gen.integers(1, 100))
        plain = expected_improvement(model, X, f_min)
        weighted = prior_weighted_acquisition(model, X, f_min, ConstantPrior(), n=n)
        invariant += int(np.argmax(plain) == np.argmax(weighted))
    ok = worst_integral <= 1e-3 and worst_mass <= 4 * np.finfo(float).eps and invariant == 100
    criterion(4, "prior validity", ok,
              f"max |integral-1| {worst_integral:.1e}, max |mass sum-1| {worst_mass:.1e}, "
              f"argmax invariant {invariant}/100")


# -- 5 ------------------------------------------------------------------------


def test_ac05_ei_monte_carlo(criterion):
    gen = np.random.default_rng(5)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        mu, sigma = gen.normal(), gen.uniform(0.2, 2.0)
        f_min = mu + gen.uniform(-0.5 * sigma, 1.5 * sigma)
        y = gen.normal(mu, sigma, 1_000_000)
        mc = np.mean(np.maximum(f_min - y, 0.0))
        worst = max(worst, abs(float(ei_from_moments(mu, sigma, f_min)) - mc) / mc)
    elapsed = time.perf_counter() - t0
    criterion(5, "EI closed form vs Monte Carlo", worst < 0.02 and elapsed < 30.0,
              f"max relative error {worst:.4f}, {elapsed:.1f}s")


# -- 6 ------------------------------------------------------------------------


def test_ac06_fidelity(criterion):
    table = [
        window_length(1.0, 1000, 100) == 1000,
        window_length(0.25, 1000, 100) == 250,
        all(window_length(b, 50, 100) == 50 for b in (1 / 9, 1 / 3, 1.0)),
    ]
    t = np.arange(900)
    ds = from_arrays("f", [10 + 0.02 * t + np.sin(2 * np.pi * t / 12)], horizon=12, seasonal_period=12)
    split = temporal_holdout(ds, 12)
    bitwise = True
    for template in ("statistical", "ml"):
        config = SPACE.default(template)
        a = evaluate_trial(config, 1.0, split, l_min=100, keep_forecasts=True)
        b = evaluate_trial(config, 1.0, split, l_min=10**9, keep_forecasts=True)
        bitwise &= a.loss == b.loss and np.array_equal(a.forecasts[0], b.forecasts[0])
    spec = BudgetSpec(b_min=1 / 9, b_max=1.0, eta=3)
    ladder = np.allclose(spec.budgets(), [1 / 9, 1 / 3, 1.0])
    survivors = all(
        [r.n_configs for r in sh_schedule(spec, n)] == [n, n // 3 or 1, n // 9 or 1]
        for n in range(1, 40)
    )
    ok = all(table) and bitwise and ladder and survivors
    criterion(6, "fidelity correctness", ok,
              f"table {all(table)}, bitwise {bitwise}, ladder {ladder}, survivors {survivors}")


# -- 7 ------------------------------------------------------------------------


def max_fd_error(net, X, y, eps=1e-6):
    _, grads = net.loss_and_grads(X, y)
    worst = 0.0
    for p, g in zip(net.params, grads):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + eps
            up = net.loss_and_grads(X, y)[0]
            p[idx] = orig - eps
            down = net.loss_and_grads(X, y)[0]
            p[idx] = orig
            numeric = (up - down) / (2 * eps)
            worst = max(worst, abs(numeric - g[idx]) / max(abs(numeric), abs(g[idx]), 1e-7))
    return worst


def test_ac07_mlp_gradients(criterion):
    gen = np.random.default_rng(7)
    t0 = time.perf_counter()
    errors = []
    for k in range(25):
        sizes = [int(gen.integers(1, 6))] + [int(gen.integers(2, 8)) for _ in range(gen.integers(1, 3))] + [1]
        net = MLPNetwork(sizes, seed=k)
        errors.append(max_fd_error(net, gen.normal(size=(8, sizes[0])), gen.normal(size=8)))
    elapsed = time.perf_counter() - t0
    criterion(7, "MLP backprop vs finite differences", max(errors) < 1e-4 and elapsed < 30.0,
              f"{len(errors)} networks, max relative error {max(errors):.1e}, {elapsed:.1f}s")


# -- 8 ------------------------------------------------------------------------


def _multiset_loss(pool, combo):
    preds = [pool.candidates[i].forecasts for i in combo]
    return pool.loss_of(average_forecasts(preds, [1] * len(combo)), "mase")


def exhaustive_best(pool, k):
    return min(
        _multiset_loss(pool, combo)
        for size in range(1, k + 1)
        for combo in itertools.combinations_with_replacement(range(len(pool)), size)
    )


def greedy_trace(pool, k):
    current = [min(range(len(pool)), key=lambda i: (_multiset_loss(pool, [i]), i))]
    while len(current) < k:
        value, j = min((_multiset_loss(pool, current + [j]), j) for j in range(len(pool)))
        if not value < _multiset_loss(pool, current):
            break
        current.append(j)
    return _multiset_loss(pool, current)


def _pool(values, actual):
    insample = [np.array([[0.0], [1.0], [0.0], [1.0]])]
    cands = [Candidate(i, [np.asarray(v, dtype=float).reshape(-1, 1)]) for i, v in enumerate(values)]
    return CandidatePool([np.asarray(actual, dtype=float).reshape(-1, 1)], insample, cands, 1)


def test_ac08_ensemble_guarantee(criterion):
    # suite runs: the ensemble never loses to the best single candidate
    suite = [trend_season(seed=0, length=120), trend_season(seed=1, length=120, amplitude=3.0),
             ar_process(seed=0, length=120), panel_family(seed=3, n_datasets=1, length=120)[0]]
    run_ok = []
    for k, ds in enumerate(suite):
        rc = RunConfig(time_budget_s=120, grace_period_s=10, seed=k, ablation_mode=TEMPLATES_ONLY,
                       max_trials=15, ensemble_k=10)
        rep = quiet_optimize(ds, rc).report
        run_ok.append(rep["ensemble_loss"] <= rep["best_loss"])

    # greedy-optimal fixtures agree with exhaustive search over multisets of size <= k
    fixtures = [([[1.0], [3.0], [10.0]], [2.0]), ([[2.6], [1.0], [0.0]], [2.0]),
                ([[2.9], [1.5], [6.0]], [2.0]), ([[5.0]], [2.0]), ([[3.0], [3.0]], [2.0]),
                ([[1.0, 3.0], [3.0, 1.0], [2.0, 2.0], [0.0, 0.0]], [2.0, 2.0]),
                ([[0.0, 2.5], [4.0, 2.5], [2.2, 2.0], [9.0, 9.0]], [2.0, 2.0])]
    fixture_ok = [
        abs(ensemble_select(_pool(v, a), k=k).loss - exhaustive_best(_pool(v, a), k)) <= 1e-12
        for v, a in fixtures for k in (1, 2, 3)
    ]
    # random pools of <= 4 candidates: greedy equals the enumerated greedy trace and is
    # bracketed by the exhaustive optimum and the best single candidate; pools where
    # greedy is suboptimal (e.g. [4, 0, 3] around 2 with k=2) are counted, not failed
    gen = np.random.default_rng(8)
    trace_ok, bounded_ok, optimal = 0, 0, 0
    n_random = 300
    for _ in range(n_random):
        n, k = int(gen.integers(1, 5)), int(gen.integers(1, 4))
        pool = _pool(gen.normal(size=(n, 2)).tolist(), gen.normal(size=2))
        got = ensemble_select(pool, k=k).loss
        best = exhaustive_best(pool, k)
        single = min(_multiset_loss(pool, [i]) for i in range(n))
        trace_ok += abs(got - greedy_trace(pool, k)) <= 1e-12
        bounded_ok += best - 1e-12 <= got <= single + 1e-12
        optimal += abs(got - best) <= 1e-12
    ok = all(run_ok) and all(fixture_ok) and trace_ok == n_random and bounded_ok == n_random
    criterion(8, "ensemble guarantee", ok,
              f"suite runs {sum(run_ok)}/{len(run_ok)}, fixtures {sum(fixture_ok)}/{len(fixture_ok)}, "
              f"greedy trace {trace_ok}/{n_random}, exhaustive-optimal {optimal}/{n_random}")


# -- 9 ------------------------------------------------------------------------


def seasonal_naive_mase(dataset):
    m = dataset.seasonal_period
    H = dataset.horizon
    forecasts = [s.targets[-H - m:-H][np.arange(H) % m] for s in dataset.series]
    return panel_loss("mase", dataset, forecasts)


def knowledge_base_from(datasets, max_trials, seed0):
    kb = MetaKnowledgeBase(SPACE.version)
    for i, ds in enumerate(datasets):
        split = temporal_holdout(ds, ds.horizon)
        rc = RunConfig(time_budget_s=300, grace_period_s=10, seed=seed0 + i, ablation_mode=TEMPLATES_ONLY,
                       max_trials=max_trials, ensemble_k=1)
        kb.add_run(split.train, quiet_optimize(split.train, rc).history.records)
    return kb


def test_ac09_end_to_end_quality(criterion):
    t0 = time.perf_counter()
    history = [trend_season(seed=100 + i, length=300, period=12, horizon=12, amplitude=a, slope=s)
               for i, (a, s) in enumerate([(5, 0.02), (10, 0.05), (15, 0.1), (8, 0.0), (12, 0.08)])]
    kb = knowledge_base_from(history, max_trials=30, seed0=900)
    wins, lines = 0, []
    for seed in range(5):
        ds = trend_season(seed=seed, length=300, period=12, horizon=12)  # noise = 10% of amplitude
        split = temporal_holdout(ds, ds.horizon)
        rc = RunConfig(time_budget_s=120, grace_period_s=60, seed=seed, ablation_mode=FULL, max_trials=60)
        result = quiet_optimize(split.train, rc, kb=kb)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            score = panel_loss("mase", ds, result.forecast(ds.horizon))
        baseline = seasonal_naive_mase(ds)
        wins += score < baseline
        lines.append(f"{score:.3f}<{baseline:.3f}" if score < baseline else f"{score:.3f}>={baseline:.3f}")
    elapsed = time.perf_counter() - t0
    criterion(9, "end-to-end quality vs seasonal naive", wins >= 4 and elapsed <= 15 * 60,
              f"{wins}/5 seeds beat the baseline [{', '.join(lines)}], {elapsed:.0f}s")


# -- 10 -----------------------------------------------------------------------

AC10_TRIALS = 40
AC10_KB_TRIALS = 40
AC10_SERIES = 10
REACH_RTOL = 1e-6


def trials_to_reach(losses, target):
    """1-based index of the first loss within ``REACH_RTOL`` of ``target`` (inf if never)."""
    for i, loss in enumerate(losses, 1):
        if loss <= target * (1 + REACH_RTOL):
            return i
    return math.inf


def test_ac10_warm_start_speedup(criterion):
    t0 = time.perf_counter()
    family = panel_family(seed=0, n_datasets=6, n_series=AC10_SERIES, length=240)
    kb = MetaKnowledgeBase(SPACE.version)
    for i, ds in enumerate(family):
        rc = RunConfig(time_budget_s=600, grace_period_s=10, seed=100 + i, ablation_mode=TEMPLATES_ONLY,
                       max_trials=AC10_KB_TRIALS, ensemble_k=1)
        kb.add_run(ds, quiet_optimize(ds, rc).history.records)
    ratios, strict = [], []
    for seed in range(10):
        ds = family[seed % len(family)]
        runs = {}
        for mode in (TEMPLATES_ONLY, TEMPLATES_WS):
            rc = RunConfig(time_budget_s=600, grace_period_s=10, seed=seed, ablation_mode=mode,
                           max_trials=AC10_TRIALS, ensemble_k=1)
            hist = quiet_optimize(ds, rc, kb=kb).history
            runs[mode] = [r.loss if r.ok else math.inf for r in hist]
        target = min(runs[TEMPLATES_ONLY])
        reach = trials_to_reach(runs[TEMPLATES_WS], target)
        ratios.append(reach / len(runs[TEMPLATES_ONLY]))
        # stricter variant, relative to the trial at which ONLY first found its best; reported only
        strict.append(reach / (runs[TEMPLATES_ONLY].index(target) + 1))
    median = float(np.median(ratios))
    elapsed = time.perf_counter() - t0
    criterion(10, "warm-start speedup", median <= 0.5 and elapsed <= 30 * 60,
              f"median trial ratio {median:.3f} [{', '.join(f'{r:.2f}' for r in ratios)}], "
              f"vs ONLY's best-at trial {float(np.median(strict)):.3f}, {elapsed:.0f}s")


# -- 11 -----------------------------------------------------------------------


def test_ac11_multi_fidelity_efficiency(criterion):
    obs_ratios, loss_ratios = [], []
    for seed in range(5):
        ds = trend_season(seed=seed, length=5000, period=12, horizon=12)
        reports = {}
        for mode in (TEMPLATES_ONLY, TEMPLATES_MF):
            rc = RunConfig(time_budget_s=900, grace_period_s=60, seed=seed, ablation_mode=mode,
                           max_configs=18, ensemble_k=1)
            reports[mode] = quiet_optimize(ds, rc).report
        only, mf = reports[TEMPLATES_ONLY], reports[TEMPLATES_MF]
        assert only["n_configs"] == mf["n_configs"] == 18 and mf["multi_fidelity"]
        obs_ratios.append(mf["total_train_obs"] / only["total_train_obs"])
        loss_ratios.append(mf["best_loss"] / only["best_loss"])
    ok = max(obs_ratios) <= 0.6 and max(loss_ratios) <= 1.1
    criterion(11, "multi-fidelity efficiency", ok,
              f"observation ratios [{', '.join(f'{r:.3f}' for r in obs_ratios)}], "
              f"MASE ratios [{', '.join(f'{r:.3f}' for r in loss_ratios)}]")


# -- 12 -----------------------------------------------------------------------


class _NaNPipeline:
    def fit(self, dataset, deadline=None):
        return self

    def predict(self, dataset, horizon=None, deadline=None):
        return [np.full((horizon, 1), np.nan) for _ in dataset.series]


class _ThrowingTransformPipeline(_NaNPipeline):
    def fit(self, dataset, deadline=None):
        raise ValueError("transform failed on purpose")


class _SlowPipeline(_NaNPipeline):
    def fit(self, dataset, deadline=None):
        while True:
            deadline.check()
            time.sleep(0.01)


def _faulty_factory(config, m, seed):
    template = config["template"]
    if template == "ml":
        return _NaNPipeline()
    if template == "dnn":
        return _ThrowingTransformPipeline() if config["dnn.n_layers"] == 1 else _SlowPipeline()
    return build_pipeline(config, m, seed)


def _expected_status(config):
    template = config["template"]
    if template == "statistical":
        return OK
    if template == "ml" or config["dnn.n_layers"] == 1:
        return FAILED
    return TIMED_OUT


def test_ac12_robustness(criterion):
    ds = trend_season(seed=12, length=120, horizon=12)
    crashes, wrong, seen = 0, 0, set()
    for seed in range(3):
        rc = RunConfig(time_budget_s=4.0, grace_period_s=2.0, seed=seed, ablation_mode=TEMPLATES_ONLY,
                       trial_timeout_s=0.3, max_trials=25)
        try:
            hist = quiet_optimize(ds, rc, pipeline_factory=_faulty_factory).history
        except Exception:
            crashes += 1
            continue
        for r in hist:
            seen.add(r.status)
            wrong += r.status != _expected_status(r.config)
            wrong += (r.status == OK) != (r.loss is not None)
            wrong += r.status != OK and not (r.penalty_loss and r.penalty_loss > 0)

    raw = {("d", 0): {"A": 1.0, "B": None, "C": 2.0}, ("e", 0): {"A": math.nan, "B": 3.0, "C": 1.0}}
    rows, _ = tabulate(raw, ["A", "B", "C"])
    by = {(r["dataset"], r["mode"]): r for r in rows}
    imputation = (
        by[("d", "B")]["metric"] == 2.0 + 1e-6 and by[("d", "B")]["rank"] == 3.0
        and by[("e", "A")]["metric"] == 3.0 + 1e-6 and by[("e", "A")]["rank"] == 3.0
    )
    ok = crashes == 0 and wrong == 0 and seen == {OK, FAILED, TIMED_OUT} and imputation
    criterion(12, "robustness protocol", ok,
              f"{crashes} crashes, {wrong} mis-statused records, statuses {sorted(seen)}, "
              f"imputation {imputation}")


# -- 13 -----------------------------------------------------------------------


def test_ac13_determinism(criterion, tmp_path):
    ds = panel_family(seed=13, n_datasets=1, n_series=2, length=150)[0]
    blobs = []
    for name in ("a", "b"):
        rc = RunConfig(time_budget_s=300, grace_period_s=10, seed=13, ablation_mode=TEMPLATES_ONLY,
                       max_trials=20, workers=1)
        quiet_optimize(ds, rc, out_dir=tmp_path / name)
        blobs.append((tmp_path / name / "trials.jsonl").read_bytes())
    criterion(13, "byte-identical trial logs", blobs[0] == blobs[1], f"{len(blobs[0])} bytes")
