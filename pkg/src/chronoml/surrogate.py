"""Random-forest surrogate, expected improvement and prior-weighted proposals."""
import math

import numpy as np
from scipy.stats import norm
from sklearn.ensemble import RandomForestRegressor

N_TREES = 32
VARIANCE_FLOOR = 1e-12
N_RANDOM = 500
N_CHAINS = 10
CHAIN_LENGTH = 20
DEFAULT_BETA = 10.0


class RandomForestSurrogate:
    """Forest over ``(encoded configuration, budget) -> loss``.

    The predictive mean is the average of the tree outputs and the variance
    their empirical variance across trees plus a small floor. With
    ``log_target`` the forest models ``log(loss)``; predictions and the
    incumbent passed to the acquisition are then on the log scale too.
    """

    def __init__(self, n_trees=N_TREES, variance_floor=VARIANCE_FLOOR, log_target=False, seed=None):
        self.n_trees = n_trees
        self.variance_floor = variance_floor
        self.log_target = log_target
        self.seed = seed

    def transform_loss(self, y):
        y = np.asarray(y, dtype=float)
        return np.log(np.maximum(y, 1e-12)) if self.log_target else y

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = self.transform_loss(y)
        n_features = X.shape[1]
        self.forest_ = RandomForestRegressor(
            n_estimators=self.n_trees,
            max_depth=None,
            max_features=max(1, math.ceil(n_features / 3)),
            bootstrap=True,
            min_samples_leaf=1,
            random_state=self.seed,
            n_jobs=1,
        ).fit(X, y)
        return self

    def predict(self, X):
        """Return predictive mean and variance for each row of ``X``."""
        # the low-level tree predictor skips per-call input validation
        X32 = np.ascontiguousarray(X, dtype=np.float32)
        per_tree = np.stack([t.tree_.predict(X32).reshape(len(X32), -1)[:, 0] for t in self.forest_.estimators_])
        mu = per_tree.mean(axis=0)
        var = per_tree.var(axis=0) + self.variance_floor
        return mu, var


def fit_surrogate(history, space, seed=None, log_target=False):
    """Fit a surrogate on ``history``; ``None`` with fewer than two ``ok`` trials."""
    if history.n_ok < 2:
        return None
    X, y = history.training_data(space)
    return RandomForestSurrogate(log_target=log_target, seed=seed).fit(X, y)


def ei_from_moments(mu, sigma, f_min):
    """Closed-form expected improvement ``E[max(f_min - Y, 0)]`` for ``Y ~ N(mu, sigma^2)``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gain = f_min - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = gain / sigma
        ei = gain * norm.cdf(z) + sigma * norm.pdf(z)
    ei = np.where(sigma > 0, ei, np.maximum(gain, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(model, X, f_min):
    """EI of ``model`` at the rows of ``X`` (encoding plus budget column)."""
    mu, var = model.predict(X)
    return ei_from_moments(mu, np.sqrt(var), f_min)


def prior_factor(density, n, beta):
    """``density ** (beta / n)``, with zero density giving zero."""
    density = np.asarray(density, dtype=float)
    if n < 1:
        raise ValueError("trial index n must be >= 1")
    with np.errstate(divide="ignore"):
        return np.where(density > 0, np.exp((beta / n) * np.log(np.where(density > 0, density, 1.0))), 0.0)


def prior_weighted_acquisition(model, X, f_min, prior=None, n=1, beta=DEFAULT_BETA):
    """Expected improvement times the decaying prior factor.

    ``X`` holds encoded configurations with the budget as final column; the
    prior is evaluated on the encoding part only. Without a prior the factor
    is one.
    """
    X = np.asarray(X, dtype=float)
    ei = expected_improvement(model, X, f_min)
    if prior is None:
        return ei
    return ei * prior_factor(prior.density_encoded(X[:, :-1]), n, beta)


def _with_budget(encoded, budget):
    return np.column_stack([encoded, np.full(len(encoded), budget)])


def propose(model, space, history, prior=None, beta=DEFAULT_BETA, rng=None, budget=1.0,
            f_min=None, n_random=N_RANDOM, n_chains=N_CHAINS, chain_length=CHAIN_LENGTH,
            exclude=None):
    """Next configuration to evaluate.

    Without a fitted model this is a prior sample (or a uniform one when no
    prior is given). Otherwise the candidate pool is ``n_random`` random
    configurations (half of them prior samples when a prior exists) plus
    ``n_chains`` local-search chains of length ``chain_length`` started at
    the best evaluated configurations; the pool member with the highest
    prior-weighted acquisition wins, ties going to the earliest generated.
    Configurations whose keys are in ``exclude`` are never returned unless
    nothing else is available.
    """
    rng = np.random.default_rng() if rng is None else rng
    if model is None:
        return prior.sample(rng) if prior is not None else space.sample(rng)

    n = max(history.n, 1)
    if f_min is None:
        f_min = history.incumbent_loss()
    f_min = float(model.transform_loss([f_min])[0])
    exclude = exclude or set()

    def score(configs):
        X = _with_budget(space.encode_many(configs), budget)
        return prior_weighted_acquisition(model, X, f_min, prior, n, beta)

    pool = []
    n_prior = n_random // 2 if prior is not None else 0
    pool.extend(space.sample(rng) for _ in range(n_random - n_prior))
    pool.extend(prior.sample(rng) for _ in range(n_prior))
    scores = list(score(pool)) if pool else []

    starts = history.best_configs(n_chains)
    if starts and chain_length > 0:
        current = list(starts)
        current_scores = score(current)
        for _ in range(chain_length):
            moves = [space.neighbors(c, 1, rng)[0] for c in current]
            move_scores = score(moves)
            pool.extend(moves)
            scores.extend(move_scores)
            for i, (c, s) in enumerate(zip(moves, move_scores)):
                if s >= current_scores[i]:
                    current[i], current_scores[i] = c, s

    scores = np.asarray(scores, dtype=float)
    allowed = np.array([c.key() not in exclude for c in pool])
    if allowed.any():
        scores = np.where(allowed, scores, -np.inf)
    return pool[int(np.argmax(scores))]
