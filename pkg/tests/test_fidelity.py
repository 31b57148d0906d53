import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chronoml.config_space import default_space
from chronoml.data import from_arrays, temporal_holdout
from chronoml.engine import evaluate_trial
from chronoml.fidelity import BudgetSpec, promote, sh_schedule, truncate, window_length


@pytest.mark.parametrize("b,T,l_min,expected", [
    (1.0, 1000, 100, 1000),
    (0.25, 1000, 100, 250),
    (0.05, 1000, 100, 100),
    (0.3, 50, 100, 50),
    (1 / 9, 50, 100, 50),
])
def test_window_length_table(b, T, l_min, expected):
    assert window_length(b, T, l_min) == expected


def test_window_length_rejects_bad_budget():
    with pytest.raises(ValueError):
        window_length(0.0, 10, 1)
    with pytest.raises(ValueError):
        window_length(1.5, 10, 1)


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0), st.integers(1, 5000), st.integers(1, 600))
def test_window_length_monotone_and_bounded(b1, b2, T, l_min):
    lo, hi = sorted((b1, b2))
    a, c = window_length(lo, T, l_min), window_length(hi, T, l_min)
    assert 1 <= a <= c <= T
    assert window_length(1.0, T, l_min) == T


def test_truncate_suffix_fixture():
    ds = from_arrays("x", [np.arange(1.0, 11.0)], horizon=1)
    out = truncate(ds, 0.3, 2)
    np.testing.assert_array_equal(out.series[0].targets[:, 0], [8, 9, 10])
    assert truncate(ds, 1.0, 2) is ds


@given(st.integers(5, 200), st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.integers(1, 50))
def test_truncate_suffix_nesting(T, b1, b2, l_min):
    lo, hi = sorted((b1, b2))
    ds = from_arrays("x", [np.arange(float(T))], horizon=1)
    small = truncate(ds, lo, l_min).series[0].targets[:, 0]
    big = truncate(ds, hi, l_min).series[0].targets[:, 0]
    np.testing.assert_array_equal(big[len(big) - len(small):], small)
    np.testing.assert_array_equal(big, np.arange(float(T))[T - len(big):])


def test_schedule_ladder():
    spec = BudgetSpec()
    np.testing.assert_allclose(spec.budgets(), [1 / 9, 1 / 3, 1.0])
    assert [r.n_configs for r in sh_schedule(spec, 9)] == [9, 3, 1]
    assert [r.n_configs for r in sh_schedule(spec, 1)] == [1, 1, 1]
    with pytest.raises(ValueError):
        BudgetSpec(b_min=1.0, b_max=1.0)


def test_promote_rules():
    assert promote([("a", 3.0), ("b", 1.0), ("c", 2.0)], 1) == ["b"]
    assert promote([("a", 1.0), ("b", 1.0), ("c", 2.0)], 1) == ["a"]
    assert promote([("a", None), ("b", None)], 1) == ["a"]
    assert promote([("a", None), ("b", 5.0)], 2) == ["b", "a"]


def test_full_budget_equals_plain_evaluation():
    ds = from_arrays("x", [np.sin(np.arange(800) / 3.0) + np.arange(800) * 0.01], horizon=6, seasonal_period=12)
    split = temporal_holdout(ds, 6)
    config = default_space().default("statistical")
    a = evaluate_trial(config, 1.0, split, l_min=100)
    b = evaluate_trial(config, 1.0, split, l_min=10**6)
    assert a.loss == b.loss
    assert a.n_train_obs == b.n_train_obs == split.train.series[0].length
    c = evaluate_trial(config, 1 / 9, split, l_min=100)
    assert c.n_train_obs < a.n_train_obs
