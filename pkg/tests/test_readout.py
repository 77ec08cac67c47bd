import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgedfr.errors import InvalidParameterError, SingularSystemError, StateDivergenceError
from edgedfr.readout import (LmsState, RlsState, augment, default_step_size, lms_update, predict,
                             ridge_batch, rls_update, train_online)


def _problem(seed, T, n, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(T, n))
    d = X @ rng.normal(size=n) + rng.normal() + noise * rng.normal(size=T)
    return X, d


def test_predict_examples():
    assert predict(np.zeros(4), [1.0, 2.0, 3.0]) == 0.0
    assert predict([0.0, 0.0, 1.75], [9.0, -4.0]) == 1.75
    assert predict([2.0, -1.0, 0.5], [3.0, 4.0]) == 2.5


def test_predict_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        predict([1.0, 2.0], [1.0, 2.0])


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.floats(-5, 5), st.floats(-5, 5))
def test_predict_linear_without_bias(x1, x2, a, b):
    w = np.array([0.3, -1.2, 2.0, 0.0])
    x1, x2 = np.array(x1), np.array(x2)
    lhs = predict(w, a * x1 + b * x2)
    assert lhs == pytest.approx(a * predict(w, x1) + b * predict(w, x2), abs=1e-12 * (1 + abs(lhs)) + 1e-12)


def test_lms_single_step():
    s = LmsState.zeros(0, 0.5)
    s, e = lms_update(s, [], 1.0)
    assert e == 1.0 and s.weights.tolist() == [0.5]


def test_lms_zero_error_leaves_weights():
    s = LmsState(np.array([0.2, -0.4, 0.1]), 0.3)
    x = [1.5, 0.5]
    before = s.weights.copy()
    _, e = lms_update(s, x, predict(before, x))
    assert e == 0.0 and np.array_equal(s.weights, before)


def test_lms_bias_contracts_geometrically():
    c = 3.0
    s = LmsState.zeros(0, 0.5)
    gap = abs(s.weights[0] - c)
    for _ in range(20):
        lms_update(s, [], c)
        new_gap = abs(s.weights[0] - c)
        assert new_gap == pytest.approx(0.5 * gap, abs=1e-15)
        gap = new_gap


def test_lms_divergence_is_reported():
    s = LmsState.zeros(2, 1e300)
    with pytest.raises(StateDivergenceError):
        for _ in range(5):
            s.update([1e10, 1e10], 1e10)


def test_lms_bounded_under_step_limit():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(10_000, 8))
    d = X @ rng.normal(size=8) + 0.05 * rng.normal(size=10_000)
    B = max(float(np.sum(augment(x) ** 2)) for x in X)
    s = LmsState.zeros(8, 1.9 / B)
    _, errors = train_online(s, X, d)
    assert np.all(np.isfinite(s.weights)) and np.linalg.norm(s.weights) < 100


def test_lms_error_moving_average_non_increasing():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(3000, 4))
    d = X @ np.array([1.0, -0.5, 0.25, 2.0]) + 0.5
    s = LmsState.zeros(4, default_step_size(X, 200))
    _, errors = train_online(s, X, d)
    ma = np.convolve(errors ** 2, np.ones(100) / 100, mode="valid")[::100]
    assert np.all(np.diff(ma) <= 1e-12)


def test_rls_single_step():
    s = RlsState(np.zeros(1), np.eye(1), 1.0, 1.0)
    p_phi = s.p_matrix @ np.ones(1)
    s, e = rls_update(s, [], 1.0)
    assert e == 1.0
    assert p_phi.tolist() == [1.0]
    assert abs(s.weights[0] - 0.5) <= 1e-15
    assert abs(s.p_matrix[0, 0] - 0.5) <= 1e-15


def test_rls_zero_error_updates_only_p():
    s = RlsState.zeros(2)
    train_online(s, np.array([[1.0, 0.5], [0.2, -0.3]]), [0.7, -0.1])
    w, p = s.weights.copy(), s.p_matrix.copy()
    x = [0.4, 0.9]
    _, e = rls_update(s, x, predict(w, x))
    assert e == 0.0 and np.array_equal(s.weights, w)
    assert not np.array_equal(s.p_matrix, p)


def test_rls_matches_ridge_50x5():
    X, d = _problem(50, 50, 5)
    s, _ = train_online(RlsState.zeros(5, 1.0, 1e-4), X, d)
    assert np.max(np.abs(s.weights - ridge_batch(augment(X), d, 1e-4))) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(1, 20))
def test_rls_ridge_equivalence(seed, T, n):
    X, d = _problem(seed, T, n)
    s, _ = train_online(RlsState.zeros(n, 1.0, 1e-4), X, d)
    assert np.max(np.abs(s.weights - ridge_batch(augment(X), d, 1e-4))) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.9, 1.0))
def test_rls_p_stays_symmetric(seed, lam):
    X, d = _problem(seed, 60, 6)
    s = RlsState.zeros(6, lam, 1e-2)
    for x, t in zip(X, d):
        s.update(x, t)
        assert np.max(np.abs(s.p_matrix - s.p_matrix.T)) == 0.0


def test_rls_order_sensitivity_pinned():
    rng = np.random.default_rng(2024)
    X = rng.normal(size=(80, 3))
    d = X @ [0.5, -1.0, 2.0] + 0.3 + 0.1 * rng.normal(size=80)
    perm = np.random.default_rng(7).permutation(80)
    a, _ = train_online(RlsState.zeros(3, 0.95), X, d)
    b, _ = train_online(RlsState.zeros(3, 0.95), X[perm], d[perm])
    assert a.weights == pytest.approx(
        [0.5080867249981486, -1.0031118151408605, 2.0138353615934843, 0.2894304075721734], abs=1e-12)
    assert b.weights == pytest.approx(
        [0.5032623194594917, -0.9751871683597803, 2.0141544869581023, 0.3164825341116531], abs=1e-12)


def test_rls_constant_target_converges():
    s, _ = train_online(RlsState.zeros(0), np.zeros((100, 0)), np.full(100, 0.5))
    assert abs(s.weights[0] - 0.5) < 1e-6


def test_rls_constant_target_closed_form():
    # bias-only RLS from P0 = 1/delta is ridge on T ones: w = T c / (T + delta)
    c, delta = 2.5, 1e-4
    s, _ = train_online(RlsState.zeros(0, 1.0, delta), np.zeros((100, 0)), np.full(100, c))
    assert s.weights[0] == pytest.approx(100 * c / (100 + delta), abs=1e-12)


@pytest.mark.parametrize("kw", [dict(forgetting=0.0), dict(forgetting=1.1), dict(init_scale=0.0)])
def test_rls_parameters_validated(kw):
    with pytest.raises(InvalidParameterError):
        RlsState.zeros(3, **kw)


def test_ridge_examples():
    assert ridge_batch([[1.0]], [3.0], 0.0).tolist() == pytest.approx([3.0])
    assert ridge_batch([[1.0], [1.0]], [1.0, 3.0], 0.0).tolist() == pytest.approx([2.0])
    assert ridge_batch([[1.0]], [1.0], 1.0).tolist() == pytest.approx([0.5], abs=1e-15)


def test_ridge_agrees_with_normal_equations():
    X, d = _problem(9, 120, 7)
    A = augment(X)
    ref = np.linalg.solve(A.T @ A + 0.3 * np.eye(8), A.T @ d)
    assert np.allclose(ridge_batch(A, d, 0.3), ref, atol=1e-12, rtol=0)


def test_ridge_singular_without_regularization():
    with pytest.raises(SingularSystemError):
        ridge_batch([[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0], 0.0)
    w = ridge_batch([[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0], 1e-3)
    assert np.all(np.isfinite(w))


def test_train_online_boundaries():
    X, d = _problem(1, 10, 2)
    _, errors = train_online(LmsState.zeros(2, 0.01), X, d, washout=9)
    assert errors.size == 1
    with pytest.raises(InvalidParameterError):
        train_online(LmsState.zeros(2, 0.01), X, d, washout=10)
    with pytest.raises(InvalidParameterError):
        train_online(LmsState.zeros(2, 0.01), X, d[:-1])


def test_train_online_skips_washout_rows():
    X, d = _problem(2, 30, 3)
    X[:10] = np.nan  # would poison the trainer if touched
    s, errors = train_online(RlsState.zeros(3), X, d, washout=10)
    assert errors.size == 20 and np.all(np.isfinite(s.weights))


def test_train_online_divergence_carries_step():
    X = np.ones((5, 1)) * 1e200
    with pytest.raises(StateDivergenceError) as info:
        train_online(LmsState.zeros(1, 1.0), X, np.full(5, 1e200), washout=2)
    assert info.value.step == 2 and info.value.phase == "train"


def test_default_step_size():
    X = np.array([[1.0, 1.0], [0.0, 0.0], [5.0, 5.0]])
    assert default_step_size(X, 2) == pytest.approx(0.1 / 2.0)
    assert default_step_size(X, 0) == pytest.approx(0.1 / 3.0)
