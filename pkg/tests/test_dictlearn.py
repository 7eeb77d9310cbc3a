import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchrec.dictlearn import (LearnConfig, bpg_step, extrapolation_weights, initial_state,
                                learn, lipschitz_d, lipschitz_y, next_t, objective,
                                project_columns, random_dictionary, soft_threshold,
                                stationarity_residual)


def objective_loops(D, Y, X, lam):
    n, K = D.shape
    total = 0.0
    for j in range(X.shape[1]):
        for i in range(n):
            s = sum(D[i, k] * Y[k, j] for k in range(K))
            total += 0.5 * (s - X[i, j]) ** 2
    return total + lam * sum(abs(Y[k, j]) for k in range(K) for j in range(X.shape[1]))


def smooth(D, Y, X):
    return objective(D, Y, X, 1.0) - np.abs(Y).sum()


def fd_grad(f, A, h=1e-6):
    g = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        E = np.zeros_like(A)
        E[idx] = h
        g[idx] = (f(A + E) - f(A - E)) / (2 * h)
    return g


def test_objective_example():
    D = np.array([[1.0, 0.0], [0.0, 1.0]])
    Y = np.array([[1.0], [-2.0]])
    X = np.array([[0.0], [0.0]])
    assert objective(D, Y, X, 0.5) == pytest.approx(0.5 * 5 + 0.5 * 3)


def test_objective_matches_loops(rng):
    D, Y, X = rng.standard_normal((4, 3)), rng.standard_normal((3, 5)), rng.standard_normal((4, 5))
    assert objective(D, Y, X, 0.3) == pytest.approx(objective_loops(D, Y, X, 0.3), rel=1e-12)
    with pytest.raises(ValueError):
        objective(D, Y[:2], X, 0.3)


@pytest.mark.parametrize("tau", [0.0, 0.25, 1.0, 2.5])
def test_soft_threshold_is_prox(tau):
    grid = np.round(np.arange(-3.0, 3.0 + 1e-9, 1e-4), 4)
    for v in np.linspace(-2.7, 2.7, 19):
        brute = grid[np.argmin(0.5 * (grid - v) ** 2 + tau * np.abs(grid))]
        assert soft_threshold(v, tau) == pytest.approx(brute, abs=1e-4)


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([-3.0, -0.5, 0.0, 0.5, 3.0], 1.0),
                                  [-2.0, 0.0, 0.0, 0.0, 2.0])
    with pytest.raises(ValueError):
        soft_threshold([1.0], -0.1)


def test_project_columns():
    D = np.array([[3.0, 0.3, 0.0], [4.0, 0.4, 0.0]])
    P = project_columns(D)
    np.testing.assert_allclose(P[:, 0], [0.6, 0.8])
    np.testing.assert_array_equal(P[:, 1:], D[:, 1:])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(1, 9), st.integers(0, 2**31))
def test_lipschitz_matches_dense(n, K, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, K))
    assert lipschitz_d(A) == pytest.approx(np.linalg.norm(A @ A.T, 2), rel=1e-10)
    assert lipschitz_y(A) == pytest.approx(np.linalg.norm(A.T @ A, 2), rel=1e-10)


def test_lipschitz_of_zero():
    assert lipschitz_d(np.zeros((3, 4))) == 0.0


def test_extrapolation_weights():
    t1 = next_t(1.0)
    assert t1 == pytest.approx((1 + math.sqrt(5)) / 2)
    t2 = next_t(t1)
    omega = (t1 - 1) / t2
    wd, wy = extrapolation_weights(t1, t2, 2.0, 2.0, 1.0, 4.0, cap=0.9999)
    assert wd == pytest.approx(0.9999 * omega)
    assert wy == pytest.approx(0.9999 * min(omega, 0.5))
    wd, wy = extrapolation_weights(30.0, next_t(30.0), 1.0, 1.0, 1.0, 400.0)
    assert wy == pytest.approx(0.9999 * 0.05)
    with pytest.raises(ValueError):
        extrapolation_weights(1.0, t1, 0.0, 1.0, 1.0, 1.0)


def test_first_step_is_plain_prox_gradient(rng):
    X = rng.standard_normal((6, 20))
    D0 = random_dictionary(6, 9, rng)
    Y0 = rng.standard_normal((9, 20)) * 0.3
    cfg = LearnConfig(lam=0.2)
    s1 = bpg_step(initial_state(X, D0, Y0, cfg.lam), X, cfg)
    Ld = np.linalg.norm(Y0 @ Y0.T, 2)
    gD = fd_grad(lambda D: smooth(D, Y0, X), D0)
    D1 = D0 - gD / Ld
    D1 = D1 / np.maximum(np.linalg.norm(D1, axis=0), 1)
    np.testing.assert_allclose(s1.D, D1, atol=1e-7)
    Ly = np.linalg.norm(s1.D.T @ s1.D, 2)
    gY = fd_grad(lambda Y: smooth(s1.D, Y, X), Y0)
    Z = Y0 - gY / Ly
    Y1 = np.sign(Z) * np.maximum(np.abs(Z) - 0.2 / Ly, 0)
    np.testing.assert_allclose(s1.Y, Y1, atol=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_objective_never_increases(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((8, 60))
    D0 = random_dictionary(8, 16, rng)
    _, _, trace = learn(X, D0, None, LearnConfig(lam=0.1, max_iters=300))
    F = np.array([trace.F0] + trace.F)
    assert np.all(np.diff(F) <= 0)
    assert np.isfinite(trace.stationarity_final)


def test_iterates_feasible(rng):
    X = rng.standard_normal((8, 40)) * 10
    D, Y, _ = learn(X, random_dictionary(8, 12, rng), lam=0.5)
    assert np.all(np.linalg.norm(D, axis=0) <= 1 + 1e-12)
    assert Y.shape == (12, 40)


def test_rank_one_recovery(rng):
    d = rng.standard_normal(10)
    d /= np.linalg.norm(d)
    X = np.outer(d, rng.standard_normal(50) * 3)
    D, Y, trace = learn(X, random_dictionary(10, 1, rng), config=LearnConfig(lam=0.01, rel_tol=1e-8))
    assert abs(D[:, 0] @ d) / np.linalg.norm(D[:, 0]) >= 0.99
    assert trace.converged


def test_stationarity_shrinks(rng):
    X = rng.standard_normal((8, 80))
    _, _, trace = learn(X, random_dictionary(8, 12, rng), config=LearnConfig(lam=0.2, rel_tol=1e-7))
    assert trace.stationarity_final < 0.1 * trace.stationarity_first


def test_max_iters_respected(rng):
    X = rng.standard_normal((8, 80))
    D0 = random_dictionary(8, 12, rng)
    _, _, t5 = learn(X, D0, None, LearnConfig(lam=0.2, max_iters=5))
    _, _, t10 = learn(X, D0, None, LearnConfig(lam=0.2, max_iters=10))
    assert len(t5) == 5 and len(t10) == 10
    assert t10.F[:5] == t5.F
    assert not t5.converged


def test_stationary_input_terminates(rng):
    X = np.zeros((6, 10))
    D, Y, trace = learn(X, random_dictionary(6, 4, rng), lam=0.1)
    assert len(trace) == 3 and trace.converged
    assert not Y.any()
    assert stationarity_residual(D, Y, X, 0.1) == 0.0


def test_input_validation(rng):
    X = rng.standard_normal((4, 5))
    with pytest.raises(ValueError):
        learn(X, 2 * random_dictionary(4, 3, rng), lam=0.1)
    with pytest.raises(ValueError):
        learn(X, random_dictionary(5, 3, rng), lam=0.1)
    X[0, 0] = np.nan
    with pytest.raises(ValueError):
        learn(X, random_dictionary(4, 3, rng), lam=0.1)
    with pytest.raises(ValueError):
        LearnConfig(lam=0.0)
    with pytest.raises(ValueError):
        learn(X, random_dictionary(4, 3, rng))


def test_trace_csv(rng):
    X = rng.standard_normal((4, 12))
    _, _, trace = learn(X, random_dictionary(4, 3, rng), config=LearnConfig(lam=0.1, max_iters=4))
    buf = io.StringIO()
    trace.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,F,L_d,L_y,omega_d,omega_y,redo"
    assert len(lines) == 5
    assert float(lines[1].split(",")[1]) == trace.F[0]
    assert lines[1].split(",")[4:6] == ["0.0", "0.0"]
