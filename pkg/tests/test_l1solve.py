import numpy as np
import pytest

from patchrec.core import Dictionary
from patchrec.dictlearn import random_dictionary
from patchrec.l1solve import (RecoveryProblem, SolverConfig, SolverError, default_weights, solve,
                              synthesis_adjoint, synthesis_forward, synthesize)
from patchrec.operators import CirculantOperator, MaskOperator, sample_mask
from patchrec.partition import build_partition

TIGHT = SolverConfig(rel_tol=1e-13, max_iters=20000)


def dense_forward(prob):
    K, C = prob.coef_shape
    cols = []
    for j in range(K * C):
        E = np.zeros(K * C)
        E[j] = 1.0
        cols.append(synthesis_forward(prob, E.reshape(K, C)))
    return np.array(cols).T


def cd_lasso(A, b, w, nu, sweeps=20000, tol=1e-14):
    # min ||w*y||_1 + 1/(2 nu) ||A y - b||^2 over real y, A possibly complex
    A = np.vstack([A.real, A.imag]) if np.iscomplexobj(A) else A
    b = np.concatenate([b.real, b.imag]) if np.iscomplexobj(b) else b
    y = np.zeros(A.shape[1])
    r = b.copy()
    col2 = np.sum(A * A, axis=0)
    for _ in range(sweeps):
        biggest = 0.0
        for j in range(A.shape[1]):
            if col2[j] == 0:
                continue
            rho = A[:, j] @ r + col2[j] * y[j]
            new = np.sign(rho) * max(abs(rho) - nu * w[j], 0.0) / col2[j]
            delta = new - y[j]
            if delta:
                r -= A[:, j] * delta
                y[j] = new
                biggest = max(biggest, abs(delta))
        if biggest < tol:
            break
    return y


def identity_problem(b, nu, weights=None):
    D = Dictionary(np.eye(64), 8, 8)
    part = build_partition(8, 8, 8, 8, 8, 8)
    op = MaskOperator((8, 8), np.arange(64))
    return RecoveryProblem(D, part, op, b, nu, weights)


def test_identity_closed_form(rng):
    b = rng.standard_normal(64) * 3
    sol = solve(identity_problem(b, 0.7), TIGHT)
    expect = np.sign(b) * np.maximum(np.abs(b) - 0.7, 0)
    np.testing.assert_allclose(sol.Y[:, 0], expect, atol=1e-10)
    np.testing.assert_allclose(sol.image.ravel(), expect, atol=1e-10)


def test_zero_weights_fit_data(rng):
    b = rng.standard_normal(64)
    sol = solve(identity_problem(b, 0.5, weights=0.0), TIGHT)
    np.testing.assert_allclose(sol.Y[:, 0], b, atol=1e-10)


def test_large_nu_gives_zero(rng):
    b = rng.standard_normal(64)
    sol = solve(identity_problem(b, 100.0), TIGHT)
    assert not sol.Y.any()


def small_problem(rng, op_kind="mask", dc=True):
    shape = (6, 6)
    atoms = random_dictionary(9, 11, rng)
    D = Dictionary(atoms, 3, 3)
    D = D.with_dc() if dc else D
    part = build_partition(6, 6, 3, 3, 2, 1)
    idx = sample_mask(shape, 0.6, rng)
    if op_kind == "mask":
        op = MaskOperator(shape, idx)
    else:
        op = CirculantOperator.from_seed(shape, 2, idx)
    truth = rng.uniform(0, 10, shape)
    b = op.apply(truth)
    return RecoveryProblem(D, part, op, b, 0.3)


@pytest.mark.parametrize("kind", ["mask", "circulant"])
def test_synthesis_adjoint_identity(rng, kind):
    prob = small_problem(rng, kind)
    Y = rng.standard_normal(prob.coef_shape)
    v = rng.standard_normal(prob.op.output_size)
    if prob.op.is_complex:
        v = v + 1j * rng.standard_normal(v.size)
    lhs = np.vdot(synthesis_forward(prob, Y), v).real
    rhs = np.sum(Y * synthesis_adjoint(prob, v))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@pytest.mark.parametrize("kind", ["mask", "circulant"])
@pytest.mark.parametrize("seed", [0, 1])
def test_matches_coordinate_descent(kind, seed):
    rng = np.random.default_rng(seed)
    prob = small_problem(rng, kind)
    A = dense_forward(prob)
    w = prob.weights.ravel()
    y_cd = cd_lasso(A, prob.b, w, prob.nu)
    sol = solve(prob, TIGHT)
    F_cd = prob.objective(y_cd.reshape(prob.coef_shape))
    assert sol.objective <= F_cd * (1 + 1e-8)
    assert abs(sol.objective - F_cd) <= 1e-6 * max(1.0, F_cd)


def test_default_weights():
    D = Dictionary(np.eye(4), 2, 2).with_dc()
    w = default_weights(D, 3)
    assert w.shape == (5, 3)
    assert not w[0].any() and np.all(w[1:] == 1)


def test_image_equals_synthesis(rng):
    prob = small_problem(rng)
    sol = solve(prob)
    np.testing.assert_array_equal(sol.image, synthesize(prob, sol.Y))
    Y, image, its = sol
    assert its == sol.iterations and its >= 1


def test_objective_trace_monotone(rng):
    prob = small_problem(rng, "circulant")
    sol = solve(prob, TIGHT)
    F = [f for f, _ in sol.trace]
    assert np.all(np.diff(F) <= 0)


def test_deterministic(rng):
    prob = small_problem(rng)
    a = solve(prob, SolverConfig(seed=5))
    b = solve(prob, SolverConfig(seed=5))
    np.testing.assert_array_equal(a.Y, b.Y)


def test_warm_start_shape_checked(rng):
    prob = small_problem(rng)
    with pytest.raises(ValueError):
        solve(prob, Y0=np.zeros((3, 3)))


def test_problem_validation(rng):
    prob = small_problem(rng)
    with pytest.raises(ValueError):
        RecoveryProblem(prob.dictionary, prob.partition, prob.op, prob.b, 0.0)
    with pytest.raises(ValueError):
        RecoveryProblem(prob.dictionary, prob.partition, prob.op, prob.b[:-1], 1.0)
    with pytest.raises(ValueError):
        RecoveryProblem(prob.dictionary, build_partition(6, 6, 2, 2, 2, 2), prob.op, prob.b, 1.0)
    with pytest.raises(ValueError):
        RecoveryProblem(prob.dictionary, prob.partition, prob.op, prob.b, 1.0, weights=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(rel_tol=0)


def test_zero_forward_map_raises():
    D = Dictionary(np.eye(4), 2, 2)
    part = build_partition(4, 4, 2, 2, 2, 2)
    op = MaskOperator((4, 4), [0])

    class Zero(MaskOperator):
        def _forward(self, img):
            return np.zeros(1)

        def _backward(self, v):
            return np.zeros(self.shape)

    with pytest.raises(SolverError):
        solve(RecoveryProblem(D, part, Zero((4, 4), [0]), np.zeros(1), 1.0))
    assert op.output_size == 1


def test_trace_csv(tmp_path, rng):
    sol = solve(small_problem(rng))
    path = tmp_path / "t.csv"
    sol.trace_to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,objective,restart"
    assert len(lines) == sol.iterations + 1
