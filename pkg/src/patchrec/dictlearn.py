"""Dictionary learning by block proximal-gradient descent.

Solves::

    min_{D, Y}  0.5 * ||D Y - X||_F^2 + lam * ||Y||_1   s.t.  ||d_i||_2 <= 1

by alternating one projected-gradient step on ``D`` and one
soft-thresholding step on ``Y``, each taken from an extrapolated point.
Extrapolation weights follow the FISTA ``t`` sequence, capped by the
square root of the ratio of consecutive Lipschitz constants.  If an
iteration increases the objective it is redone without extrapolation,
which makes the objective sequence non-increasing.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh

logger = logging.getLogger(__name__)

__all__ = [
    "LearnConfig",
    "LearnState",
    "LearnTrace",
    "LearningError",
    "objective",
    "soft_threshold",
    "project_columns",
    "lipschitz_d",
    "lipschitz_y",
    "next_t",
    "extrapolation_weights",
    "initial_state",
    "bpg_step",
    "stationarity_residual",
    "grad_d",
    "grad_y",
    "learn",
    "random_dictionary",
]


class LearningError(RuntimeError):
    def __init__(self, message, iteration):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass
class LearnConfig:
    lam: float
    max_iters: int = 1000
    rel_tol: float = 1e-4
    consecutive_hits: int = 3
    cap: float = 0.9999
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not 0 < self.cap <= 1:
            raise ValueError(f"cap must lie in (0, 1], got {self.cap}")
        if self.max_iters < 1 or self.consecutive_hits < 1:
            raise ValueError("max_iters and consecutive_hits must be at least 1")


@dataclass
class LearnState:
    """Last two iterates and the quantities the next step needs."""

    D: np.ndarray
    Y: np.ndarray
    D_prev: np.ndarray
    Y_prev: np.ndarray
    t: float = 1.0
    L_d: float | None = None
    L_y: float | None = None
    F: float = np.inf
    k: int = 0


@dataclass
class LearnTrace:
    F: list = field(default_factory=list)
    L_d: list = field(default_factory=list)
    L_y: list = field(default_factory=list)
    omega_d: list = field(default_factory=list)
    omega_y: list = field(default_factory=list)
    redo: list = field(default_factory=list)
    F0: float = np.nan
    stationarity_first: float = np.nan
    stationarity_final: float = np.nan
    converged: bool = False

    def __len__(self):
        return len(self.F)

    def append(self, F, L_d, L_y, omega_d, omega_y, redo):
        self.F.append(F)
        self.L_d.append(L_d)
        self.L_y.append(L_y)
        self.omega_d.append(omega_d)
        self.omega_y.append(omega_y)
        self.redo.append(redo)

    def rows(self):
        for i in range(len(self.F)):
            yield (i + 1, self.F[i], self.L_d[i], self.L_y[i],
                   self.omega_d[i], self.omega_y[i], int(self.redo[i]))

    def to_csv(self, path_or_file):
        header = ("iteration", "F", "L_d", "L_y", "omega_d", "omega_y", "redo")
        if hasattr(path_or_file, "write"):
            _write_rows(path_or_file, header, self.rows())
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write_rows(fh, header, self.rows())


def _write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def objective(D, Y, X, lam):
    """``0.5 * ||D Y - X||_F^2 + lam * ||Y||_1``."""
    D, Y, X = np.asarray(D), np.asarray(Y), np.asarray(X)
    if D.shape[1] != Y.shape[0] or D.shape[0] != X.shape[0] or Y.shape[1] != X.shape[1]:
        raise ValueError(f"shape mismatch: D {D.shape}, Y {Y.shape}, X {X.shape}")
    R = D @ Y - X
    return 0.5 * float(np.vdot(R, R).real) + lam * float(np.abs(Y).sum())


def soft_threshold(values, tau):
    """Elementwise ``sign(v) * max(|v| - tau, 0)``; ``tau`` may be an array."""
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau < 0):
        raise ValueError("threshold must be nonnegative")
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.maximum(np.abs(values) - tau, 0.0)


def project_columns(D):
    """Scale each column by ``1 / max(1, ||column||)``."""
    D = np.asarray(D, dtype=np.float64)
    norms = np.linalg.norm(D, axis=0)
    return D / np.maximum(norms, 1.0)


def _gram_norm(A):
    # spectral norm of A A^T (A is short and wide) or A^T A
    G = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    if not np.any(G):
        return 0.0
    top = eigvalsh(G, subset_by_index=[G.shape[0] - 1, G.shape[0] - 1])
    return max(float(top[0]), 0.0)


def lipschitz_d(Y):
    """``||Y Y^T||``, the Lipschitz constant of the gradient in ``D``."""
    return _gram_norm(np.asarray(Y, dtype=np.float64))


def lipschitz_y(D):
    """``||D^T D||``, the Lipschitz constant of the gradient in ``Y``."""
    return _gram_norm(np.asarray(D, dtype=np.float64).T)


def next_t(t):
    return 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))


def extrapolation_weights(t_prev, t_curr, L_d_prev, L_d, L_y_prev, L_y, cap=0.9999):
    """Capped FISTA weights ``cap * min(omega, sqrt(L_prev / L))`` for both blocks."""
    for v in (L_d_prev, L_d, L_y_prev, L_y):
        if not v > 0:
            raise ValueError(f"Lipschitz constants must be positive, got {v}")
    omega = (t_prev - 1.0) / t_curr
    return _weight(omega, L_d_prev, L_d, cap), _weight(omega, L_y_prev, L_y, cap)


def _weight(omega, L_prev, L, cap):
    return cap * min(omega, np.sqrt(L_prev / L))


def _guard(L):
    # zero Lipschitz only at degenerate (all-zero) iterates
    return L if L > 0 else 1.0


def random_dictionary(n, K, rng):
    D = rng.standard_normal((n, K))
    return D / np.linalg.norm(D, axis=0)


def initial_state(X, D0, Y0=None, lam=None):
    D0 = np.array(D0, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    Y0 = np.zeros((D0.shape[1], X.shape[1])) if Y0 is None else np.array(Y0, dtype=np.float64)
    if D0.shape[0] != X.shape[0] or Y0.shape != (D0.shape[1], X.shape[1]):
        raise ValueError(f"shape mismatch: D0 {D0.shape}, Y0 {Y0.shape}, X {X.shape}")
    if np.any(np.linalg.norm(D0, axis=0) > 1 + 1e-12):
        raise ValueError("initial dictionary has columns with norm above 1")
    F = objective(D0, Y0, X, lam) if lam is not None else np.inf
    return LearnState(D=D0, Y=Y0, D_prev=D0.copy(), Y_prev=Y0.copy(), F=F)


def grad_d(D, Y, X):
    """Gradient in ``D`` of ``0.5 * ||D Y - X||_F^2``."""
    return (D @ Y - X) @ Y.T


def grad_y(D, Y, X):
    """Gradient in ``Y`` of ``0.5 * ||D Y - X||_F^2``."""
    return D.T @ (D @ Y - X)


def _d_update(D_hat, Y, X, L_d):
    return project_columns(D_hat - grad_d(D_hat, Y, X) / L_d)


def _y_update(D, Y_hat, X, L_y, lam):
    return soft_threshold(Y_hat - grad_y(D, Y_hat, X) / L_y, lam / L_y)


def bpg_step(state, X, config, trace=None):
    """One iteration; returns the new state (the old one is left untouched)."""
    k = state.k + 1
    lam = config.lam
    if not np.isfinite(state.F):
        state.F = objective(state.D, state.Y, X, lam)

    t_new = next_t(state.t)
    omega = (state.t - 1.0) / t_new
    first = state.k == 0

    L_d = _guard(lipschitz_d(state.Y))
    wd = 0.0 if first else _weight(omega, state.L_d, L_d, config.cap)
    D_hat = state.D + wd * (state.D - state.D_prev)
    D_new = _d_update(D_hat, state.Y, X, L_d)

    L_y = _guard(lipschitz_y(D_new))
    wy = 0.0 if first else _weight(omega, state.L_y, L_y, config.cap)
    Y_hat = state.Y + wy * (state.Y - state.Y_prev)
    Y_new = _y_update(D_new, Y_hat, X, L_y, lam)
    F_new = objective(D_new, Y_new, X, lam)

    redo = False
    if not F_new <= state.F:
        redo = True
        # same L_d: it depends only on the previous Y
        D_new = _d_update(state.D, state.Y, X, L_d)
        L_y = _guard(lipschitz_y(D_new))
        Y_new = _y_update(D_new, state.Y, X, L_y, lam)
        F_new = objective(D_new, Y_new, X, lam)
        if not F_new <= state.F and np.isfinite(F_new):
            # rounding at a near-stationary point; keep the previous iterate
            D_new, Y_new, F_new = state.D, state.Y, state.F
        wd = wy = 0.0

    if not np.isfinite(F_new):
        raise LearningError("objective is not finite", k)

    if trace is not None:
        trace.append(F_new, L_d, L_y, wd, wy, redo)
    return LearnState(D=D_new, Y=Y_new, D_prev=state.D, Y_prev=state.Y, t=t_new,
                      L_d=L_d, L_y=L_y, F=F_new, k=k)


def stationarity_residual(D, Y, X, lam):
    """Size of one extrapolation-free prox-gradient step, scaled by its Lipschitz constants.

    Vanishes exactly at stationary points of the learning objective.
    """
    L_d = _guard(lipschitz_d(Y))
    D1 = _d_update(D, Y, X, L_d)
    L_y = _guard(lipschitz_y(D1))
    Y1 = _y_update(D1, Y, X, L_y, lam)
    return float(np.sqrt((L_d * np.linalg.norm(D1 - D)) ** 2
                         + (L_y * np.linalg.norm(Y1 - Y)) ** 2))


def learn(X, D0, Y0=None, config=None, lam=None):
    """Run block proximal-gradient learning until the objective stalls.

    Stops once ``|F_k - F_{k+1}| / (1 + F_k) <= rel_tol`` holds for
    ``consecutive_hits`` iterations in a row, or after ``max_iters``.

    Returns ``(D, Y, trace)``.
    """
    if config is None:
        if lam is None:
            raise ValueError("pass a LearnConfig or lam")
        config = LearnConfig(lam=lam)
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("training samples contain non-finite values")
    state = initial_state(X, D0, Y0, config.lam)
    trace = LearnTrace(F0=state.F)

    hits = 0
    for it in range(config.max_iters):
        F_old = state.F
        state = bpg_step(state, X, config, trace)
        if it == 0:
            trace.stationarity_first = stationarity_residual(state.D, state.Y, X, config.lam)
        if abs(F_old - state.F) / (1.0 + F_old) <= config.rel_tol:
            hits += 1
            if hits >= config.consecutive_hits:
                trace.converged = True
                break
        else:
            hits = 0
    trace.stationarity_final = stationarity_residual(state.D, state.Y, X, config.lam)
    logger.info("dictionary learning: %d iterations, F=%.6g, %d redo steps",
                len(trace), state.F, sum(trace.redo))
    return state.D, state.Y, trace
