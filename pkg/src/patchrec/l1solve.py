"""Weighted l1 recovery over one partition.

For a partition ``P`` with cells ``c`` and codes ``y_c``::

    min_Y  sum_c ||w_c * y_c||_1 + 1/(2 nu) || A( sum_c R_c^T (D y_c) ) - b ||_2^2

The codes are stored as a ``(K, num_cells)`` matrix.  Because the cells do
not overlap, the synthesized image needs no normalization.  The problem is
solved by FISTA with a fixed step and a momentum restart whenever the
objective goes up.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Dictionary
from .dictlearn import next_t, soft_threshold
from .operators import MeasurementOperator, spectral_norm
from .partition import Partition

logger = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "RecoveryProblem",
    "Solution",
    "SolverError",
    "default_weights",
    "synthesize",
    "synthesis_forward",
    "synthesis_adjoint",
    "solve",
]


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    rel_tol: float = 1e-4
    max_iters: int = 2000
    consecutive_hits: int = 3
    seed: int = 0
    norm_iters: int = 30
    norm_tol: float = 1e-8

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")


def default_weights(dictionary, num_cells):
    """All ones, except a zero on the DC atom so patch means are not penalized."""
    w = np.ones((dictionary.num_atoms, num_cells))
    if dictionary.has_dc:
        w[0] = 0.0
    return w


@dataclass(eq=False)
class RecoveryProblem:
    dictionary: Dictionary
    partition: Partition
    op: MeasurementOperator
    b: np.ndarray
    nu: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        D, P = self.dictionary, self.partition
        if (D.n1, D.n2) != P.patch_shape:
            raise ValueError(f"dictionary atoms are {D.n1}x{D.n2} but partition patches are "
                             f"{P.patch_shape[0]}x{P.patch_shape[1]}")
        if tuple(self.op.shape) != P.image_shape:
            raise ValueError(f"operator shape {self.op.shape} does not match partition "
                             f"{P.image_shape}")
        self.b = np.asarray(self.b)
        if self.b.shape != (self.op.output_size,):
            raise ValueError(f"expected {self.op.output_size} measurements, got {self.b.shape}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.weights is None:
            self.weights = default_weights(D, P.num_cells)
        else:
            self.weights = np.broadcast_to(np.asarray(self.weights, dtype=np.float64),
                                           (D.num_atoms, P.num_cells)).copy()
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    @property
    def coef_shape(self):
        return (self.dictionary.num_atoms, self.partition.num_cells)

    def objective(self, Y, residual=None):
        if residual is None:
            residual = synthesis_forward(self, Y) - self.b
        fid = float(np.vdot(residual, residual).real)
        return float(np.abs(self.weights * Y).sum()) + fid / (2.0 * self.nu)


@dataclass
class Solution:
    Y: np.ndarray
    image: np.ndarray
    iterations: int
    objective: float
    converged: bool
    trace: list = field(default_factory=list, repr=False)

    def __iter__(self):
        # (Y, image, iterations) unpacking
        return iter((self.Y, self.image, self.iterations))

    def trace_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iteration", "objective", "restart"))
            for i, (F, r) in enumerate(self.trace, 1):
                w.writerow((i, repr(F), int(r)))


def _check_coefs(prob, Y):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != prob.coef_shape:
        raise ValueError(f"coefficients must have shape {prob.coef_shape}, got {Y.shape}")
    return Y


def synthesize(prob, Y):
    """Image ``sum_c R_c^T (D y_c)`` from a coefficient matrix."""
    Y = _check_coefs(prob, Y)
    return prob.partition.frames_to_image(prob.dictionary.atoms @ Y)


def synthesis_forward(prob, Y):
    return prob.op.apply(synthesize(prob, Y))


def synthesis_adjoint(prob, v):
    """Adjoint of :func:`synthesis_forward` under the real inner product."""
    img = prob.op.adjoint(v)
    return prob.dictionary.atoms.T @ prob.partition.image_to_frames(img)


def solve(prob, config=None, Y0=None):
    """Minimize the weighted l1 recovery objective of ``prob``.

    Returns a :class:`Solution`; it unpacks as ``(Y, image, iterations)``.
    """
    config = config or SolverConfig()
    rng = np.random.default_rng(config.seed)
    shape = prob.coef_shape
    x = rng.standard_normal(shape) if Y0 is None else _check_coefs(prob, Y0).copy()

    fwd = lambda Y: synthesis_forward(prob, Y)
    adj = lambda v: synthesis_adjoint(prob, v)
    lnorm = spectral_norm(fwd, adj, shape, iters=config.norm_iters, tol=config.norm_tol,
                          seed=config.seed)
    if lnorm == 0:
        raise SolverError("forward map is identically zero")
    L = lnorm**2 / prob.nu
    thresh = prob.weights / L

    def prox_grad(point):
        r = fwd(point) - prob.b
        grad = adj(r) / prob.nu
        return soft_threshold(point - grad / L, thresh)

    F = prob.objective(x)
    if not np.isfinite(F):
        raise SolverError("objective at the starting point is not finite")
    y = x
    t = 1.0
    hits = 0
    trace = []
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        x_new = prox_grad(y)
        F_new = prob.objective(x_new)
        restart = False
        if not F_new <= F:
            restart = True
            t = 1.0
            x_new = prox_grad(x)
            F_new = prob.objective(x_new)
            if not F_new <= F and np.isfinite(F_new):
                x_new, F_new = x, F
        if not np.isfinite(F_new):
            raise SolverError(f"objective became non-finite at iteration {it}")
        trace.append((F_new, restart))

        t_new = next_t(t)
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        change = abs(F - F_new) / max(abs(F), np.finfo(float).tiny)
        x, F, t = x_new, F_new, t_new
        if change <= config.rel_tol:
            hits += 1
            if hits >= config.consecutive_hits:
                converged = True
                break
        else:
            hits = 0
    logger.debug("l1 solve: %d iterations, objective %.6g", it, F)
    return Solution(Y=x, image=synthesize(prob, x), iterations=it, objective=F,
                    converged=converged, trace=trace)
