"""Synthetic dictionary-recovery benchmark, overcomplete DCT and training patches."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Dictionary, as_image
from .dictlearn import LearnConfig, learn, random_dictionary

logger = logging.getLogger(__name__)

__all__ = [
    "SynthSpec",
    "generate_synthetic",
    "recovery_rate",
    "run_synth_trial",
    "run_synth_bench",
    "bench_grid",
    "write_report_csv",
    "write_report_json",
    "build_dct_dictionary",
    "dct_basis_1d",
    "sample_training_patches",
]


@dataclass(frozen=True)
class SynthSpec:
    n: int = 16
    K: int = 32
    p: int = 320
    r: int = 3
    num_trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.r < 1 or self.r > self.K:
            raise ValueError(f"sparsity r={self.r} must satisfy 1 <= r <= K={self.K}")
        if self.r == self.K:
            warnings.warn("r == K: every sample uses every atom", stacklevel=2)
        if self.p < 1 or self.n < 1:
            raise ValueError("n and p must be positive")


def generate_synthetic(spec, rng=None, return_support=False):
    """Unit-norm Gaussian dictionary and ``p`` samples, each ``r``-sparse in it."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    D = random_dictionary(spec.n, spec.K, rng)
    X = np.empty((spec.n, spec.p))
    support = np.empty((spec.r, spec.p), dtype=np.intp)
    for j in range(spec.p):
        S = rng.choice(spec.K, size=spec.r, replace=False)
        support[:, j] = S
        X[:, j] = D[:, S] @ rng.standard_normal(spec.r)
    if return_support:
        return D, X, support
    return D, X


def recovery_rate(D_true, D_est, threshold=0.99):
    """Percentage of true atoms matched by some estimated atom at ``|cos| >= threshold``.

    Zero-norm atoms on either side are dropped (with a warning).
    """
    A = np.asarray(D_true, dtype=np.float64)
    B = np.asarray(D_est, dtype=np.float64)
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"atom dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    na = np.linalg.norm(A, axis=0)
    nb = np.linalg.norm(B, axis=0)
    dropped = int(np.sum(na == 0) + np.sum(nb == 0))
    if dropped:
        warnings.warn(f"{dropped} zero-norm atoms excluded from recovery rate", stacklevel=2)
    A = A[:, na > 0] / na[na > 0]
    B = B[:, nb > 0] / nb[nb > 0]
    if A.shape[1] == 0:
        return 0.0
    if B.shape[1] == 0:
        return 0.0
    best = np.max(np.abs(A.T @ B), axis=1)
    return 100.0 * float(np.mean(best >= threshold))


def run_synth_trial(spec, trial, learn_config=None):
    """One trial with seed ``spec.seed + trial``; returns ``(rate, seconds, iterations)``."""
    lam = 0.5 / math.sqrt(spec.n)
    config = learn_config or LearnConfig(lam=lam)
    rng = np.random.default_rng(spec.seed + trial)
    D_true, X = generate_synthetic(spec, rng)
    D0 = random_dictionary(spec.n, spec.K, rng)
    t0 = time.perf_counter()
    D, _, trace = learn(X, D0, None, config)
    elapsed = time.perf_counter() - t0
    return recovery_rate(D_true, D), elapsed, len(trace)


def run_synth_bench(spec, learn_config=None):
    """Mean recovery rate and time of ``spec.num_trials`` trials of one grid cell."""
    rates, times, iters = [], [], []
    for trial in range(spec.num_trials):
        rate, elapsed, it = run_synth_trial(spec, trial, learn_config)
        rates.append(rate)
        times.append(elapsed)
        iters.append(it)
        logger.info("n=%d K=%d p=%d r=%d trial %d: rate %.2f%% in %.2fs (%d its)",
                    spec.n, spec.K, spec.p, spec.r, trial, rate, elapsed, it)
    return {
        "n": spec.n, "K": spec.K, "p": spec.p, "r": spec.r,
        "trials": spec.num_trials,
        "mean_rate_pct": float(np.mean(rates)),
        "mean_time_s": float(np.mean(times)),
        "mean_iterations": float(np.mean(iters)),
        "rates": rates,
    }


def bench_grid(scale="desk", trials=None, seed=0):
    """Grid of :class:`SynthSpec` cells.

    ``desk``: n=16, K in {32, 64}, p in {320, 1600}, r in {2, 3, 4}.
    ``paper``: n=36, (K, p) in {(2n, 20n), (2n, 100n), (4n, 100n)}, r in {4, ..., 12}.
    """
    if scale == "desk":
        n = 16
        pairs = [(K, p) for K in (32, 64) for p in (320, 1600)]
        rs = (2, 3, 4)
        trials = 10 if trials is None else trials
    elif scale == "paper":
        n = 36
        pairs = [(2 * n, 20 * n), (2 * n, 100 * n), (4 * n, 100 * n)]
        rs = (4, 6, 8, 10, 12)
        trials = 50 if trials is None else trials
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return [SynthSpec(n=n, K=K, p=p, r=r, num_trials=trials, seed=seed)
            for K, p in pairs for r in rs]


_CSV_FIELDS = ("cell_id", "K", "p", "r", "mean_rate_pct", "mean_time_s", "trials")


def write_report_csv(rows, fh, timing=True):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(_CSV_FIELDS)
    for i, row in enumerate(rows):
        w.writerow((i, row["K"], row["p"], row["r"], repr(row["mean_rate_pct"]),
                    repr(row["mean_time_s"]) if timing else "", row["trials"]))


def write_report_json(rows, fh, timing=True, extra=None):
    out = []
    for i, row in enumerate(rows):
        item = {"cell_id": i, **row}
        if not timing:
            item.pop("mean_time_s", None)
        out.append(item)
    payload = {"cells": out}
    if extra:
        payload.update(extra)
    json.dump(payload, fh, indent=2, sort_keys=True)
    fh.write("\n")


def dct_basis_1d(n, m):
    """``n x m`` overcomplete cosine basis; non-constant columns are mean-removed, all unit norm."""
    i = np.arange(n)[:, None]
    k = np.arange(m)[None, :]
    B = np.cos(i * k * np.pi / m)
    B[:, 1:] -= B[:, 1:].mean(axis=0)
    return B / np.linalg.norm(B, axis=0)


def build_dct_dictionary(n1, n2, K):
    """Separable overcomplete DCT with ``K - 1`` cosine atoms plus a leading DC atom."""
    m = math.isqrt(K - 1) if K > 1 else 0
    if K < 2 or m * m != K - 1:
        raise ValueError(f"K - 1 must be a perfect square (K = m*m + 1), got K={K}")
    B1 = dct_basis_1d(n1, m)
    B2 = dct_basis_1d(n2, m)
    # atom (a, b) is the outer product B1[:, a] B2[:, b]^T, vectorized row-major
    atoms = np.einsum("ia,jb->ijab", B1, B2).reshape(n1 * n2, m * m)
    atoms /= np.linalg.norm(atoms, axis=0)
    return Dictionary(atoms, n1, n2).with_dc()


def sample_training_patches(images, per_image, n1, n2, rng):
    """Random ``n1 x n2`` patches, vectorized row-major and mean-removed, one per column."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    cols = []
    for idx, img in enumerate(images):
        img = as_image(img)
        H, W = img.shape
        if H < n1 or W < n2:
            warnings.warn(f"image {idx} ({H}x{W}) smaller than {n1}x{n2} patch, skipped",
                          stacklevel=2)
            continue
        rows = rng.integers(0, H - n1 + 1, size=per_image)
        cs = rng.integers(0, W - n2 + 1, size=per_image)
        for r, c in zip(rows, cs):
            cols.append(img[r:r + n1, c:c + n2].ravel())
    if not cols:
        return np.zeros((n1 * n2, 0))
    X = np.array(cols).T
    return X - X.mean(axis=0)
