"""Whole-image recovery: per-partition solves, averaging, adaptive dictionary refresh."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import PEAK, Dictionary, as_image, rng_for
from .dictlearn import LearnConfig, learn
from .l1solve import RecoveryProblem, SolverConfig, solve
from .partition import canonical_partition

logger = logging.getLogger(__name__)

__all__ = [
    "RecoveryResult",
    "psnr",
    "default_nu",
    "recover_once",
    "recover_averaged",
    "recover_adaptive",
    "learn_from_image",
    "image_patches",
]


def psnr(estimate, truth, peak=PEAK):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    estimate = as_image(estimate, name="estimate")
    truth = as_image(truth, name="truth")
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    mse = np.mean((estimate - truth) ** 2)
    if mse == 0:
        return np.inf
    return float(10.0 * np.log10(peak**2 / mse))


def default_nu(kind, sigma):
    """``nu = sigma`` for sampling operators, ``0.1 * sigma`` for blurs."""
    if kind in ("mask", "circulant"):
        return float(sigma)
    if kind == "blur" or kind.startswith("blur"):
        return 0.1 * float(sigma)
    raise ValueError(f"unknown operator kind {kind!r}")


@dataclass
class RecoveryResult:
    image: np.ndarray
    estimates: list
    partitions: list
    iterations: list
    dictionary: Dictionary
    wall_time: float = 0.0
    rounds: list = field(default_factory=list)

    def running_averages(self):
        acc = np.zeros_like(self.image)
        out = []
        for j, est in enumerate(self.estimates, 1):
            acc = acc + est
            out.append(acc / j)
        return out

    def report(self, truth=None, timing=True, config=None):
        """JSON-ready summary; PSNR fields only when ``truth`` is given."""
        rep = {
            "partitions": [list(p.corner) for p in self.partitions],
            "iterations": list(self.iterations),
        }
        if truth is not None:
            rep["psnr_per_partition"] = [_json_float(psnr(e, truth)) for e in self.estimates]
            rep["psnr_running_average"] = [_json_float(psnr(a, truth))
                                           for a in self.running_averages()]
            rep["psnr_average"] = _json_float(psnr(self.image, truth))
            if self.rounds:
                rep["psnr_rounds"] = [_json_float(psnr(r, truth)) for r in self.rounds]
        if timing:
            rep["wall_time_s"] = self.wall_time
        if config is not None:
            rep["config"] = config
        return rep


def _json_float(v):
    return v if np.isfinite(v) else "inf"


def _partition_config(config, partition):
    # seed depends on the partition itself, not on its position in the list
    seed = int(rng_for(config.seed, "partition", *partition.corner).integers(2**31))
    return replace(config, seed=seed)


def _solve_partition(dictionary, op, b, nu, partition, config, weights=None):
    prob = RecoveryProblem(dictionary, partition, op, b, nu, weights)
    return solve(prob, _partition_config(config, partition))


def recover_once(dictionary, op, b, nu, partition, config=None, weights=None):
    """Image recovered by solving the model over a single partition."""
    return _solve_partition(dictionary, op, b, nu, partition, config or SolverConfig(),
                            weights).image


def recover_averaged(dictionary, op, b, nu, partitions, config=None, workers=1):
    """Recover once per partition and average the images.

    Partitions are independent; ``workers > 1`` solves them in threads.
    """
    partitions = list(partitions)
    if not partitions:
        raise ValueError("need at least one partition")
    config = config or SolverConfig()
    t0 = time.perf_counter()
    task = lambda p: _solve_partition(dictionary, op, b, nu, p, config)
    if workers > 1 and len(partitions) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(task, partitions))
    else:
        sols = [task(p) for p in partitions]
    estimates = [s.image for s in sols]
    avg = np.mean(estimates, axis=0) if len(estimates) > 1 else estimates[0].copy()
    return RecoveryResult(image=avg, estimates=estimates, partitions=partitions,
                          iterations=[s.iterations for s in sols], dictionary=dictionary,
                          wall_time=time.perf_counter() - t0)


def image_patches(img, n1, n2, source="overlapping", max_patches=20000, rng=None):
    """Vectorized patches of ``img``, one per column.

    ``source="overlapping"`` takes every ``n1 x n2`` window (a seeded random
    subset when there are more than ``max_patches``); ``"canonical"`` takes
    the full cells of the canonical partition.
    """
    img = as_image(img)
    if source == "canonical":
        part = canonical_partition(img.shape[0], img.shape[1], n1, n2)
        return part.image_to_frames(img)[:, part.full_cells()]
    if source != "overlapping":
        raise ValueError(f"unknown patch source {source!r}")
    X = sliding_window_view(img, (n1, n2)).reshape(-1, n1 * n2).T
    if max_patches is not None and X.shape[1] > max_patches:
        rng = np.random.default_rng(0) if rng is None else rng
        X = X[:, np.sort(rng.choice(X.shape[1], size=max_patches, replace=False))]
    return np.ascontiguousarray(X)


def learn_from_image(img, dictionary, lam=None, config=None, source="overlapping",
                     max_patches=20000, scale=PEAK):
    """Refresh a dictionary from the mean-removed patches of ``img``.

    Patches are divided by ``scale`` before learning so that the default
    ``lam = 0.8 / sqrt(n)`` applies to unit-range data.  Learning starts from
    the non-DC atoms of ``dictionary``; the result has the DC atom prepended.
    """
    n1, n2 = dictionary.n1, dictionary.n2
    if config is None:
        config = LearnConfig(lam=lam if lam is not None else 0.8 / np.sqrt(n1 * n2))
    frames = image_patches(img, n1, n2, source, max_patches,
                           rng_for(config.seed, "adaptive-patches"))
    X = (frames - frames.mean(axis=0)) / scale
    D, _, trace = learn(X, dictionary.without_dc().atoms, None, config)
    logger.info("adaptive update: %d patches, %d iterations", X.shape[1], len(trace))
    return Dictionary(D, n1, n2).with_dc()


def recover_adaptive(dictionary, op, b, nu, partitions, rounds=1, config=None,
                     learn_config=None, update=None, workers=1):
    """Averaged recovery followed by ``rounds`` dictionary refreshes.

    ``update(image, dictionary) -> Dictionary`` replaces the default
    :func:`learn_from_image` refresh.  The result's ``rounds`` holds the
    averaged image of every round, starting with the non-adaptive one.
    """
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    if update is None:
        update = lambda img, D: learn_from_image(img, D, config=learn_config)
    t0 = time.perf_counter()
    res = recover_averaged(dictionary, op, b, nu, partitions, config, workers)
    history = [res.image]
    D = dictionary
    for _ in range(rounds):
        D = update(res.image, D)
        res = recover_averaged(D, op, b, nu, partitions, config, workers)
        history.append(res.image)
    res.rounds = history
    res.wall_time = time.perf_counter() - t0
    return res
