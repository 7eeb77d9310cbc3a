"""
Learning a patch dictionary
===========================

Block proximal-gradient learning alternates a projected gradient step on
the dictionary with a soft-thresholded step on the codes.  Extrapolation
speeds it up; a step is redone without it whenever the objective goes up,
so the objective never increases.
"""

import numpy as np

from _scene import scene
from patchrec.bench import sample_training_patches
from patchrec.core import Dictionary
from patchrec.dictlearn import LearnConfig, learn, random_dictionary

rng = np.random.default_rng(0)

# mean-removed 8x8 patches on a unit pixel scale
X = sample_training_patches([scene(128, s) for s in range(3)], 400, 8, 8, rng) / 255.0
print("training set", X.shape)

lam = 0.8 / np.sqrt(64)
D, Y, trace = learn(X, random_dictionary(64, 128, rng), None, LearnConfig(lam=lam))
print(f"{len(trace)} iterations, F {trace.F0:.2f} -> {trace.F[-1]:.2f}, "
      f"{sum(trace.redo)} redo steps")

F = np.array([trace.F0] + trace.F)
print("objective never increased:", bool(np.all(np.diff(F) <= 0)))
print(f"stationarity residual {trace.stationarity_first:.3g} -> {trace.stationarity_final:.3g}")

# average nonzeros per patch
print("nonzeros per patch", np.count_nonzero(Y, axis=0).mean())

dictionary = Dictionary(D, 8, 8).with_dc()
dictionary.save("learned.pdict")
