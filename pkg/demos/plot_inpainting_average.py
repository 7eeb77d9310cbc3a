"""
Inpainting and partition averaging
==================================

Thirty percent of the pixels are kept and a little noise is added.  Each
partition gives its own estimate; averaging the estimates of several
partitions removes much of the blocking of a single one.
"""

import numpy as np

from _scene import scene
from patchrec.bench import build_dct_dictionary
from patchrec.core import rng_for
from patchrec.operators import MaskOperator, add_noise, sample_mask
from patchrec.partition import standard_partitions
from patchrec.recover import default_nu, psnr, recover_averaged

truth = scene()
op = MaskOperator(truth.shape, sample_mask(truth.shape, 0.3, rng_for(0, "mask")))
b, sigma = add_noise(op.apply(truth), 0.01, rng_for(0, "noise"))
print(f"{b.size} samples, sigma {sigma:.3f}")

D = build_dct_dictionary(8, 8, 257)
res = recover_averaged(D, op, b, default_nu("mask", sigma), standard_partitions(64, 64, 8, 8, 5))

for p, est, avg in zip(res.partitions, res.estimates, res.running_averages()):
    print(f"corner {p.corner}: alone {psnr(est, truth):.2f} dB, running average "
          f"{psnr(avg, truth):.2f} dB")
