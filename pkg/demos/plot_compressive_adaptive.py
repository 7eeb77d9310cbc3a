"""
Compressive sensing with an adaptive dictionary
===============================================

Measurements are 30% of the entries of a random unitary circulant
transform of the image.  After a first averaged recovery the dictionary is
relearned from patches of the estimate, and recovery is repeated.
"""

from _scene import scene
from patchrec.bench import build_dct_dictionary
from patchrec.core import rng_for
from patchrec.operators import CirculantOperator, add_noise, sample_mask
from patchrec.partition import standard_partitions
from patchrec.recover import default_nu, psnr, recover_adaptive

truth = scene()
idx = sample_mask(truth.shape, 0.3, rng_for(1, "mask"))
op = CirculantOperator.from_seed(truth.shape, 1, idx)
b, sigma = add_noise(op.apply(truth), 0.01, rng_for(1, "noise"))

res = recover_adaptive(build_dct_dictionary(8, 8, 257), op, b, default_nu("circulant", sigma),
                       standard_partitions(64, 64, 8, 8, 3), rounds=1)

# round 0 uses the DCT, round 1 the refreshed dictionary
for k, img in enumerate(res.rounds):
    print(f"round {k}: {psnr(img, truth):.2f} dB")
print(f"{res.wall_time:.1f}s")
