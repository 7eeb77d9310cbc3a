"""
Deblurring
==========

Periodic blur by a 9x9 box and by a diagonal motion kernel.  Every pixel
is measured, so the regularization weight is smaller than for sampling.
"""

import numpy as np

from _scene import scene
from patchrec.bench import build_dct_dictionary
from patchrec.core import rng_for
from patchrec.operators import BlurOperator, add_noise, average_kernel, motion_kernel
from patchrec.partition import standard_partitions
from patchrec.recover import default_nu, psnr, recover_averaged

truth = scene()
D = build_dct_dictionary(8, 8, 257)
parts = standard_partitions(64, 64, 8, 8, 3)

print(np.array2string(motion_kernel(10, 45), precision=3, suppress_small=True))

for name, kernel in (("average", average_kernel(9)), ("motion", motion_kernel(10, 45))):
    op = BlurOperator(truth.shape, kernel, name)
    b, sigma = add_noise(op.apply(truth), 0.01, rng_for(2, "noise"))
    blurred = b.reshape(truth.shape)
    res = recover_averaged(D, op, b, default_nu("blur", sigma), parts)
    print(f"{name}: blurred {psnr(blurred, truth):.2f} dB, recovered "
          f"{psnr(res.image, truth):.2f} dB")
