"""Whole-image recovery by sparse coding over non-overlapping patch partitions.

Images are recovered from linear measurements by solving a weighted l1
problem over each of several aligned patch partitions and averaging the
results.  Patch dictionaries are learned by block proximal-gradient descent.
"""

__version__ = "0.1.0"

from .core import Dictionary, as_image, image_from_pgm, image_to_pgm, read_pgm, write_pgm
from .partition import (
    Partition,
    build_partition,
    embed_patch,
    enumerate_partitions,
    extract_patch,
    standard_partitions,
)
from .operators import (
    BlurOperator,
    CirculantOperator,
    MaskOperator,
    add_noise,
    average_kernel,
    motion_kernel,
    spectral_norm,
)
from .dictlearn import LearnConfig, learn
from .l1solve import RecoveryProblem, SolverConfig, solve
from .recover import psnr, recover_adaptive, recover_averaged, recover_once
from .bench import build_dct_dictionary, generate_synthetic, recovery_rate, run_synth_bench

__all__ = [
    "Dictionary", "as_image", "image_from_pgm", "image_to_pgm", "read_pgm", "write_pgm",
    "Partition", "build_partition", "embed_patch", "enumerate_partitions", "extract_patch",
    "standard_partitions",
    "BlurOperator", "CirculantOperator", "MaskOperator", "add_noise", "average_kernel",
    "motion_kernel", "spectral_norm",
    "LearnConfig", "learn",
    "RecoveryProblem", "SolverConfig", "solve",
    "psnr", "recover_adaptive", "recover_averaged", "recover_once",
    "build_dct_dictionary", "generate_synthetic", "recovery_rate", "run_synth_bench",
]
