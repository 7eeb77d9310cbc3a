"""Command-line drivers: ``learn``, ``degrade``, ``recover`` and ``bench-synth``.

Exit status is 0 on success, 2 for usage or validation errors and 1 for
runtime failures.  Every command is deterministic given its arguments; the
``--no-timing`` flag drops wall-clock fields so outputs are byte-stable.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bench import bench_grid, build_dct_dictionary, run_synth_bench, sample_training_patches
from .bench import write_report_csv, write_report_json
from .core import PEAK, Dictionary, DictionaryFormatError, PGMError, read_pgm, rng_for
from .core import image_to_pgm
from .dictlearn import LearnConfig, learn, random_dictionary
from .l1solve import SolverConfig
from .operators import (BlurOperator, CirculantOperator, MaskOperator, add_noise,
                        average_kernel, motion_kernel, random_spectrum, sample_mask)
from .partition import build_partition, standard_partitions
from .recover import default_nu, recover_adaptive, recover_averaged

logger = logging.getLogger(__name__)

__all__ = ["main", "write_measurements", "read_measurements", "load_measurement_set",
           "build_operator"]

_PMEAS_MAGIC = b"PMEAS1\n"
_OP_KINDS = ("mask", "circulant", "blur-average", "blur-motion")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# file helpers

def _atomic_write(path, data):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_bytes(obj):
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def write_measurements(path, b):
    """PMEAS1: magic, ASCII ``"m complex_flag\\n"``, then ``m`` little-endian float64 (re, im) pairs."""
    b = np.asarray(b)
    is_complex = int(np.iscomplexobj(b))
    pairs = np.empty((b.size, 2), dtype="<f8")
    pairs[:, 0] = np.real(b)
    pairs[:, 1] = np.imag(b) if is_complex else 0.0
    _atomic_write(path, _PMEAS_MAGIC + b"%d %d\n" % (b.size, is_complex) + pairs.tobytes())


def read_measurements(path):
    data = Path(path).read_bytes()
    if not data.startswith(_PMEAS_MAGIC):
        raise UsageError(f"{path}: missing PMEAS1 magic")
    nl = data.find(b"\n", len(_PMEAS_MAGIC))
    fields = data[len(_PMEAS_MAGIC):nl].split() if nl > 0 else []
    if len(fields) != 2 or not all(f.isdigit() for f in fields):
        raise UsageError(f"{path}: bad PMEAS1 header")
    m, is_complex = int(fields[0]), int(fields[1])
    payload = data[nl + 1:]
    if len(payload) != 16 * m:
        raise UsageError(f"{path}: expected {16 * m} payload bytes, found {len(payload)}")
    pairs = np.frombuffer(payload, dtype="<f8").reshape(m, 2)
    if is_complex:
        return pairs[:, 0] + 1j * pairs[:, 1]
    return pairs[:, 0].copy()


def build_operator(sidecar):
    """Rebuild a measurement operator from its JSON sidecar description."""
    kind = sidecar["kind"]
    shape = tuple(sidecar["shape"])
    if kind == "mask":
        return MaskOperator(shape, sidecar["indices"])
    if kind == "circulant":
        return CirculantOperator(shape, random_spectrum(shape, sidecar["spectrum_seed"]),
                                 sidecar["indices"])
    if kind == "blur-average":
        return BlurOperator(shape, average_kernel(9), name="average")
    if kind == "blur-motion":
        return BlurOperator(shape, motion_kernel(10, 45), name="motion")
    raise UsageError(f"unknown operator kind {kind!r}")


def load_measurement_set(prefix):
    """Read ``PREFIX.pmeas``, ``PREFIX.op.json`` and ``PREFIX.json``."""
    prefix = str(prefix)
    try:
        manifest = json.loads(Path(prefix + ".json").read_text())
        sidecar = json.loads(Path(prefix + ".op.json").read_text())
        b = read_measurements(prefix + ".pmeas")
    except FileNotFoundError as exc:
        raise UsageError(f"missing measurement file: {exc.filename}") from None
    op = build_operator(sidecar)
    if b.size != op.output_size:
        raise UsageError(f"{b.size} measurements but operator produces {op.output_size}")
    return b, op, manifest


# ---------------------------------------------------------------------------
# argument parsing helpers

def _patch_spec(text):
    try:
        a, b = text.lower().split("x")
        n1, n2 = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"patch size must look like 8x8, got {text!r}")
    if n1 < 1 or n2 < 1:
        raise argparse.ArgumentTypeError(f"patch size must be positive, got {text!r}")
    return n1, n2


def _parse_partitions(text, shape, n1, n2):
    N1, N2 = shape
    if text in ("3", "5"):
        return standard_partitions(N1, N2, n1, n2, int(text))
    parts = []
    for item in text.split(","):
        try:
            r0, c0 = _patch_spec(item.strip())
            parts.append(build_partition(N1, N2, n1, n2, r0, c0))
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"bad partition {item!r}: {exc}") from None
    return parts


def _list_images(directory):
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"image directory {directory} does not exist")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise UsageError(f"no .pgm files in {directory}")
    images = []
    for f in files:
        try:
            images.append(read_pgm(f))
        except (OSError, PGMError) as exc:
            raise UsageError(f"cannot read {f}: {exc}") from None
    return images


# ---------------------------------------------------------------------------
# commands

def cmd_learn(args):
    n1, n2 = args.patch
    n = n1 * n2
    if args.lam == "auto":
        lam = 0.8 / math.sqrt(n)
    else:
        try:
            lam = float(args.lam)
        except ValueError:
            raise UsageError(f"--lambda must be a number or 'auto', got {args.lam!r}") from None
    if not lam > 0:
        raise UsageError("--lambda must be positive")
    if args.atoms < 1:
        raise UsageError("--atoms must be positive")
    images = _list_images(args.images)
    X = sample_training_patches(images, args.patches_per_image, n1, n2,
                                rng_for(args.seed, "patches")) / PEAK
    if X.shape[1] == 0:
        raise UsageError("no training patches could be sampled")
    D0 = random_dictionary(n, args.atoms, rng_for(args.seed, "init"))
    config = LearnConfig(lam=lam, max_iters=args.max_iters, seed=args.seed)
    D, _, trace = learn(X, D0, None, config)
    dictionary = Dictionary(D, n1, n2).with_dc()
    _atomic_write(args.out, dictionary.to_bytes())
    trace_path = args.trace or str(args.out) + ".trace.csv"
    buf = io.StringIO()
    trace.to_csv(buf)
    _atomic_write(trace_path, buf.getvalue().encode())
    print(f"learned {dictionary.num_atoms} atoms (lambda={lam:g}) from {X.shape[1]} patches "
          f"in {len(trace)} iterations -> {args.out}")
    return 0


def cmd_degrade(args):
    try:
        img = read_pgm(args.image)
    except (OSError, PGMError) as exc:
        raise UsageError(f"cannot read {args.image}: {exc}") from None
    if args.op in ("mask", "circulant") and not 0 < args.sr <= 1:
        raise UsageError(f"--sr must lie in (0, 1], got {args.sr}")
    if args.sigma_hat < 0:
        raise UsageError("--sigma-hat must be nonnegative")
    shape = img.shape
    sidecar = {"kind": args.op, "shape": list(shape)}
    if args.op in ("mask", "circulant"):
        idx = sample_mask(shape, args.sr, rng_for(args.seed, "mask"))
        sidecar["indices"] = idx.tolist()
        sidecar["sampling_ratio"] = args.sr
        if args.op == "circulant":
            sidecar["spectrum_seed"] = args.seed
    else:
        sidecar["kernel"] = "average-9x9" if args.op == "blur-average" else "motion-10-45"
    op = build_operator(sidecar)
    clean = op.apply(img)
    b, sigma = add_noise(clean, args.sigma_hat, rng_for(args.seed, "noise"))
    prefix = str(args.out)
    write_measurements(prefix + ".pmeas", b)
    _atomic_write(prefix + ".op.json", _json_bytes(sidecar))
    manifest = {
        "format": "PMEAS1",
        "image": os.path.basename(str(args.image)),
        "shape": list(shape),
        "op": args.op,
        "sigma_hat": args.sigma_hat,
        "sigma": sigma,
        "num_measurements": int(b.size),
        "complex": bool(np.iscomplexobj(b)),
        "seed": args.seed,
    }
    _atomic_write(prefix + ".json", _json_bytes(manifest))
    print(f"{b.size} measurements, sigma={sigma:.6g} -> {prefix}.pmeas")
    return 0


def cmd_recover(args):
    b, op, manifest = load_measurement_set(args.measurements)
    shape = op.shape
    if args.dict == "dct":
        n1, n2 = args.patch
        dictionary = build_dct_dictionary(n1, n2, args.dct_atoms)
    else:
        try:
            dictionary = Dictionary.load(args.dict)
        except (OSError, DictionaryFormatError, ValueError) as exc:
            raise UsageError(f"cannot load dictionary {args.dict}: {exc}") from None
    n1, n2 = dictionary.n1, dictionary.n2
    if n1 > shape[0] or n2 > shape[1]:
        raise UsageError(f"dictionary patches {n1}x{n2} exceed image {shape[0]}x{shape[1]}")
    partitions = _parse_partitions(args.partitions, shape, n1, n2)

    if args.nu == "auto":
        sigma = float(manifest.get("sigma", 0.0))
        nu = default_nu(manifest["op"], sigma)
        if not nu > 0:
            raise UsageError("--nu auto needs a noisy measurement set (sigma > 0)")
    else:
        try:
            nu = float(args.nu)
        except ValueError:
            raise UsageError(f"--nu must be a number or 'auto', got {args.nu!r}") from None
        if not nu > 0:
            raise UsageError("--nu must be positive")

    truth = None
    if args.truth:
        try:
            truth = read_pgm(args.truth)
        except (OSError, PGMError) as exc:
            raise UsageError(f"cannot read {args.truth}: {exc}") from None
        if truth.shape != shape:
            raise UsageError(f"truth shape {truth.shape} does not match measurements {shape}")

    config = SolverConfig(rel_tol=args.tol, max_iters=args.max_iters, seed=args.seed)
    if args.adaptive:
        lconf = LearnConfig(lam=0.8 / math.sqrt(n1 * n2), seed=args.seed)
        res = recover_adaptive(dictionary, op, b, nu, partitions, rounds=args.rounds,
                               config=config, learn_config=lconf, workers=args.workers)
    else:
        res = recover_averaged(dictionary, op, b, nu, partitions, config, args.workers)

    _atomic_write(args.out, image_to_pgm(res.image))
    echo = {
        "dict": str(args.dict), "measurements": str(args.measurements), "op": manifest["op"],
        "nu": nu, "adaptive": bool(args.adaptive), "rounds": args.rounds if args.adaptive else 0,
        "tol": args.tol, "max_iters": args.max_iters, "seed": args.seed,
        "version": __version__,
    }
    report = res.report(truth, timing=not args.no_timing, config=echo)
    report_path = args.report or str(args.out) + ".json"
    _atomic_write(report_path, _json_bytes(report))
    msg = f"recovered {shape[0]}x{shape[1]} image from {len(partitions)} partitions"
    if truth is not None:
        msg += f", PSNR {report['psnr_average']} dB"
    print(msg + f" -> {args.out}")
    return 0


def cmd_bench_synth(args):
    grid = bench_grid(args.scale, trials=args.trials, seed=args.seed)
    rows = []
    for spec in grid:
        row = run_synth_bench(spec)
        rows.append(row)
        print(f"n={spec.n} K={spec.K} p={spec.p} r={spec.r}: "
              f"{row['mean_rate_pct']:.2f}% over {spec.num_trials} trials")
    out = str(args.out)
    buf = io.StringIO()
    if out.endswith(".json"):
        write_report_json(rows, buf, timing=not args.no_timing,
                          extra={"scale": args.scale, "seed": args.seed})
    else:
        write_report_csv(rows, buf, timing=not args.no_timing)
    _atomic_write(out, buf.getvalue().encode())
    return 0


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="patchrec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("learn", help="learn a patch dictionary from a folder of PGM images")
    p.add_argument("--images", required=True)
    p.add_argument("--patches-per-image", type=int, default=100)
    p.add_argument("--patch", type=_patch_spec, default=(8, 8))
    p.add_argument("--atoms", type=int, default=256)
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("degrade", help="simulate noisy linear measurements of an image")
    p.add_argument("--image", required=True)
    p.add_argument("--op", choices=_OP_KINDS, required=True)
    p.add_argument("--sr", type=float, default=0.3)
    p.add_argument("--sigma-hat", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("recover", help="recover an image from a measurement set")
    p.add_argument("--dict", required=True, help="PDICT1 file or 'dct'")
    p.add_argument("--patch", type=_patch_spec, default=(8, 8), help="patch size for --dict dct")
    p.add_argument("--dct-atoms", type=int, default=257)
    p.add_argument("--measurements", required=True, help="prefix written by 'degrade'")
    p.add_argument("--partitions", default="3", help="3, 5 or a list of corners like 8x8,8x4")
    p.add_argument("--nu", default="auto")
    p.add_argument("--adaptive", type=int, choices=(0, 1), default=0)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--truth")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("bench-synth", help="synthetic dictionary-recovery benchmark")
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV, or JSON when the name ends in .json")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_bench_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"patchrec {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.debug("failure", exc_info=True)
        print(f"patchrec {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
