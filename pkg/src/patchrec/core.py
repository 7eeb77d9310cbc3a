"""Shared domain types: images, dictionaries, PGM and PDICT1 I/O.

Images are plain 2-D ``float64`` arrays holding grayscale values on the
nominal ``[0, 255]`` scale.  Quantization only happens when writing PGM.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PGMError",
    "DictionaryFormatError",
    "Dictionary",
    "as_image",
    "image_from_pgm",
    "image_to_pgm",
    "read_pgm",
    "write_pgm",
    "rng_for",
]

PEAK = 255.0
NORM_SLACK = 1e-12


class PGMError(ValueError):
    """Malformed PGM stream.  ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DictionaryFormatError(ValueError):
    pass


def as_image(img, *, name="image"):
    """Validate and return ``img`` as a finite 2-D float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite pixel values")
    return arr


def rng_for(seed, *components):
    """Independent generator for a named sub-task of a seeded run.

    String components are hashed with CRC-32 so the stream is stable across
    interpreter runs (unlike ``hash``).
    """
    words = [int(seed) & 0xFFFFFFFF]
    for c in components:
        if isinstance(c, str):
            words.append(zlib.crc32(c.encode("utf-8")))
        else:
            words.append(int(c) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


# ---------------------------------------------------------------------------
# PGM

_WHITESPACE = b" \t\n\r\v\f"


def _header_tokens(data, count, pos):
    """Read ``count`` whitespace separated header tokens starting at ``pos``.

    Comments are skipped.  Returns the tokens with their offsets, and the
    offset just past the last token.
    """
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and (data[pos] in _WHITESPACE or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise PGMError("truncated header", pos)
        start = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        tokens.append((data[start:pos], start))
    return tokens, pos


def _header_int(token, offset, what):
    if not token.isdigit():
        raise PGMError(f"invalid {what} {token!r}", offset)
    return int(token)


def image_from_pgm(data):
    """Parse a P5 (binary) or P2 (ASCII) PGM byte stream with maxval <= 255."""
    data = bytes(data)
    if len(data) < 2:
        raise PGMError("truncated magic number", len(data))
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise PGMError(f"unsupported magic {magic!r}", 0)
    if len(data) > 2 and data[2] not in _WHITESPACE and data[2] != ord("#"):
        raise PGMError("missing whitespace after magic number", 2)
    tokens, pos = _header_tokens(data, 3, 2)
    (wtok, woff), (htok, hoff), (mtok, moff) = tokens
    width = _header_int(wtok, woff, "width")
    height = _header_int(htok, hoff, "height")
    maxval = _header_int(mtok, moff, "maxval")
    if width < 1 or height < 1:
        raise PGMError("image dimensions must be positive", woff)
    if maxval < 1 or maxval > 255:
        raise PGMError(f"maxval {maxval} outside [1, 255]", moff)
    count = width * height

    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise PGMError("missing whitespace before raster", pos)
        pos += 1
        if len(data) - pos < count:
            raise PGMError(f"truncated raster: expected {count} bytes, found {len(data) - pos}",
                           len(data))
        raster = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
        if np.any(raster > maxval):
            bad = int(np.argmax(raster > maxval))
            raise PGMError(f"sample exceeds maxval {maxval}", pos + bad)
        values = raster.astype(np.float64)
    else:
        values = np.empty(count, dtype=np.float64)
        body = data[pos:]
        i = 0
        p = 0
        n = len(body)
        while i < count:
            while p < n and body[p] in _WHITESPACE:
                p += 1
            if p >= n:
                raise PGMError(f"truncated raster: expected {count} samples, found {i}",
                               pos + p)
            start = p
            while p < n and body[p] not in _WHITESPACE:
                p += 1
            tok = body[start:p]
            if not tok.isdigit():
                raise PGMError(f"invalid sample {tok!r}", pos + start)
            v = int(tok)
            if v > maxval:
                raise PGMError(f"sample exceeds maxval {maxval}", pos + start)
            values[i] = v
            i += 1
    # samples are kept as-is (maxval <= 255 already lies on the pixel scale)
    return values.reshape(height, width)


def _quantize(img):
    # round half away from zero, then clamp
    q = np.sign(img) * np.floor(np.abs(img) + 0.5)
    return np.clip(q, 0, 255).astype(np.uint8)


def image_to_pgm(img):
    """Encode an image as a binary (P5) PGM with maxval 255."""
    img = as_image(img)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + _quantize(img).tobytes()


def read_pgm(path):
    with open(path, "rb") as fh:
        return image_from_pgm(fh.read())


def write_pgm(path, img):
    with open(path, "wb") as fh:
        fh.write(image_to_pgm(img))


# ---------------------------------------------------------------------------
# Dictionary

_PDICT_MAGIC = b"PDICT1\n"


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Patch dictionary with one ``n1*n2`` atom per column.

    Atoms are patches vectorized in row-major order.  When ``has_dc`` is
    set, column 0 is the constant (DC) atom.
    """

    atoms: np.ndarray
    n1: int
    n2: int
    has_dc: bool = False

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64, order="F")
        if atoms.ndim != 2 or atoms.shape[0] != self.n1 * self.n2:
            raise ValueError(f"atoms must have {self.n1 * self.n2} rows, got shape {atoms.shape}")
        if atoms.shape[1] < 1:
            raise ValueError("dictionary needs at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("dictionary contains non-finite entries")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(norms > 1 + NORM_SLACK):
            raise ValueError(f"atom norm {norms.max():.17g} exceeds 1")
        if self.has_dc:
            dc = atoms[:, 0]
            if not (dc[0] > 0 and np.all(dc == dc[0])):
                raise ValueError("has_dc set but column 0 is not a positive constant")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def num_atoms(self):
        return self.atoms.shape[1]

    @property
    def patch_size(self):
        return self.n1 * self.n2

    def with_dc(self):
        """Prepend the unit-norm constant atom."""
        e = np.full((self.patch_size, 1), 1.0 / np.sqrt(self.patch_size))
        return Dictionary(np.hstack([e, self.atoms]), self.n1, self.n2, has_dc=True)

    def without_dc(self):
        if not self.has_dc:
            return self
        return Dictionary(self.atoms[:, 1:], self.n1, self.n2, has_dc=False)

    def to_bytes(self):
        header = b"%d %d %d %d\n" % (self.n1, self.n2, self.num_atoms, int(self.has_dc))
        payload = self.atoms.astype("<f8").tobytes(order="F")
        return _PDICT_MAGIC + header + payload

    @classmethod
    def from_bytes(cls, data):
        data = bytes(data)
        if not data.startswith(_PDICT_MAGIC):
            raise DictionaryFormatError("missing PDICT1 magic")
        nl = data.find(b"\n", len(_PDICT_MAGIC))
        if nl < 0:
            raise DictionaryFormatError("truncated PDICT1 header")
        fields_ = data[len(_PDICT_MAGIC):nl].split()
        if len(fields_) != 4 or not all(f.isdigit() for f in fields_):
            raise DictionaryFormatError(f"bad PDICT1 header {data[len(_PDICT_MAGIC):nl]!r}")
        n1, n2, k, dc = (int(f) for f in fields_)
        if dc not in (0, 1):
            raise DictionaryFormatError(f"dc flag must be 0 or 1, got {dc}")
        expected = n1 * n2 * k * 8
        payload = data[nl + 1:]
        if len(payload) != expected:
            raise DictionaryFormatError(f"payload has {len(payload)} bytes, expected {expected}")
        atoms = np.frombuffer(payload, dtype="<f8").reshape((n1 * n2, k), order="F")
        return cls(atoms, n1, n2, has_dc=bool(dc))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

