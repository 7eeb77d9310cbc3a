"""Aligned non-overlapping patch partitions and the patch extraction operators.

A partition tiles an ``N1 x N2`` image with cells no larger than ``n1 x n2``.
The first row of cells has height ``r0`` and the first column width ``c0``;
all interior cells are full size and the last row/column is cut by the image
border.  Each cell is lifted to a full ``n1 x n2`` frame: truncated cells
touching the bottom (right) border sit at the bottom (right) of the frame,
all other cells sit at the top (left).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import as_image

__all__ = [
    "Cell",
    "Partition",
    "build_partition",
    "enumerate_partitions",
    "extract_patch",
    "embed_patch",
    "canonical_partition",
    "standard_partitions",
]


class Cell(NamedTuple):
    row: int
    col: int
    height: int
    width: int


def _spans(total, size, lead):
    starts = [0]
    lengths = [lead]
    pos = lead
    while pos < total:
        step = min(size, total - pos)
        starts.append(pos)
        lengths.append(step)
        pos += step
    return starts, lengths


def _offset(start, length, size, total):
    """Position of a cell's first pixel inside its frame along one axis."""
    if length < size and start + length == total and start > 0:
        return size - length
    return 0


@dataclass(frozen=True, eq=False)
class Partition:
    """Partition of an ``image_shape`` raster into aligned cells.

    Cells are listed row-major by their upper-left pixel.  ``pixel_map`` maps
    every pixel to its slot in the ``(n1*n2, num_cells)`` frame matrix
    (flattened in C order); the slots not hit are frame padding.
    """

    image_shape: tuple
    patch_shape: tuple
    corner: tuple
    cells: tuple
    row_lengths: tuple
    col_lengths: tuple
    pixel_map: np.ndarray
    frame_offsets: tuple

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def frame_size(self):
        return self.patch_shape[0] * self.patch_shape[1]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (self.image_shape == other.image_shape
                and self.patch_shape == other.patch_shape
                and self.cells == other.cells)

    def __hash__(self):
        return hash((self.image_shape, self.patch_shape, self.cells))

    def __repr__(self):
        (N1, N2), (n1, n2), (r0, c0) = self.image_shape, self.patch_shape, self.corner
        return f"Partition({N1}x{N2}, patch {n1}x{n2}, corner {r0}x{c0}, {self.num_cells} cells)"

    # frame matrix <-> image, vectorized over all cells

    def frames_to_image(self, frames):
        """Sum of the cell-supported parts of each frame column, as an image."""
        frames = np.asarray(frames)
        if frames.shape != (self.frame_size, self.num_cells):
            raise ValueError(f"frames must have shape {(self.frame_size, self.num_cells)}, "
                             f"got {frames.shape}")
        return frames.ravel()[self.pixel_map]

    def image_to_frames(self, img):
        """Extract every cell of ``img`` into a zero-padded frame column."""
        img = np.asarray(img)
        if img.shape != self.image_shape:
            raise ValueError(f"image shape {img.shape} does not match partition {self.image_shape}")
        out = np.zeros(self.frame_size * self.num_cells, dtype=img.dtype)
        out[self.pixel_map.ravel()] = img.ravel()
        return out.reshape(self.frame_size, self.num_cells)

    def full_cells(self):
        """Indices of cells that are exactly ``n1 x n2``."""
        n1, n2 = self.patch_shape
        return [i for i, c in enumerate(self.cells) if c.height == n1 and c.width == n2]


def build_partition(N1, N2, n1, n2, r0, c0):
    """Aligned partition whose upper-left cell is ``r0 x c0``."""
    for name, v in (("N1", N1), ("N2", N2), ("n1", n1), ("n2", n2), ("r0", r0), ("c0", c0)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    N1, N2, n1, n2, r0, c0 = map(int, (N1, N2, n1, n2, r0, c0))
    if n1 > N1 or n2 > N2:
        raise ValueError(f"patch {n1}x{n2} larger than image {N1}x{N2}")
    if not (1 <= r0 <= n1 and 1 <= c0 <= n2):
        raise ValueError(f"corner {r0}x{c0} must satisfy 1 <= r0 <= {n1}, 1 <= c0 <= {n2}")

    rstarts, rlens = _spans(N1, n1, r0)
    cstarts, clens = _spans(N2, n2, c0)
    cells = tuple(Cell(r, c, h, w)
                  for r, h in zip(rstarts, rlens)
                  for c, w in zip(cstarts, clens))
    ncells = len(cells)

    offsets = []
    pixel_map = np.empty((N1, N2), dtype=np.intp)
    for k, (r, c, h, w) in enumerate(cells):
        dr = _offset(r, h, n1, N1)
        dc = _offset(c, w, n2, N2)
        offsets.append((dr, dc))
        fr = np.arange(dr, dr + h)[:, None]
        fc = np.arange(dc, dc + w)[None, :]
        pixel_map[r:r + h, c:c + w] = (fr * n2 + fc) * ncells + k
    pixel_map.setflags(write=False)
    return Partition(
        image_shape=(N1, N2),
        patch_shape=(n1, n2),
        corner=(r0, c0),
        cells=cells,
        row_lengths=tuple(rlens),
        col_lengths=tuple(clens),
        pixel_map=pixel_map,
        frame_offsets=tuple(offsets),
    )


def enumerate_partitions(N1, N2, n1, n2):
    """All distinct aligned partitions, ordered by corner ``(r0, c0)``."""
    seen = set()
    parts = []
    for r0 in range(1, n1 + 1):
        for c0 in range(1, n2 + 1):
            p = build_partition(N1, N2, n1, n2, r0, c0)
            if p.cells not in seen:
                seen.add(p.cells)
                parts.append(p)
    return parts


def canonical_partition(N1, N2, n1, n2):
    return build_partition(N1, N2, n1, n2, n1, n2)


def standard_partitions(N1, N2, n1, n2, count=3):
    """The 3- or 5-partition sets with corners n1xn2, n1x(n2/2), (n1/2)xn2, n1x(n2/4), (n1/4)xn2."""
    corners = [(n1, n2), (n1, max(1, n2 // 2)), (max(1, n1 // 2), n2),
               (n1, max(1, n2 // 4)), (max(1, n1 // 4), n2)]
    if count not in (3, 5):
        raise ValueError(f"standard partition sets have 3 or 5 members, not {count}")
    return [build_partition(N1, N2, n1, n2, r0, c0) for r0, c0 in corners[:count]]


def _check_index(p, cell_index):
    if not (0 <= cell_index < p.num_cells):
        raise IndexError(f"cell index {cell_index} outside [0, {p.num_cells})")


def extract_patch(img, p, cell_index):
    """Lift one cell of ``img`` into a zero-padded frame vector of length ``n1*n2``."""
    img = as_image(img)
    if img.shape != p.image_shape:
        raise ValueError(f"image shape {img.shape} does not match partition {p.image_shape}")
    _check_index(p, cell_index)
    n1, n2 = p.patch_shape
    r, c, h, w = p.cells[cell_index]
    dr, dc = p.frame_offsets[cell_index]
    frame = np.zeros((n1, n2))
    frame[dr:dr + h, dc:dc + w] = img[r:r + h, c:c + w]
    return frame.ravel()


def embed_patch(frame, p, cell_index, target):
    """Add the cell-supported part of ``frame`` into ``target`` in place (adjoint of extract)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (p.frame_size,):
        raise ValueError(f"frame must have length {p.frame_size}, got shape {frame.shape}")
    if target.shape != p.image_shape:
        raise ValueError(f"target shape {target.shape} does not match partition {p.image_shape}")
    _check_index(p, cell_index)
    n1, n2 = p.patch_shape
    r, c, h, w = p.cells[cell_index]
    dr, dc = p.frame_offsets[cell_index]
    target[r:r + h, c:c + w] += frame.reshape(n1, n2)[dr:dr + h, dc:dc + w]
    return target
