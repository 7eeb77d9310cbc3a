"""
Aligned patch partitions
========================

A partition tiles the image with non-overlapping patches.  Its first cell
has height ``r0`` and width ``c0``; every later cell is a full patch except
for the ones cut off by the bottom and right borders.
"""

import numpy as np

from patchrec.partition import build_partition, enumerate_partitions, extract_patch

# a 100x100 image with 8x8 patches, first cell 4 rows by 8 columns
p = build_partition(100, 100, 8, 8, 4, 8)
print(p.num_cells, "cells, row lengths", p.row_lengths)

# the upper-right cell is only 4x4; it sits in the top-right corner of its frame
img = np.arange(100 * 100, dtype=float).reshape(100, 100)
frame = extract_patch(img, p, 12).reshape(8, 8)
print(frame[:5, 2:])

# there are 64 distinct corners for 8x8 patches
parts = enumerate_partitions(100, 100, 8, 8)
print(len(parts), "partitions")

# each one covers every pixel exactly once
for q in parts:
    assert np.array_equal(q.frames_to_image(q.image_to_frames(img)), img)
print("all partitions reconstruct the image exactly")
