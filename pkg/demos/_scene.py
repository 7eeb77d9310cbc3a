"""Small synthetic test picture shared by the demos."""

import numpy as np


def scene(size=64, seed=0):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = 90 + 60 * np.sin(6 * xx) * np.cos(4 * yy)
    img[(xx - 0.6) ** 2 + (yy - 0.4) ** 2 < 0.04] = 210
    img[int(0.7 * size):, : size // 3] = 40
    img += rng.normal(0, 2, img.shape)
    return np.clip(img, 0, 255)
