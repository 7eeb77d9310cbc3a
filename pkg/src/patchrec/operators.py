"""Linear measurement operators with exact adjoints.

Three families are provided: pixel sampling (inpainting), pixel sampling of
a unitary 2-D circulant transform (compressive sensing) and periodic
blurring.  Every operator maps an image to a 1-D measurement vector.
Complex measurements are paired with images through the real inner product
``Re <u, v>``, so ``adjoint`` always returns a real image.
"""

from __future__ import annotations

import logging

import numpy as np

from .core import as_image, rng_for

logger = logging.getLogger(__name__)

__all__ = [
    "MeasurementOperator",
    "MaskOperator",
    "CirculantOperator",
    "BlurOperator",
    "sample_mask",
    "random_spectrum",
    "average_kernel",
    "motion_kernel",
    "add_noise",
    "spectral_norm",
]


class MeasurementOperator:
    """Base class; subclasses implement ``_forward`` and ``_backward``."""

    kind = "abstract"
    is_complex = False

    def __init__(self, shape):
        self.shape = tuple(int(s) for s in shape)

    @property
    def output_size(self):
        raise NotImplementedError

    def apply(self, img):
        img = np.asarray(img, dtype=np.float64)
        if img.shape != self.shape:
            raise ValueError(f"{self.kind} operator expects image shape {self.shape}, "
                             f"got {img.shape}")
        return self._forward(img)

    def adjoint(self, v):
        v = np.asarray(v)
        if v.shape != (self.output_size,):
            raise ValueError(f"{self.kind} operator expects {self.output_size} measurements, "
                             f"got shape {v.shape}")
        return self._backward(v)

    def __call__(self, img):
        return self.apply(img)

    def norm(self, iters=30, tol=1e-8, seed=0):
        return spectral_norm(self.apply, self.adjoint, self.shape, iters=iters, tol=tol,
                             seed=seed)


def _check_indices(indices, size):
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError("sample set is empty")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("sample indices must be strictly increasing")
    if idx[0] < 0 or idx[-1] >= size:
        raise ValueError(f"sample indices must lie in [0, {size})")
    idx.setflags(write=False)
    return idx


def sample_mask(shape, ratio, rng):
    """``floor(ratio * N1 * N2)`` distinct linear pixel indices drawn uniformly, sorted."""
    if not 0 < ratio <= 1:
        raise ValueError(f"sampling ratio must lie in (0, 1], got {ratio}")
    size = shape[0] * shape[1]
    m = int(np.floor(ratio * size))
    if m < 1:
        raise ValueError(f"sampling ratio {ratio} selects no pixels of a {shape} image")
    return np.sort(rng.choice(size, size=m, replace=False))


class MaskOperator(MeasurementOperator):
    """Keep the pixels listed in ``indices`` (row-major linear indices)."""

    kind = "mask"

    def __init__(self, shape, indices):
        super().__init__(shape)
        self.indices = _check_indices(indices, self.shape[0] * self.shape[1])

    @property
    def output_size(self):
        return self.indices.size

    def _forward(self, img):
        return img.ravel()[self.indices]

    def _backward(self, v):
        out = np.zeros(self.shape[0] * self.shape[1])
        out[self.indices] = np.real(v)
        return out.reshape(self.shape)


def random_spectrum(shape, seed):
    """Unit-modulus transfer function with phases uniform on ``[0, 2*pi)``."""
    phases = rng_for(seed, "circulant-spectrum").uniform(0.0, 2 * np.pi, size=shape)
    return np.exp(1j * phases)


class CirculantOperator(MeasurementOperator):
    """Samples ``indices`` of ``ifft2(fft2(M) * spectrum)``.

    With a unit-modulus spectrum the circulant part is unitary.
    """

    kind = "circulant"
    is_complex = True

    def __init__(self, shape, spectrum, indices):
        super().__init__(shape)
        spectrum = np.asarray(spectrum, dtype=np.complex128)
        if spectrum.shape != self.shape:
            raise ValueError(f"spectrum shape {spectrum.shape} does not match {self.shape}")
        if np.max(np.abs(np.abs(spectrum) - 1)) > 1e-12:
            raise ValueError("circulant spectrum must have unit modulus")
        spectrum.setflags(write=False)
        self.spectrum = spectrum
        self.indices = _check_indices(indices, self.shape[0] * self.shape[1])

    @classmethod
    def from_seed(cls, shape, seed, indices):
        return cls(shape, random_spectrum(shape, seed), indices)

    @property
    def output_size(self):
        return self.indices.size

    def _forward(self, img):
        full = np.fft.ifft2(np.fft.fft2(img) * self.spectrum)
        return full.ravel()[self.indices]

    def _backward(self, v):
        z = np.zeros(self.shape[0] * self.shape[1], dtype=np.complex128)
        z[self.indices] = v
        z = z.reshape(self.shape)
        return np.real(np.fft.ifft2(np.fft.fft2(z) * np.conj(self.spectrum)))


def average_kernel(size=9):
    return np.full((size, size), 1.0 / size**2)


def motion_kernel(length=10, angle=45.0):
    """Anti-aliased line segment kernel, normalized to unit sum.

    Each grid point is weighted by ``1 - d`` where ``d`` is its distance to
    the segment of the given length through the kernel centre (clipped at
    0); beyond the segment ends the distance is measured to the end point.
    The weights of one quadrant are mirrored through the centre.
    """
    eps = np.finfo(float).eps
    half = (length - 1) / 2.0
    phi = np.deg2rad(np.mod(angle, 180.0))
    cphi, sphi = np.cos(phi), np.sin(phi)
    xsign = np.sign(cphi) if cphi != 0 else 1.0
    width = 1.0

    sx = int(np.fix(half * cphi + width * xsign - length * eps))
    sy = int(np.fix(half * sphi + width - length * eps))
    x, y = np.meshgrid(np.arange(0, sx + xsign, xsign if sx != 0 else 1),
                       np.arange(0, sy + 1))
    x = x.astype(float)
    y = y.astype(float)

    dist = y * cphi - x * sphi
    rad = np.hypot(x, y)
    last = (rad >= half) & (np.abs(dist) <= width)
    x2last = half - np.abs((x[last] + dist[last] * sphi) / cphi)
    dist[last] = np.hypot(dist[last], x2last)
    dist = width + eps - np.abs(dist)
    dist[dist < 0] = 0

    # mirror the quadrant through the centre
    h = np.rot90(dist, 2)
    n0, m0 = h.shape
    full = np.zeros((2 * n0 - 1, 2 * m0 - 1))
    full[:n0, :m0] = h
    full[n0 - 1:, m0 - 1:] = dist
    full /= full.sum() + eps * length * length
    if cphi > 0:
        full = np.flipud(full)
    return full / full.sum()


class BlurOperator(MeasurementOperator):
    """Periodic convolution with a centred ``kernel``; output has ``N1*N2`` entries."""

    kind = "blur"

    def __init__(self, shape, kernel, name=None):
        super().__init__(shape)
        kernel = np.array(kernel, dtype=np.float64)
        if kernel.ndim != 2 or kernel.shape[0] > self.shape[0] or kernel.shape[1] > self.shape[1]:
            raise ValueError(f"kernel shape {kernel.shape} incompatible with image {self.shape}")
        if np.any(kernel < 0) or abs(kernel.sum() - 1) > 1e-12:
            raise ValueError("blur kernel must be nonnegative and sum to 1")
        kernel.setflags(write=False)
        self.kernel = kernel
        self.name = name
        psf = np.zeros(self.shape)
        kh, kw = kernel.shape
        psf[:kh, :kw] = kernel
        psf = np.roll(psf, (-(kh // 2), -(kw // 2)), axis=(0, 1))
        self.transfer = np.fft.fft2(psf)

    @property
    def output_size(self):
        return self.shape[0] * self.shape[1]

    def _forward(self, img):
        return np.real(np.fft.ifft2(np.fft.fft2(img) * self.transfer)).ravel()

    def _backward(self, v):
        v = np.real(v).reshape(self.shape)
        return np.real(np.fft.ifft2(np.fft.fft2(v) * np.conj(self.transfer)))


def add_noise(clean, sigma_hat, rng):
    """Add Gaussian noise scaled so ``||b - clean|| / ||clean|| == sigma_hat``.

    Returns ``(b, sigma)`` where ``sigma`` is the multiplier applied to the
    standard Gaussian draw.  Complex inputs get independent real and
    imaginary parts.
    """
    clean = np.asarray(clean)
    if sigma_hat < 0:
        raise ValueError(f"sigma_hat must be nonnegative, got {sigma_hat}")
    if sigma_hat == 0:
        return clean.copy(), 0.0
    if np.iscomplexobj(clean):
        xi = rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
    else:
        xi = rng.standard_normal(clean.shape)
    cnorm = np.linalg.norm(clean)
    if cnorm == 0:
        raise ValueError("cannot scale relative noise for an all-zero measurement vector")
    sigma = sigma_hat * cnorm / np.linalg.norm(xi)
    return clean + sigma * xi, float(sigma)


def spectral_norm(apply, adjoint, shape, iters=100, tol=1e-8, seed=0):
    """Largest singular value of a linear map by power iteration on ``L^T L``.

    ``apply`` and ``adjoint`` must be an exact adjoint pair; ``shape`` is the
    shape of the map's input.
    """
    x = np.random.default_rng(seed).standard_normal(shape)
    x /= np.linalg.norm(x)
    est = 0.0
    for it in range(iters):
        z = adjoint(apply(x))
        # Rayleigh quotient of L^T L
        new = float(np.sqrt(max(np.vdot(x, z).real, 0.0)))
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        x = z / nz
        if est > 0 and abs(new - est) <= tol * new:
            est = new
            break
        est = new
    logger.debug("spectral norm %.6g after %d iterations", est, it + 1)
    return est
