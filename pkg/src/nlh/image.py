"""Image representation, color conversion, noise synthesis and quality metrics.

A *plane* is a 2-D ``float64`` array with intensities on the [0, 1] scale.
Noise levels are accepted on the conventional [0, 255] scale and divided by
255 internally.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

PSNR_CAP = 99.0

# Full-range BT.601 (JPEG/JFIF) luma/chroma matrix; Cb/Cr get +0.5 offset.
_RGB_TO_YCBCR = np.array([
    [0.299, 0.587, 0.114],
    [-0.168735891647856, -0.331264108352144, 0.5],
    [0.5, -0.418687589158345, -0.081312410841655],
])
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)
_CHROMA_OFFSET = np.array([0.0, 0.5, 0.5])


class ColorSpace(str, Enum):
    RGB = "RGB"
    YCBCR = "YCbCr"


@dataclass(frozen=True)
class ColorImage:
    """Three equally sized planes stacked as ``(3, H, W)`` plus a space tag."""

    planes: np.ndarray
    space: ColorSpace = ColorSpace.RGB

    def __post_init__(self):
        planes = np.asarray(self.planes, dtype=np.float64)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise ValueError(f"expected planes of shape (3, H, W), got {planes.shape}")
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "space", ColorSpace(self.space))

    @property
    def shape(self) -> tuple[int, int]:
        return self.planes.shape[1], self.planes.shape[2]

    @classmethod
    def from_hwc(cls, arr: np.ndarray, space=ColorSpace.RGB) -> "ColorImage":
        return cls(np.moveaxis(np.asarray(arr, dtype=np.float64), -1, 0), space)

    def to_hwc(self) -> np.ndarray:
        return np.moveaxis(self.planes, 0, -1)


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float


def as_plane(arr) -> np.ndarray:
    plane = np.asarray(arr, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError(f"a plane must be 2-D, got shape {plane.shape}")
    if plane.size == 0:
        raise ValueError("a plane must have positive height and width")
    if not np.all(np.isfinite(plane)):
        raise ValueError("plane contains non-finite values")
    return plane


def _apply_matrix(planes: np.ndarray, mat: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jhw->ihw", mat, planes)


def rgb_to_ycbcr(img: ColorImage) -> ColorImage:
    """Full-range BT.601 RGB -> YCbCr. Achromatic colors map to Cb = Cr = 0.5."""
    if img.space is not ColorSpace.RGB:
        raise ValueError(f"rgb_to_ycbcr expects an RGB image, got {img.space.value}")
    out = _apply_matrix(img.planes, _RGB_TO_YCBCR) + _CHROMA_OFFSET[:, None, None]
    return ColorImage(out, ColorSpace.YCBCR)


def ycbcr_to_rgb(img: ColorImage) -> ColorImage:
    """Algebraic inverse of :func:`rgb_to_ycbcr`; no clamping is applied."""
    if img.space is not ColorSpace.YCBCR:
        raise ValueError(f"ycbcr_to_rgb expects a YCbCr image, got {img.space.value}")
    out = _apply_matrix(img.planes - _CHROMA_OFFSET[:, None, None], _YCBCR_TO_RGB)
    return ColorImage(out, ColorSpace.RGB)


def add_awgn(img: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise of std ``sigma / 255``.

    The stream comes from ``numpy.random.Generator(PCG64(seed))`` and is
    stable per seed. The result is not clamped. ``img`` may be a plane or any
    array (e.g. a ``(3, H, W)`` stack).
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    img = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return img.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    return img + rng.standard_normal(img.shape) * (sigma / 255.0)


def _check_same_shape(ref: np.ndarray, test: np.ndarray):
    if ref.shape != test.shape:
        raise ValueError(f"dimension mismatch: {ref.shape} vs {test.shape}")


def psnr(ref, test) -> float:
    """PSNR in dB for [0, 1] data; zero MSE returns :data:`PSNR_CAP`."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    _check_same_shape(ref, test)
    mse = np.mean((ref - test) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window(size=11, sigma=1.5):
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = _gaussian_window()


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    r = _WINDOW.shape[0] // 2

    def filt(a):
        # 'valid' region only, as in the reference MATLAB implementation
        return ndimage.correlate(a, _WINDOW, mode="constant")[r:-r, r:-r]

    mu_x, mu_y = filt(x), filt(y)
    sxx = filt(x * x) - mu_x ** 2
    syy = filt(y * y) - mu_y ** 2
    sxy = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(ref, test) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03.

    Accepts planes or ``(3, H, W)`` stacks; stacks are scored per channel and
    averaged.
    """
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    _check_same_shape(ref, test)
    if min(ref.shape[-2:]) < _WINDOW.shape[0]:
        raise ValueError(f"image {ref.shape[-2:]} is smaller than the 11x11 SSIM window")
    if ref.ndim == 2:
        return _ssim_plane(ref, test)
    return float(np.mean([_ssim_plane(a, b) for a, b in zip(ref, test)]))


def metrics(ref, test) -> MetricReport:
    return MetricReport(psnr(ref, test), ssim(ref, test))
