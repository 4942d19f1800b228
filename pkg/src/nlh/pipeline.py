"""Two-stage NLH denoiser.

Stage 1 repeatedly groups similar pixel rows, shrinks their Haar
coefficients by bi-hard thresholding and re-injects part of the noisy input
between passes. Stage 2 regroups on the stage-1 result and applies Wiener
shrinkage to the noisy groups with the stage-1 groups as guide.

Internally every image is a ``(C, H, W)`` stack whose channel 0 drives all
patch and row matching (the luminance channel for color input).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grouping import CoverageError, grid_array, search_batch
from .image import ColorImage, ColorSpace, as_plane, rgb_to_ycbcr, ycbcr_to_rgb
from .lhwt import hard_threshold_level
from .noise import NoiseEstimate, estimate_channels, local_levels
from .params import NlhParams
from .parallel import ordered_chunks

log = logging.getLogger(__name__)


@dataclass
class DenoiseResult:
    output: np.ndarray | ColorImage
    basic: np.ndarray | ColorImage
    sigma: list[NoiseEstimate]
    timings: dict = field(default_factory=dict)

    @property
    def sigma_255(self) -> list[float]:
        return [255.0 * s.sigma_global for s in self.sigma]


def _as_stack(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    return np.ascontiguousarray(arr)


def _finalize(acc, weight) -> np.ndarray:
    if np.any(weight <= 0):
        r, c = np.argwhere(weight <= 0)[0]
        raise CoverageError(f"pixel ({r}, {c}) received no contribution")
    return acc / weight[None]


def _search(driver, p: NlhParams, m: int, workers):
    refs = grid_array(*driver.shape, p.patch_side, p.stride)
    coords, _ = search_batch(driver, refs, p.patch_side, p.window, m, workers)
    return coords


def _thresholds(sigmas, p: NlhParams) -> np.ndarray:
    return np.array([hard_threshold_level(s, p.tau, p.threshold_law) for s in sigmas])


def _stage1_pass(stack, sigmas, p: NlhParams, coords=None, workers=1) -> np.ndarray:
    stack = np.ascontiguousarray(stack)
    driver = stack[0]
    if coords is None:
        coords = _search(driver, p, p.m1, workers)
    thresholds = _thresholds(sigmas, p)
    n_ch, n = stack.shape[0], p.n
    acc = np.zeros(stack.shape)
    weight = np.zeros(stack.shape[1:])

    def run(lo, hi):
        sums = np.empty((hi - lo, n_ch, n, p.m1))
        counts = np.empty((hi - lo, n))
        _kernels.stage1_chunk(stack, driver, coords[lo:hi], p.patch_side, p.q1,
                              thresholds, sums, counts)
        return sums, counts

    for lo, hi, (sums, counts) in ordered_chunks(run, len(coords), workers):
        _kernels.scatter_chunk(coords[lo:hi], p.patch_side, sums, counts, acc, weight)
    return _finalize(acc, weight)


def _stage2(noisy, basic, sigmas, p: NlhParams, workers=1) -> np.ndarray:
    noisy = np.ascontiguousarray(noisy)
    basic = np.ascontiguousarray(basic)
    if noisy.shape != basic.shape:
        raise ValueError(f"dimension mismatch: {noisy.shape} vs {basic.shape}")
    driver = basic[0]
    coords = _search(driver, p, p.m2, workers)
    noise_vars = np.array([(s / 2.0) ** 2 for s in sigmas])
    n_ch, n = noisy.shape[0], p.n
    acc = np.zeros(noisy.shape)
    weight = np.zeros(noisy.shape[1:])

    def run(lo, hi):
        sums = np.empty((hi - lo, n_ch, n, p.m2))
        counts = np.empty((hi - lo, n))
        _kernels.stage2_chunk(noisy, basic, driver, coords[lo:hi], p.patch_side, p.q2,
                              noise_vars, sums, counts)
        return sums, counts

    for lo, hi, (sums, counts) in ordered_chunks(run, len(coords), workers):
        _kernels.scatter_chunk(coords[lo:hi], p.patch_side, sums, counts, acc, weight)
    return _finalize(acc, weight)


def _estimate(stack, p: NlhParams, workers=1) -> list[NoiseEstimate]:
    if p.sigma_override is not None:
        s = p.sigma_override / 255.0
        return [NoiseEstimate(np.array([s]), s) for _ in range(stack.shape[0])]
    return estimate_channels(stack, stack[0], p, workers)


def _stage1(y, p: NlhParams, workers=1, timings=None):
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    estimates = _estimate(y, p, workers)
    timings["estimate"] = time.perf_counter() - t0
    sigmas = [e.sigma_global for e in estimates]
    log.info("sigma (0-255 scale): %s", ", ".join(f"{255 * s:.2f}" for s in sigmas))
    t0 = time.perf_counter()
    prev = y
    for k in range(1, p.iterations + 1):
        # y_1 is exactly y, so the estimation grouping can be reused
        y_k = y if k == 1 else p.lam * prev + (1.0 - p.lam) * y
        coords = estimates[0].coords if k == 1 else None
        if k > 1 and p.reestimate_sigma_per_iter and p.sigma_override is None:
            coords = _search(y_k[0], p, p.m1, workers)
            levels = local_levels(y_k, coords, p.patch_side, p.q1, workers)
            sigmas = list(levels.mean(axis=0))
        prev = _stage1_pass(y_k, sigmas, p, coords, workers)
    timings["stage1"] = time.perf_counter() - t0
    return prev, estimates


def stage1_pass(y_k, sigma_g: float, p: NlhParams, workers=1) -> np.ndarray:
    """One bi-hard thresholding pass over a plane; ``sigma_g`` on the [0, 1] scale."""
    p.validate()
    return _stage1_pass(_as_stack(as_plane(y_k)), [sigma_g], p, workers=workers)[0]


def stage1(y, p: NlhParams, workers=1):
    """Iterated stage 1. Returns ``(basic, NoiseEstimate)``.

    Iteration ``k`` denoises ``lam * previous + (1 - lam) * y`` starting from
    ``previous = y``. The noise level is estimated once unless
    ``reestimate_sigma_per_iter`` is set; the first estimate is reported.
    """
    p.validate()
    basic, estimates = _stage1(_as_stack(as_plane(y)), p, workers)
    return basic[0], estimates[0]


def stage2(y, basic, sigma_g: float, p: NlhParams, workers=1) -> np.ndarray:
    """Wiener stage for a plane; grouping is decided on ``basic``."""
    p.validate()
    y = as_plane(y)
    basic = as_plane(basic)
    if y.shape != basic.shape:
        raise ValueError(f"dimension mismatch: {y.shape} vs {basic.shape}")
    return _stage2(_as_stack(y), _as_stack(basic), [sigma_g], p, workers)[0]


def _denoise_stack(stack, p: NlhParams, workers):
    timings = {}
    start = time.perf_counter()
    basic, estimates = _stage1(stack, p, workers, timings)
    t0 = time.perf_counter()
    out = _stage2(stack, basic, [e.sigma_global for e in estimates], p, workers)
    timings["stage2"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - start
    return out, basic, estimates, timings


def _check_size(shape, p: NlhParams):
    if min(shape) < p.patch_side:
        raise ValueError(f"image {shape} is smaller than the {p.patch_side}-pixel patch")


def denoise_gray(y, p: NlhParams, workers=1) -> DenoiseResult:
    """Blind (unless ``p.sigma_override``) two-stage denoising of a plane."""
    p.validate()
    y = as_plane(y)
    _check_size(y.shape, p)
    out, basic, estimates, timings = _denoise_stack(_as_stack(y), p, workers)
    return DenoiseResult(out[0], basic[0], estimates, timings)


def denoise_color(img: ColorImage, p: NlhParams, workers=1) -> DenoiseResult:
    """Denoise an RGB image in YCbCr; matching is done on Y only.

    Each channel gets its own noise level, estimated on groups located in Y.
    """
    p.validate()
    if img.space is not ColorSpace.RGB:
        raise ValueError(f"denoise_color expects an RGB image, got {img.space.value}")
    _check_size(img.shape, p)
    ycc = rgb_to_ycbcr(img)
    out, basic, estimates, timings = _denoise_stack(ycc.planes, p, workers)
    return DenoiseResult(
        ycbcr_to_rgb(ColorImage(out, ColorSpace.YCBCR)),
        ycbcr_to_rgb(ColorImage(basic, ColorSpace.YCBCR)),
        estimates,
        timings,
    )


def denoise(img, p: NlhParams, workers=1) -> DenoiseResult:
    if isinstance(img, ColorImage):
        return denoise_color(img, p, workers)
    return denoise_gray(img, p, workers)
