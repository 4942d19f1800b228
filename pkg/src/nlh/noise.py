"""Blind noise-level estimation from groups of similar pixel rows."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grouping import PatchStack, _check_q, grid_array, row_selection, search_batch
from .parallel import map_chunks

RESIDUAL_BIN_WIDTH = 1.0 / 255.0
RESIDUAL_RANGE = 0.2


@dataclass
class NoiseEstimate:
    """Local noise levels (one per patch group) and their mean, on the [0, 1] scale."""

    sigma_locals: np.ndarray
    sigma_global: float
    coords: np.ndarray | None = field(default=None, repr=False)

    @property
    def sigma_255(self) -> float:
        return 255.0 * self.sigma_global


def sigma_local(stack: PatchStack, q: int) -> float:
    """Mean of ``d / sqrt(m)`` over the ``q - 1`` non-self neighbours of every row."""
    if q < 2:
        raise ValueError(f"q must be >= 2 for noise estimation, got {q}")
    _check_q(q, stack.n)
    _, dist = row_selection(stack.data, q)
    return float(np.sum(dist[:, 1:] / np.sqrt(stack.m)) / (stack.n * (q - 1)))


def local_levels(planes, coords, patch_side, q, workers=1) -> np.ndarray:
    """Per-reference, per-channel local levels for precomputed patch groups.

    ``planes`` is ``(C, H, W)``; returns an array of shape ``(R, C)``.
    """
    planes = np.ascontiguousarray(planes, dtype=np.float64)
    out = np.empty((coords.shape[0], planes.shape[0]))

    def run(lo, hi):
        _kernels.sigma_local_chunk(planes, coords[lo:hi], patch_side, q, out[lo:hi])

    map_chunks(run, coords.shape[0], workers)
    return out


def sigma_global(plane, params, workers=1) -> NoiseEstimate:
    """Estimate the noise level of a grayscale plane.

    Uses the stage-1 grouping parameters (patch side, window, ``m1``, ``q1``,
    stride) of ``params``. The patch coordinates are kept on the result so the
    first denoising pass can reuse them.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if params.q1 < 2:
        raise ValueError("noise estimation needs q1 >= 2")
    _check_q(params.q1, params.patch_side ** 2)
    refs = grid_array(*plane.shape, params.patch_side, params.stride)
    coords, _ = search_batch(plane, refs, params.patch_side, params.window, params.m1, workers)
    levels = local_levels(plane[None], coords, params.patch_side, params.q1, workers)[:, 0]
    return NoiseEstimate(levels, float(np.mean(levels)), coords)


def estimate_channels(planes, driver, params, workers=1) -> list[NoiseEstimate]:
    """Per-channel estimates with patch groups located on ``driver``."""
    planes = np.asarray(planes, dtype=np.float64)
    refs = grid_array(*driver.shape, params.patch_side, params.stride)
    coords, _ = search_batch(driver, refs, params.patch_side, params.window, params.m1, workers)
    levels = local_levels(planes, coords, params.patch_side, params.q1, workers)
    return [NoiseEstimate(levels[:, ch], float(np.mean(levels[:, ch])), coords)
            for ch in range(planes.shape[0])]


def group_pixel_mask(shape, coords, patch_side) -> np.ndarray:
    """Boolean mask of every pixel covered by the given patch groups."""
    mask = np.zeros(shape, dtype=bool)
    for r, c in np.asarray(coords).reshape(-1, 2):
        mask[r:r + patch_side, c:c + patch_side] = True
    return mask


def residual_histogram(noisy, reference, coords=None, patch_side=None):
    """Histogram of ``noisy - reference`` over the grouped pixels.

    Without ``coords`` every pixel is used. Bins are 1/255 wide and centered
    on multiples of 1/255 over [-0.2, 0.2]; returns ``(counts, edges, residuals)``.
    """
    noisy = np.asarray(noisy, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if noisy.shape != reference.shape:
        raise ValueError(f"dimension mismatch: {noisy.shape} vs {reference.shape}")
    resid = noisy - reference
    if coords is not None:
        resid = resid[group_pixel_mask(resid.shape, coords, patch_side)]
    resid = resid.ravel()
    half = int(np.floor(RESIDUAL_RANGE / RESIDUAL_BIN_WIDTH))
    edges = (np.arange(-half, half + 2) - 0.5) * RESIDUAL_BIN_WIDTH
    counts, _ = np.histogram(np.clip(resid, edges[0], edges[-1]), bins=edges)
    return counts, edges, resid
