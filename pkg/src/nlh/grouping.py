"""Patch-level and pixel-level non-local similarity search.

Coordinates are ``(row, col)`` of a patch's top-left corner. A patch of side
``s`` is vectorized in column-scan order, so stack row ``k`` corresponds to
the in-patch offset ``(k % s, k // s)``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lhwt import is_power_of_two
from .parallel import map_chunks

APD_BIN_WIDTH = 0.0005
APD_RANGE = (0.0, 0.05)


class CoverageError(RuntimeError):
    """Raised when an accumulator pixel never received a contribution."""


@dataclass
class PatchStack:
    """``n x m`` matrix of similar patches; column 0 is the reference."""

    data: np.ndarray
    coords: np.ndarray
    distances: np.ndarray
    side: int

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]


@dataclass
class PixelRowGroup:
    """``q x m`` matrix of similar pixel rows taken from one PatchStack."""

    data: np.ndarray
    row_indices: np.ndarray
    row_distances: np.ndarray


@dataclass
class Accumulator:
    """Weighted-sum buffers for aggregating denoised groups into a plane."""

    sum: np.ndarray
    weight: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "Accumulator":
        return cls(np.zeros(shape), np.zeros(shape))


def _grid_axis(length: int, side: int, stride: int) -> list[int]:
    last = length - side
    axis = list(range(0, last + 1, stride))
    if axis[-1] != last:
        axis.append(last)
    return axis


def reference_grid(height: int, width: int, patch_side: int, stride: int) -> list[tuple[int, int]]:
    """Reference top-left corners on a ``stride`` lattice.

    The last valid row and column are always appended so every pixel lies in
    at least one reference patch.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if stride > patch_side:
        # the lattice would skip pixels between patches
        raise ValueError(f"stride {stride} exceeds the patch side {patch_side}")
    if patch_side < 1 or patch_side > min(height, width):
        raise ValueError(
            f"image {height}x{width} is smaller than the {patch_side}x{patch_side} patch")
    rows = _grid_axis(height, patch_side, stride)
    cols = _grid_axis(width, patch_side, stride)
    return [(r, c) for r in rows for c in cols]


def grid_array(height, width, patch_side, stride) -> np.ndarray:
    return np.array(reference_grid(height, width, patch_side, stride), dtype=np.int64).reshape(-1, 2)


def candidate_count(height, width, ref, patch_side, window) -> int:
    r_lo, r_hi, c_lo, c_hi = _kernels.window_bounds(
        ref[0], ref[1], height, width, patch_side, window)
    return (r_hi - r_lo + 1) * (c_hi - c_lo + 1)


def min_candidate_count(height, width, patch_side, window, refs=None) -> int:
    """Fewest window candidates seen by ``refs`` (default: any valid reference)."""
    if refs is None:
        last_r, last_c = height - patch_side, width - patch_side
        refs = [(0, 0), (0, last_c), (last_r, 0), (last_r, last_c)]
    refs = np.asarray(refs, dtype=np.int64).reshape(-1, 2)
    half = window // 2

    def span(start, limit):
        lo = np.maximum(0, start - half)
        hi = np.minimum(limit, start - half + window - 1)
        return np.maximum(hi - lo + 1, 0)

    counts = span(refs[:, 0], height - patch_side) * span(refs[:, 1], width - patch_side)
    return int(counts.min()) if len(counts) else 0


def vectorize_patch(plane: np.ndarray, row: int, col: int, side: int) -> np.ndarray:
    return plane[row:row + side, col:col + side].ravel(order="F")


def search_batch(plane, refs, patch_side, window, m, workers=1):
    """Run the window search for many references. Returns ``(coords, dists)``.

    ``coords`` has shape ``(R, m, 2)``, ``dists`` shape ``(R, m)``.
    """
    plane = np.ascontiguousarray(plane, dtype=np.float64)
    refs = np.ascontiguousarray(refs, dtype=np.int64).reshape(-1, 2)
    height, width = plane.shape
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(refs) and (refs.min() < 0 or refs[:, 0].max() > height - patch_side
                      or refs[:, 1].max() > width - patch_side):
        raise ValueError(f"a reference does not fit a {patch_side}-pixel patch")
    have = min_candidate_count(height, width, patch_side, window, refs)
    if have < m:
        raise ValueError(
            f"search window {window} offers only {have} candidates to some reference, need m={m}")
    coords = np.empty((len(refs), m, 2), dtype=np.int64)
    dists = np.empty((len(refs), m))

    def run(lo, hi):
        _kernels.search_patches(plane, refs[lo:hi], patch_side, window, m,
                                coords[lo:hi], dists[lo:hi])

    map_chunks(run, len(refs), workers)
    return coords, dists


def build_stack(plane, coords, distances, patch_side) -> PatchStack:
    data = np.stack([vectorize_patch(plane, r, c, patch_side) for r, c in coords], axis=1)
    return PatchStack(data, np.asarray(coords), np.asarray(distances), patch_side)


def search_similar_patches(plane, ref, patch_side: int, window: int, m: int) -> PatchStack:
    """The ``m`` most similar patches to ``ref`` inside a ``window`` x ``window`` area.

    Candidates are the top-left corners within ``[ref - window//2,
    ref - window//2 + window - 1]`` on both axes, intersected with the image.
    The reference occupies column 0; the rest follow by ascending Euclidean
    distance with ties broken in raster order.
    """
    plane = np.asarray(plane, dtype=np.float64)
    height, width = plane.shape
    if not (0 <= ref[0] <= height - patch_side and 0 <= ref[1] <= width - patch_side):
        raise ValueError(f"reference {ref} does not fit a {patch_side}-pixel patch")
    coords, dists = search_batch(plane, [ref], patch_side, window, m)
    return build_stack(plane, coords[0], dists[0], patch_side)


def row_distance(stack: PatchStack, i: int, j: int) -> float:
    n = stack.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"row index out of range for n={n}: ({i}, {j})")
    return float(np.sqrt(np.sum((stack.data[i] - stack.data[j]) ** 2)))


def row_selection(data: np.ndarray, q: int):
    """Selected row indices ``(n, q)`` and their distances for every row."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    n = data.shape[0]
    d2 = np.empty((n, n))
    sel = np.empty((n, q), dtype=np.int64)
    sel_d2 = np.empty((n, q))
    _kernels.row_sq_distances(data, d2)
    _kernels.select_rows(d2, q, sel, sel_d2)
    return sel, np.sqrt(sel_d2)


def _check_q(q: int, n: int):
    if not is_power_of_two(q):
        raise ValueError(f"q must be a power of 2, got {q}")
    if q > n:
        raise ValueError(f"q={q} exceeds the number of stack rows n={n}")


def select_similar_rows(stack: PatchStack, i: int, q: int) -> PixelRowGroup:
    """Row ``i`` plus its ``q - 1`` nearest rows (ties to the smaller index)."""
    _check_q(q, stack.n)
    if not 0 <= i < stack.n:
        raise IndexError(f"row index {i} out of range for n={stack.n}")
    sel, dist = row_selection(stack.data, q)
    rows = sel[i]
    return PixelRowGroup(stack.data[rows].copy(), rows.copy(), dist[i].copy())


def scatter_group(acc: Accumulator, group: PixelRowGroup, stack_coords, patch_side: int,
                  weight: float = 1.0):
    """Add every group value to the image pixel it came from.

    Value ``(t, j)`` belongs to stack row ``group.row_indices[t]`` of patch
    ``j``. ``weight`` multiplies both the value and its weight contribution.
    """
    coords = np.asarray(stack_coords)
    height, width = acc.sum.shape
    if group.data.shape[1] != len(coords):
        raise ValueError("group has a different number of columns than the stack has patches")
    for t, k in enumerate(group.row_indices):
        dr, dc = k % patch_side, k // patch_side
        rows = coords[:, 0] + dr
        cols = coords[:, 1] + dc
        if rows.min() < 0 or cols.min() < 0 or rows.max() >= height or cols.max() >= width:
            raise IndexError("group pixel falls outside the accumulator")
        np.add.at(acc.sum, (rows, cols), weight * group.data[t])
        np.add.at(acc.weight, (rows, cols), weight)


def finalize(acc: Accumulator) -> np.ndarray:
    zero = np.argwhere(acc.weight <= 0)
    if len(zero):
        r, c = zero[0]
        raise CoverageError(
            f"pixel ({r}, {c}) received no contribution ({len(zero)} uncovered pixels)")
    return acc.sum / acc.weight


def apd_statistics(plane, mode: str, patch_side=8, window=39, m=16, q=4, stride=1,
                   workers=1):
    """Average pixel-wise distance of patch-level or pixel-level grouping.

    ``patch`` mode scores each reference by the mean of its ``m`` patch
    distances divided by ``n``; ``pixel`` mode scores each stack row by the
    mean of its ``q`` row distances divided by ``n``. Returns
    ``(counts, bin_edges, apd)``; the histogram spans [0, 0.05] in steps of
    0.0005, values beyond the range land in the last bin.
    """
    plane = np.asarray(plane, dtype=np.float64)
    refs = grid_array(*plane.shape, patch_side, stride)
    coords, dists = search_batch(plane, refs, patch_side, window, m, workers)
    n = patch_side * patch_side
    if mode == "patch":
        values = dists.mean(axis=1) / n
    elif mode == "pixel":
        _check_q(q, n)
        values = np.empty((len(refs), n))
        planes = np.ascontiguousarray(plane)

        def run(lo, hi):
            _kernels.pixel_apd_chunk(planes, coords[lo:hi], patch_side, q, values[lo:hi])

        map_chunks(run, len(refs), workers)
        values = values.ravel()
    else:
        raise ValueError(f"mode must be 'patch' or 'pixel', got {mode!r}")
    nbins = int(round((APD_RANGE[1] - APD_RANGE[0]) / APD_BIN_WIDTH))
    edges = APD_RANGE[0] + APD_BIN_WIDTH * np.arange(nbins + 1)
    idx = np.minimum((values / APD_BIN_WIDTH).astype(np.int64), nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    return counts, edges, float(values.mean())


def apd_csv(counts, edges, apd) -> str:
    buf = io.StringIO()
    buf.write("bin_low,bin_high,count\n")
    for lo, hi, cnt in zip(edges[:-1], edges[1:], counts):
        buf.write(f"{lo:.4f},{hi:.4f},{int(cnt)}\n")
    buf.write(f"apd,{apd:.8g}\n")
    return buf.getvalue()


def read_apd_csv(text: str):
    """Parse :func:`apd_csv` output back into ``(counts, edges, apd)``."""
    lows, highs, counts = [], [], []
    apd = None
    for line in text.strip().splitlines()[1:]:
        fields = line.split(",")
        if fields[0] == "apd":
            apd = float(fields[1])
            continue
        lows.append(float(fields[0]))
        highs.append(float(fields[1]))
        counts.append(int(fields[2]))
    if apd is None:
        raise ValueError("missing trailing 'apd,<value>' record")
    edges = np.array(lows + highs[-1:])
    return np.array(counts), edges, apd
