"""Numba kernels for the hot loops (patch search, row grouping, group filtering).

All kernels are ``nogil`` so the Python driver can run chunks of reference
patches on a thread pool. Kernels only ever write to slices owned by their
chunk; accumulation into image buffers happens in :func:`scatter_chunk`,
which the driver calls sequentially in reference order.

Patch pixels are vectorized in column-scan order: stack row ``k`` holds the
pixel at ``(k % side, k // side)`` of every patch.
"""
import math

import numpy as np
from numba import njit

INV_SQRT2 = 1.0 / math.sqrt(2.0)
# reassociation lets reductions vectorize; results stay deterministic per build.
# Only leaf transform helpers use it: numba compiles callees with the caller's
# flags, and row distances must stay exact so the tie rule is well defined.
FAST = {"reassoc", "contract"}


@njit(nogil=True, cache=True)
def window_bounds(r0, c0, height, width, side, window):
    half = window // 2
    last_r = height - side
    last_c = width - side
    r_lo = max(0, r0 - half)
    r_hi = min(last_r, r0 - half + window - 1)
    c_lo = max(0, c0 - half)
    c_hi = min(last_c, c0 - half + window - 1)
    return r_lo, r_hi, c_lo, c_hi


@njit(nogil=True, cache=True)
def search_patches(img, refs, side, window, m, coords_out, dist_out):
    """Top-``m`` patch matches for every reference in ``refs``.

    Slot 0 is always the reference (distance 0). The other ``m - 1`` slots
    hold the closest remaining candidates by squared distance, ties resolved
    by raster order of the candidate's top-left corner.
    """
    height, width = img.shape
    n_ref = refs.shape[0]
    best_d = np.empty(m, dtype=np.float64)
    best_r = np.empty(m, dtype=np.int64)
    best_c = np.empty(m, dtype=np.int64)
    for t in range(n_ref):
        r0 = refs[t, 0]
        c0 = refs[t, 1]
        r_lo, r_hi, c_lo, c_hi = window_bounds(r0, c0, height, width, side, window)
        best_d[0] = 0.0
        best_r[0] = r0
        best_c[0] = c0
        filled = 1
        for r in range(r_lo, r_hi + 1):
            for c in range(c_lo, c_hi + 1):
                if r == r0 and c == c0:
                    continue
                full = filled == m
                worst = best_d[m - 1]
                ssd = 0.0
                for dr in range(side):
                    for dc in range(side):
                        diff = img[r + dr, c + dc] - img[r0 + dr, c0 + dc]
                        ssd += diff * diff
                    # partial sums only grow: stop once the candidate cannot enter
                    if full and ssd >= worst:
                        break
                if full and ssd >= worst:
                    continue
                # stable insertion: after every entry with distance <= ssd
                pos = filled if filled < m else m - 1
                while pos > 1 and best_d[pos - 1] > ssd:
                    if pos < m:
                        best_d[pos] = best_d[pos - 1]
                        best_r[pos] = best_r[pos - 1]
                        best_c[pos] = best_c[pos - 1]
                    pos -= 1
                best_d[pos] = ssd
                best_r[pos] = r
                best_c[pos] = c
                if filled < m:
                    filled += 1
        for j in range(m):
            coords_out[t, j, 0] = best_r[j]
            coords_out[t, j, 1] = best_c[j]
            dist_out[t, j] = math.sqrt(best_d[j])


@njit(nogil=True, cache=True)
def gather_stack(plane, coords, side, out):
    """Fill ``out`` (n x m) with the column-scan vectorized patches."""
    m = coords.shape[0]
    for j in range(m):
        r = coords[j, 0]
        c = coords[j, 1]
        k = 0
        for dc in range(side):
            for dr in range(side):
                out[k, j] = plane[r + dr, c + dc]
                k += 1


@njit(nogil=True, cache=True)
def row_sq_distances(stack, out):
    # exact sequential sums: ties between rows must not depend on vectorization
    n, m = stack.shape
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(m):
                diff = stack[i, k] - stack[j, k]
                acc += diff * diff
            out[i, j] = acc
            out[j, i] = acc


@njit(nogil=True, cache=True)
def select_rows(d2, q, sel_out, sel_d2):
    """For every row ``i``: ``i`` itself then the ``q - 1`` nearest other rows.

    Ties are resolved by smaller row index.
    """
    n = d2.shape[0]
    for i in range(n):
        sel_out[i, 0] = i
        sel_d2[i, 0] = 0.0
        filled = 1
        for j in range(n):
            if j == i:
                continue
            d = d2[i, j]
            if filled == q and d >= sel_d2[i, q - 1]:
                continue
            pos = filled if filled < q else q - 1
            while pos > 1 and sel_d2[i, pos - 1] > d:
                if pos < q:
                    sel_d2[i, pos] = sel_d2[i, pos - 1]
                    sel_out[i, pos] = sel_out[i, pos - 1]
                pos -= 1
            sel_d2[i, pos] = d
            sel_out[i, pos] = j
            if filled < q:
                filled += 1


@njit(nogil=True, cache=True)
def haar_fwd_inplace(v, tmp):
    length = v.shape[0]
    while length > 1:
        half = length // 2
        for k in range(half):
            a = v[2 * k]
            b = v[2 * k + 1]
            tmp[k] = (a + b) * INV_SQRT2
            tmp[half + k] = (a - b) * INV_SQRT2
        for k in range(length):
            v[k] = tmp[k]
        length = half


@njit(nogil=True, cache=True)
def haar_inv_inplace(v, tmp):
    total = v.shape[0]
    length = 1
    while length < total:
        for k in range(length):
            a = v[k]
            d = v[length + k]
            tmp[2 * k] = (a + d) * INV_SQRT2
            tmp[2 * k + 1] = (a - d) * INV_SQRT2
        for k in range(2 * length):
            v[k] = tmp[k]
        length *= 2


@njit(nogil=True, cache=True)
def _rows_forward(mat, tmp):
    for i in range(mat.shape[0]):
        haar_fwd_inplace(mat[i], tmp)


@njit(nogil=True, cache=True)
def _rows_inverse(mat, tmp):
    for i in range(mat.shape[0]):
        haar_inv_inplace(mat[i], tmp)


@njit(nogil=True, cache=True, fastmath=FAST)
def _cols_forward(mat, work):
    """Vertical (along axis 0) full-depth Haar analysis of a q x m matrix."""
    q, m = mat.shape
    length = q
    while length > 1:
        half = length // 2
        for k in range(half):
            for j in range(m):
                a = mat[2 * k, j]
                b = mat[2 * k + 1, j]
                work[k, j] = (a + b) * INV_SQRT2
                work[half + k, j] = (a - b) * INV_SQRT2
        for k in range(length):
            for j in range(m):
                mat[k, j] = work[k, j]
        length = half


@njit(nogil=True, cache=True, fastmath=FAST)
def _cols_inverse(mat, work):
    q, m = mat.shape
    length = 1
    while length < q:
        for k in range(length):
            for j in range(m):
                a = mat[k, j]
                d = mat[length + k, j]
                work[2 * k, j] = (a + d) * INV_SQRT2
                work[2 * k + 1, j] = (a - d) * INV_SQRT2
        for k in range(2 * length):
            for j in range(m):
                mat[k, j] = work[k, j]
        length *= 2


@njit(nogil=True, cache=True)
def stage1_chunk(planes, driver, coords, side, q, thresholds, out_sum, out_count):
    """Bi-hard thresholding of every pixel-row group of every reference.

    ``planes`` is (C, H, W); row grouping is decided on ``driver`` and shared
    by all channels. ``out_sum[t, ch]`` receives the per-stack-row sum of
    denoised group rows, ``out_count[t]`` how many groups wrote each row.
    """
    n_ref, m = coords.shape[0], coords.shape[1]
    n_ch = planes.shape[0]
    n = side * side
    stack = np.empty((n, m))
    d2 = np.empty((n, n))
    sel = np.empty((n, q), dtype=np.int64)
    sel_d2 = np.empty((n, q))
    group = np.empty((q, m))
    work = np.empty((q, m))
    acc = np.empty((n, m))
    tmp = np.empty(m)
    for t in range(n_ref):
        gather_stack(driver, coords[t], side, stack)
        row_sq_distances(stack, d2)
        select_rows(d2, q, sel, sel_d2)
        for r in range(n):
            out_count[t, r] = 0.0
        for i in range(n):
            for s in range(q):
                out_count[t, sel[i, s]] += 1.0
        for ch in range(n_ch):
            gather_stack(planes[ch], coords[t], side, stack)
            _rows_forward(stack, tmp)
            acc[:, :] = 0.0
            thr = thresholds[ch]
            for i in range(n):
                for s in range(q):
                    for j in range(m):
                        group[s, j] = stack[sel[i, s], j]
                _cols_forward(group, work)
                for s in range(q):
                    for j in range(m):
                        if abs(group[s, j]) < thr:
                            group[s, j] = 0.0
                for s in range(max(q - 2, 0), q):
                    for j in range(1, m):
                        group[s, j] = 0.0
                _cols_inverse(group, work)
                for s in range(q):
                    row = sel[i, s]
                    for j in range(m):
                        acc[row, j] += group[s, j]
            _rows_inverse(acc, tmp)
            out_sum[t, ch] = acc


@njit(nogil=True, cache=True)
def stage2_chunk(noisy, guide, driver, coords, side, q, noise_vars, out_sum, out_count):
    """Twice-applied Wiener shrinkage of noisy groups guided by basic groups.

    ``noise_vars[ch]`` is ``(sigma_ch / 2) ** 2``.
    """
    n_ref, m = coords.shape[0], coords.shape[1]
    n_ch = noisy.shape[0]
    n = side * side
    stack = np.empty((n, m))
    gstack = np.empty((n, m))
    d2 = np.empty((n, n))
    sel = np.empty((n, q), dtype=np.int64)
    sel_d2 = np.empty((n, q))
    group = np.empty((q, m))
    ggroup = np.empty((q, m))
    work = np.empty((q, m))
    acc = np.empty((n, m))
    tmp = np.empty(m)
    for t in range(n_ref):
        gather_stack(driver, coords[t], side, stack)
        row_sq_distances(stack, d2)
        select_rows(d2, q, sel, sel_d2)
        for r in range(n):
            out_count[t, r] = 0.0
        for i in range(n):
            for s in range(q):
                out_count[t, sel[i, s]] += 1.0
        for ch in range(n_ch):
            gather_stack(noisy[ch], coords[t], side, stack)
            gather_stack(guide[ch], coords[t], side, gstack)
            _rows_forward(stack, tmp)
            _rows_forward(gstack, tmp)
            acc[:, :] = 0.0
            nv = noise_vars[ch]
            for i in range(n):
                for s in range(q):
                    for j in range(m):
                        group[s, j] = stack[sel[i, s], j]
                        ggroup[s, j] = gstack[sel[i, s], j]
                _cols_forward(group, work)
                _cols_forward(ggroup, work)
                if nv > 0.0:
                    for s in range(q):
                        for j in range(m):
                            e = ggroup[s, j] * ggroup[s, j]
                            g = e / (e + nv)
                            group[s, j] = g * g * group[s, j]
                _cols_inverse(group, work)
                for s in range(q):
                    row = sel[i, s]
                    for j in range(m):
                        acc[row, j] += group[s, j]
            _rows_inverse(acc, tmp)
            out_sum[t, ch] = acc


@njit(nogil=True, cache=True)
def scatter_chunk(coords, side, sums, counts, acc, weight):
    """Add chunk results into the image accumulators, in reference order."""
    n_ref, m = coords.shape[0], coords.shape[1]
    n_ch = sums.shape[1]
    for t in range(n_ref):
        for j in range(m):
            r = coords[t, j, 0]
            c = coords[t, j, 1]
            for dr in range(side):
                for dc in range(side):
                    weight[r + dr, c + dc] += counts[t, dc * side + dr]
        for ch in range(n_ch):
            for j in range(m):
                r = coords[t, j, 0]
                c = coords[t, j, 1]
                for dr in range(side):
                    for dc in range(side):
                        acc[ch, r + dr, c + dc] += sums[t, ch, dc * side + dr, j]


@njit(nogil=True, cache=True)
def sigma_local_chunk(planes, coords, side, q, out):
    """Per-reference, per-channel local noise level (mean of d / sqrt(m))."""
    n_ref, m = coords.shape[0], coords.shape[1]
    n_ch = planes.shape[0]
    n = side * side
    stack = np.empty((n, m))
    d2 = np.empty((n, n))
    sel = np.empty((n, q), dtype=np.int64)
    sel_d2 = np.empty((n, q))
    for t in range(n_ref):
        for ch in range(n_ch):
            gather_stack(planes[ch], coords[t], side, stack)
            row_sq_distances(stack, d2)
            select_rows(d2, q, sel, sel_d2)
            total = 0.0
            for i in range(n):
                for s in range(1, q):
                    total += math.sqrt(sel_d2[i, s] / m)
            out[t, ch] = total / (n * (q - 1))


@njit(nogil=True, cache=True)
def pixel_apd_chunk(plane, coords, side, q, out):
    """Per-row mean of the ``q`` selected row distances (self included) / n."""
    n_ref, m = coords.shape[0], coords.shape[1]
    n = side * side
    stack = np.empty((n, m))
    d2 = np.empty((n, n))
    sel = np.empty((n, q), dtype=np.int64)
    sel_d2 = np.empty((n, q))
    for t in range(n_ref):
        gather_stack(plane, coords[t], side, stack)
        row_sq_distances(stack, d2)
        select_rows(d2, q, sel, sel_d2)
        for i in range(n):
            total = 0.0
            for s in range(q):
                total += math.sqrt(sel_d2[i, s])
            out[t, i] = total / q / n
