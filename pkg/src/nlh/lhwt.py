"""Full-depth orthonormal lifting Haar transform on power-of-2 sized data.

Coefficient layout for a length-``L`` vector: index 0 holds the scaling (DC)
coefficient ``sum(v) / sqrt(L)``, index 1 the coarsest detail, and indices
``[2**(s-1), 2**s)`` the details of scale ``s``, finest last. A ``q x m``
group is transformed along its rows first (horizontal), then along its
columns (vertical); the inverse runs columns first, then rows.
"""
from __future__ import annotations

import numpy as np

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_length(n: int):
    if not is_power_of_two(n):
        raise ValueError(f"Haar transform needs a power-of-2 length, got {n}")


def _forward_last_axis(x: np.ndarray) -> np.ndarray:
    out = np.array(x, dtype=np.float64, copy=True)
    length = out.shape[-1]
    _check_length(length)
    while length > 1:
        even = out[..., 0:length:2].copy()
        odd = out[..., 1:length:2].copy()
        half = length // 2
        out[..., :half] = (even + odd) * _INV_SQRT2
        out[..., half:length] = (even - odd) * _INV_SQRT2
        length = half
    return out


def _inverse_last_axis(c: np.ndarray) -> np.ndarray:
    out = np.array(c, dtype=np.float64, copy=True)
    total = out.shape[-1]
    _check_length(total)
    length = 1
    while length < total:
        approx = out[..., :length].copy()
        detail = out[..., length:2 * length].copy()
        out[..., 0:2 * length:2] = (approx + detail) * _INV_SQRT2
        out[..., 1:2 * length:2] = (approx - detail) * _INV_SQRT2
        length *= 2
    return out


def haar_forward_1d(v) -> np.ndarray:
    """Analysis transform of a vector (or of every vector along the last axis)."""
    return _forward_last_axis(np.asarray(v, dtype=np.float64))


def haar_inverse_1d(c) -> np.ndarray:
    return _inverse_last_axis(np.asarray(c, dtype=np.float64))


def _check_matrix(a: np.ndarray):
    if a.ndim != 2:
        raise ValueError(f"expected a q x m matrix, got shape {a.shape}")
    q, m = a.shape
    if not (is_power_of_two(q) and is_power_of_two(m)):
        raise ValueError(f"q and m must be powers of 2, got {q} x {m}")


def haar_forward_2d(y) -> np.ndarray:
    """``H_l @ Y @ H_r``: rows transformed first, then columns."""
    y = np.asarray(y, dtype=np.float64)
    _check_matrix(y)
    rows_done = _forward_last_axis(y)
    return _forward_last_axis(rows_done.T).T


def haar_inverse_2d(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    _check_matrix(c)
    cols_done = _inverse_last_axis(c.T).T
    return _inverse_last_axis(cols_done)


def hard_threshold_level(sigma_g: float, tau: float, law: str = "sigma2") -> float:
    """Magnitude below which coefficients are zeroed.

    ``law="sigma2"`` gives ``tau * sigma_g**2``; ``law="sigma"`` gives the
    conventional ``tau * sigma_g``.
    """
    if law == "sigma2":
        return tau * sigma_g * sigma_g
    if law == "sigma":
        return tau * sigma_g
    raise ValueError(f"unknown threshold law {law!r}")


def bi_hard_threshold(c, sigma_g: float, tau: float, law: str = "sigma2") -> np.ndarray:
    """Magnitude hard thresholding followed by zeroing of the two finest rows.

    Entries with ``|c| < threshold`` are zeroed; then every entry in rows
    ``q-2`` and ``q-1`` is zeroed except those in column 0.
    """
    if sigma_g < 0:
        raise ValueError("sigma_g must be non-negative")
    c = np.asarray(c, dtype=np.float64)
    level = hard_threshold_level(sigma_g, tau, law)
    out = np.where(np.abs(c) < level, 0.0, c)
    q = out.shape[0]
    out[max(q - 2, 0):, 1:] = 0.0
    return out


def wiener_gain(c_guide, sigma_g: float) -> np.ndarray:
    energy = np.asarray(c_guide, dtype=np.float64) ** 2
    noise = (sigma_g / 2.0) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        gain = energy / (energy + noise)
    # 0/0 only when both guide and sigma vanish: treat as pass-through
    return np.where(energy + noise == 0, 1.0, gain)


def wiener_shrink(c_noisy, c_guide, sigma_g: float) -> np.ndarray:
    """Apply the guide-driven Wiener attenuation twice: ``g**2 * c_noisy``."""
    c_noisy = np.asarray(c_noisy, dtype=np.float64)
    c_guide = np.asarray(c_guide, dtype=np.float64)
    if c_noisy.shape != c_guide.shape:
        raise ValueError(f"shape mismatch: {c_noisy.shape} vs {c_guide.shape}")
    g = wiener_gain(c_guide, sigma_g)
    once = g * c_noisy
    return g * once
