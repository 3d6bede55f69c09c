"""Symbol of the discrete Laplacian on Z^d and its critical structure.

h0(xi) = 4 sum_j sin^2(pi xi_j) on the torus [-1/2, 1/2)^d.  The spectrum is
[0, 4d]; the values {0, 4, 8, ..., 4d} are the thresholds, attained at the
2^d critical points with coordinates in {0, 1/2}.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .lattice import GridFn

__all__ = [
    "h0",
    "grad_h0",
    "apply_h0",
    "critical_data",
    "thresholds",
    "threshold_distance",
    "to_fundamental",
]


def h0(xi, d: int | None = None) -> np.ndarray:
    """Symbol value(s); xi has shape (..., d)."""
    xi = np.asarray(xi, dtype=float)
    if d is not None and xi.shape[-1] != d:
        raise ValueError(f"xi last axis {xi.shape[-1]} != d={d}")
    return 4.0 * np.sum(np.sin(np.pi * xi) ** 2, axis=-1)


def grad_h0(xi) -> np.ndarray:
    """Gradient 4*pi*sin(2*pi*xi_j), shape (..., d)."""
    xi = np.asarray(xi, dtype=float)
    return 4.0 * np.pi * np.sin(2.0 * np.pi * xi)


def apply_h0(u: GridFn):
    """Apply 2d*I - sum of shifts to a grid function, zero extension.

    Returns (H0 u, boundary_flag) where the flag marks sites whose stencil
    reached past the box edge, i.e. where the zero extension actually entered.
    """
    v = u.values
    out = 2.0 * u.d * v.copy()
    for ax in range(u.d):
        up = np.roll(v, -1, axis=ax)
        dn = np.roll(v, 1, axis=ax)
        # roll wraps; the stencil uses zero extension, so cut the wrapped slice
        sl_hi = [slice(None)] * u.d
        sl_hi[ax] = -1
        up[tuple(sl_hi)] = 0
        sl_lo = [slice(None)] * u.d
        sl_lo[ax] = 0
        dn[tuple(sl_lo)] = 0
        out -= up + dn
    flag = u.abs_inf() == u.L
    return GridFn(u.d, u.L, out), flag


def critical_data(d: int):
    """All 2^d critical points of h0 with value and Morse index.

    Returns a list of (xi, value, index) with xi a length-d tuple over
    {0.0, 0.5}; index = number of 0.5 coordinates; value = 4*index.
    """
    out = []
    for combo in product((0.0, 0.5), repeat=d):
        k = sum(1 for c in combo if c == 0.5)
        out.append((combo, 4.0 * k, k))
    return out


def thresholds(d: int) -> np.ndarray:
    return 4.0 * np.arange(d + 1)


def threshold_distance(lam: float, d: int) -> float:
    """Distance from lam to the threshold set {0, 4, ..., 4d}."""
    return float(np.min(np.abs(thresholds(d) - lam)))


def to_fundamental(xi) -> np.ndarray:
    """Reduce mod Z^d into [-1/2, 1/2)^d (half-integers map to -1/2)."""
    xi = np.asarray(xi, dtype=float)
    return xi - np.floor(xi + 0.5)
