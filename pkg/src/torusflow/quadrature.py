"""Gauss-Legendre rules on cells and exact integration of piecewise polynomials."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def cell_points(k: int, order: int, offset: float = -0.5) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell Gauss points along one axis.

    Returns ``(points, weights)`` of shape ``(k, order)``. Cell ``j`` is
    ``[(j + offset) h, (j + offset + 1) h)``; the default offset centres the
    cell on node ``j``. Weights sum to h per cell.
    """
    h = 1.0 / k
    s, w = gauss_legendre(order)
    pts = (np.arange(k)[:, None] + offset + s[None, :]) * h
    return pts, np.broadcast_to(w * h, (k, order)).copy()


def cell_integrals(w: Callable, n: int, k: int, order: int) -> np.ndarray:
    """Integrals of ``w`` over every centred cell Q_z^h, shape ``(k,)*n``.

    ``w`` is called with ``n`` broadcastable coordinate arrays.
    """
    pts, wts = cell_points(k, order)
    # coordinate arrays of shape (k, order, k, order, ...) interleaved per axis
    coords = []
    for axis in range(n):
        shape = [1] * (2 * n)
        shape[2 * axis] = k
        shape[2 * axis + 1] = order
        coords.append(pts.reshape(shape))
    vals = np.asarray(w(*coords), dtype=float)
    vals = np.broadcast_to(vals, tuple(s for _ in range(n) for s in (k, order)))
    out = vals
    for axis in reversed(range(n)):
        weight_shape = [1] * out.ndim
        weight_shape[2 * axis] = k
        weight_shape[2 * axis + 1] = order
        out = (out * wts.reshape(weight_shape)).sum(axis=2 * axis + 1)
    return out


def integrate_breakpoints(f: Callable[[np.ndarray], np.ndarray], breakpoints: np.ndarray, order: int) -> np.ndarray:
    """Integrals of a 1-D function over consecutive breakpoint intervals.

    Exact when ``f`` is a polynomial of degree < 2*order on every interval.
    """
    a = breakpoints[:-1]
    b = breakpoints[1:]
    s, w = gauss_legendre(order)
    pts = a[:, None] + (b - a)[:, None] * s[None, :]
    return (f(pts) * w[None, :]).sum(axis=1) * (b - a)
