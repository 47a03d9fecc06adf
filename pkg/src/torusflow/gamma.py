"""The circulant averaging operator (Gamma u)_k = (2/3) u_k + (u_{k-1} + u_{k+1})/6
on the periodic 1-D lattice, its inverse, square root, and matrix exponential.

Gamma is diagonalized by the discrete Fourier basis with eigenvalues
gamma_l = (2 + cos(2 pi l / k)) / 3, all in [1/3, 1]. The fast paths use the
real FFT; dense paths exist for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .calculus import GridFunction

MAX_EXP_SIZE = 4096
SERIES_TERM_CAP = 512


class SeriesNonConvergence(RuntimeError):
    """The B_l series did not reach its truncation tolerance within the term cap."""


def gamma_spectrum(k: int) -> np.ndarray:
    l = np.arange(k)
    return (2.0 + np.cos(2.0 * np.pi * l / k)) / 3.0


def gamma_matrix(k: int) -> np.ndarray:
    """Dense k x k circulant matrix; the wrap entries add up when k = 2."""
    if k < 2:
        raise ValueError("need k >= 2")
    g = np.zeros((k, k))
    idx = np.arange(k)
    g[idx, idx] += 2.0 / 3.0
    g[idx, (idx + 1) % k] += 1.0 / 6.0
    g[idx, (idx - 1) % k] += 1.0 / 6.0
    return g


def _as_1d(u: Union[GridFunction, np.ndarray]) -> np.ndarray:
    if isinstance(u, GridFunction):
        if u.grid.n != 1:
            raise ValueError(f"Gamma is defined on one-dimensional grids only, got n={u.grid.n}")
        return u.values
    arr = np.asarray(u, dtype=float)
    if arr.ndim != 1:
        raise ValueError("Gamma acts on one-dimensional arrays")
    return arr


def _rewrap(u, values: np.ndarray):
    return GridFunction(u.grid, values) if isinstance(u, GridFunction) else values


def _spectral(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    k = values.shape[0]
    coeffs = np.fft.rfft(values)
    return np.fft.irfft(coeffs * multiplier[: coeffs.shape[0]], n=k)


def gamma_apply(u):
    v = _as_1d(u)
    out = (2.0 / 3.0) * v + (np.roll(v, 1) + np.roll(v, -1)) / 6.0
    return _rewrap(u, out)


def gamma_solve(b, method: str = "fft"):
    """Solve Gamma x = b by Fourier diagonalization or, with ``method="dense"``,
    by a dense LU solve of the circulant matrix."""
    v = _as_1d(b)
    k = v.shape[0]
    if method == "fft":
        out = _spectral(v, 1.0 / gamma_spectrum(k))
    elif method == "dense":
        out = np.linalg.solve(gamma_matrix(k), v)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _rewrap(b, out)


def gamma_sqrt_apply(u):
    v = _as_1d(u)
    return _rewrap(u, _spectral(v, np.sqrt(gamma_spectrum(v.shape[0]))))


@dataclass(frozen=True)
class GammaOperator:
    """Gamma of size k with its spectrum precomputed (read-only)."""

    k: int
    spectrum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("need k >= 2")
        spec = gamma_spectrum(self.k)
        spec.setflags(write=False)
        object.__setattr__(self, "spectrum", spec)

    def _check(self, u) -> None:
        if _as_1d(u).shape[0] != self.k:
            raise ValueError(f"operator has size {self.k}, input has {_as_1d(u).shape[0]}")

    def apply(self, u):
        self._check(u)
        return gamma_apply(u)

    def solve(self, b):
        self._check(b)
        return _rewrap(b, _spectral(_as_1d(b), 1.0 / self.spectrum))

    def sqrt_apply(self, u):
        self._check(u)
        return _rewrap(u, _spectral(_as_1d(u), np.sqrt(self.spectrum)))

    def matrix(self) -> np.ndarray:
        return gamma_matrix(self.k)


# ---------------------------------------------------------------------------
# matrix exponential


def _check_exp_args(x: float, k: int) -> None:
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    if k < 2:
        raise ValueError("need k >= 2")
    if k > MAX_EXP_SIZE:
        raise ValueError(f"dense exponential limited to k <= {MAX_EXP_SIZE}")


def gamma_exp_cosine(x: float, k: int) -> np.ndarray:
    """Entrywise h e^{2x/3} sum_l e^{x cos(2 pi h l)/3} cos(2 pi h l (i - j))."""
    _check_exp_args(x, k)
    h = 1.0 / k
    l = np.arange(k)
    weights = np.exp(x * np.cos(2.0 * np.pi * h * l) / 3.0)
    d = np.arange(k)
    # the entry depends on (i - j) mod k only
    col = h * np.exp(2.0 * x / 3.0) * (weights[None, :] * np.cos(2.0 * np.pi * h * np.outer(d, l))).sum(axis=1)
    i = np.arange(k)
    return col[(i[:, None] - i[None, :]) % k]


def b_series(x: float, k: int, rtol: float = 1e-15, cap: int = SERIES_TERM_CAP) -> np.ndarray:
    """B_l(x) = sum_m (x/6)^(mk+l) / (mk+l)! for l = 0..k-1.

    Terms (x/6)^j / j! are generated recursively and added to B_{j mod k}.
    Summation stops once a full sweep over l has added only terms below
    ``rtol`` times the running |B_l| (after the terms have started to decay).
    """
    y = x / 6.0
    out = np.zeros(k)
    term = 1.0
    j = 0
    while True:
        block_small = True
        for _ in range(k):
            if j >= cap:
                raise SeriesNonConvergence(
                    f"B_l series for x={x}, k={k} not converged after {cap} terms"
                )
            l = j % k
            out[l] += term
            if abs(term) > rtol * abs(out[l]) or j <= abs(y):
                block_small = False
            j += 1
            term *= y / j
        if block_small:
            return out


def gamma_exp_series(x: float, k: int) -> np.ndarray:
    """Entrywise e^{2x/3} sum_l B_l(x) B_{(l+j-i) mod k}(x)."""
    _check_exp_args(x, k)
    b = b_series(x, k)
    # c_d = sum_l B_l B_{l+d}, a cyclic autocorrelation
    c = np.array([np.dot(b, np.roll(b, -d)) for d in range(k)])
    i = np.arange(k)
    return np.exp(2.0 * x / 3.0) * c[(i[None, :] - i[:, None]) % k]


def gamma_exp(x: float, k: int, method: str = "cosine") -> np.ndarray:
    if method == "cosine":
        return gamma_exp_cosine(x, k)
    if method == "series":
        return gamma_exp_series(x, k)
    raise ValueError(f"unknown method {method!r}")
