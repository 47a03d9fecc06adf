"""Piecewise-linear embedding on the periodic 1-D lattice.

``lin_embed`` maps nodal values to the continuous hat-function interpolant;
its L^2 and L^m norms have closed segment formulas, and the L^2 inner
product it induces is <Gamma u, v>_h. ``l2_project`` is the orthogonal L^2
projection onto the interpolant space read back at the nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .calculus import GridFunction, _check_same_grid, dirichlet_h
from .gamma import gamma_apply, gamma_solve
from .grid import TorusGrid
from .quadrature import gauss_legendre, integrate_breakpoints

# H^1 stability constant of the L^2 projection onto piecewise-linear functions
PROJECTION_STABILITY = 4.0 * math.sqrt(3.0) / math.pi + 2.0


def _require_1d(grid: TorusGrid) -> None:
    if grid.n != 1:
        raise ValueError(f"piecewise-linear interpolation is one-dimensional, got n={grid.n}")


@dataclass(frozen=True, eq=False)
class PiecewiseLinearField:
    """Continuous periodic function, linear on every [jh, (j+1)h]."""

    nodal: GridFunction

    def __post_init__(self) -> None:
        _require_1d(self.nodal.grid)

    @property
    def grid(self) -> TorusGrid:
        return self.nodal.grid

    @property
    def slopes(self) -> np.ndarray:
        v = self.nodal.values
        return (np.roll(v, -1) - v) * self.grid.k

    def _locate(self, x):
        s = np.asarray(x, dtype=float) * self.grid.k
        j = np.floor(s)
        return j.astype(np.int64) % self.grid.k, s - j

    def __call__(self, x) -> np.ndarray:
        j, frac = self._locate(x)
        v = self.nodal.values
        return v[j] + (v[(j + 1) % self.grid.k] - v[j]) * frac

    def derivative(self, x) -> np.ndarray:
        """Right derivative at x."""
        j, _ = self._locate(x)
        return self.slopes[j]

    def breakpoints(self) -> np.ndarray:
        return np.arange(self.grid.k + 1) * self.grid.h

    def l2_norm_sq(self) -> float:
        return pwl_norm_sq(self.nodal)

    def derivative_norm_sq(self) -> float:
        return float(self.grid.h * np.sum(self.slopes**2))


def lin_embed(u: GridFunction) -> PiecewiseLinearField:
    return PiecewiseLinearField(u)


def pwl_norm_sq(u: GridFunction) -> float:
    """||I_h u||^2 = (h/3) sum_k (u_k^2 + u_{k+1}^2 + u_k u_{k+1})."""
    _require_1d(u.grid)
    a = u.values
    b = np.roll(a, -1)
    return float(u.grid.h / 3.0 * np.sum(a * a + b * b + a * b))


def pwl_power_integral(u: GridFunction, m: int) -> float:
    """int_T (I_h u)^m, exact for integer m >= 0; equals ||I_h u||_{L^m}^m for even m."""
    _require_1d(u.grid)
    if m < 0 or int(m) != m:
        raise ValueError("power must be a nonnegative integer")
    a = u.values
    b = np.roll(a, -1)
    total = sum(np.sum(a**l * b ** (m - l)) for l in range(m + 1))
    return float(u.grid.h / (m + 1) * total)


def pwl_lm_norm_pow(u: GridFunction, m: int) -> float:
    if m % 2:
        raise ValueError("closed form needs an even power")
    return pwl_power_integral(u, m)


def induced_inner(u: GridFunction, v: GridFunction) -> float:
    """(u, v)_h = (h/3) sum_k [2 u_k v_k + (u_k v_{k+1} + u_{k+1} v_k)/2]."""
    _check_same_grid(u.grid, v.grid)
    _require_1d(u.grid)
    a, b = u.values, v.values
    a1, b1 = np.roll(a, -1), np.roll(b, -1)
    return float(u.grid.h / 3.0 * np.sum(2.0 * a * b + 0.5 * (a * b1 + a1 * b)))


def pwl_dirichlet(u: GridFunction) -> float:
    """(1/2) int ((I_h u)')^2, computed from the slopes."""
    return 0.5 * lin_embed(u).derivative_norm_sq()


def nodal_interpolate(w: Callable, grid: TorusGrid) -> GridFunction:
    _require_1d(grid)
    return GridFunction(grid, np.asarray(w(grid.axis_nodes()), dtype=float))


def interpolate_pwl(w: Callable, grid: TorusGrid) -> PiecewiseLinearField:
    """pi_h w: nodal samples joined linearly."""
    return lin_embed(nodal_interpolate(w, grid))


def _cuts(grid: TorusGrid, *fields) -> np.ndarray:
    cuts = [grid.axis_nodes(), np.array([1.0])]
    for f in fields:
        if hasattr(f, "breakpoints"):
            bp = np.asarray(f.breakpoints(), dtype=float)
            cuts.append(bp[(bp >= 0.0) & (bp <= 1.0)])
    return np.unique(np.concatenate(cuts))


def _has_breakpoints(*fields) -> bool:
    return all(hasattr(f, "breakpoints") for f in fields)


def hat_moments(w, grid: TorusGrid, order: int = 8) -> np.ndarray:
    """b_k = h^-1 int_T w phi_k with phi_k the periodic hat at node k.

    Fields with ``breakpoints()`` (piecewise constant or linear) are
    integrated exactly on the merged breakpoints; other callables use an
    ``order``-point Gauss rule on every lattice interval.
    """
    _require_1d(grid)
    cuts = _cuts(grid, w)
    q = 3 if _has_breakpoints(w) else order
    s, wts = gauss_legendre(q)
    a, b = cuts[:-1], cuts[1:]
    x = a[:, None] + (b - a)[:, None] * s[None, :]
    weights = (b - a)[:, None] * wts[None, :]
    mids = 0.5 * (a + b)
    j = np.floor(mids * grid.k).astype(np.int64) % grid.k
    frac = x * grid.k - np.floor(mids * grid.k)[:, None]
    vals = np.asarray(w(x), dtype=float) * weights
    left = np.bincount(j, weights=(vals * (1.0 - frac)).sum(axis=1), minlength=grid.k)
    right = np.bincount((j + 1) % grid.k, weights=(vals * frac).sum(axis=1), minlength=grid.k)
    return (left + right) / grid.h


def l2_project(w, grid: TorusGrid, order: int = 8) -> GridFunction:
    """P_h w = Gamma^-1 b with b the hat moments of w."""
    return gamma_solve(GridFunction(grid, hat_moments(w, grid, order)))


def l2_distance_sq_1d(f, g, grid_hint: Optional[TorusGrid] = None, order: int = 8) -> float:
    """||f - g||^2_{L^2(T)} for 1-D periodic functions.

    The merged breakpoints of all arguments exposing ``breakpoints()`` split
    [0, 1]; on each piece a 3-point Gauss rule is exact when both are
    piecewise polynomials of degree <= 1. Otherwise ``order`` points are used
    on each piece, after also cutting at the nodes of ``grid_hint``.
    """
    parts = [np.array([0.0, 1.0])]
    for h in (f, g):
        if hasattr(h, "breakpoints"):
            bp = np.asarray(h.breakpoints(), dtype=float)
            parts.append(bp[(bp >= 0.0) & (bp <= 1.0)])
    if grid_hint is not None:
        parts.append(grid_hint.axis_nodes())
    cuts = np.unique(np.concatenate(parts))
    q = 3 if _has_breakpoints(f, g) else order
    pieces = integrate_breakpoints(lambda x: (f(x) - g(x)) ** 2, cuts, q)
    return float(pieces.sum())


# ---------------------------------------------------------------------------
# analytic test functions


@dataclass(frozen=True)
class TrigPolynomial:
    """w(x) = c0 + sum_j a_j cos(2 pi j x) + b_j sin(2 pi j x), j = 1..J."""

    c0: float = 0.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()
    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        J = max(len(self.cos_coeffs), len(self.sin_coeffs))
        a = np.zeros(J)
        b = np.zeros(J)
        a[: len(self.cos_coeffs)] = self.cos_coeffs
        b[: len(self.sin_coeffs)] = self.sin_coeffs
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_b", b)

    @property
    def freqs(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(1, len(self._a) + 1)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, float(self.c0))
        for w, a, b in zip(self.freqs, self._a, self._b):
            out = out + a * np.cos(w * x) + b * np.sin(w * x)
        return out

    def derivative(self) -> "TrigPolynomial":
        w = self.freqs
        return TrigPolynomial(0.0, tuple(w * self._b), tuple(-w * self._a))

    def l2_norm_sq(self) -> float:
        return float(self.c0**2 + 0.5 * np.sum(self._a**2 + self._b**2))

    def max_frequency(self) -> int:
        nz = np.nonzero((self._a != 0) | (self._b != 0))[0]
        return int(nz[-1] + 1) if nz.size else 0


def _piecewise_sq(func: Callable, grid: TorusGrid, order: int = 16) -> float:
    """int_T func^2 with an ``order``-point Gauss rule on every lattice interval."""
    cuts = np.arange(grid.k + 1) * grid.h
    return float(integrate_breakpoints(lambda x: np.asarray(func(x)) ** 2, cuts, order).sum())


@dataclass(frozen=True)
class EstimateRecord:
    name: str
    measured: float
    bound: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "measured", float(self.measured))
        object.__setattr__(self, "bound", float(self.bound))

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.bound)


def verify_interp_estimates(w: TrigPolynomial, grid: TorusGrid, order: int = 16) -> list[EstimateRecord]:
    """Both sides of the nodal-interpolation error estimates and of the
    H^1 stability of the L^2 projection, for a trigonometric polynomial.

    Norms of w and its derivatives are exact (Parseval); norms of piecewise
    linear fields use slope or segment formulas; the mixed norms use a
    16-point Gauss rule per lattice interval, on which the integrand is
    analytic.
    """
    _require_1d(grid)
    h = grid.h
    dw = w.derivative()
    d2w = dw.derivative()
    dw_sq, d2w_sq = dw.l2_norm_sq(), d2w.l2_norm_sq()
    pi_w = interpolate_pwl(w, grid)

    err_sq = _piecewise_sq(lambda x: pi_w(x) - w(x), grid, order)
    derr_sq = _piecewise_sq(lambda x: pi_w.derivative(x) - dw(x), grid, order)
    pi_w_dsq = pi_w.derivative_norm_sq()

    proj = lin_embed(l2_project(w, grid, order=order))
    proj_dsq = proj.derivative_norm_sq()
    pr_const = PROJECTION_STABILITY

    return [
        EstimateRecord("interp_error_l2_vs_first_derivative", err_sq, (2.0 * h / np.pi) ** 2 * dw_sq),
        EstimateRecord("interp_error_l2_vs_second_derivative", err_sq, (h / np.pi) ** 4 * d2w_sq),
        EstimateRecord("interp_error_h1_vs_second_derivative", derr_sq, h * h / 3.0 * d2w_sq),
        EstimateRecord("interp_derivative_nonexpansive", np.sqrt(pi_w_dsq), np.sqrt(dw_sq)),
        EstimateRecord("inverse_estimate_interpolant", pi_w_dsq, 12.0 / h**2 * pi_w.l2_norm_sq()),
        EstimateRecord("inverse_estimate_projection", proj_dsq, 12.0 / h**2 * proj.l2_norm_sq()),
        EstimateRecord("projection_h1_stability", np.sqrt(proj_dsq), pr_const * np.sqrt(dw_sq)),
    ]


def projection_error(w: Callable, grid: TorusGrid, order: int = 16) -> float:
    """||I_h P_h w - w||_{L^2(T)}."""
    proj = lin_embed(l2_project(w, grid, order=order))
    return float(np.sqrt(_piecewise_sq(lambda x: proj(x) - w(x), grid, order)))


def norm_gap(u: GridFunction) -> tuple[float, float]:
    """(||u||_h^2 - ||I_h u||^2, (h^2/6) ||grad_h u||^2_{h,h}); the two agree."""
    lhs = float(np.sum(u.values**2) * u.grid.h) - pwl_norm_sq(u)
    rhs = u.grid.h**2 / 6.0 * 2.0 * dirichlet_h(u)
    return lhs, rhs


def pc_pwl_gap_sq(u: GridFunction) -> float:
    """||I_h u - i_h u||^2_{L^2(T)} in closed form.

    On the right half of the cell of node j the difference is linear from 0
    to (u_{j+1} - u_j)/2 and on the left half from (u_{j-1} - u_j)/2 to 0, so
    every half cell contributes (h/2)(d/2)^2/3 with d the edge jump. The total
    is (h/12) sum_j (u_{j+1} - u_j)^2 = (h^2/6) * dirichlet energy.
    """
    _require_1d(u.grid)
    d = np.roll(u.values, -1) - u.values
    return float(u.grid.h / 12.0 * np.sum(d * d))


def gamma_inner(u: GridFunction, v: GridFunction) -> float:
    """<Gamma u, v>_h, the second route to (u, v)_h."""
    _check_same_grid(u.grid, v.grid)
    return float(np.sum(gamma_apply(u).values * v.values) * u.grid.h)


def sawtooth(grid: TorusGrid) -> GridFunction:
    """Alternating +-1 nodal values (k even), the extreme mode of the inverse estimate."""
    _require_1d(grid)
    return GridFunction(grid, (-1.0) ** np.arange(grid.k))
