"""Grid functions, graph gradient/Laplacian, discrete energies, and the
piecewise-constant embedding/projection pair on the torus lattice.

Edge sums run over the 2n stencil slots z +/- e_i of every node. For k = 2
both slots along an axis reach the same neighbour, and the pair is then
counted twice, which matches the two cell interfaces per axis that the
piecewise-constant embedding has on the torus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .grid import TorusGrid
from .quadrature import cell_integrals, integrate_breakpoints


class GridMismatchError(ValueError):
    pass


def _check_same_grid(a: TorusGrid, b: TorusGrid) -> None:
    if a != b:
        raise GridMismatchError(f"operands live on different grids: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values on the nodes of ``grid``, stored with shape ``grid.shape``."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "GridFunction":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_callable(cls, grid: TorusGrid, w: Callable) -> "GridFunction":
        """Nodal samples w(z)."""
        axes = np.meshgrid(*([grid.axis_nodes()] * grid.n), indexing="ij")
        return cls(grid, np.broadcast_to(np.asarray(w(*axes), dtype=float), grid.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def mean(self) -> float:
        return float(self.values.mean())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def _wrap(self, other) -> np.ndarray:
        if isinstance(other, GridFunction):
            _check_same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other) -> "GridFunction":
        return GridFunction(self.grid, self.values + self._wrap(other))

    __radd__ = __add__

    def __sub__(self, other) -> "GridFunction":
        return GridFunction(self.grid, self.values - self._wrap(other))

    def __rsub__(self, other) -> "GridFunction":
        return GridFunction(self.grid, self._wrap(other) - self.values)

    def __mul__(self, c) -> "GridFunction":
        return GridFunction(self.grid, self.values * self._wrap(c))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"GridFunction(n={self.grid.n}, k={self.grid.k}, values={self.flat!r})"


@dataclass(frozen=True, eq=False)
class EdgeField:
    """Values on directed edges, split by stencil slot.

    ``forward[i][z]`` holds chi(z, z + e_i) and ``backward[i][z]`` holds
    chi(z, z - e_i); both arrays have shape ``(n,) + grid.shape``.
    """

    grid: TorusGrid
    forward: np.ndarray
    backward: np.ndarray

    def __post_init__(self) -> None:
        shape = (self.grid.n,) + self.grid.shape
        for name in ("forward", "backward"):
            arr = np.array(getattr(self, name), dtype=float).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "EdgeField":
        z = np.zeros((grid.n,) + grid.shape)
        return cls(grid, z, z)

    def is_antisymmetric(self, atol: float = 0.0) -> bool:
        # chi(z, z + e_i) = -chi(z + e_i, z)
        for i in range(self.grid.n):
            partner = np.roll(self.backward[i], -1, axis=i)
            if not np.allclose(self.forward[i], -partner, rtol=0.0, atol=atol):
                return False
        return True


@dataclass(frozen=True, eq=False)
class PiecewiseConstantField:
    """Function on T^n that is constant on every cell Q_z^h of ``grid``."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("piecewise-constant field has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __call__(self, *coords) -> np.ndarray:
        idx = tuple(
            np.floor((np.asarray(c, dtype=float) + 0.5 * self.grid.h) * self.grid.k).astype(np.int64) % self.grid.k
            for c in coords
        )
        return self.values[idx]

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def l2_norm_sq(self) -> float:
        return float((self.values**2).sum() * self.grid.cell_volume)

    def breakpoints(self) -> np.ndarray:
        """Cell boundaries along one axis inside [0, 1]."""
        h = self.grid.h
        b = (np.arange(self.grid.k) + 0.5) * h
        return np.concatenate([[0.0], b, [1.0]])

    def refine(self, k_fine: int) -> "PiecewiseConstantField":
        """The same function written on a finer grid; needs an odd ratio k_fine/k."""
        m, rem = divmod(k_fine, self.grid.k)
        if rem or m % 2 == 0:
            raise ValueError(f"cells of k={self.grid.k} are unions of cells of k={k_fine} only for odd ratios")
        fine = TorusGrid(self.grid.n, k_fine)
        # fine node j lies in coarse cell round(j / m)
        owner = ((np.arange(k_fine) + (m - 1) // 2) // m) % self.grid.k
        vals = self.values[np.ix_(*([owner] * self.grid.n))]
        return PiecewiseConstantField(fine, vals)


# ---------------------------------------------------------------------------
# inner products and norms


def inner_h(u: GridFunction, v: GridFunction) -> float:
    _check_same_grid(u.grid, v.grid)
    return float(np.sum(u.values * v.values) * u.grid.cell_volume)


def norm_h(u: GridFunction) -> float:
    return float(np.sqrt(inner_h(u, u)))


def lm_norm_h(u: GridFunction, m: int) -> float:
    """The discrete L^m_h norm (sum_z h^n |u(z)|^m)^(1/m)."""
    return float((np.sum(np.abs(u.values) ** m) * u.grid.cell_volume) ** (1.0 / m))


def edge_inner(chi: EdgeField, phi: EdgeField) -> float:
    _check_same_grid(chi.grid, phi.grid)
    s = np.sum(chi.forward * phi.forward) + np.sum(chi.backward * phi.backward)
    return float(0.5 * chi.grid.cell_volume * s)


def edge_norm(chi: EdgeField) -> float:
    return float(np.sqrt(edge_inner(chi, chi)))


def edge_inner_1d_forward(chi: EdgeField, phi: EdgeField) -> float:
    """sum_k h chi_{k,k+1} phi_{k,k+1}; equals edge_inner when both fields are
    symmetric or both antisymmetric (n = 1 only)."""
    _check_same_grid(chi.grid, phi.grid)
    if chi.grid.n != 1:
        raise ValueError("the forward-edge reduction is one-dimensional")
    return float(chi.grid.h * np.sum(chi.forward[0] * phi.forward[0]))


# ---------------------------------------------------------------------------
# difference operators


def _forward_diffs(values: np.ndarray) -> np.ndarray:
    return np.stack([np.roll(values, -1, axis=i) - values for i in range(values.ndim)])


def _backward_diffs(values: np.ndarray) -> np.ndarray:
    return np.stack([np.roll(values, 1, axis=i) - values for i in range(values.ndim)])


def graph_gradient(u: GridFunction) -> EdgeField:
    k = u.grid.k
    return EdgeField(u.grid, _forward_diffs(u.values) * k, _backward_diffs(u.values) * k)


def laplacian_values(values: np.ndarray, h: float) -> np.ndarray:
    out = -2.0 * values.ndim * values
    for i in range(values.ndim):
        out = out + np.roll(values, 1, axis=i) + np.roll(values, -1, axis=i)
    return out / (h * h)


def graph_laplacian(u: GridFunction) -> GridFunction:
    return GridFunction(u.grid, laplacian_values(u.values, u.grid.h))


def shift(u: GridFunction, axis: int, step: int) -> GridFunction:
    """(tau u)(z) = u(z + step e_axis)."""
    return GridFunction(u.grid, np.roll(u.values, -step, axis=axis))


# ---------------------------------------------------------------------------
# energies


def tv_values(values: np.ndarray, h: float) -> float:
    n = values.ndim
    s = np.abs(_forward_diffs(values)).sum() + np.abs(_backward_diffs(values)).sum()
    return float(0.5 * h ** (n - 1) * s)


def tv_h(u: GridFunction) -> float:
    """Anisotropic graph total variation (1/2) sum_{z, z~z} h^(n-1) |u(z) - u(z~)|."""
    return tv_values(u.values, u.grid.h)


def dirichlet_h(u: GridFunction) -> float:
    n, h = u.grid.n, u.grid.h
    s = (_forward_diffs(u.values) ** 2).sum() + (_backward_diffs(u.values) ** 2).sum()
    return float(0.25 * h ** (n - 2) * s)


def double_well(x, alpha: float):
    return 0.25 * alpha * (np.asarray(x) ** 2 - 1.0) ** 2


def double_well_prime(x, alpha: float):
    x = np.asarray(x)
    return alpha * x * (x * x - 1.0)


def _check_alpha(alpha: float) -> None:
    if not alpha > 0:
        raise ValueError(f"well depth alpha must be positive, got {alpha}")


def potential_h(u: GridFunction, alpha: float) -> float:
    _check_alpha(alpha)
    return float(np.sum(double_well(u.values, alpha)) * u.grid.cell_volume)


def ac_h(u: GridFunction, alpha: float) -> float:
    return dirichlet_h(u) + potential_h(u, alpha)


# ---------------------------------------------------------------------------
# embedding i_h and projection p_h


def embed_pc(u: GridFunction) -> PiecewiseConstantField:
    return PiecewiseConstantField(u.grid, u.values.copy())


def _overlap_matrix(k: int, k_src: int) -> np.ndarray:
    """Fraction of target cell z (grid k) covered by source cell j (grid k_src),
    shape (k, k_src). Exact in integer arithmetic."""
    # units of 1/M with M = 2 lcm, so every cell boundary is an integer
    m = 2 * int(np.lcm(k, k_src))
    wt, ws = m // k, m // k_src
    a1 = (wt * np.arange(k) - wt // 2)[:, None, None]
    b1 = a1 + wt
    a2 = (ws * np.arange(k_src) - ws // 2)[None, :, None] + m * np.array([-1, 0, 1])[None, None, :]
    b2 = a2 + ws
    ov = np.clip(np.minimum(b1, b2) - np.maximum(a1, a2), 0, None).sum(axis=2)
    return ov / float(wt)


def project_pc(
    w: Union[Callable, PiecewiseConstantField, object],
    grid: TorusGrid,
    order: int = 8,
    return_error: bool = False,
):
    """Cell averages p_h w(z) = h^-n int_{Q_z} w.

    ``w`` may be a piecewise-constant field on any grid of the same
    dimension (integrated exactly), a one-dimensional field exposing ``breakpoints()``
    (integrated exactly between breakpoints), or a callable taking ``n``
    coordinate arrays (per-cell Gauss-Legendre rule with ``order`` points per
    axis). With ``return_error`` the result is paired with an estimate of the
    quadrature error, the largest change when the order is doubled (zero for
    exact paths).
    """
    if isinstance(w, PiecewiseConstantField):
        if w.grid.n != grid.n:
            raise ValueError("dimension mismatch")
        mat = _overlap_matrix(grid.k, w.grid.k)
        out = w.values
        for axis in range(grid.n):
            out = np.moveaxis(np.tensordot(mat, out, axes=([1], [axis])), 0, axis)
        result = GridFunction(grid, out)
        return (result, 0.0) if return_error else result
    if hasattr(w, "breakpoints") and grid.n == 1:
        h = grid.h
        bp = np.asarray(w.breakpoints(), dtype=float)
        cuts = np.union1d(np.concatenate([bp, bp - 1.0]), (np.arange(grid.k + 1) - 0.5) * h)
        cuts = cuts[(cuts >= -0.5 * h) & (cuts <= 1.0 - 0.5 * h)]
        pieces = integrate_breakpoints(w, cuts, 3)
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        owner = grid.cell_of(mids).ravel()
        sums = np.bincount(owner, weights=pieces, minlength=grid.k)
        result = GridFunction(grid, sums / h)
        return (result, 0.0) if return_error else result
    vals = cell_integrals(w, grid.n, grid.k, order) / grid.cell_volume
    result = GridFunction(grid, vals)
    if not return_error:
        return result
    finer = cell_integrals(w, grid.n, grid.k, 2 * order) / grid.cell_volume
    return result, float(np.abs(finer - vals).max())


def l2_distance_sq_pc(f: PiecewiseConstantField, w: Callable, order: int = 8) -> float:
    """||f - w||^2_{L^2(T^n)} for a piecewise-constant ``f`` and callable ``w``,
    by the per-cell Gauss rule of the given order."""
    n = f.grid.n

    def sq(*coords):
        return (f(*coords) - w(*coords)) ** 2

    return float(cell_integrals(sq, n, f.grid.k, order).sum())


def cell_abs_integrals(w: Callable, grid: TorusGrid, order: int = 8) -> np.ndarray:
    return cell_integrals(lambda *c: np.abs(w(*c)), grid.n, grid.k, order)


# ---------------------------------------------------------------------------
# continuum anisotropic TV of a piecewise-constant field


def _cyclic_jump_sum(row) -> float:
    """Essential variation of a piecewise-constant periodic function of one
    variable: collapse equal neighbours to plateaus and sum the cyclic jumps."""
    plateaus: list[float] = []
    for c in row:
        if not plateaus or c != plateaus[-1]:
            plateaus.append(float(c))
    if len(plateaus) > 1 and plateaus[0] == plateaus[-1]:
        plateaus.pop()
    if len(plateaus) == 1:
        return 0.0
    total = 0.0
    for i, c in enumerate(plateaus):
        total += abs(c - plateaus[i - 1])
    return total


def continuum_tv_pc(f: PiecewiseConstantField) -> float:
    """Anisotropic TV int |Df|_l1 of a cellwise-constant field.

    Each axis contributes the essential variation of every lattice line in
    that direction, weighted by the (n-1)-dimensional measure h^(n-1) of the
    slab the line represents.
    """
    n, h = f.grid.n, f.grid.h
    total = 0.0
    for axis in range(n):
        rows = np.moveaxis(f.values, axis, -1).reshape(-1, f.grid.k)
        total += sum(_cyclic_jump_sum(r) for r in rows)
    return total * h ** (n - 1)


def _common_midpoints(f: PiecewiseConstantField, g: PiecewiseConstantField):
    if f.grid.n != g.grid.n:
        raise ValueError("dimension mismatch")
    n = f.grid.n
    m = 2 * int(np.lcm(f.grid.k, g.grid.k))
    mids = (np.arange(m) + 0.5) / m
    axes = np.meshgrid(*([mids] * n), indexing="ij")
    return f(*axes), g(*axes), float(m) ** n


def pc_inner(f: PiecewiseConstantField, g: PiecewiseConstantField) -> float:
    """Exact L^2(T^n) inner product of two cellwise-constant fields.

    All cell boundaries of both grids are multiples of 1/M with
    M = 2 lcm(k_f, k_g), so both fields are constant on the cubes of side 1/M
    and their midpoint values integrate exactly.
    """
    a, b, vol = _common_midpoints(f, g)
    return float(np.sum(a * b) / vol)


def pc_l2_distance_sq(f: PiecewiseConstantField, g: PiecewiseConstantField) -> float:
    """Exact ||f - g||^2 for cellwise-constant fields on any two grids."""
    a, b, vol = _common_midpoints(f, g)
    return float(np.sum((a - b) ** 2) / vol)
