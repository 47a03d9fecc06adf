"""Cubic lattice discretization of the flat torus T^n = (R/Z)^n.

Nodes sit at z = (k_1 h, ..., k_n h) with h = 1/k. Every node owns the
half-open cell [z_i - h/2, z_i + h/2) along each axis. Nodes are enumerated
row-major over the multi-index (last axis fastest), and every other module
relies on that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

NodeIndex = tuple[int, ...]


@dataclass(frozen=True)
class TorusGrid:
    """Periodic lattice with ``k`` nodes per axis in ``n`` dimensions."""

    n: int
    k: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n}")
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"need k >= 2 nodes per axis so that h = 1/k lies in (0, 1), got {self.k}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))

    @property
    def h(self) -> float:
        return 1.0 / self.k

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.k,) * self.n

    @property
    def size(self) -> int:
        return self.k**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def nodes(self) -> list[NodeIndex]:
        """All multi-indices in row-major order."""
        return [tuple(int(c) for c in idx) for idx in np.ndindex(*self.shape)]

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)``, row-major."""
        axes = np.meshgrid(*([np.arange(self.k) * self.h] * self.n), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=-1)

    def axis_nodes(self) -> np.ndarray:
        return np.arange(self.k) * self.h

    def flat_index(self, z: Union[int, Sequence[int]]) -> int:
        return int(np.ravel_multi_index(self.normalize(z), self.shape))

    def multi_index(self, flat: int) -> NodeIndex:
        return tuple(int(c) for c in np.unravel_index(flat, self.shape))

    def normalize(self, z: Union[int, Sequence[int]]) -> NodeIndex:
        """Coerce ``z`` to a tuple and reduce each entry modulo k."""
        if np.isscalar(z):
            z = (int(z),)
        z = tuple(int(c) % self.k for c in z)
        if len(z) != self.n:
            raise ValueError(f"node index {z} has {len(z)} entries, grid has n={self.n}")
        return z

    def neighbors(self, z: Union[int, Sequence[int]]) -> list[NodeIndex]:
        """Nodes joined to ``z`` by an edge of E_h, without duplicates.

        For k = 2 the forward and the wrap-around edge along an axis join the
        same pair of nodes and are reported once.
        """
        z = self.normalize(z)
        out: list[NodeIndex] = []
        for axis in range(self.n):
            for step in (1, -1):
                nb = list(z)
                nb[axis] = (nb[axis] + step) % self.k
                nb = tuple(nb)
                if nb not in out:
                    out.append(nb)
        return out

    def edges(self) -> list[tuple[NodeIndex, NodeIndex]]:
        """Unordered edge set of E_h, each pair listed once as (z, z~) with z < z~."""
        seen = set()
        for z in self.nodes():
            for nb in self.neighbors(z):
                seen.add((min(z, nb), max(z, nb)))
        return sorted(seen)

    def cell_of(self, x) -> Union[NodeIndex, np.ndarray]:
        """Index of the cell Q_z^h containing the point(s) ``x``.

        ``x`` is a scalar (n = 1), a length-n sequence, or an array of shape
        ``(..., n)``. Points are reduced modulo 1 by the same floor that
        locates the cell; the left cell boundary belongs to the cell.
        """
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 0 or (pts.ndim == 1 and pts.size == self.n):
            idx = np.floor((pts.reshape(self.n) + 0.5 * self.h) * self.k).astype(np.int64) % self.k
            return tuple(int(c) for c in idx)
        if self.n == 1 and pts.shape[-1] != 1:
            pts = pts[..., None]
        if pts.shape[-1] != self.n:
            raise ValueError(f"points have {pts.shape[-1]} coordinates, grid has n={self.n}")
        return np.floor((pts + 0.5 * self.h) * self.k).astype(np.int64) % self.k


def build_grid(n: int, k: int) -> TorusGrid:
    return TorusGrid(n, k)
