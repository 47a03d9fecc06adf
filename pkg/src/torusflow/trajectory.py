"""Time-ordered samples of a flow on a fixed grid, with scheme metadata."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .calculus import GridFunction
from .grid import TorusGrid


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TorusGrid
    times: np.ndarray
    states: np.ndarray  # shape (len(times),) + grid.shape
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        states = np.array(self.states, dtype=float).reshape((times.size,) + self.grid.shape)
        if times.size == 0 or times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory contains non-finite values")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.states[i])

    def __iter__(self) -> Iterator[tuple[float, GridFunction]]:
        for i in range(len(self)):
            yield float(self.times[i]), self[i]

    @property
    def initial(self) -> GridFunction:
        return self[0]

    @property
    def final(self) -> GridFunction:
        return self[len(self) - 1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t," + ",".join(f"u{i}" for i in range(self.grid.size)) + "\n")
        for t, row in zip(self.times, self.states.reshape(len(self), -1)):
            buf.write(",".join(format(float(x), ".17g") for x in (t, *row)) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.grid.n,
                "k": self.grid.k,
                "metadata": self.metadata,
                "times": [float(t) for t in self.times],
                "states": [[float(x) for x in row] for row in self.states.reshape(len(self), -1)],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        d = json.loads(text)
        return cls(TorusGrid(d["n"], d["k"]), d["times"], d["states"], d.get("metadata", {}))


def distances_h(a: Trajectory, b: Trajectory) -> np.ndarray:
    """||a(t) - b(t)||_h at the shared sample times."""
    if a.grid != b.grid or a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-14):
        raise ValueError("trajectories must share grid and sample times")
    diff = (a.states - b.states).reshape(len(a), -1)
    return np.sqrt(np.sum(diff**2, axis=1) * a.grid.cell_volume)


def evi_residual(traj: Trajectory, energy, probes, lam: float = 0.0) -> np.ndarray:
    """Worst violation of the one-step evolution variational inequality.

    For consecutive samples u_m, u_{m+1} (spacing tau) and every probe v,
    computes (d_{m+1}^2 - d_m^2)/(2 tau) + (lam/2) d_{m+1}^2
    - (energy(v) - energy(u_{m+1})) with d the L^2_h distance to v, and
    returns the maximum over probes for each step (shape ``(len - 1,)``).
    Non-positive entries mean the inequality holds exactly.
    """
    vol = traj.grid.cell_volume
    flat = traj.states.reshape(len(traj), -1)
    taus = np.diff(traj.times)
    e_states = np.array([energy(traj[i]) for i in range(len(traj))])
    worst = np.full(len(traj) - 1, -np.inf)
    for v in probes:
        pv = np.asarray(v.values, dtype=float).ravel()
        d2 = np.sum((flat - pv) ** 2, axis=1) * vol
        ev = energy(v)
        res = (d2[1:] - d2[:-1]) / (2.0 * taus) + 0.5 * lam * d2[1:] - (ev - e_states[1:])
        worst = np.maximum(worst, res)
    return worst
