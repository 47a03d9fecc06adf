"""Check records, the anchor registry, and JSON/CSV report output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

# Every check names the mathematical statement it exercises. Keys are stable
# identifiers; values say what is being verified.
ANCHORS: dict[str, str] = {
    "grid-structure": "lattice size, neighbour sets and cell partition of the torus",
    "inner-product": "the lattice inner product <u, v>_h = sum u v h^n",
    "summation-by-parts": "<-Delta_h u, v>_h = <grad_h u, grad_h v>_{h,h}",
    "cell-average-roundtrip": "cell averages of the piecewise-constant embedding return the nodal values",
    "embedding-isometry": "the piecewise-constant embedding preserves inner products",
    "projection-pythagoras": "Pythagoras identity for the cell-average projection",
    "cell-mass": "the cell-average projection preserves the mass of every cell",
    "l1-nonexpansion": "the cell-average projection does not increase the L^1 norm",
    "projection-convergence-pc": "cellwise averages converge to a smooth field in L^2",
    "embedded-tv": "graph TV equals the continuum anisotropic TV of the embedding",
    "tv-projection-bound": "graph TV of cell averages is bounded by the continuum TV",
    "gamma-spectrum": "eigenvalues of Gamma are (2 + cos(2 pi l h))/3",
    "gamma-positivity": "<(Gamma - Id/3) u, u>_h = (h/6) sum (u_k + u_{k+1})^2",
    "gamma-gradient-coercivity": "<grad u, grad Gamma u>_{h,h} >= (1/3) |grad u|^2_{h,h}",
    "shift-gradient": "|u - shifted u|_h^2 = h^2 |grad_h u|^2_{h,h}",
    "gamma-commutation": "Gamma commutes with the graph Laplacian",
    "gamma-inverse": "Fourier solve of Gamma x = b",
    "gamma-sqrt": "spectral square root of Gamma",
    "gamma-exponential": "cosine-sum and series formulas for exp(x Gamma) agree",
    "gamma-semigroup": "exp((x + y) Gamma) = exp(x Gamma) exp(y Gamma)",
    "pwl-inner-product": "(u, v)_h = <I_h u, I_h v> = <Gamma u, v>_h with its two-sided bound",
    "pwl-norm-gap": "|u|_h^2 - |I_h u|^2 = (h^2/6) |grad_h u|^2_{h,h}",
    "pwl-lm-sandwich": "L^4 norms of the nodal values and of the interpolant are equivalent",
    "pwl-pc-gap": "|I_h u - i_h u|^2 is bounded by h^2 times the Dirichlet energy",
    "interp-error": "nodal interpolation error estimates",
    "inverse-estimate": "|w'|^2 <= (12/h^2) |w|^2 on piecewise-linear functions",
    "projection-stability": "H^1 stability of the L^2 projection onto piecewise-linear functions",
    "projection-identity": "the L^2 projection fixes piecewise-linear functions",
    "projection-convergence-pwl": "L^2 projection onto piecewise-linear functions converges",
    "tv-oracle": "graph TV flow agrees with the exact plateau evolution",
    "tv-mass": "TV flow conserves the mean",
    "tv-monotone": "graph TV does not increase along the flow",
    "tv-evi": "one-step evolution variational inequality for the TV flow",
    "tv-contraction": "TV flows from two initial data do not separate",
    "tv-energy-identity": "integral of TV equals half the decrease of the squared norm",
    "tv-refinement": "embedded TV flows on refined grids track the continuum flow",
    "ac-growth": "sup-norm growth bound |u(t)|_inf <= |u0|_inf e^{lam t}",
    "ac-minimum-principle": "minimum principle for |u0|_inf e^{lam t} - u(t)",
    "ac-energy": "Allen-Cahn energy does not increase along the flows",
    "ac-evi": "one-step evolution variational inequality with lam = -alpha",
    "ac-contraction": "contraction with rate e^{alpha t} between two runs",
    "ac-vector-field": "scheme slope approaches the flow's vector field",
    "ac-constant-data": "Gamma-metric flow of constant data follows the scalar ODE",
    "gamma-defect": "weighted bound on u - Gamma u along the standard flow",
    "metric-difference": "standard and Gamma-metric flows differ by O(h)",
    "continuum-convergence": "graph Allen-Cahn flows converge to the continuum flow",
    "pc-pwl-interchange": "piecewise-constant and piecewise-linear embeddings give the same limit",
    "poincare-second-order": "minimal Dirichlet eigenvalue pi^2 of -d^2/dx^2 on (0, 1)",
    "poincare-fourth-order": "minimal eigenvalue pi^4 of d^4/dx^4 with w = w'' = 0 on the boundary",
    "poincare-rate": "second-order convergence of the discrete eigenvalues",
    "suite-error": "a check raised instead of completing",
}


def _clean(x: Any) -> Any:
    """JSON-safe plain value; non-finite floats become strings."""
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


@dataclass
class Check:
    name: str
    anchor: str
    measured: float
    bound: float
    k: Optional[int] = None
    passed: Optional[bool] = None
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.anchor not in ANCHORS:
            raise KeyError(f"unknown anchor {self.anchor!r}")
        self.measured = float(self.measured)
        self.bound = float(self.bound)
        if self.passed is None:
            self.passed = bool(self.measured <= self.bound)
        self.passed = bool(self.passed)

    @property
    def h(self) -> Optional[float]:
        return None if self.k is None else 1.0 / self.k

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    def to_dict(self) -> dict:
        return _clean(
            {
                "name": self.name,
                "anchor": self.anchor,
                "anchor_text": ANCHORS[self.anchor],
                "k": self.k,
                "h": self.h,
                "measured": self.measured,
                "bound": self.bound,
                "margin": self.margin,
                "pass": self.passed,
                "details": self.details,
            }
        )


@dataclass
class Report:
    suite: str
    checks: list[Check] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def add(self, check: Check) -> None:
        self.checks.append(check)

    def extend(self, checks) -> None:
        for c in checks:
            self.add(c)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> str:
        body = {
            "suite": self.suite,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failed": len(self.failures()),
            "config": _clean(self.config),
            "environment": _clean(self.environment),
            "checks": [c.to_dict() for c in self.checks],
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "k", "h", "measured", "bound", "margin", "pass"])
        for c in self.checks:
            writer.writerow(
                [
                    c.name,
                    "" if c.k is None else c.k,
                    "" if c.h is None else format(c.h, ".17g"),
                    format(c.measured, ".17g"),
                    format(c.bound, ".17g"),
                    format(c.margin, ".17g"),
                    "true" if c.passed else "false",
                ]
            )
        return buf.getvalue()
