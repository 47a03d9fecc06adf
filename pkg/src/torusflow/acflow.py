"""One-dimensional graph Allen-Cahn flows and their verification checks.

Both flows solve du/dt = Delta_h u + lam u - F(u), once in the L^2_h metric
(standard) and once in the metric induced by the piecewise-linear embedding,
where the time derivative is preconditioned by Gamma. The canonical reaction
is F(x) = W'(x) + lam x, so that lam u - F(u) = -W'(u).

Time stepping is implicit in the diffusion and explicit in the reaction;
the linear solves are diagonal in the discrete Fourier basis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import (
    GridFunction,
    ac_h,
    dirichlet_h,
    double_well_prime,
    embed_pc,
    graph_laplacian,
    norm_h,
)
from .gamma import gamma_apply, gamma_solve, gamma_spectrum
from .grid import TorusGrid
from .interp import l2_distance_sq_1d, lin_embed, nodal_interpolate
from .trajectory import Trajectory, distances_h
from .tvflow import step_count

SAMPLE_COUNT = 64
REJECT_FACTOR = 10.0


class StepRejected(RuntimeError):
    pass


@dataclass(frozen=True)
class PotentialSpec:
    """Reaction data: well depth ``alpha``, shift ``lam`` and F.

    Without ``F`` the canonical F(x) = alpha x (x^2 - 1) + lam x is used,
    which is increasing when lam > alpha. A user F must come with its
    derivative ``dF``.
    """

    alpha: float
    lam: float
    F: Optional[Callable] = field(default=None, compare=False)
    dF: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if (self.F is None) != (self.dF is None):
            raise ValueError("a user reaction needs both F and its derivative dF")
        if self.F is None:
            if not self.lam > self.alpha:
                raise ValueError(f"canonical reaction needs lam > alpha, got lam={self.lam}, alpha={self.alpha}")
        elif abs(float(self.F(np.array(0.0)))) > 1e-14:
            raise ValueError("reaction must satisfy F(0) = 0")

    @classmethod
    def canonical(cls, alpha: float, lam: Optional[float] = None) -> "PotentialSpec":
        return cls(alpha, 2.0 * alpha if lam is None else lam)

    @property
    def is_canonical(self) -> bool:
        return self.F is None

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.F is None:
            return double_well_prime(x, self.alpha) + self.lam * x
        return np.asarray(self.F(x), dtype=float)

    def df(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dF is None:
            return self.alpha * (3.0 * x * x - 1.0) + self.lam
        return np.asarray(self.dF(x), dtype=float)

    def reaction(self, x) -> np.ndarray:
        """lam x - F(x)."""
        return self.lam * np.asarray(x, dtype=float) - self.f(x)

    def envelope(self, u0_sup: float, T: float) -> float:
        """Sup-norm bound u0_sup e^{lam T} for the solution up to time T."""
        return u0_sup * math.exp(self.lam * T)

    def n_constant(self, u0_sup: float, T: float, samples: int = 4001) -> float:
        """sup F'(s) over |s| <= u0_sup e^{lam T}."""
        r = self.envelope(u0_sup, T)
        if self.is_canonical:
            return self.alpha * (3.0 * r * r - 1.0) + self.lam
        s = np.linspace(-r, r, samples)
        d = self.df(s)
        if d.min() < 0:
            warnings.warn(f"sampled F' reaches {d.min():.3e} < 0 on the working range; F may not be monotone")
        elif d.min() < 1e-8 * max(1.0, abs(self.lam)):
            warnings.warn("sampled F' comes close to zero on the working range")
        return float(d.max())

    def c_n(self, u0_sup: float, T: float) -> float:
        n = self.n_constant(u0_sup, T)
        return (n * n + self.lam**2) / 36.0

    def c_star(self, u0_sup: float, T: float, delta: float) -> float:
        if not delta > 0:
            raise ValueError("delta must be positive")
        if not self.lam > 0:
            raise ValueError("the error constant needs lam > 0")
        return math.exp(2.0 * self.lam * T) * (1.0 / 6.0 + 3.0 * self.c_n(u0_sup, T) / (self.lam * delta))


def laplacian_symbol(k: int) -> np.ndarray:
    """Eigenvalues of -Delta_h: (4/h^2) sin^2(pi l / k)."""
    return 4.0 * k * k * np.sin(np.pi * np.arange(k) / k) ** 2


def _run(
    u0: GridFunction,
    spec: PotentialSpec,
    T: float,
    tau: float,
    mass: np.ndarray,
    scheme: str,
    samples: Optional[int],
) -> Trajectory:
    grid = u0.grid
    if grid.n != 1:
        raise ValueError("Allen-Cahn flows are implemented on one-dimensional grids")
    k = grid.k
    multiple = SAMPLE_COUNT if samples is None else samples
    steps = step_count(T, tau, multiple)
    tau_eff = T / steps
    every = 1 if samples is None else steps // samples
    half = k // 2 + 1
    m_hat = mass[:half]
    denom = m_hat + tau_eff * laplacian_symbol(k)[:half]
    u = u0.values.copy()
    sup0 = float(np.abs(u).max())
    states = [u.copy()]
    times = [0.0]
    for m in range(1, steps + 1):
        rhs_hat = m_hat * np.fft.rfft(u) + tau_eff * np.fft.rfft(spec.reaction(u))
        u = np.fft.irfft(rhs_hat / denom, n=k)
        t = m * tau_eff
        limit = REJECT_FACTOR * spec.envelope(sup0, t)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > limit:
            raise StepRejected(f"step {m} (t={t:.6g}) left the growth envelope: |u|_inf > {limit:.6g}")
        if m % every == 0:
            states.append(u.copy())
            times.append(T if m == steps else t)
    meta = {
        "scheme": scheme,
        "tau": tau_eff,
        "tau_requested": tau,
        "steps": steps,
        "save_every": every,
        "alpha": spec.alpha,
        "lambda": spec.lam,
        "reaction": "canonical" if spec.is_canonical else "user",
    }
    return Trajectory(grid, np.array(times), np.array(states), meta)


def dac_flow(u0: GridFunction, spec: PotentialSpec, T: float, tau: float, samples: Optional[int] = SAMPLE_COUNT) -> Trajectory:
    """(Id - tau Delta_h) u^{m+1} = u^m + tau (lam u^m - F(u^m)).

    The step count is ceil(T/tau) rounded up to a multiple of ``samples``;
    the trajectory holds ``samples`` + 1 uniform samples, or every step when
    ``samples`` is None.
    """
    return _run(u0, spec, T, tau, np.ones(u0.grid.k), "standard-semi-implicit", samples)


def mdac_flow(u0: GridFunction, spec: PotentialSpec, T: float, tau: float, samples: Optional[int] = SAMPLE_COUNT) -> Trajectory:
    """(Gamma - tau Delta_h) U^{m+1} = Gamma U^m + tau (lam U^m - F(U^m))."""
    return _run(u0, spec, T, tau, gamma_spectrum(u0.grid.k), "gamma-semi-implicit", samples)


def default_tau(k: int) -> float:
    return min(1.0 / (k * k), 1e-3)


def continuum_reference(
    u0: Callable,
    alpha: float,
    T: float,
    k_ref: int,
    tau_ref: float,
    samples: int = SAMPLE_COUNT,
) -> Trajectory:
    """Fine-grid standard flow standing in for the continuum solution."""
    spec = PotentialSpec.canonical(alpha)
    grid = TorusGrid(1, k_ref)
    return dac_flow(nodal_interpolate(u0, grid), spec, T, tau_ref, samples)


def scalar_ode_solution(c0: float, alpha: float, t) -> np.ndarray:
    """Exact solution of c' = -alpha c (c^2 - 1)."""
    t = np.asarray(t, dtype=float)
    if c0 == 0.0:
        return np.zeros_like(t)
    return np.sign(c0) / np.sqrt(1.0 + (1.0 / (c0 * c0) - 1.0) * np.exp(-2.0 * alpha * t))


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class ACCheck:
    name: str
    measured: float
    bound: float
    k: Optional[int] = None
    details: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.bound)


def _sup_norms(traj: Trajectory) -> np.ndarray:
    return np.abs(traj.states.reshape(len(traj), -1)).max(axis=1)


def cp_checks(traj: Trajectory, spec: PotentialSpec, slack_factor: float = 10.0) -> list[ACCheck]:
    """Growth bound |u(t)|_inf <= |u0|_inf e^{lam t} and the minimum principle
    for |u0|_inf e^{lam t} - u(t), each with slack slack_factor * tau."""
    tau = traj.metadata["tau"]
    env = spec.envelope(float(np.abs(traj.states[0]).max()), 0.0) * np.exp(spec.lam * traj.times)
    sup = _sup_norms(traj)
    flat = traj.states.reshape(len(traj), -1)
    supersol_min = float((env[:, None] - flat).min())
    return [
        ACCheck("growth_bound", float((sup - env).max()), slack_factor * tau, traj.grid.k),
        ACCheck("minimum_principle", -supersol_min, slack_factor * tau, traj.grid.k),
    ]


def energy_monotone(traj: Trajectory, spec: PotentialSpec, slack_factor: float = 1.0) -> ACCheck:
    """Largest increase of the Allen-Cahn energy between samples against slack_factor * tau."""
    e = np.array([ac_h(u, spec.alpha) for _, u in traj])
    inc = float(np.max(np.diff(e), initial=0.0))
    return ACCheck("ac_energy_nonincreasing", max(inc, 0.0), slack_factor * traj.metadata["tau"], traj.grid.k)


def sac_check(traj: Trajectory, spec: PotentialSpec, slack_factor: float = 10.0) -> ACCheck:
    """e^{-2 lam t} ||u - Gamma u||_h^2 + 2 int_0^t e^{-2 lam s} ||grad_h (u - Gamma u)||^2 ds
    against (h^2/9) ||grad_h u0||^2 + slack_factor tau (1 + T), at every sample
    (trapezoid rule in s over the stored samples)."""
    h = traj.grid.h
    lam = spec.lam
    diffs = [u - gamma_apply(u) for _, u in traj]
    first = np.array([norm_h(d) ** 2 for d in diffs])
    grad_sq = np.array([2.0 * dirichlet_h(d) for d in diffs])
    weight = np.exp(-2.0 * lam * traj.times)
    integrand = weight * grad_sq
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(traj.times) * (integrand[1:] + integrand[:-1]))])
    lhs = weight * first + 2.0 * cum
    rhs = h * h / 9.0 * 2.0 * dirichlet_h(traj.initial)
    slack = slack_factor * traj.metadata["tau"] * (1.0 + traj.horizon)
    worst = int(np.argmax(lhs - rhs))
    return ACCheck(
        "gamma_defect_bound",
        float(lhs[worst]),
        float(rhs + slack),
        traj.grid.k,
        {"rhs": float(rhs), "slack": float(slack), "worst_time": float(traj.times[worst]), "max_lhs": float(lhs.max())},
    )


def ac_evi_residual(traj: Trajectory, spec: PotentialSpec, probes: Sequence[GridFunction]) -> ACCheck:
    """One-step EVI with lam_geo = -alpha along a standard-flow run saved at every step.

    The semi-implicit step satisfies the EVI of the exact implicit step up to
    the reaction lag e_m = W'(u^m) - W'(u^{m+1}); the slack for probe v is
    ||e_m||_h ||u^{m+1} - v||_h, plus 1e-9 for rounding.
    """
    if traj.metadata.get("save_every") != 1:
        raise ValueError("the EVI residual needs every step of the run")
    tau = traj.metadata["tau"]
    h = traj.grid.h
    flat = traj.states.reshape(len(traj), -1)
    energies = np.array([ac_h(traj[i], spec.alpha) for i in range(len(traj))])
    lag = spec.reaction(flat[1:]) - spec.reaction(flat[:-1])
    lag_norm = np.sqrt(np.sum(lag**2, axis=1) * h)
    worst = -math.inf
    worst_slack = 0.0
    for v in probes:
        pv = v.flat
        d2 = np.sum((flat - pv) ** 2, axis=1) * h
        lhs = (d2[1:] - d2[:-1]) / (2.0 * tau) - 0.5 * spec.alpha * d2[1:]
        rhs = ac_h(v, spec.alpha) - energies[1:]
        slack = lag_norm * np.sqrt(d2[1:]) + 1e-9
        excess = lhs - rhs - slack
        i = int(np.argmax(excess))
        if excess[i] > worst:
            worst = float(excess[i])
            worst_slack = float(slack[i])
    return ACCheck("ac_evi_residual", worst, 0.0, traj.grid.k, {"slack_at_worst": worst_slack})


def ac_contraction(a: Trajectory, b: Trajectory, spec: PotentialSpec, slack_factor: float = 1.0) -> ACCheck:
    """||u(t) - v(t)||_h <= e^{alpha t} ||u0 - v0||_h + slack_factor tau t."""
    d = distances_h(a, b)
    tau = a.metadata["tau"]
    excess = d - np.exp(spec.alpha * a.times) * d[0] - slack_factor * tau * a.times
    return ACCheck("ac_contraction", float(excess.max()), 0.0, a.grid.k)


def vector_field_defect(u: GridFunction, spec: PotentialSpec, tau: float, metric: str = "standard") -> float:
    """|| (u^1 - u)/tau - V(u) ||_h for one scheme step from u, with V the
    flow's vector field (Delta_h u + lam u - F(u), or its Gamma^-1 image)."""
    flow = dac_flow if metric == "standard" else mdac_flow
    step = flow(u, spec, tau, tau, samples=None)
    slope = (step.states[1] - step.states[0]) / step.metadata["tau"]
    field_ = graph_laplacian(u).values + spec.reaction(u.values)
    if metric != "standard":
        field_ = gamma_solve(field_)
    return float(np.sqrt(np.sum((slope - field_) ** 2) * u.grid.h))


def tdf_check(
    u0: Callable,
    spec: PotentialSpec,
    T: float,
    delta: float,
    grids: Sequence[int],
    tau_rule: Callable[[int], float] = lambda k: 1.0 / (k * k),
    min_order: float = 0.9,
) -> list[ACCheck]:
    """Standard against Gamma-metric flow from the same nodal data.

    For every k the bound C_* h^2 ||grad_h u0||^2 e^{6 (lam + delta) t} is
    checked at each sample; the last record is the least-squares slope of
    log sup_t ||u - U||_h against log h.
    """
    out = []
    hs, errs = [], []
    for k in grids:
        grid = TorusGrid(1, k)
        v0 = nodal_interpolate(u0, grid)
        sup0 = v0.sup_norm()
        tau = tau_rule(k)
        a = dac_flow(v0, spec, T, tau)
        b = mdac_flow(v0, spec, T, tau)
        d = distances_h(a, b)
        n_const = spec.n_constant(sup0, T)
        c_n = spec.c_n(sup0, T)
        c_star = spec.c_star(sup0, T, delta)
        grad_sq = 2.0 * dirichlet_h(v0)
        bound = c_star * grid.h**2 * grad_sq * np.exp(6.0 * (spec.lam + delta) * a.times)
        ratio = d**2 / bound
        i = int(np.argmax(ratio))
        out.append(
            ACCheck(
                "metric_difference_bound",
                float(d[i] ** 2),
                float(bound[i]),
                k,
                {"N": n_const, "C_N": c_n, "C_star": c_star, "worst_time": float(a.times[i]), "sup_error": float(d.max())},
            )
        )
        hs.append(grid.h)
        errs.append(float(d.max()))
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0]) if len(grids) > 1 else math.nan
    out.append(ACCheck("metric_difference_order", -slope, -min_order, None, {"empirical_order": slope, "sup_errors": errs}))
    return out


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    h: float
    sup_error: float
    sup_error_pc: float
    interchange_bound: float
    empirical_order: Optional[float]
    mesh_hypothesis: float


def cac_convergence(
    u0: Callable,
    alpha: float,
    T: float,
    grids: Sequence[int],
    k_ref: int = 1024,
    tau_rule: Callable[[int], float] = default_tau,
    ref_tau_factor: float = 0.25,
    reference: Optional[Trajectory] = None,
) -> list[ConvergenceRow]:
    """Mesh-refinement study of the standard flow against a fine reference.

    For each k: sup over the common sample times of ||I_h u^h(t) - u_ref(t)||
    (and of ||i_h u^h(t) - u_ref(t)||), computed exactly on merged
    breakpoints, with u_ref the piecewise-linear embedding of the reference.
    The reference step is ref_tau_factor times the smallest study step.
    """
    grids = list(grids)
    if any(b <= a for a, b in zip(grids, grids[1:])):
        raise ValueError("grids must be strictly increasing")
    if k_ref < 8 * grids[-1]:
        raise ValueError("reference grid must be at least 8 times the finest study grid")
    spec = PotentialSpec.canonical(alpha)
    if reference is None:
        tau_ref = ref_tau_factor * min(tau_rule(k) for k in grids)
        reference = continuum_reference(u0, alpha, T, k_ref, tau_ref)
    ref_fields = [lin_embed(u) for _, u in reference]
    rows = []
    prev = None
    for k in grids:
        grid = TorusGrid(1, k)
        v0 = nodal_interpolate(u0, grid)
        traj = dac_flow(v0, spec, T, tau_rule(k))
        if not np.allclose(traj.times, reference.times, rtol=0, atol=1e-12):
            raise ValueError("study and reference sample times differ")
        err = max(math.sqrt(l2_distance_sq_1d(lin_embed(u), ref)) for (_, u), ref in zip(traj, ref_fields))
        err_pc = max(math.sqrt(l2_distance_sq_1d(embed_pc(u), ref)) for (_, u), ref in zip(traj, ref_fields))
        order = None
        if prev is not None and err > 0.0 and prev[1] > 0.0:  # stationary data has no order
            order = math.log(prev[1] / err) / math.log(prev[0] / grid.h)
        rows.append(
            ConvergenceRow(
                k,
                grid.h,
                err,
                err_pc,
                grid.h * math.sqrt(ac_h(v0, alpha)),
                order,
                grid.h * math.sqrt(2.0 * dirichlet_h(v0)),
            )
        )
        prev = (grid.h, err)
    return rows


def fitted_order(rows: Sequence[ConvergenceRow]) -> float:
    if len(rows) < 2 or any(r.sup_error <= 0.0 for r in rows):
        return math.nan
    hs = np.log([r.h for r in rows])
    es = np.log([r.sup_error for r in rows])
    return float(np.polyfit(hs, es, 1)[0])
