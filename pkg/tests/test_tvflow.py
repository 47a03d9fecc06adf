from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from torusflow import GridFunction, PlateauProfile, TorusGrid, plateau_oracle_1d, tv_flow_mm, tv_h, tv_prox
from torusflow.calculus import embed_pc, inner_h
from torusflow.trajectory import Trajectory, distances_h, evi_residual
from torusflow.tvflow import (
    ProxNonConvergence,
    contraction_check,
    mass_drift,
    oracle_error,
    prox_drift_bound,
    step_count,
    tv1_refinement_check,
    tv2_energy_check,
    tv_energy_monotone,
)

from strategies import grid_functions

SPIKE = GridFunction(TorusGrid(1, 4), [1.0, 0.0, 0.0, 0.0])
TWO_PLATEAUS = GridFunction(TorusGrid(1, 8), [1.0] * 4 + [0.0] * 4)


def brute_force_prox(u: GridFunction, tau: float) -> np.ndarray:
    """Prox by L-BFGS-B on the box-constrained dual.

    With D the forward-difference matrix (one row per axis and node, so both
    slots of a k = 2 pair appear) the objective divided by h^n is
    k sum |D v| + |v - u|^2 / (2 tau); its dual is
    min_{|p| <= 1} (tau k^2 / 2) |D^T p|^2 - k p.D u with v = u - tau k D^T p.
    """
    g = u.grid
    x0 = u.values.ravel()
    rows = []
    for z in g.nodes():
        for axis in range(g.n):
            nb = list(z)
            nb[axis] = (nb[axis] + 1) % g.k
            row = np.zeros(g.size)
            row[g.flat_index(z)] -= 1.0
            row[g.flat_index(nb)] += 1.0
            rows.append(row)
    D = np.array(rows)
    k = g.k
    Q = tau * k * k * D @ D.T
    c = k * D @ x0

    def fun(p):
        Qp = Q @ p
        return 0.5 * p @ Qp - c @ p, Qp - c

    res = minimize(
        fun,
        np.zeros(len(rows)),
        jac=True,
        method="L-BFGS-B",
        bounds=[(-1.0, 1.0)] * len(rows),
        options={"ftol": 1e-15, "gtol": 1e-13, "maxiter": 20000, "maxcor": 50},
    )
    return (x0 - tau * k * D.T @ res.x).reshape(g.shape)


# ----------------------------------------------------------------- prox


def test_prox_of_constant_is_itself():
    c = GridFunction.constant(TorusGrid(2, 4), 0.7)
    out, info = tv_prox(c, 0.5, 1e-10, return_info=True)
    np.testing.assert_array_equal(out.values, c.values)
    assert info.gap == 0.0


def test_large_step_flattens_spike_to_its_mean():
    out = tv_prox(SPIKE, 1.0, 1e-12)
    np.testing.assert_allclose(out.values, 0.25, atol=1e-7)
    np.testing.assert_allclose(brute_force_prox(SPIKE, 1.0), 0.25, atol=1e-6)


def test_small_step_on_two_plateaus_matches_oracle():
    tau = 1e-3
    out = tv_prox(TWO_PLATEAUS, tau, 1e-12)
    # each plateau has length 1/2 and two jumps, so it moves at speed 4
    expected = [1.0 - 4 * tau] * 4 + [4 * tau] * 4
    np.testing.assert_allclose(out.values, expected, atol=1e-8)
    evo = plateau_oracle_1d(PlateauProfile.from_grid_function(TWO_PLATEAUS), tau)
    np.testing.assert_allclose(evo.grid_values(TWO_PLATEAUS.grid, tau).values, expected, atol=1e-13)


@pytest.mark.parametrize("n,k,tau", [(1, 6, 0.05), (1, 2, 0.3), (2, 3, 0.02), (2, 2, 0.1)])
def test_prox_agrees_with_brute_force(n, k, tau, rng):
    g = TorusGrid(n, k)
    u = GridFunction(g, rng.standard_normal(g.shape))
    got = tv_prox(u, tau, 1e-12)
    np.testing.assert_allclose(got.values, brute_force_prox(u, tau), atol=2e-5)


@settings(max_examples=25)
@given(grid_functions(dims=(1, 2), ks=(2, 3, 4, 6)), st.floats(1e-3, 0.5))
def test_prox_keeps_mean_and_certifies_gap(u, tau):
    out, info = tv_prox(u, tau, 1e-9, return_info=True)
    assert out.mean() == pytest.approx(u.mean(), abs=1e-12 * (1 + abs(u.mean())) + 1e-12)
    assert info.gap <= 1e-9
    # the prox never increases the energy it regularizes
    assert tv_h(out) <= tv_h(u) + 1e-9


def test_prox_reports_non_convergence():
    u = GridFunction(TorusGrid(1, 16), np.sin(np.arange(16.0)))
    with pytest.raises(ProxNonConvergence) as err:
        tv_prox(u, 0.1, 1e-15, max_iter=20)
    assert err.value.gap > 1e-15
    assert err.value.iterations <= 20


@pytest.mark.parametrize("tau,eps", [(0.0, 1e-10), (0.1, 0.0), (-1.0, 1e-10)])
def test_prox_argument_checks(tau, eps):
    with pytest.raises(ValueError):
        tv_prox(SPIKE, tau, eps)


# --------------------------------------------------------------- oracle


def test_oracle_two_plateaus_meet_at_one_eighth():
    p0 = PlateauProfile((0.5, 0.5), (1.0, 0.0))
    evo = plateau_oracle_1d(p0, 0.3)
    for t in (0.0, 0.05, 0.1):
        assert evo.at(t).heights == pytest.approx((1 - 4 * t, 4 * t), abs=1e-14)
    assert evo.extinction_time() == pytest.approx(1 / 8, abs=1e-14)
    assert evo.at(0.2).heights == pytest.approx((0.5,), abs=1e-14)
    # TV integral in closed form: tv = 2 (1 - 8t) up to extinction
    assert evo.tv_integral(0.3) == pytest.approx(1 / 8, abs=1e-14)


def test_oracle_constant_profile_is_frozen():
    evo = plateau_oracle_1d(PlateauProfile((1.0,), (0.3,)), 1.0)
    assert evo.at(1.0).heights == (0.3,)
    assert evo.tv_integral(1.0) == 0.0


def test_oracle_staircase_middle_step_waits():
    p0 = PlateauProfile((0.25, 0.25, 0.5), (2.0, 1.0, 0.0))
    v = p0.velocities()
    assert v[1] == 0.0
    assert v[0] == pytest.approx(-8.0) and v[2] == pytest.approx(4.0)
    evo = plateau_oracle_1d(p0, 0.01)
    assert evo.at(0.01).heights[1] == 1.0


def test_oracle_preserves_mass_and_breakpoints():
    p0 = PlateauProfile((0.125, 0.375, 0.25, 0.25), (1.0, -0.5, 2.0, 0.0), offset=0.0625)
    evo = plateau_oracle_1d(p0, 2.0)
    for t in np.linspace(0, 2.0, 17):
        assert evo.at(t).mass() == pytest.approx(p0.mass(), abs=1e-13)
    assert evo.extinction_time() < 2.0


def test_plateau_profile_validation():
    with pytest.raises(ValueError):
        PlateauProfile((0.5, 0.4), (1.0, 0.0))
    with pytest.raises(ValueError):
        PlateauProfile((0.5, 0.5), (1.0, 1.0))
    with pytest.raises(ValueError):
        PlateauProfile((1.0, 0.0), (1.0, 0.0))


def test_profile_from_grid_function_roundtrip():
    g = TorusGrid(1, 8)
    u = GridFunction(g, [1.0, 1.0, 0.0, 0.0, 0.0, 2.0, 2.0, 1.0])
    p = PlateauProfile.from_grid_function(u)
    np.testing.assert_array_equal(p.grid_values(g).values, u.values)
    assert p.tv() == pytest.approx(tv_h(u))


# ------------------------------------------------------------------ flow


def test_step_count_rounding():
    assert step_count(1.0, 0.1) == 10
    assert step_count(1.0, 0.3) == 4
    assert step_count(1.0, 0.1, multiple=64) == 64
    assert step_count(0.1, 0.1 / 3) == 3


def test_constant_flow_is_constant():
    c = GridFunction.constant(TorusGrid(2, 3), -1.0)
    traj = tv_flow_mm(c, 0.1, 0.01, 1e-10)
    assert len(traj) == 11
    np.testing.assert_array_equal(traj.states, -1.0)


def test_two_plateau_flow_tracks_oracle():
    tau, eps, T = TWO_PLATEAUS.grid.h ** 2 / 4, 1e-10, 0.2
    traj = tv_flow_mm(TWO_PLATEAUS, T, tau, eps)
    assert traj.metadata["scheme"] == "minimizing-movement"
    assert len(traj) == step_count(T, tau) + 1
    err = oracle_error(traj)
    assert err.max() <= 10 * (tau + eps / tau) * (1 + T)
    # merged to the mean after t = 1/8
    np.testing.assert_allclose(traj.final.values, 0.5, atol=1e-8)
    assert mass_drift(traj) <= 1e-10
    assert tv_energy_monotone(traj).passed


def test_energy_identity_on_two_plateaus():
    traj = tv_flow_mm(TWO_PLATEAUS, 0.1, 1 / 256, 1e-10)
    rec = tv2_energy_check(traj)
    assert rec.passed
    assert rec.details["C"] > 1.0
    assert rec.details["integral_tv"] == pytest.approx(rec.details["half_norm_decrease"], abs=rec.bound)


def test_energy_identity_spike_to_extinction():
    # the spike flattens to its mean 1/4, so both sides tend to
    # (||u0||^2 - ||1/4||^2)/2 = (1/4 - 1/16)/2 = 3/32
    traj = tv_flow_mm(SPIKE, 0.5, 1e-3, 1e-12)
    rec = tv2_energy_check(traj)
    assert rec.details["half_norm_decrease"] == pytest.approx(3 / 32, abs=1e-9)
    assert rec.details["integral_tv"] == pytest.approx(3 / 32, abs=5e-3)
    assert rec.passed


def test_energy_identity_constant_run():
    traj = tv_flow_mm(GridFunction.constant(TorusGrid(1, 4), 2.0), 0.1, 0.01, 1e-10)
    rec = tv2_energy_check(traj)
    assert rec.details["integral_tv"] == 0.0 and rec.details["half_norm_decrease"] == 0.0


def test_contraction_and_evi(rng):
    g = TorusGrid(1, 16)
    u0 = GridFunction(g, rng.standard_normal(16))
    v0 = GridFunction(g, rng.standard_normal(16))
    a = tv_flow_mm(u0, 0.05, 1e-3, 1e-10)
    b = tv_flow_mm(v0, 0.05, 1e-3, 1e-10)
    rec = contraction_check(a, b)
    assert rec.passed
    d = distances_h(a, b)
    assert np.all(d <= d[0] + prox_drift_bound(a) + prox_drift_bound(b) + 1e-14)
    probes = [GridFunction(g, rng.standard_normal(16)) for _ in range(4)]
    res = evi_residual(a, tv_h, probes)
    # each implicit step satisfies the one-step inequality up to the prox gap
    assert res.max() <= 1e-10 / 1e-3 * 10


def test_two_dimensional_flow_conserves_mass(rng):
    g = TorusGrid(2, 6)
    u0 = GridFunction(g, rng.standard_normal(g.shape))
    traj = tv_flow_mm(u0, 0.02, 1e-3, 1e-10)
    assert mass_drift(traj) <= 1e-10
    assert tv_energy_monotone(traj).passed


def test_refinement_check_example():
    f = embed_pc(TWO_PLATEAUS)
    recs = tv1_refinement_check(f, [8, 16], 0.05, 1e-4, 1e-10)
    assert [r.k for r in recs] == [8, 16]
    assert recs[0].measured == 0.0
    assert all(r.passed for r in recs)
    assert recs[0].bound == pytest.approx(5 * (1e-4 + 1e-10 / 1e-4))


def test_refinement_check_constant_and_errors():
    f = embed_pc(GridFunction.constant(TorusGrid(1, 4), 1.0))
    recs = tv1_refinement_check(f, [4, 12], 0.01, 1e-3, 1e-10)
    assert all(r.measured == pytest.approx(0.0, abs=1e-14) for r in recs)
    with pytest.raises(ValueError):
        tv1_refinement_check(f, [6], 0.01, 1e-3, 1e-10)


def test_refinement_check_two_dimensional_block():
    g = TorusGrid(2, 4)
    vals = np.zeros(g.shape)
    vals[:2, :2] = 1.0
    recs = tv1_refinement_check(embed_pc(GridFunction(g, vals)), [8], 0.01, 1e-3, 1e-10)
    assert recs[0].passed


# ------------------------------------------------------------ trajectory


def test_trajectory_validation_and_io():
    g = TorusGrid(1, 3)
    with pytest.raises(ValueError):
        Trajectory(g, [0.1, 0.2], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        Trajectory(g, [0.0, 0.0], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        Trajectory(g, [0.0, 1.0], [[0.0, 0.0, 0.0], [math.inf, 0.0, 0.0]])
    traj = Trajectory(g, [0.0, 0.5], [[1.0, 2.0, 3.0], [2.0, 2.0, 2.0]], {"tau": 0.5})
    back = Trajectory.from_json(traj.to_json())
    np.testing.assert_array_equal(back.states, traj.states)
    assert back.metadata == {"tau": 0.5}
    assert traj.to_csv().splitlines()[0] == "t,u0,u1,u2"
    assert inner_h(traj.final, traj.final) == pytest.approx(4.0)
    assert [t for t, _ in traj] == [0.0, 0.5]
