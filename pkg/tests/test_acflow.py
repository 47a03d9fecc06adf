from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from torusflow import GridFunction, PotentialSpec, TorusGrid, dac_flow, mdac_flow, nodal_interpolate
from torusflow.acflow import (
    SAMPLE_COUNT,
    StepRejected,
    ac_contraction,
    ac_evi_residual,
    cac_convergence,
    continuum_reference,
    cp_checks,
    energy_monotone,
    fitted_order,
    laplacian_symbol,
    sac_check,
    scalar_ode_solution,
    tdf_check,
    vector_field_defect,
)
from torusflow.calculus import graph_laplacian
from torusflow.trajectory import distances_h

SPEC = PotentialSpec(1.0, 2.0)


def sin_profile(x):
    return np.sin(2 * np.pi * x)


def test_spec_validation():
    with pytest.raises(ValueError):
        PotentialSpec(0.0, 1.0)
    with pytest.raises(ValueError):
        PotentialSpec(1.0, 1.0)
    with pytest.raises(ValueError):
        PotentialSpec(1.0, 0.5, F=lambda x: x)
    with pytest.raises(ValueError):
        PotentialSpec(1.0, 0.5, F=lambda x: x + 1.0, dF=lambda x: np.ones_like(x))
    assert PotentialSpec.canonical(1.5) == PotentialSpec(1.5, 3.0)


def test_canonical_reaction_is_minus_the_well_derivative():
    x = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(SPEC.reaction(x), -(x**3 - x), atol=1e-14)
    assert np.all(SPEC.df(np.linspace(-3, 3, 101)) > 0)


def test_error_constants():
    # inputs of the sin run: |u0|_inf = 1, T = 1
    r = math.exp(2.0)
    n_const = 3 * r * r - 1 + 2
    assert SPEC.n_constant(1.0, 1.0) == pytest.approx(n_const, rel=1e-14)
    # the closed form is the maximum of F' over the working range
    s = np.linspace(-r, r, 20001)
    assert SPEC.n_constant(1.0, 1.0) == pytest.approx(SPEC.df(s).max(), rel=1e-12)
    c_n = (n_const**2 + 4) / 36
    assert SPEC.c_n(1.0, 1.0) == pytest.approx(c_n, rel=1e-14)
    assert SPEC.c_star(1.0, 1.0, 1.0) == pytest.approx(math.exp(4.0) * (1 / 6 + 3 * c_n / 2), rel=1e-14)
    with pytest.raises(ValueError):
        SPEC.c_star(1.0, 1.0, 0.0)


def test_user_reaction_warns_when_not_monotone():
    spec = PotentialSpec(1.0, 0.5, F=lambda x: x**3 - x, dF=lambda x: 3 * x**2 - 1)
    with pytest.warns(UserWarning):
        spec.n_constant(1.0, 0.1)
    ok = PotentialSpec(1.0, 0.5, F=lambda x: x**3 + x, dF=lambda x: 3 * x**2 + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert ok.n_constant(1.0, 0.0) == pytest.approx(4.0)


@pytest.mark.parametrize("flow", [dac_flow, mdac_flow])
@pytest.mark.parametrize("c", [1.0, -1.0, 0.0])
def test_wells_and_zero_are_stationary(flow, c):
    traj = flow(GridFunction.constant(TorusGrid(1, 16), c), SPEC, 0.5, 1e-2)
    np.testing.assert_allclose(traj.states, c, atol=1e-14)


def test_sample_layout():
    u0 = nodal_interpolate(sin_profile, TorusGrid(1, 8))
    traj = dac_flow(u0, SPEC, 0.1, 1e-3)
    assert len(traj) == SAMPLE_COUNT + 1
    assert traj.horizon == 0.1
    assert traj.metadata["steps"] % SAMPLE_COUNT == 0
    assert traj.metadata["tau"] == pytest.approx(0.1 / traj.metadata["steps"])
    full = dac_flow(u0, SPEC, 0.1, 1e-3, samples=None)
    assert len(full) == full.metadata["steps"] + 1
    np.testing.assert_allclose(full.states[:: traj.metadata["save_every"]], traj.states, atol=0)


def test_comparison_principle_on_sine_run():
    u0 = nodal_interpolate(sin_profile, TorusGrid(1, 64))
    traj = dac_flow(u0, SPEC, 1.0, 1e-4)
    growth, minp = cp_checks(traj, SPEC)
    assert growth.passed and minp.passed
    bound = np.exp(SPEC.lam * traj.times)
    assert np.all(np.abs(traj.states).max(axis=1) <= bound + 10 * traj.metadata["tau"])
    # the solution stays inside [-1, 1] for data inside [-1, 1]
    assert np.abs(traj.states).max() <= 1.0 + 1e-12
    assert energy_monotone(traj, SPEC).passed
    assert sac_check(traj, SPEC).passed


def test_constant_data_follows_scalar_ode():
    t = np.linspace(0, 2, 9)
    ref = solve_ivp(lambda s, c: -(c**3 - c), (0, 2), [0.3], t_eval=t, rtol=1e-12, atol=1e-14).y[0]
    np.testing.assert_allclose(scalar_ode_solution(0.3, 1.0, t), ref, atol=1e-10)
    np.testing.assert_allclose(scalar_ode_solution(-0.3, 1.0, t), -ref, atol=1e-10)
    assert np.all(scalar_ode_solution(0.0, 1.0, t) == 0.0)
    for tau in (1e-2, 1e-3):
        traj = mdac_flow(GridFunction.constant(TorusGrid(1, 8), 0.3), SPEC, 2.0, tau)
        err = np.abs(traj.states[:, 0] - scalar_ode_solution(0.3, 1.0, traj.times)).max()
        assert err <= 2 * traj.metadata["tau"]


def test_standard_and_gamma_flows_agree_on_constants():
    u0 = GridFunction.constant(TorusGrid(1, 8), 0.4)
    a = dac_flow(u0, SPEC, 1.0, 1e-3)
    b = mdac_flow(u0, SPEC, 1.0, 1e-3)
    assert distances_h(a, b).max() <= 2e-3


def test_step_rejection_on_misuse():
    spec = PotentialSpec(1.0, 0.0, F=lambda x: 50 * x**3, dF=lambda x: 150 * x**2)
    with pytest.raises(StepRejected):
        dac_flow(GridFunction.constant(TorusGrid(1, 4), 2.0), spec, 1.0, 1.0, samples=1)


def test_two_dimensional_data_rejected():
    with pytest.raises(ValueError):
        dac_flow(GridFunction.constant(TorusGrid(2, 4), 0.0), SPEC, 0.1, 1e-2)


def test_laplacian_symbol_matches_dense_spectrum():
    k = 12
    L = np.array([graph_laplacian(GridFunction(TorusGrid(1, k), np.eye(k)[i])).values for i in range(k)])
    np.testing.assert_allclose(np.sort(laplacian_symbol(k)), np.sort(np.linalg.eigvalsh(-L)), atol=1e-9)


def test_gamma_defect_constant_data_is_zero():
    traj = dac_flow(GridFunction.constant(TorusGrid(1, 8), 0.5), SPEC, 0.2, 1e-3)
    rec = sac_check(traj, SPEC)
    assert rec.measured == pytest.approx(0.0, abs=1e-28)
    assert rec.details["rhs"] == 0.0


@pytest.mark.parametrize("tau", [1e-3, 1e-4])
def test_gamma_defect_slack_scaling(tau):
    u0 = nodal_interpolate(sin_profile, TorusGrid(1, 32))
    traj = dac_flow(u0, SPEC, 0.5, tau)
    rec = sac_check(traj, SPEC)
    assert rec.measured - rec.details["rhs"] <= 10 * traj.metadata["tau"] * 1.5


def test_evi_and_contraction(rng):
    g = TorusGrid(1, 32)
    u0 = nodal_interpolate(sin_profile, g)
    short = dac_flow(u0, SPEC, 0.02, 1e-4, samples=None)
    probes = [GridFunction(g, rng.standard_normal(32)) for _ in range(4)]
    assert ac_evi_residual(short, SPEC, probes).passed
    with pytest.raises(ValueError):
        ac_evi_residual(dac_flow(u0, SPEC, 0.02, 1e-4), SPEC, probes)
    v0 = GridFunction(g, 0.5 * np.cos(2 * np.pi * g.axis_nodes()))
    assert ac_contraction(dac_flow(u0, SPEC, 0.5, 1e-4), dac_flow(v0, SPEC, 0.5, 1e-4), SPEC).passed


@pytest.mark.parametrize("metric", ["standard", "gamma"])
def test_scheme_slope_converges_linearly(metric):
    u = nodal_interpolate(sin_profile, TorusGrid(1, 32))
    d1 = vector_field_defect(u, SPEC, 1e-3, metric=metric)
    d2 = vector_field_defect(u, SPEC, 5e-4, metric=metric)
    assert d1 / d2 == pytest.approx(2.0, rel=0.05)


def test_metric_difference_small_study():
    recs = tdf_check(sin_profile, SPEC, 0.25, 1.0, [16, 32, 64])
    bounds, order = recs[:-1], recs[-1]
    assert all(r.passed for r in bounds)
    for r in bounds:
        assert {"N", "C_N", "C_star"} <= set(r.details)
    assert order.details["empirical_order"] >= 0.9
    assert order.passed


def test_continuum_convergence_small_study():
    profile = lambda x: 0.5 * np.sin(2 * np.pi * x)  # noqa: E731
    rows = cac_convergence(profile, 1.0, 0.1, [8, 16, 32], k_ref=256)
    errs = [r.sup_error for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert 0.8 <= fitted_order(rows) <= 2.2
    for r in rows:
        assert abs(r.sup_error - r.sup_error_pc) <= r.interchange_bound
    assert [r.mesh_hypothesis for r in rows] == sorted((r.mesh_hypothesis for r in rows), reverse=True)


def test_continuum_convergence_constant_data():
    rows = cac_convergence(lambda x: np.ones_like(x), 1.0, 0.1, [8, 16], k_ref=128)
    assert max(r.sup_error for r in rows) <= 1e-12


def test_continuum_convergence_argument_checks():
    with pytest.raises(ValueError):
        cac_convergence(sin_profile, 1.0, 0.1, [16, 8], k_ref=256)
    with pytest.raises(ValueError):
        cac_convergence(sin_profile, 1.0, 0.1, [8, 16], k_ref=64)


def test_reference_stays_in_unit_interval():
    ref = continuum_reference(lambda x: 0.5 * np.sin(2 * np.pi * x), 1.0, 0.5, 256, 1e-4)
    assert ref.final.sup_norm() < 1.0
