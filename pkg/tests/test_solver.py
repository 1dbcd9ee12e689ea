import math

import numpy as np
import pytest

from heleshaw.errors import CflViolationError, NumericsError, ValidationFailedError
from heleshaw.grid import Grid2D, ScalarField, VectorField, integrate, lp_norm
from heleshaw.model import Coefficients, InitialData, SimParams, make_initial_patch, taylor_green
from heleshaw.ops import divergence, project_divergence_free
from heleshaw.solver import (
    State,
    cfl_dt,
    run,
    step,
    step_density,
    step_oxygen,
    step_velocity_project,
)
from heleshaw.sweep import barenblatt_profile

TAU = 2.0 * math.pi


def _zero_state(grid):
    return State(0.0, ScalarField.zeros(grid), ScalarField.zeros(grid),
                 VectorField.zeros(grid), ScalarField.zeros(grid))


def _params(grid, m=6.0, chi_0=0.0, **kw):
    coeffs = kw.pop("coeffs", Coefficients(chi_0=chi_0))
    return SimParams(grid=grid, m=m, coeffs=coeffs, **kw)


# CFL --------------------------------------------------------------------------


def test_cfl_zero_state_parabolic_bound():
    g = Grid2D(20, 2.0)  # h = 0.1
    params = _params(g, m=3.0, dt_safety=0.4)
    dt = cfl_dt(_zero_state(g), params)
    assert dt == pytest.approx(0.4 * 0.01 / 4.0, rel=1e-14)  # 1e-3


def test_cfl_degenerate_diffusion_binds():
    g = Grid2D(20, 2.0)
    params = _params(g, m=16.0, dt_safety=0.4)
    state = _zero_state(g)
    state.n = ScalarField.full(g, 1.0)
    dt = cfl_dt(state, params)
    assert dt == pytest.approx(0.4 * 0.01 / 64.0, rel=1e-14)  # 6.25e-5


def test_cfl_linear_in_safety_factor():
    g = Grid2D(20, 2.0)
    state = _zero_state(g)
    state.n = ScalarField.full(g, 0.5)
    dt1 = cfl_dt(state, _params(g, m=5.0, dt_safety=0.3))
    dt2 = cfl_dt(state, _params(g, m=5.0, dt_safety=0.6))
    assert dt2 == pytest.approx(2.0 * dt1, rel=1e-14)


def test_cfl_advection_binds_for_fast_flow():
    g = Grid2D(20, 2.0)
    params = _params(g, m=3.0)
    state = _zero_state(g)
    state.u = VectorField(g, np.full((20, 20), 50.0), np.zeros((20, 20)))
    dt = cfl_dt(state, params)
    assert dt == pytest.approx(0.4 * g.h / 100.0, rel=1e-12)


def test_substeps_reject_oversized_dt():
    g = Grid2D(20, 2.0)
    params = _params(g, m=3.0)
    state = _zero_state(g)
    state.n = ScalarField.full(g, 0.5)
    big = 10.0 * cfl_dt(state, params)
    with pytest.raises(CflViolationError):
        step_density(state, params, big)
    with pytest.raises(CflViolationError):
        step_oxygen(state, params, big)
    with pytest.raises(CflViolationError):
        step_velocity_project(state, params, big)


# density step -------------------------------------------------------------------


def test_step_density_zero_fixed_point():
    g = Grid2D(16, 1.0)
    params = _params(g, m=4.0)
    state = _zero_state(g)
    out, clip = step_density(state, params, cfl_dt(state, params))
    assert np.all(out.values == 0.0) and clip == 0.0


def test_step_density_constant_fixed_point():
    g = Grid2D(32, TAU)
    params = _params(g, m=4.0, chi_0=2.0)
    state = _zero_state(g)
    state.n = ScalarField.full(g, 0.6)
    state.c = ScalarField.full(g, 0.4)
    state.u = taylor_green(g, 0.5)  # discretely solenoidal
    out, _ = step_density(state, params, cfl_dt(state, params))
    assert np.abs(out.values - 0.6).max() < 1e-12


def test_step_density_barenblatt_one_step_error():
    # exact self-similar profile advanced one explicit step; the L^1 defect
    # stays far below h + dt (measured constant ~3e-4, frozen bound 0.01)
    g = Grid2D(64, TAU)
    params = _params(g, m=2.0)
    t0 = 1.0
    state = _zero_state(g)
    state.t = t0
    state.n = barenblatt_profile(g, 2.0, 1.0, t0)
    dt = cfl_dt(state, params)
    out, clip = step_density(state, params, dt)
    exact = barenblatt_profile(g, 2.0, 1.0, t0 + dt)
    err = lp_norm(ScalarField(g, out.values - exact.values), 1)
    assert err <= 0.01 * (g.h + dt)
    assert clip == 0.0


def test_step_density_conserves_mass_and_positivity():
    g = Grid2D(32, TAU)
    params = _params(g, m=5.0, chi_0=3.0)
    rng = np.random.default_rng(17)
    state = _zero_state(g)
    state.n = ScalarField(g, rng.uniform(0.0, 0.9, (32, 32)))
    state.c = ScalarField(g, rng.uniform(0.0, 1.0, (32, 32)))
    state.u, _ = project_divergence_free(
        VectorField(g, rng.standard_normal((32, 32)), rng.standard_normal((32, 32)))
    )
    mass = integrate(state.n)
    total_clip = 0.0
    for _ in range(200):
        dt = cfl_dt(state, params)
        n_new, clip = step_density(state, params, dt)
        total_clip += clip
        state.n = n_new
        assert state.n.values.min() >= 0.0
    assert integrate(state.n) == pytest.approx(mass + total_clip, rel=1e-12)
    assert total_clip <= 1e-10 * mass


# oxygen step --------------------------------------------------------------------


def test_step_oxygen_zero_fixed_point():
    g = Grid2D(16, 1.0)
    params = _params(g, m=4.0)
    state = _zero_state(g)
    out, clamp = step_oxygen(state, params, cfl_dt(state, params))
    assert np.all(out.values == 0.0) and clamp == 0.0


def test_step_oxygen_uniform_ode_oracle():
    # uniform fields: spatial stencils vanish identically and the oxygen obeys
    # the scalar consumption law; reference is the same law at dt/100
    g = Grid2D(64, TAU)
    coeffs = Coefficients(chi_0=0.0, f="saturating", c_B=2.0)
    params = SimParams(grid=g, m=8.0, coeffs=coeffs, t_end=1.0)
    state = _zero_state(g)
    state.n = ScalarField.full(g, 1.0)
    state.c = ScalarField.full(g, 1.0)
    dt = cfl_dt(state, params)
    for _ in range(100):
        c_new, _ = step_oxygen(state, params, dt)
        state.c = c_new
    c_ref = 1.0
    fine = dt / 100.0
    for _ in range(100 * 100):
        c_ref += fine * (-c_ref / (1.0 + c_ref))
    spread = state.c.values.max() - state.c.values.min()
    assert spread == 0.0
    assert float(state.c.values[0, 0]) == pytest.approx(c_ref, rel=1e-6)


def test_step_oxygen_single_mode_decay():
    g = Grid2D(32, TAU)
    params = _params(g, m=4.0, coeffs=Coefficients(c_B=1.0))
    x, _ = g.cell_centers()
    amp = 0.2
    state = _zero_state(g)
    state.c = ScalarField(g, 0.5 + amp * np.sin(2.0 * np.pi * x / g.length))
    dt = cfl_dt(state, params)
    out, clamp = step_oxygen(state, params, dt)
    lam = (4.0 / g.h**2) * math.sin(math.pi * g.h / g.length) ** 2
    expected = 0.5 + amp * (1.0 - dt * lam) * np.sin(2.0 * np.pi * x / g.length)
    assert np.abs(out.values - expected).max() < 1e-13
    assert clamp == 0.0


def test_step_oxygen_respects_bounds():
    g = Grid2D(32, TAU)
    params = _params(g, m=5.0, coeffs=Coefficients(c_B=1.0))
    rng = np.random.default_rng(23)
    state = _zero_state(g)
    state.n = ScalarField(g, rng.uniform(0.0, 1.0, (32, 32)))
    state.c = ScalarField(g, rng.uniform(0.0, 1.0, (32, 32)))
    state.u, _ = project_divergence_free(
        VectorField(g, rng.standard_normal((32, 32)), rng.standard_normal((32, 32)))
    )
    for _ in range(100):
        c_new, _ = step_oxygen(state, params, cfl_dt(state, params))
        state.c = c_new
        assert state.c.values.min() >= 0.0
        assert state.c.values.max() <= 1.0


# velocity step --------------------------------------------------------------------


def test_velocity_zero_fixed_point():
    g = Grid2D(16, 1.0)
    params = _params(g, m=4.0)
    state = _zero_state(g)
    u_new, pi = step_velocity_project(state, params, cfl_dt(state, params))
    assert np.abs(u_new.x_values).max() == 0.0
    assert np.abs(pi.values).max() == 0.0


def test_velocity_projection_residual_any_state():
    g = Grid2D(32, TAU)
    params = _params(g, m=4.0)
    rng = np.random.default_rng(31)
    state = _zero_state(g)
    state.n = ScalarField(g, rng.uniform(0.0, 1.0, (32, 32)))
    state.u = VectorField(g, rng.standard_normal((32, 32)), rng.standard_normal((32, 32)))
    u_new, _ = step_velocity_project(state, params, cfl_dt(state, params))
    assert lp_norm(divergence(u_new), np.inf) < 1e-10


def test_velocity_vortex_follows_discrete_decay_laws():
    # the centered discretization keeps the vortex an exact eigenmode: the
    # nonlinear term is a discrete gradient and the projection removes it, so
    # kinetic energy follows the per-step product law to roundoff and the
    # exponential mode law to O(dt)
    g = Grid2D(64, TAU)
    params = _params(g, m=6.0, t_end=0.1)
    u0, _ = project_divergence_free(taylor_green(g, 1.0))
    state = _zero_state(g)
    state.u = u0
    ke0 = 0.5 * integrate(ScalarField(g, u0.x_values**2 + u0.y_values**2))
    lam = 2.0 * (4.0 / g.h**2) * math.sin(math.pi * g.h / g.length) ** 2
    product = 1.0
    while params.t_end - state.t > 1e-12:
        state, rep = step(state, params, max_dt=params.t_end - state.t)
        product *= (1.0 - lam * rep.dt_used) ** 2
    ke = 0.5 * integrate(ScalarField(g, state.u.x_values**2 + state.u.y_values**2))
    assert ke == pytest.approx(ke0 * product, rel=1e-12)
    assert ke == pytest.approx(ke0 * math.exp(-2.0 * lam * state.t), rel=1e-3)


# full step and run -----------------------------------------------------------------


def test_step_zero_state_advances_time_only():
    g = Grid2D(16, 1.0)
    params = _params(g, m=4.0)
    new, rep = step(_zero_state(g), params)
    assert new.t == rep.dt_used > 0.0
    assert np.all(new.n.values == 0.0)
    assert np.all(new.c.values == 0.0)
    assert rep.cfl_binding_term in ("oxygen_diffusion", "viscosity", "pme_diffusion", "advection")


def test_step_mass_invariant_over_many_random_steps():
    g = Grid2D(24, TAU)
    coeffs = Coefficients(chi="saturating", chi_0=2.0, f="linear-capped", c_B=1.0)
    params = SimParams(grid=g, m=5.0, coeffs=coeffs, t_end=1.0)
    rng = np.random.default_rng(41)
    data_u, _ = project_divergence_free(
        VectorField(g, rng.standard_normal((24, 24)), rng.standard_normal((24, 24)))
    )
    state = State(
        0.0,
        ScalarField(g, rng.uniform(0.0, 0.9, (24, 24))),
        ScalarField(g, rng.uniform(0.0, 1.0, (24, 24))),
        data_u,
        ScalarField.zeros(g),
    )
    from heleshaw.diagnostics import Cumulatives

    cums = Cumulatives()
    mass0 = integrate(state.n)
    for _ in range(1000):
        state, _rep = step(state, params, cums=cums)
    assert integrate(state.n) - cums.clip_mass == pytest.approx(mass0, rel=1e-12)
    assert cums.clip_mass <= 1e-10 * mass0


def test_full_coupled_smoke_invariants():
    # patch + vortex + uniform oxygen, 500 steps on 64^2: all state bounds hold
    g = Grid2D(64, TAU)
    coeffs = Coefficients(chi_0=8.0, c_B=1.0)
    params = SimParams(grid=g, m=6.0, coeffs=coeffs, t_end=10.0, init_bound=25.0)
    data = make_initial_patch(
        g, (math.pi, math.pi), 1.0, 0.8, 0.5, 0.15, params,
        c_profile="uniform", u0_mode="taylor-green", u0_amp=0.5,
    )
    state = State.from_initial(data)
    mass0 = integrate(state.n)
    for _ in range(500):
        state, rep = step(state, params)
        assert state.n.values.min() >= 0.0
        assert state.c.values.min() >= -1e-12
        assert state.c.values.max() <= coeffs.c_B + 1e-12
        assert rep.projection_residual <= 1e-9
    assert integrate(state.n) == pytest.approx(mass0, rel=1e-11)


def test_run_zero_horizon_returns_initial_state():
    g = Grid2D(32, TAU)
    params = _params(g, m=5.0, t_end=0.0)
    data = make_initial_patch(g, (math.pi, math.pi), 0.8, 0.5, 0.3, 0.1, params)
    records = []
    final = run(params, data, sinks=(records.append,))
    assert final.t == 0.0
    assert len(records) == 1
    assert np.array_equal(final.n.values, data.n0.values)


def test_run_zero_data_stays_zero():
    g = Grid2D(32, TAU)
    params = _params(g, m=5.0, t_end=0.05)
    data = InitialData(ScalarField.zeros(g), ScalarField.zeros(g), VectorField.zeros(g))
    final = run(params, data)
    assert np.all(final.n.values == 0.0)
    assert np.all(final.c.values == 0.0)
    assert float(np.abs(final.u.x_values).max()) == 0.0


def test_run_is_deterministic():
    g = Grid2D(32, TAU)
    params = _params(g, m=5.0, chi_0=4.0, t_end=0.02, snapshot_every=5)
    data = make_initial_patch(g, (math.pi, math.pi), 0.8, 0.7, 0.4, 0.1, params,
                              u0_mode="taylor-green", u0_amp=0.4)
    runs = []
    for _ in range(2):
        records = []
        run(params, data, sinks=(records.append,))
        runs.append(records)
    assert len(runs[0]) == len(runs[1])
    for a, b in zip(*runs):
        assert a == b  # dataclass equality: bitwise-identical floats


def test_run_validates_initial_data():
    g = Grid2D(32, TAU)
    # budget so small the patch mass check fails, though the fields are physical
    params = _params(g, m=5.0, t_end=0.001, init_bound=1e-6)
    ok_params = _params(g, m=5.0, t_end=0.001)
    data = make_initial_patch(g, (math.pi, math.pi), 0.8, 0.5, 0.3, 0.1, ok_params)
    with pytest.raises(ValidationFailedError):
        run(params, data)
    # override flag skips the check
    final = run(params, data, validate=False)
    assert final.t == pytest.approx(params.t_end)


def test_run_aborts_on_nonfinite_fields():
    # n^(m-1) stays finite (the step bound is positive) but n^m overflows,
    # so the first step produces non-finite fields and the run must abort
    g = Grid2D(16, 1.0)
    params = _params(g, m=5.0, t_end=1.0)
    n0 = ScalarField.full(g, 1e65)
    n0.values[0, 0] = 2e65
    data = InitialData(n0, ScalarField.zeros(g), VectorField.zeros(g))
    with np.errstate(all="ignore"):
        with pytest.raises(NumericsError):
            run(params, data, validate=False)


def test_run_requires_m_at_least_three():
    g = Grid2D(16, 1.0)
    params = _params(g, m=2.0, t_end=0.01)
    data = InitialData(ScalarField.zeros(g), ScalarField.zeros(g), VectorField.zeros(g))
    with pytest.raises(ValueError):
        run(params, data)
