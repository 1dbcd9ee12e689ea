import math

import numpy as np
import pytest

from heleshaw.errors import PatchTooLargeError, ValidationFailedError
from heleshaw.grid import Grid2D, ScalarField, VectorField, integrate, lp_norm
from heleshaw.model import (
    Coefficients,
    InitialData,
    SimParams,
    eval_coefficients,
    make_initial_patch,
    taylor_green,
    validate_assumptions,
)
from heleshaw.ops import divergence

TAU = 2.0 * math.pi


def _params(grid=None, m=6.0, **kw):
    grid = grid or Grid2D(32, TAU)
    coeffs = kw.pop("coeffs", Coefficients())
    return SimParams(grid=grid, m=m, coeffs=coeffs, **kw)


# coefficient options ---------------------------------------------------------


@pytest.mark.parametrize("f_name", ["saturating", "linear-capped"])
def test_f_options_nonnegative_and_lipschitz(f_name):
    coeffs = Coefficients(f=f_name, c_B=2.0)
    c = np.linspace(0.0, coeffs.c_B, 1001)
    vals = coeffs.f_values(c)
    assert (vals >= 0.0).all()
    assert vals[0] == 0.0  # f(0) = 0
    lip = coeffs.f_lipschitz()
    diffs = np.abs(np.diff(vals)) / np.diff(c)
    assert diffs.max() <= lip * (1.0 + 1e-12)


@pytest.mark.parametrize("chi_name", ["constant", "saturating"])
def test_chi_options_bounded_and_lipschitz(chi_name):
    coeffs = Coefficients(chi=chi_name, chi_0=3.0, c_B=1.5)
    c = np.linspace(0.0, coeffs.c_B, 1001)
    vals = coeffs.chi_values(c)
    assert np.abs(vals).max() <= coeffs.chi_sup() * (1.0 + 1e-12)
    diffs = np.abs(np.diff(vals)) / np.diff(c)
    assert diffs.max() <= coeffs.chi_lipschitz() * (1.0 + 1e-12) + 1e-15


def test_potential_gradient_bounded():
    g = Grid2D(32, TAU)
    coeffs = Coefficients(phi="bounded-gravity", phi_amp=1.5)
    gx, gy = coeffs.grad_phi(g)
    assert np.abs(gx).max() == 0.0
    assert np.abs(gy).max() <= coeffs.grad_phi_sup(g.length) * (1.0 + 1e-12)


def test_unknown_options_rejected():
    with pytest.raises(ValueError):
        Coefficients(chi="mystery")
    with pytest.raises(ValueError):
        Coefficients(f="mystery")
    with pytest.raises(ValueError):
        Coefficients(phi="mystery")
    with pytest.raises(ValueError):
        Coefficients(c_B=0.0)


def test_eval_coefficients_examples():
    g = Grid2D(16, 1.0)
    chi_f, f_f = eval_coefficients(Coefficients(chi="constant", chi_0=1.0), ScalarField.full(g, 0.3))
    assert np.all(chi_f.values == 1.0)
    _, f_half = eval_coefficients(Coefficients(f="saturating"), ScalarField.full(g, 1.0))
    assert np.abs(f_half.values - 0.5).max() < 1e-15
    _, f_zero = eval_coefficients(Coefficients(f="saturating"), ScalarField.zeros(g))
    assert np.all(f_zero.values == 0.0)


def test_eval_coefficients_clamps_with_warning():
    g = Grid2D(16, 1.0)
    with pytest.warns(UserWarning):
        _, f_f = eval_coefficients(Coefficients(c_B=1.0), ScalarField.full(g, 2.0))
    assert np.abs(f_f.values - 0.5).max() < 1e-15  # evaluated at the clamp c = 1


# parameter record -------------------------------------------------------------


def test_simparams_ranges():
    g = Grid2D(16, 1.0)
    with pytest.raises(ValueError):
        SimParams(grid=g, m=1.5)
    with pytest.raises(ValueError):
        SimParams(grid=g, m=4.0, dt_safety=0.0)
    with pytest.raises(ValueError):
        SimParams(grid=g, m=4.0, dt_safety=1.5)
    with pytest.raises(ValueError):
        SimParams(grid=g, m=4.0, t_end=-1.0)
    with pytest.raises(ValueError):
        SimParams(grid=g, m=4.0, snapshot_every=0)
    p = SimParams(grid=g, m=4.0).with_m(9.0)
    assert p.m == 9.0


# initial data -----------------------------------------------------------------


def test_zero_amplitude_patch_passes_validation():
    params = _params()
    data = make_initial_patch(params.grid, (math.pi, math.pi), 1.0, 0.0, 0.0, 0.1, params)
    assert np.all(data.n0.values == 0.0)
    assert validate_assumptions(data, params).passed


def test_patch_mass_approximates_disc_area():
    g = Grid2D(128, TAU)
    params = _params(grid=g, init_bound=20.0)
    r = 1.0
    data = make_initial_patch(g, (math.pi, math.pi), r, 1.0, 0.0, 0.0, params)
    area = math.pi * r**2
    assert abs(integrate(data.n0) - area) <= 2.0 * g.h * (2.0 * math.pi * r)


def test_patch_mass_invariant_under_mollify_width():
    g = Grid2D(64, TAU)
    params = _params(grid=g)
    masses = []
    for w in (0.0, 0.1, 0.2):
        data = make_initial_patch(g, (math.pi, math.pi), 0.8, 0.7, 0.3, w, params)
        masses.append(integrate(data.n0))
    assert max(masses) - min(masses) < 1e-13


def test_overshooting_oxygen_amplitude_fails_validation():
    params = _params()
    c_B = params.coeffs.c_B
    with pytest.raises(ValidationFailedError) as err:
        make_initial_patch(params.grid, (math.pi, math.pi), 0.8, 0.5, 2.0 * c_B, 0.1, params)
    assert any("c0" in item.name for item in err.value.failures)


def test_patch_too_large_rejected():
    params = _params()
    with pytest.raises(PatchTooLargeError):
        make_initial_patch(params.grid, (math.pi, math.pi), 2.9, 0.5, 0.3, 0.1, params)


def test_uniform_oxygen_profile():
    params = _params(init_bound=25.0)
    data = make_initial_patch(
        params.grid, (math.pi, math.pi), 0.8, 0.5, 0.5, 0.1, params, c_profile="uniform"
    )
    assert np.all(data.c0.values == 0.5)


def test_taylor_green_initial_velocity_is_solenoidal():
    params = _params()
    data = make_initial_patch(
        params.grid, (math.pi, math.pi), 0.8, 0.5, 0.3, 0.1, params,
        u0_mode="taylor-green", u0_amp=0.7,
    )
    assert lp_norm(divergence(data.u0), np.inf) < 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_randomized_admissible_patches_validate(seed):
    rng = np.random.default_rng(200 + seed)
    g = Grid2D(48, TAU)
    params = _params(grid=g)
    L = g.length
    radius = rng.uniform(0.3, 0.9)
    width = rng.uniform(0.0, 0.15)
    reach = radius + 3.0 * width + L / 8.0
    cx = rng.uniform(reach, L - reach)
    cy = rng.uniform(reach, L - reach)
    data = make_initial_patch(g, (cx, cy), radius, rng.uniform(0.1, 1.0),
                              rng.uniform(0.0, params.coeffs.c_B), width, params)
    assert validate_assumptions(data, params).passed


def test_validation_all_zero_passes():
    params = _params()
    g = params.grid
    data = InitialData(ScalarField.zeros(g), ScalarField.zeros(g), VectorField.zeros(g))
    report = validate_assumptions(data, params)
    assert report.passed
    assert all(item.value == 0.0 for item in report.items if "min_" in item.name)


def test_validation_flags_negative_density():
    params = _params()
    g = params.grid
    n0 = ScalarField.zeros(g)
    n0.values[3, 3] = -0.1
    data = InitialData(n0, ScalarField.zeros(g), VectorField.zeros(g))
    report = validate_assumptions(data, params)
    assert not report.passed
    assert any("min_n0" in item.name for item in report.failures())


@pytest.mark.parametrize("m", [5.0, 20.0, 80.0])
def test_high_power_norms_dominated_by_mass_for_unit_amplitude(m):
    # with n0 <= 1 pointwise, int(n0^(m+1)) <= int over the patch region for every m
    g = Grid2D(64, TAU)
    params = _params(grid=g, m=m, init_bound=30.0)
    data = make_initial_patch(g, (math.pi, math.pi), 1.0, 1.0, 0.0, 0.1, params)
    n0 = data.n0.values
    direct = g.h**2 * float(np.sum(n0 ** (m + 1.0)))
    region = g.h**2 * float(np.sum(n0 > 0.0))
    assert direct <= region + 1e-13
    assert direct <= integrate(data.n0) + 1e-13


def test_validation_reports_boundary_ring_mass():
    params = _params()
    data = make_initial_patch(params.grid, (math.pi, math.pi), 0.8, 0.8, 0.3, 0.1, params)
    report = validate_assumptions(data, params)
    ring = [item for item in report.items if "boundary_ring" in item.name]
    assert len(ring) == 1 and ring[0].value >= 0.0
