"""Fast operator/invariant checks on small grids, shared by the CLI selftest.

Each check returns (name, ok, detail).  The suite is a distilled version of
the unit tests: discrete identities with exact expected values, so a failing
check points at a broken operator rather than at a drifted tolerance.
"""

from __future__ import annotations

import math

import numpy as np

from .config import Config, parse_config, serialize_config
from .diagnostics import compute_pressure, overshoot_l2
from .grid import Grid2D, ScalarField, VectorField, integrate, lp_norm
from .model import Coefficients, SimParams, make_initial_patch, taylor_green
from .ops import (
    advect_conservative,
    divergence,
    gradient,
    laplacian,
    mollify,
    poisson_solve,
    project_divergence_free,
)
from .solver import State, cfl_dt, step


def _rand_field(grid, rng):
    return ScalarField(grid, rng.standard_normal((grid.n_cells, grid.n_cells)))


def run_selfchecks() -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(7)
    grid = Grid2D(24, 2.0 * math.pi)
    f = _rand_field(grid, rng)
    g = _rand_field(grid, rng)
    u = VectorField(grid, rng.standard_normal(f.values.shape), rng.standard_normal(f.values.shape))
    checks = []

    def add(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    val = integrate(ScalarField.full(grid, 1.0))
    add("integrate(1) = area", abs(val - grid.length**2) < 1e-12, f"value {val:.3e}")

    lap = laplacian(f)
    sym = abs(
        integrate(ScalarField(grid, f.values * laplacian(g).values))
        - integrate(ScalarField(grid, g.values * lap.values))
    )
    add("laplacian self-adjoint", sym < 1e-12, f"asymmetry {sym:.3e}")

    neg = integrate(ScalarField(grid, f.values * lap.values))
    add("laplacian negative semidefinite", neg <= 1e-12, f"quadratic form {neg:.3e}")

    tele = abs(integrate(lap))
    add("laplacian telescopes", tele < 1e-12, f"sum {tele:.3e}")

    adv = advect_conservative(f, u)
    tele_adv = abs(integrate(adv))
    add("upwind flux telescopes", tele_adv < 1e-12, f"sum {tele_adv:.3e}")

    zero_mean = ScalarField(grid, f.values - f.values.mean())
    psi = poisson_solve(ScalarField(grid, -laplacian(zero_mean).values))
    rt = lp_norm(ScalarField(grid, psi.values - zero_mean.values), np.inf)
    add("poisson round trip", rt < 1e-9, f"max error {rt:.3e}")

    spike = ScalarField.zeros(grid)
    spike.values[5, 7] = 1.0
    mol = mollify(spike, 2.0 * grid.h)
    mass_err = abs(integrate(mol) - integrate(spike))
    add("mollifier preserves mass", mass_err < 1e-13, f"drift {mass_err:.3e}")
    add("mollifier spreads the peak", mol.values.max() < 1.0 and mol.values.min() >= 0.0)

    w, _pot = project_divergence_free(u)
    div_res = np.abs(divergence(w).values).max()
    add("projection kills divergence", div_res < 1e-10, f"max div {div_res:.3e}")

    gtg = divergence(taylor_green(grid))
    add("vortex field solenoidal", np.abs(gtg.values).max() < 1e-12)

    p = compute_pressure(ScalarField.full(grid, 1.0), 3.0)
    add("pressure law at n=1, m=3", abs(p.values[0, 0] - 1.5) < 1e-15)
    add("overshoot of n<=1 vanishes", overshoot_l2(ScalarField.full(grid, 0.9)) == 0.0)

    coeffs = Coefficients(chi="constant", chi_0=1.0, f="saturating", c_B=1.0)
    params = SimParams(grid=grid, m=4.0, coeffs=coeffs, t_end=0.05, init_bound=20.0)
    data = make_initial_patch(
        grid, (math.pi, math.pi), 1.0, 0.7, 0.5, 0.15, params, u0_mode="taylor-green", u0_amp=0.3
    )
    state = State.from_initial(data)
    mass0 = integrate(state.n)
    for _ in range(25):
        state, rep = step(state, params)
    drift = abs(integrate(state.n) - mass0) / mass0
    add("coupled mass conservation (25 steps)", drift < 1e-12, f"relative drift {drift:.3e}")
    add(
        "oxygen bounds hold",
        state.c.values.min() >= -1e-12 and state.c.values.max() <= coeffs.c_B + 1e-12,
    )
    add("velocity stays solenoidal", rep.projection_residual < 1e-9,
        f"max div {rep.projection_residual:.3e}")
    add("cfl positive", cfl_dt(state, params) > 0.0)

    cfg_text = serialize_config(Config())
    add("config round trip", parse_config(cfg_text) == Config())

    return checks
