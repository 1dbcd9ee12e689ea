"""Explicit time integration of the coupled density/oxygen/velocity system.

One step advances, with frozen begin-of-step fields on every right-hand
side (Lie splitting):

    density   n <- n + dt [ lap(n^m) + eps lap(n) - div_up(u n) - div_up(w n) ]
              with the aggregation velocity w = chi(c) grad(mollify(c)),
    oxygen    c <- c + dt [ lap(c) - div_up(u c) - n f(c) ],  clamped to [0, c_B]
    velocity  u* = u + dt [ lap(u) - (u . grad) u - n grad(phi) ],
              then projected onto the centered-divergence-free space with the
              multiplier recovered as the fluid pressure.

Transport uses monotone upwind fluxes (density and oxygen) so the positivity
and oxygen bounds survive up to roundoff under the CFL step bound below;
velocity advection is centered.  Negative density roundoff is clipped to
zero and the clipped mass is ledgered, never silently discarded.

The CFL bound is

    dt = dt_safety * min( h^2 / (4 (m max(n)^(m-1) + eps)),   # degenerate diffusion
                          h^2 / 4,                            # oxygen diffusion
                          h^2 / 4,                            # viscosity
                          h / (2 max|u| + 2 max|w| + tiny) )  # transport

with the degenerate-diffusion term usually binding once the density
approaches its stiff ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics
from .errors import CflViolationError, NumericsError, ValidationFailedError
from .grid import ScalarField, VectorField
from .model import InitialData, SimParams, validate_assumptions
from .ops import _dx, _dy, _lap, _upwind_div, divergence, mollify, project_divergence_free

_TINY_SPEED = 1e-30
_CFL_SLACK = 1.0 + 1e-9  # tolerance for "dt <= bound" checks against fp noise

CFL_TERMS = ("pme_diffusion", "oxygen_diffusion", "viscosity", "advection")


@dataclass
class State:
    """Fields at one instant: time, density, oxygen, velocity, last projection pressure."""

    t: float
    n: ScalarField
    c: ScalarField
    u: VectorField
    pi: ScalarField

    @classmethod
    def from_initial(cls, data: InitialData) -> "State":
        grid = data.n0.grid
        return cls(0.0, data.n0.copy(), data.c0.copy(), data.u0.copy(), ScalarField.zeros(grid))

    def is_finite(self) -> bool:
        return self.n.is_finite() and self.c.is_finite() and self.u.is_finite()


@dataclass
class StepReport:
    dt_used: float
    cfl_binding_term: str
    projection_residual: float


def _aggregation_velocity(state: State, params: SimParams) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centered aggregation velocity chi(c) * grad(mollify(c))."""
    h = state.c.grid.h
    cs = mollify(state.c, params.eps_mollify).values
    chi = params.coeffs.chi_values(np.clip(state.c.values, 0.0, params.coeffs.c_B))
    return chi * _dx(cs, h), chi * _dy(cs, h)


def _cfl_terms(state: State, params: SimParams) -> tuple[float, str]:
    h = state.n.grid.h
    n_max = max(float(state.n.values.max()), 0.0)
    # np scalar power: overflow saturates to inf instead of raising
    diff_coeff = params.m * float(np.float64(n_max) ** (params.m - 1.0)) + params.eps_visc
    bound_pme = h * h / (4.0 * diff_coeff) if diff_coeff > 0 else math.inf
    bound_parab = h * h / 4.0
    wx, wy = _aggregation_velocity(state, params)
    speed_u = float(state.u.magnitude().max())
    speed_w = float(np.hypot(wx, wy).max())
    bound_adv = h / (2.0 * speed_u + 2.0 * speed_w + _TINY_SPEED)
    bounds = (bound_pme, bound_parab, bound_parab, bound_adv)
    idx = int(np.argmin(bounds))
    return params.dt_safety * bounds[idx], CFL_TERMS[idx]


def cfl_dt(state: State, params: SimParams) -> float:
    """Stable explicit step size for the current state."""
    return _cfl_terms(state, params)[0]


def _check_dt(state: State, params: SimParams, dt: float) -> None:
    bound = cfl_dt(state, params)
    if dt > bound * _CFL_SLACK:
        raise CflViolationError(f"dt = {dt:.3e} exceeds the stability bound {bound:.3e}")


def step_density(state: State, params: SimParams, dt: float) -> tuple[ScalarField, float]:
    """Advance the density; returns (new field, clipped negative mass).

    Degenerate diffusion is differenced as the 5-point Laplacian of the
    pointwise power n^m; both transport terms are conservative upwind
    fluxes, so mass changes only through the roundoff-level clipping that
    is returned for the ledger.
    """
    _check_dt(state, params, dt)
    grid = state.n.grid
    h = grid.h
    n = state.n.values
    rhs = _lap(n**params.m, h)
    if params.eps_visc > 0.0:
        rhs = rhs + params.eps_visc * _lap(n, h)
    rhs = rhs - _upwind_div(n, state.u.x_values, state.u.y_values, h)
    wx, wy = _aggregation_velocity(state, params)
    rhs = rhs - _upwind_div(n, wx, wy, h)
    n_new = n + dt * rhs
    negative = n_new < 0.0
    clip_mass = -h * h * float(n_new[negative].sum()) if negative.any() else 0.0
    if clip_mass:
        n_new = np.maximum(n_new, 0.0)
    return ScalarField(grid, n_new), clip_mass


def step_oxygen(state: State, params: SimParams, dt: float) -> tuple[ScalarField, float]:
    """Advance the oxygen; returns (new field, clamped L^1 magnitude).

    Consumption uses the begin-of-step density; the result is clamped to
    [0, c_B], which under the CFL bound only trims roundoff.
    """
    _check_dt(state, params, dt)
    grid = state.c.grid
    h = grid.h
    c = state.c.values
    f_vals = params.coeffs.f_values(np.clip(c, 0.0, params.coeffs.c_B))
    rhs = _lap(c, h) - _upwind_div(c, state.u.x_values, state.u.y_values, h) - state.n.values * f_vals
    c_new = c + dt * rhs
    clamped = np.clip(c_new, 0.0, params.coeffs.c_B)
    clamp_mag = h * h * float(np.abs(c_new - clamped).sum())
    return ScalarField(grid, clamped), clamp_mag


def step_velocity_project(state: State, params: SimParams, dt: float) -> tuple[VectorField, ScalarField]:
    """Advance the velocity and re-impose incompressibility.

    Predictor: explicit viscosity, centered self-advection and the
    buoyancy force -n grad(phi).  The projection removes the centered
    gradient part; the potential divided by dt is the fluid pressure
    multiplier.
    """
    _check_dt(state, params, dt)
    grid = state.u.grid
    h = grid.h
    ux, uy = state.u.x_values, state.u.y_values
    adv_x = ux * _dx(ux, h) + uy * _dy(ux, h)
    adv_y = ux * _dx(uy, h) + uy * _dy(uy, h)
    gpx, gpy = params.coeffs.grad_phi(grid)
    star = VectorField(
        grid,
        ux + dt * (_lap(ux, h) - adv_x - state.n.values * gpx),
        uy + dt * (_lap(uy, h) - adv_y - state.n.values * gpy),
    )
    u_new, potential = project_divergence_free(star)
    pi = ScalarField(grid, potential.values / dt)
    return u_new, pi


def step(
    state: State,
    params: SimParams,
    max_dt: float = math.inf,
    cums: "diagnostics.Cumulatives | None" = None,
) -> tuple[State, StepReport]:
    """One full splitting step with begin-of-step coefficients.

    ``max_dt`` caps the CFL step (used to land exactly on the end time).
    When ``cums`` is given, the left-endpoint space-time accumulators and
    the clip/clamp ledgers are updated in place.
    """
    dt_bound, binding = _cfl_terms(state, params)
    dt = min(dt_bound, max_dt)
    if dt <= 0.0 or not math.isfinite(dt):
        raise CflViolationError(f"non-positive or non-finite step size {dt}")
    n_new, clip_mass = step_density(state, params, dt)
    c_new, clamp_mag = step_oxygen(state, params, dt)
    u_new, pi_new = step_velocity_project(state, params, dt)
    if cums is not None:
        cums.accumulate(state, params, dt)
        cums.clip_mass += clip_mass
        cums.clamp_c += clamp_mag
    residual = float(np.abs(divergence(u_new).values).max())
    new_state = State(state.t + dt, n_new, c_new, u_new, pi_new)
    return new_state, StepReport(dt, binding, residual)


def run(
    params: SimParams,
    data: InitialData,
    sinks=(),
    observers=(),
    validate: bool = True,
) -> State:
    """March the coupled system to t_end, emitting diagnostic records.

    ``sinks`` receive one DiagRecord at t = 0, every ``snapshot_every``-th
    step and at the final time.  ``observers`` are called after every step
    as ``observer(prev_state, new_state, report, cums)`` and exist for
    in-process instrumentation (snapshot capture, budget tracking).
    Aborts with the offending step index if any field goes non-finite.
    Deterministic for fixed parameters: the loop is single-threaded and
    allocation order is fixed.
    """
    if params.m < 3:
        raise ValueError("coupled runs require m >= 3")
    if validate:
        report = validate_assumptions(data, params)
        if not report.passed:
            raise ValidationFailedError(report.failures())
    state = State.from_initial(data)
    cums = diagnostics.Cumulatives()

    def emit():
        rec = diagnostics.record(state, params, cums)
        for sink in sinks:
            sink(rec)

    emit()
    t_end = params.t_end
    eps_t = 1e-12 * max(t_end, 1.0)
    steps = 0
    emitted_at = 0
    while t_end - state.t > eps_t:
        prev = state
        state, rep = step(state, params, max_dt=t_end - state.t, cums=cums)
        steps += 1
        if not state.is_finite():
            raise NumericsError(f"non-finite fields after step {steps} at t = {state.t:.6e}")
        for obs in observers:
            obs(prev, state, rep, cums)
        if steps % params.snapshot_every == 0 and t_end - state.t > eps_t:
            emit()
            emitted_at = steps
    if steps > 0 and emitted_at != steps:
        emit()
    return state
