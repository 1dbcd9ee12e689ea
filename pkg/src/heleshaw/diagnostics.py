"""Measured functionals: pressure, energy, dissipation budget, residuals, moments.

Everything here is a pure function of a state snapshot (plus the running
accumulators in `Cumulatives`, which integrate space-time quantities online
with the left-endpoint rule).  The key quantities:

* cell pressure            P = m/(m-1) * n^(m-1)
* energy                   E = int( P/(m-2) + |grad c|^2 / 2 + |u|^2 / 2 )
* dissipation rate         int( |grad P|^2 + |lap c|^2 / 2 + |grad u|^2 / 2 )
* overshoot                || (n - 1)_+ ||_2, the violation of the n <= 1
                           constraint that the stiff-diffusion limit enforces
* graph residuals          || (1-n) P ||_1 and || (1-n) |grad P| ||_1
* complementarity residual || P (lap P - div(chi(c) grad c)) ||_1 away from
                           the free boundary (cells with P above a threshold)
* second moments           int(n r^2) and sqrt(int(c^2 r^2)) about the box
                           center (minimal-image distance)

`record` assembles one immutable DiagRecord per snapshot; its field order is
the frozen CSV schema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import TYPE_CHECKING

import numpy as np

from .grid import Grid2D, ScalarField, VectorField, integrate, lp_norm
from .model import Coefficients, SimParams
from .ops import _div, _dx, _dy, _lap, gradient, poisson_solve

if TYPE_CHECKING:
    from .solver import State


def compute_pressure(n: ScalarField, m: float) -> ScalarField:
    """Cell pressure P = m/(m-1) * n^(m-1); requires n >= 0 and m > 1."""
    if m <= 1:
        raise ValueError(f"pressure law needs m > 1, got {m}")
    if n.values.min() < 0:
        raise ValueError("pressure law needs a nonnegative density")
    return ScalarField(n.grid, (m / (m - 1.0)) * n.values ** (m - 1.0))


def compute_energy(state: "State", m: float) -> float:
    """Energy int( P/(m-2) + |grad c|^2 / 2 + |u|^2 / 2 ); requires m > 2."""
    if m <= 2:
        raise ValueError(f"energy functional needs m > 2, got {m}")
    grid = state.n.grid
    p = compute_pressure(state.n, m).values
    gc = gradient(state.c)
    dens = (
        p / (m - 2.0)
        + 0.5 * (gc.x_values**2 + gc.y_values**2)
        + 0.5 * (state.u.x_values**2 + state.u.y_values**2)
    )
    return integrate(ScalarField(grid, dens))


def dissipation_rate(state: "State", m: float) -> float:
    """Instantaneous dissipation int( |grad P|^2 + |lap c|^2/2 + |grad u|^2/2 )."""
    grid = state.n.grid
    h = grid.h
    p = compute_pressure(state.n, m).values
    gp2 = _dx(p, h) ** 2 + _dy(p, h) ** 2
    lc = _lap(state.c.values, h)
    ux, uy = state.u.x_values, state.u.y_values
    gu2 = _dx(ux, h) ** 2 + _dy(ux, h) ** 2 + _dx(uy, h) ** 2 + _dy(uy, h) ** 2
    return integrate(ScalarField(grid, gp2 + 0.5 * lc**2 + 0.5 * gu2))


def overshoot_l2(n: ScalarField) -> float:
    """L^2 norm of the positive part (n - 1)_+."""
    return lp_norm(ScalarField(n.grid, np.maximum(n.values - 1.0, 0.0)), 2)


def graph_residuals(n: ScalarField, p: ScalarField, grad_p: VectorField) -> tuple[float, float]:
    """L^1 residuals of the stiff-limit graph constraints (1-n)P and (1-n)grad P.

    (1 - n) is deliberately not clamped: negative excursions (overshoot)
    contribute and are bounded separately by the overshoot norm.
    """
    one_minus = 1.0 - n.values
    r_p = integrate(ScalarField(n.grid, np.abs(one_minus * p.values)))
    r_gp = integrate(ScalarField(n.grid, np.abs(one_minus) * grad_p.magnitude()))
    return r_p, r_gp


def complementarity_residual(
    p: ScalarField, c: ScalarField, coeffs: Coefficients, threshold: float | None = None
) -> float:
    """Interior L^1 residual of P (lap P - div(chi(c) grad c)).

    Cells with P <= threshold are excluded: the discrete Laplacian is
    O(1/h) at the pressure support edge, where the relation only holds in
    the distributional sense.  Default threshold is 1e-3 * max(P).
    """
    if threshold is None:
        threshold = 1e-3 * float(p.values.max())
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    grid = p.grid
    h = grid.h
    chi = coeffs.chi_values(np.clip(c.values, 0.0, coeffs.c_B))
    gcx, gcy = _dx(c.values, h), _dy(c.values, h)
    elliptic = _lap(p.values, h) - _div(chi * gcx, chi * gcy, h)
    res = np.abs(p.values * elliptic)
    res[p.values <= threshold] = 0.0
    return integrate(ScalarField(grid, res))


def pressure_equation_residual(
    state_k: "State", state_k1: "State", m: float, dt: float, coeffs: Coefficients,
    interior_only: bool = False,
) -> float:
    """L^1 residual of the pressure evolution equation across one step.

    Forward time difference of P against the begin-of-step spatial terms:
        dP/dt + u . grad P
          = (m-1) P (lap P + div(chi(c) grad c)) + grad P . (grad P + chi(c) grad c).
    Logged as a consistency indicator only; it is O(dt + h) where P is
    smooth and O(1/h) at the support edge.  With ``interior_only`` the
    support-edge ring (cells with P below 1e-3 max P) is masked out.
    """
    if dt <= 0:
        raise ValueError("pressure residual needs dt > 0")
    grid = state_k.n.grid
    h = grid.h
    p0 = compute_pressure(state_k.n, m).values
    p1 = compute_pressure(state_k1.n, m).values
    gpx, gpy = _dx(p0, h), _dy(p0, h)
    c = state_k.c.values
    chi = coeffs.chi_values(np.clip(c, 0.0, coeffs.c_B))
    gcx, gcy = _dx(c, h), _dy(c, h)
    elliptic = _lap(p0, h) + _div(chi * gcx, chi * gcy, h)
    resid = (
        (p1 - p0) / dt
        + state_k.u.x_values * gpx
        + state_k.u.y_values * gpy
        - (m - 1.0) * p0 * elliptic
        - (gpx * (gpx + chi * gcx) + gpy * (gpy + chi * gcy))
    )
    resid = np.abs(resid)
    if interior_only:
        resid[p0 <= 1e-3 * p0.max()] = 0.0
    return integrate(ScalarField(grid, resid))


def second_moments(n: ScalarField, c: ScalarField, grid: Grid2D) -> tuple[float, float]:
    """(int n r^2, sqrt(int c^2 r^2)) with r the minimal-image distance to the box center."""
    r2 = grid.center_distance_sq()
    m2 = integrate(ScalarField(grid, n.values * r2))
    wc = math.sqrt(max(integrate(ScalarField(grid, c.values**2 * r2)), 0.0))
    return m2, wc


def fluid_pressure_elliptic(n: ScalarField, u: VectorField, coeffs: Coefficients) -> ScalarField:
    """Fluid pressure from its elliptic problem -lap(Pi) = div div(u x u) + div(n grad phi)."""
    grid = n.grid
    h = grid.h
    ux, uy = u.x_values, u.y_values
    txx, txy, tyy = ux * ux, ux * uy, uy * uy
    rhs = _div(_dx(txx, h) + _dy(txy, h), _dx(txy, h) + _dy(tyy, h), h)
    gpx, gpy = coeffs.grad_phi(grid)
    if gpx.any() or gpy.any():
        rhs = rhs + _div(n.values * gpx, n.values * gpy, h)
    rhs = rhs - rhs.mean()  # strip roundoff; both terms telescope to zero exactly
    return poisson_solve(ScalarField(grid, rhs))


@dataclass
class DiagRecord:
    """One time slice of every logged functional; field order is the CSV schema."""

    t: float
    mass_n: float
    mass_c: float
    c_min: float
    c_max: float
    n_max: float
    energy_E: float
    dissipation_cum: float
    norm_n_Lm1: float
    norm_n_Lmp1: float
    norm_gradPm_L2: float
    norm_grad_nm_L2: float
    overshoot_L2: float
    graph_res_P: float
    graph_res_gradP: float
    compl_res: float
    second_moment_n: float
    weighted_c: float
    pi_cross_check: float
    clip_mass_cum: float


CSV_COLUMNS = tuple(f.name for f in fields(DiagRecord))


@dataclass
class Cumulatives:
    """Per-step accumulators (left-endpoint rule in time).

    ``dissipation`` and ``clip_mass`` feed the diagnostic record; the
    ``src_*`` fields are the measured sources entering the energy-budget
    bound; the ``st_*`` fields are the space-time residual integrals the
    diffusion-exponent sweep aggregates.
    """

    dissipation: float = 0.0
    clip_mass: float = 0.0
    clamp_c: float = 0.0
    src_grad_c_sq: float = 0.0
    src_nf_sq: float = 0.0
    src_grad_u_sq: float = 0.0
    src_n_sq: float = 0.0
    src_u_sq: float = 0.0
    st_overshoot_sq: float = 0.0
    st_graph_p: float = 0.0
    st_graph_grad_p: float = 0.0
    st_compl: float = 0.0
    st_grad_nm_sq: float = 0.0

    def accumulate(self, state: "State", params: SimParams, dt: float) -> None:
        """Add dt times every tracked instantaneous functional of `state`."""
        grid = state.n.grid
        h = grid.h
        h2 = h * h
        m = params.m
        n = state.n.values
        c = state.c.values
        ux, uy = state.u.x_values, state.u.y_values

        p = compute_pressure(state.n, m)
        gpx, gpy = _dx(p.values, h), _dy(p.values, h)
        gp_sq = float(np.sum(gpx**2 + gpy**2)) * h2
        lc_sq = float(np.sum(_lap(c, h) ** 2)) * h2
        gu_sq = (
            float(np.sum(_dx(ux, h) ** 2 + _dy(ux, h) ** 2 + _dx(uy, h) ** 2 + _dy(uy, h) ** 2))
            * h2
        )
        self.dissipation += dt * (gp_sq + 0.5 * lc_sq + 0.5 * gu_sq)

        gcx, gcy = _dx(c, h), _dy(c, h)
        self.src_grad_c_sq += dt * float(np.sum(gcx**2 + gcy**2)) * h2
        fvals = params.coeffs.f_values(np.clip(c, 0.0, params.coeffs.c_B))
        self.src_nf_sq += dt * float(np.sum((n * fvals) ** 2)) * h2
        self.src_grad_u_sq += dt * gu_sq
        self.src_n_sq += dt * float(np.sum(n**2)) * h2
        self.src_u_sq += dt * float(np.sum(ux**2 + uy**2)) * h2

        self.st_overshoot_sq += dt * overshoot_l2(state.n) ** 2
        r_p, r_gp = graph_residuals(state.n, p, VectorField(grid, gpx, gpy))
        self.st_graph_p += dt * r_p
        self.st_graph_grad_p += dt * r_gp
        self.st_compl += dt * complementarity_residual(
            p, state.c, params.coeffs, params.compl_threshold_rel * float(p.values.max())
        )
        npow = n**m
        self.st_grad_nm_sq += dt * float(np.sum(_dx(npow, h) ** 2 + _dy(npow, h) ** 2)) * h2


def budget_sources(cums: Cumulatives, params: SimParams) -> float:
    """Cumulative source side of the energy-budget inequality.

    chi_sup^2 * int||grad c||^2  covers the aggregation work in both the
    pressure identity and its Cauchy-Schwarz split; ||n f(c)||^2 and
    c_B^2 ||grad u||^2 cover the oxygen equation sources; the potential
    term covers the buoyancy forcing.  All factors are closed-form
    coefficient bounds times measured integrals.
    """
    coeffs = params.coeffs
    grad_phi_sup = coeffs.grad_phi_sup(params.grid.length)
    return (
        coeffs.chi_sup() ** 2 * cums.src_grad_c_sq
        + cums.src_nf_sq
        + coeffs.c_B**2 * cums.src_grad_u_sq
        + 0.5 * grad_phi_sup * (cums.src_n_sq + cums.src_u_sq)
    )


def pressure_seed(n0: ScalarField, m: float) -> float:
    """Initial-data share of the energy budget, m/((m-1)(m-2)) * int n0^(m-1)."""
    if m <= 2:
        raise ValueError("budget seed needs m > 2")
    return (m / ((m - 1.0) * (m - 2.0))) * integrate(
        ScalarField(n0.grid, n0.values ** (m - 1.0))
    )


def record(state: "State", params: SimParams, cums: Cumulatives) -> DiagRecord:
    """Assemble one complete diagnostic record from a state snapshot."""
    grid = state.n.grid
    m = params.m
    n, c = state.n, state.c
    p = compute_pressure(n, m)
    gp = gradient(p)
    r_p, r_gp = graph_residuals(n, p, gp)
    npow = ScalarField(grid, n.values**m)
    g_npow = gradient(npow)
    m2, wc = second_moments(n, c, grid)
    pi_ref = fluid_pressure_elliptic(n, state.u, params.coeffs)
    cross = lp_norm(ScalarField(grid, state.pi.values - pi_ref.values), 2)
    return DiagRecord(
        t=state.t,
        mass_n=integrate(n),
        mass_c=integrate(c),
        c_min=float(c.values.min()),
        c_max=float(c.values.max()),
        n_max=float(n.values.max()),
        energy_E=compute_energy(state, m),
        dissipation_cum=cums.dissipation,
        norm_n_Lm1=lp_norm(n, m - 1.0),
        norm_n_Lmp1=lp_norm(n, m + 1.0),
        norm_gradPm_L2=math.sqrt(
            max(integrate(ScalarField(grid, gp.x_values**2 + gp.y_values**2)), 0.0)
        ),
        norm_grad_nm_L2=math.sqrt(
            max(integrate(ScalarField(grid, g_npow.x_values**2 + g_npow.y_values**2)), 0.0)
        ),
        overshoot_L2=overshoot_l2(n),
        graph_res_P=r_p,
        graph_res_gradP=r_gp,
        compl_res=complementarity_residual(
            p, c, params.coeffs, params.compl_threshold_rel * float(p.values.max())
        ),
        second_moment_n=m2,
        weighted_c=wc,
        pi_cross_check=cross,
        clip_mass_cum=cums.clip_mass,
    )
