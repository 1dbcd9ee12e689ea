"""Diffusion-exponent ladder: sweep runs, decay-slope fits, and the PME oracle.

The stiff-diffusion limit predicts that as m grows the space-time
overshoot, the graph residuals and the interior complementarity residual
all decay, and that the density (in the discrete negative-Sobolev metric)
and the gradient of n^m become Cauchy along the ladder.  `sweep` runs one
identical initial-value problem for every requested m, accumulates those
space-time metrics online, captures density snapshots at shared physical
times (nearest step, no interpolation) for the cross-m distances, and
fits log-log decay slopes.

`barenblatt_profile` furnishes the closed-form self-similar solution of
the pure porous-medium subsystem used as an independent correctness
oracle for the density stepper.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import SupportEscapeError
from .grid import Grid2D, ScalarField, VectorField, integrate, lp_norm
from .model import Coefficients, InitialData, SimParams
from .ops import _dx, _dy, hminus1_norm
from .solver import State, cfl_dt, run, step_density


# ---------------------------------------------------------------------------
# slope fitting


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def fit_slope(points: list[tuple[float, float]]) -> SlopeFit:
    """Ordinary least squares on (log x, log y); needs >= 3 strictly positive points."""
    if len(points) < 3:
        raise ValueError("slope fit needs at least 3 points")
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    if (xs <= 0).any() or (ys <= 0).any():
        raise ValueError("slope fit needs strictly positive coordinates")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(lx) == 0.0:
        raise ValueError("slope fit is degenerate: all x equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return SlopeFit(float(slope), float(intercept), r2)


# ---------------------------------------------------------------------------
# sweep across the diffusion-exponent ladder


@dataclass
class RunMetrics:
    """Space-time metrics of one ladder run (time-integrated, left endpoint)."""

    m: float
    overshoot_st: float = math.nan
    graph_P_st: float = math.nan
    graph_gradP_st: float = math.nan
    compl_st: float = math.nan
    grad_nm_st: float = math.nan
    snapshot_mismatch: float = math.nan
    steps: int = 0
    ok: bool = False
    error: str = ""


@dataclass
class CrossMetrics:
    """Distances between two adjacent ladder runs over shared snapshot times."""

    m_lo: float
    m_hi: float
    hminus1_st: float
    grad_pow_st: float


@dataclass
class SweepResult:
    m_values: list[float]
    per_m: list[RunMetrics]
    cross_m: list[CrossMetrics]
    slopes: dict[str, SlopeFit | None]
    slice_times: list[float]

    @property
    def partial(self) -> bool:
        return any(not r.ok for r in self.per_m)


PER_M_METRICS = ("overshoot_st", "graph_P_st", "graph_gradP_st", "compl_st", "grad_nm_st")
CROSS_METRICS = ("hminus1_st", "grad_pow_st")


class _SnapshotTaker:
    """Captures the density at the step nearest each target time."""

    def __init__(self, targets: list[float], n0: ScalarField):
        self.targets = targets
        self.snaps: list[np.ndarray | None] = [None] * len(targets)
        self.snaps[0] = n0.values.copy()  # target 0 is always the initial time
        self.mismatch = 0.0
        self._next = 1
        self.steps = 0
        self.cums = None

    def _take(self, idx: int, t: float, values: np.ndarray) -> None:
        self.snaps[idx] = values.copy()
        self.mismatch = max(self.mismatch, abs(t - self.targets[idx]))

    def __call__(self, prev: State, new: State, report, cums) -> None:
        self.cums = cums
        self.steps += 1
        while self._next < len(self.targets):
            target = self.targets[self._next]
            if new.t < target - 1e-12 * max(target, 1.0):
                break
            # crossed (or reached) the target: keep the nearer endpoint
            if abs(prev.t - target) < abs(new.t - target):
                self._take(self._next, prev.t, prev.n.values)
            else:
                self._take(self._next, new.t, new.n.values)
            self._next += 1


def _run_ladder_member(args) -> tuple[RunMetrics, list[np.ndarray] | None]:
    base_params, data, m, targets = args
    params = base_params.with_m(m)
    metrics = RunMetrics(m=m)
    taker = _SnapshotTaker(targets, data.n0)
    try:
        final = run(params, data, sinks=(), observers=(taker,))
    except Exception as exc:  # noqa: BLE001 - per-m failures must not kill the ladder
        metrics.error = f"{type(exc).__name__}: {exc}"
        return metrics, None
    # the final state is the nearest step for any still-open target (t_end hit exactly)
    while taker._next < len(targets):
        taker._take(taker._next, final.t, final.n.values)
        taker._next += 1
    cums = taker.cums
    if cums is None:  # zero-step run (t_end == 0)
        from .diagnostics import Cumulatives

        cums = Cumulatives()
    metrics.overshoot_st = math.sqrt(max(cums.st_overshoot_sq, 0.0))
    metrics.graph_P_st = cums.st_graph_p
    metrics.graph_gradP_st = cums.st_graph_grad_p
    metrics.compl_st = cums.st_compl
    metrics.grad_nm_st = math.sqrt(max(cums.st_grad_nm_sq, 0.0))
    metrics.snapshot_mismatch = taker.mismatch
    metrics.steps = taker.steps
    metrics.ok = True
    return metrics, taker.snaps


def cross_distances(
    grid: Grid2D,
    snaps_lo: list[np.ndarray],
    m_lo: float,
    snaps_hi: list[np.ndarray],
    m_hi: float,
    dt_slice: float,
) -> tuple[float, float]:
    """Space-time distances between two ladder runs from shared snapshots.

    Returns (negative-Sobolev distance of the densities, L^2 distance of
    grad n^m), both with the left-endpoint rule over the slice spacing.
    """
    h = grid.h
    acc_h = 0.0
    acc_g = 0.0
    for a, b in zip(snaps_lo[:-1], snaps_hi[:-1]):
        diff = ScalarField(grid, a - b)
        acc_h += dt_slice * hminus1_norm(diff) ** 2
        da = a**m_lo
        db = b**m_hi
        acc_g += dt_slice * float(
            np.sum((_dx(da, h) - _dx(db, h)) ** 2 + (_dy(da, h) - _dy(db, h)) ** 2)
        ) * h * h
    return math.sqrt(acc_h), math.sqrt(acc_g)


def sweep(
    base_params: SimParams,
    data: InitialData,
    m_list: list[float],
    snapshot_stride: int = 8,
    workers: int = 1,
) -> SweepResult:
    """Run the same problem across the m ladder and aggregate limit metrics.

    ``snapshot_stride`` is the number of shared time slices used for the
    cross-m distances; runs execute independently (in processes when
    ``workers`` > 1) and per-m failures are recorded without aborting the
    other runs.  Output is identical for any worker count.
    """
    if sorted(m_list) != list(m_list) or len(set(m_list)) != len(m_list):
        raise ValueError("m_list must be strictly ascending")
    if any(m < 5 for m in m_list):
        raise ValueError("ladder runs require m >= 5")
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    t_end = base_params.t_end
    targets = [t_end * j / snapshot_stride for j in range(snapshot_stride + 1)]
    jobs = [(base_params, data, m, targets) for m in m_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_ladder_member, jobs))
    else:
        results = [_run_ladder_member(job) for job in jobs]

    per_m = [r[0] for r in results]
    snaps = {r[0].m: r[1] for r in results}
    dt_slice = t_end / snapshot_stride if t_end > 0 else 0.0
    cross = []
    for lo, hi in zip(m_list, m_list[1:]):
        a, b = snaps.get(lo), snaps.get(hi)
        if a is None or b is None or dt_slice == 0.0:
            continue
        d_h, d_g = cross_distances(base_params.grid, a, lo, b, hi, dt_slice)
        cross.append(CrossMetrics(lo, hi, d_h, d_g))

    slopes: dict[str, SlopeFit | None] = {}
    for name in PER_M_METRICS:
        pts = [(r.m, getattr(r, name)) for r in per_m if r.ok and getattr(r, name) > 0.0]
        try:
            slopes[name] = fit_slope(pts) if len(pts) >= 3 else None
        except ValueError:
            slopes[name] = None
    for name, values in (
        ("hminus1_st", [(c.m_lo, c.hminus1_st) for c in cross]),
        ("grad_pow_st", [(c.m_lo, c.grad_pow_st) for c in cross]),
    ):
        pts = [(x, y) for x, y in values if y > 0.0]
        try:
            slopes[name] = fit_slope(pts) if len(pts) >= 3 else None
        except ValueError:
            slopes[name] = None
    return SweepResult(list(m_list), per_m, cross, slopes, targets)


def default_workers() -> int:
    """Worker count from the HELESHAW_WORKERS environment variable (default 1)."""
    raw = os.environ.get("HELESHAW_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# self-similar porous-medium oracle

# Canonical refinement-study setup: in this short window the first-order
# interface-startup error dominates, so halving h roughly halves the L^1
# error; over long windows the second-order interior error takes over and
# the observed ratio climbs toward 4 (see demos/barenblatt.py).
BARENBLATT_MASS = 1.0
BARENBLATT_WINDOW = (2.5, 2.55)


def barenblatt_constants(m: float, mass: float) -> tuple[float, float, float, float]:
    """Constants (alpha, beta, k, C0) of the planar self-similar PME solution.

    n(t, x) = t^(-alpha) (C0 - k |x|^2 t^(-2 beta))_+^(1/(m-1)) with
    alpha = 1/m, beta = alpha/2, k = alpha (m-1) / (4 m), and C0 fixed by
    the total mass: C0 = (mass * k * m / (pi (m-1)))^((m-1)/m).
    """
    if m <= 1:
        raise ValueError("self-similar profile needs m > 1")
    if mass <= 0:
        raise ValueError("self-similar profile needs positive mass")
    alpha = 1.0 / m
    beta = 0.5 * alpha
    k = alpha * (m - 1.0) / (4.0 * m)
    c0 = (mass * k * m / (math.pi * (m - 1.0))) ** ((m - 1.0) / m)
    return alpha, beta, k, c0


def barenblatt_support_radius(m: float, mass: float, t: float) -> float:
    alpha, beta, k, c0 = barenblatt_constants(m, mass)
    return math.sqrt(c0 / k) * t**beta


def barenblatt_profile(
    grid: Grid2D, m: float, mass: float, t: float, center: tuple[float, float] | None = None
) -> ScalarField:
    """Exact self-similar PME density at time t, sampled at cell centers."""
    if t <= 0:
        raise ValueError("the self-similar profile is defined for t > 0")
    alpha, beta, k, c0 = barenblatt_constants(m, mass)
    if center is None:
        center = (0.5 * grid.length, 0.5 * grid.length)
    x, y = grid.cell_centers()
    dx = np.abs(x - center[0])
    dy = np.abs(y - center[1])
    dx = np.minimum(dx, grid.length - dx)
    dy = np.minimum(dy, grid.length - dy)
    r2 = dx * dx + dy * dy
    core = np.maximum(c0 - k * r2 * t ** (-2.0 * beta), 0.0)
    return ScalarField(grid, t ** (-alpha) * core ** (1.0 / (m - 1.0)))


@dataclass
class BarenblattReport:
    m: float
    n_cells: int
    l1_error: float
    linf_error: float
    mass_rel_drift: float
    steps: int


def barenblatt_validate(
    m: float, grid: Grid2D, t0: float, t1: float, mass: float, dt_safety: float = 0.4
) -> BarenblattReport:
    """Evolve the exact profile from t0 to t1 with the density stepper alone.

    The transport and oxygen couplings are switched off (chi = 0, u = 0),
    so this isolates the degenerate-diffusion discretization against the
    closed-form solution.  m is restricted to {2, 3}, the exponents with
    precomputed oracle constants.  Raises SupportEscapeError if the exact
    support does not stay inside the box over [t0, t1].
    """
    if m not in (2.0, 3.0):
        raise ValueError("the oracle run supports m in {2, 3}")
    if not (0 < t0 <= t1):
        raise ValueError("need 0 < t0 <= t1")
    margin = barenblatt_support_radius(m, mass, t1) + 3.0 * grid.h
    if margin > 0.5 * grid.length:
        raise SupportEscapeError(
            f"support radius {margin:.3f} at t = {t1} exceeds the half box {0.5 * grid.length:.3f}"
        )
    coeffs = Coefficients(chi="constant", chi_0=0.0, f="saturating", phi="zero")
    params = SimParams(grid=grid, m=m, coeffs=coeffs, dt_safety=dt_safety, t_end=t1 - t0)
    state = State(
        t0,
        barenblatt_profile(grid, m, mass, t0),
        ScalarField.zeros(grid),
        VectorField.zeros(grid),
        ScalarField.zeros(grid),
    )
    mass0 = integrate(state.n)
    steps = 0
    while t1 - state.t > 1e-12 * t1:
        dt = min(cfl_dt(state, params), t1 - state.t)
        n_new, _clip = step_density(state, params, dt)
        state = State(state.t + dt, n_new, state.c, state.u, state.pi)
        steps += 1
    exact = barenblatt_profile(grid, m, mass, state.t)
    diff = ScalarField(grid, state.n.values - exact.values)
    return BarenblattReport(
        m=m,
        n_cells=grid.n_cells,
        l1_error=lp_norm(diff, 1),
        linf_error=lp_norm(diff, np.inf),
        mass_rel_drift=abs(integrate(state.n) - mass0) / mass0,
        steps=steps,
    )


@dataclass
class RefinementReport:
    coarse: BarenblattReport
    fine: BarenblattReport

    @property
    def l1_ratio(self) -> float:
        return self.coarse.l1_error / self.fine.l1_error


def barenblatt_refinement(
    m: float, n_coarse: int, length: float, t0: float, t1: float, mass: float
) -> RefinementReport:
    """Oracle run at N and 2N cells; the L^1 error ratio measures the convergence order."""
    coarse = barenblatt_validate(m, Grid2D(n_coarse, length), t0, t1, mass)
    fine = barenblatt_validate(m, Grid2D(2 * n_coarse, length), t0, t1, mass)
    return RefinementReport(coarse, fine)
