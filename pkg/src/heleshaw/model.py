"""Coefficient options, parameter records, and admissible initial data.

The coefficient functions are shipped as named options so that their sup
and Lipschitz bounds on [0, c_B] are available in closed form: the
chemotactic sensitivity chi(c), the oxygen consumption rate f(c) (with
f >= 0 and f(0) = 0), and the bounded potential phi(x, y) whose gradient
is evaluated analytically.

Initial data is built as mollified disc patches placed well inside the
box; `validate_assumptions` reports every admissibility check (sign
bounds, mass/norm budgets against the configured constant, discrete
divergence of the initial velocity, second moments) so a run can refuse
inadmissible data up front.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PatchTooLargeError, ValidationFailedError
from .grid import Grid2D, ScalarField, VectorField, integrate, lp_norm
from .ops import divergence, gradient, hminus1_norm, mollify, project_divergence_free

CHI_OPTIONS = ("constant", "saturating")
F_OPTIONS = ("saturating", "linear-capped")
PHI_OPTIONS = ("zero", "bounded-gravity")


@dataclass(frozen=True)
class Coefficients:
    """Named coefficient selection with closed-form bounds on [0, c_B].

    chi options:  "constant"        chi(c) = chi_0
                  "saturating"      chi(c) = chi_0 / (1 + c)^2
    f options:    "saturating"      f(c) = c / (1 + c)
                  "linear-capped"   f(c) = min(c, c_B)
    phi options:  "zero"            phi = 0
                  "bounded-gravity" phi = phi_amp * sin(2 pi y / L)
    """

    chi: str = "constant"
    f: str = "saturating"
    phi: str = "zero"
    c_B: float = 1.0
    chi_0: float = 1.0
    phi_amp: float = 0.0

    def __post_init__(self):
        if self.chi not in CHI_OPTIONS:
            raise ValueError(f"unknown chi option {self.chi!r}")
        if self.f not in F_OPTIONS:
            raise ValueError(f"unknown f option {self.f!r}")
        if self.phi not in PHI_OPTIONS:
            raise ValueError(f"unknown phi option {self.phi!r}")
        if not self.c_B > 0:
            raise ValueError("c_B must be positive")

    # pointwise evaluations ------------------------------------------------
    def chi_values(self, c: np.ndarray) -> np.ndarray:
        if self.chi == "constant":
            return np.full_like(c, self.chi_0)
        return self.chi_0 / (1.0 + c) ** 2

    def f_values(self, c: np.ndarray) -> np.ndarray:
        if self.f == "saturating":
            return c / (1.0 + c)
        return np.minimum(c, self.c_B)

    def grad_phi(self, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
        """Analytic gradient of the potential sampled at cell centers."""
        shape = (grid.n_cells, grid.n_cells)
        if self.phi == "zero" or self.phi_amp == 0.0:
            return np.zeros(shape), np.zeros(shape)
        _, y = grid.cell_centers()
        k = 2.0 * np.pi / grid.length
        return np.zeros(shape), self.phi_amp * k * np.cos(k * y)

    # closed-form bounds ---------------------------------------------------
    def chi_sup(self) -> float:
        return abs(self.chi_0)  # both options peak at c = 0

    def chi_lipschitz(self) -> float:
        if self.chi == "constant":
            return 0.0
        return 2.0 * abs(self.chi_0)  # |chi'| = 2 chi_0 / (1+c)^3 <= 2 chi_0

    def f_sup(self) -> float:
        if self.f == "saturating":
            return self.c_B / (1.0 + self.c_B)
        return self.c_B

    def f_lipschitz(self) -> float:
        return 1.0  # f' = 1/(1+c)^2 <= 1, resp. slope 1 before the cap

    def grad_phi_sup(self, length: float) -> float:
        if self.phi == "zero" or self.phi_amp == 0.0:
            return 0.0
        return abs(self.phi_amp) * 2.0 * np.pi / length


def eval_coefficients(coeffs: Coefficients, c: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Pointwise chi(c) and f(c); c is clamped into [0, c_B] with a warning."""
    vals = c.values
    if vals.min() < 0.0 or vals.max() > coeffs.c_B:
        warnings.warn("oxygen values outside [0, c_B]; clamping for coefficient evaluation")
        vals = np.clip(vals, 0.0, coeffs.c_B)
    return (
        ScalarField(c.grid, coeffs.chi_values(vals)),
        ScalarField(c.grid, coeffs.f_values(vals)),
    )


@dataclass(frozen=True)
class SimParams:
    """Full parameter record for one simulation."""

    grid: Grid2D
    m: float
    coeffs: Coefficients = field(default_factory=Coefficients)
    eps_visc: float = 0.0
    eps_mollify: float = 0.0
    dt_safety: float = 0.4
    t_end: float = 0.2
    snapshot_every: int = 20
    init_bound: float = 10.0  # budget for all initial-data norm checks
    compl_threshold_rel: float = 1e-3  # free-boundary exclusion for the complementarity residual

    def __post_init__(self):
        # coupled runs require m >= 3 (enforced by `run`); m = 2 is admitted
        # here only so the self-similar density oracle can drive the stepper
        if self.m < 2:
            raise ValueError(f"diffusion exponent must satisfy m >= 2, got {self.m}")
        if self.eps_visc < 0 or self.eps_mollify < 0:
            raise ValueError("regularization widths must be >= 0")
        if not (0.0 < self.dt_safety <= 1.0):
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be a positive integer")

    def with_m(self, m: float) -> "SimParams":
        return replace(self, m=m)


@dataclass
class InitialData:
    n0: ScalarField
    c0: ScalarField
    u0: VectorField


@dataclass
class ValidationItem:
    name: str
    value: float
    bound: float
    ok: bool

    def __str__(self):
        mark = "ok  " if self.ok else "FAIL"
        return f"{mark} {self.name}: value={self.value:.6e} bound={self.bound:.6e}"


@dataclass
class ValidationReport:
    items: list[ValidationItem]

    @property
    def passed(self) -> bool:
        return all(item.ok for item in self.items)

    def failures(self) -> list[ValidationItem]:
        return [item for item in self.items if not item.ok]

    def __str__(self):
        return "\n".join(str(item) for item in self.items)


def _disc(grid: Grid2D, center: tuple[float, float], radius: float) -> np.ndarray:
    x, y = grid.cell_centers()
    dx = np.abs(x - center[0])
    dy = np.abs(y - center[1])
    dx = np.minimum(dx, grid.length - dx)
    dy = np.minimum(dy, grid.length - dy)
    return (dx * dx + dy * dy <= radius * radius).astype(float)


def taylor_green(grid: Grid2D, amplitude: float = 1.0) -> VectorField:
    """Cellular vortex field (sin kx cos ky, -cos kx sin ky); discretely solenoidal."""
    x, y = grid.cell_centers()
    k = 2.0 * np.pi / grid.length
    return VectorField(
        grid,
        amplitude * np.sin(k * x) * np.cos(k * y),
        -amplitude * np.cos(k * x) * np.sin(k * y),
    )


def make_initial_patch(
    grid: Grid2D,
    center: tuple[float, float],
    radius: float,
    n_amp: float,
    c_amp: float,
    mollify_width: float,
    params: SimParams,
    c_radius: float | None = None,
    c_mollify_width: float | None = None,
    c_profile: str = "disc",
    u0_mode: str = "zero",
    u0_amp: float = 1.0,
) -> InitialData:
    """Mollified disc patches for density and oxygen plus an optional vortex flow.

    The density is a disc indicator of the given radius smoothed by a
    Gaussian of width ``mollify_width`` and scaled to peak ``n_amp``; the
    oxygen is either an analogous disc (possibly different radius and
    smoothing) at peak ``c_amp`` or the uniform level ``c_amp``.  The
    velocity is zero or a projected cellular vortex.  The patch must sit
    inside the box with margin at least L/8, and the result must pass
    every admissibility check; otherwise the constructor raises.
    """
    if c_profile not in ("disc", "uniform"):
        raise ValueError(f"unknown oxygen profile {c_profile!r}")
    if u0_mode not in ("zero", "taylor-green"):
        raise ValueError(f"unknown initial velocity mode {u0_mode!r}")

    L = grid.length
    c_radius = radius if c_radius is None else c_radius
    c_mollify_width = mollify_width if c_mollify_width is None else c_mollify_width
    reach = radius + 3.0 * mollify_width
    if c_profile == "disc":
        reach = max(reach, c_radius + 3.0 * c_mollify_width)
    margin = min(center[0], L - center[0], center[1], L - center[1]) - reach
    if margin < L / 8.0:
        raise PatchTooLargeError(
            f"patch reach {reach:.3f} around {center} leaves margin {margin:.3f} < L/8 = {L / 8:.3f}"
        )

    n0 = mollify(ScalarField(grid, n_amp * _disc(grid, center, radius)), mollify_width)
    if c_profile == "uniform":
        c0 = ScalarField.full(grid, c_amp)
    else:
        c0 = mollify(ScalarField(grid, c_amp * _disc(grid, center, c_radius)), c_mollify_width)

    if u0_mode == "zero":
        u0 = VectorField.zeros(grid)
    else:
        u0, _ = project_divergence_free(taylor_green(grid, u0_amp))

    data = InitialData(n0, c0, u0)
    report = validate_assumptions(data, params)
    if not report.passed:
        raise ValidationFailedError(report.failures())
    return data


def validate_assumptions(data: InitialData, params: SimParams) -> ValidationReport:
    """Report every admissibility check for (n0, c0, u0) against the configured budget.

    Sign bounds and the divergence of u0 carry absolute roundoff tolerances;
    the mass, norm and moment checks compare against ``params.init_bound``.
    The final item reports the density mass sitting in the outermost cell
    ring as a domain-truncation trust metric (informational: bound is the
    total mass, so it never fails on admissible data).
    """
    m = params.m
    bound = params.init_bound
    n0, c0, u0 = data.n0, data.c0, data.u0
    grid = n0.grid
    items = []

    def check(name, value, limit, ok=None):
        items.append(ValidationItem(name, float(value), float(limit), bool(value <= limit if ok is None else ok)))

    check("min_n0 >= 0", -float(n0.values.min()), 1e-12)
    check("min_c0 >= 0", -float(c0.values.min()), 1e-12)
    check("max_c0 <= c_B", float(c0.values.max()), params.coeffs.c_B + 1e-12)
    check("max_n0 <= 1", float(n0.values.max()), 1.0 + 1e-12)
    div_u0 = divergence(u0)
    check("max_div_u0", lp_norm(div_u0, np.inf), 1e-10)
    check("int_div_u0", abs(integrate(div_u0)), 1e-10)
    check("mass_n0", integrate(n0), bound)
    check("mass_c0", integrate(c0), bound)
    check("n0_L(m-1)", lp_norm(n0, m - 1.0), bound)
    check("n0_L(m+1)^(m+1)", integrate(ScalarField(grid, n0.values ** (m + 1.0))), bound)
    gc = gradient(c0)
    h1_sq = lp_norm(c0, 2) ** 2 + integrate(
        ScalarField(grid, gc.x_values**2 + gc.y_values**2)
    )
    check("c0_H1", math.sqrt(h1_sq), bound)
    u_l2 = math.sqrt(integrate(ScalarField(grid, u0.x_values**2 + u0.y_values**2)))
    check("u0_L2", u_l2, bound)
    check("n0_Hminus1", hminus1_norm(n0), bound)
    r2 = grid.center_distance_sq()
    check("n0_second_moment", integrate(ScalarField(grid, n0.values * r2)), bound)
    check("c0_weighted_L2", math.sqrt(integrate(ScalarField(grid, c0.values**2 * r2))), bound)
    ring = np.zeros_like(n0.values, dtype=bool)
    ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
    boundary_mass = grid.h**2 * float(n0.values[ring].sum())
    check("n0_boundary_ring_mass (trust metric)", boundary_mass, max(integrate(n0), 1e-300))
    return ValidationReport(items)
