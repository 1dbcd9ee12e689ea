"""Chemotaxis-fluid lab: degenerate diffusion on a periodic box with
stiff-pressure-limit diagnostics.

The package simulates a coupled density/oxygen/incompressible-flow system
where the density diffuses through the nonlinearity lap(n^m), tracks the
conserved/dissipated functionals as discrete invariants, and measures how
the dynamics approaches the stiff (incompressible) limit as the exponent m
grows: overshoot above the density ceiling, graph and complementarity
residuals of the limiting pressure, and Cauchy distances across an
m ladder.
"""

from .config import Config, build_initial_data, build_params, parse_config, serialize_config
from .diagnostics import (
    CSV_COLUMNS,
    Cumulatives,
    DiagRecord,
    complementarity_residual,
    compute_energy,
    compute_pressure,
    dissipation_rate,
    graph_residuals,
    overshoot_l2,
    pressure_equation_residual,
    record,
    second_moments,
)
from .errors import (
    BadValueError,
    CflViolationError,
    ConfigError,
    HeleshawError,
    NoConvergenceError,
    NonZeroMeanError,
    NumericsError,
    PatchTooLargeError,
    SupportEscapeError,
    UnknownKeyError,
    ValidationFailedError,
)
from .grid import Grid2D, ScalarField, VectorField, integrate, lp_norm, spacetime_l2
from .io import read_diag_csv, write_diag_csv, write_heatmap, write_slopes_txt, write_sweep_csv
from .model import (
    Coefficients,
    InitialData,
    SimParams,
    eval_coefficients,
    make_initial_patch,
    taylor_green,
    validate_assumptions,
)
from .ops import (
    PoissonSolver,
    advect_conservative,
    divergence,
    gradient,
    hminus1_norm,
    laplacian,
    mollify,
    poisson_solve,
    project_divergence_free,
)
from .solver import State, StepReport, cfl_dt, run, step, step_density, step_oxygen, step_velocity_project
from .sweep import (
    SweepResult,
    barenblatt_profile,
    barenblatt_refinement,
    barenblatt_validate,
    cross_distances,
    fit_slope,
    sweep,
)

__version__ = "0.1.0"
