"""Periodic stencil operators, mollifier, Poisson solver and projection.

All stencils are second-order centered differences except the transport
operator, which is first-order upwind in flux form so that cell values
stay within bounds and the discrete integral telescopes to zero exactly.

Two elliptic inversions live here:

* `poisson_solve` inverts the compact 5-point Laplacian (used by the
  negative-Sobolev norm and the fluid-pressure cross-check);
* `project_divergence_free` removes the centered-gradient part of a
  vector field, i.e. it inverts the wide operator div(grad(.)) that the
  collocated centered stencils actually compose to.  Using the wide
  operator is what makes the post-projection centered divergence vanish
  to machine precision.

Both are spectral by default (exact on the periodic grid); a conjugate
gradient fallback is provided for the 5-point solve.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NoConvergenceError, NonZeroMeanError
from .grid import Grid2D, ScalarField, VectorField, integrate, lp_norm

# ---------------------------------------------------------------------------
# raw array kernels (periodic via np.roll; axis 0 = x, axis 1 = y)


def _lap(a: np.ndarray, h: float) -> np.ndarray:
    return (
        np.roll(a, -1, axis=0)
        + np.roll(a, 1, axis=0)
        + np.roll(a, -1, axis=1)
        + np.roll(a, 1, axis=1)
        - 4.0 * a
    ) / (h * h)


def _dx(a: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)) / (2.0 * h)


def _dy(a: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) / (2.0 * h)


def _div(ax: np.ndarray, ay: np.ndarray, h: float) -> np.ndarray:
    return _dx(ax, h) + _dy(ay, h)


def _upwind_div(f: np.ndarray, ux: np.ndarray, uy: np.ndarray, h: float) -> np.ndarray:
    """Flux-form upwind divergence of (u f); conserves sum(f) by telescoping.

    Face velocity is the mean of the two adjacent cell values; the face
    value of f is taken from the upwind cell.
    """
    ue = 0.5 * (ux + np.roll(ux, -1, axis=0))  # face between i and i+1
    fe = np.maximum(ue, 0.0) * f + np.minimum(ue, 0.0) * np.roll(f, -1, axis=0)
    un = 0.5 * (uy + np.roll(uy, -1, axis=1))  # face between j and j+1
    fn = np.maximum(un, 0.0) * f + np.minimum(un, 0.0) * np.roll(f, -1, axis=1)
    return (fe - np.roll(fe, 1, axis=0) + fn - np.roll(fn, 1, axis=1)) / h


# ---------------------------------------------------------------------------
# field-level operators


def laplacian(f: ScalarField) -> ScalarField:
    """5-point periodic Laplacian of a scalar field."""
    return ScalarField(f.grid, _lap(f.values, f.grid.h))


def gradient(f: ScalarField) -> VectorField:
    """Centered-difference periodic gradient."""
    h = f.grid.h
    return VectorField(f.grid, _dx(f.values, h), _dy(f.values, h))


def divergence(v: VectorField) -> ScalarField:
    """Centered-difference periodic divergence."""
    return ScalarField(v.grid, _div(v.x_values, v.y_values, v.grid.h))


def advect_conservative(f: ScalarField, u: VectorField) -> ScalarField:
    """Upwind flux divergence of (u f); the update f <- f - dt * result conserves mass."""
    if f.grid != u.grid:
        raise ValueError("field and velocity live on different grids")
    return ScalarField(f.grid, _upwind_div(f.values, u.x_values, u.y_values, f.grid.h))


@functools.lru_cache(maxsize=32)
def _mollify_taps(n_cells: int, h: float, eps: float):
    """Offsets and weights of the truncated-Gaussian kernel (std eps, cut at 3 eps)."""
    reach = int(math.floor(3.0 * eps / h))
    offsets, weights = [], []
    for di in range(-reach, reach + 1):
        for dj in range(-reach, reach + 1):
            r2 = (di * di + dj * dj) * h * h
            if r2 <= (3.0 * eps) ** 2:
                offsets.append((di, dj))
                weights.append(math.exp(-r2 / (2.0 * eps * eps)))
    w = np.array(weights)
    w /= w.sum()  # exact unit mass after truncation
    return tuple(offsets), w


def mollify(f: ScalarField, eps: float) -> ScalarField:
    """Periodic convolution with a normalized truncated-Gaussian kernel.

    ``eps`` is the kernel standard deviation in physical units; the kernel
    is cut at radius 3 eps and renormalized so its taps sum to one exactly.
    ``eps = 0`` returns the field unchanged.
    """
    if eps < 0:
        raise ValueError("mollifier width must be >= 0")
    if eps == 0.0:
        return f.copy()
    offsets, weights = _mollify_taps(f.grid.n_cells, f.grid.h, eps)
    out = np.zeros_like(f.values)
    for (di, dj), w in zip(offsets, weights):
        out += w * np.roll(f.values, (di, dj), axis=(0, 1))
    return ScalarField(f.grid, out)


# ---------------------------------------------------------------------------
# spectral helpers


@functools.lru_cache(maxsize=32)
def _five_point_eigs(n: int, h: float) -> np.ndarray:
    """Eigenvalues of minus the 5-point Laplacian under the real FFT layout."""
    kx = np.arange(n)
    ky = np.arange(n // 2 + 1)
    sx = np.sin(np.pi * kx / n) ** 2
    sy = np.sin(np.pi * ky / n) ** 2
    return (4.0 / (h * h)) * (sx[:, None] + sy[None, :])


@functools.lru_cache(maxsize=32)
def _centered_symbol_sq(n: int, h: float) -> np.ndarray:
    """Squared symbol of the centered first difference, sx^2 + sy^2 (rfft layout).

    The constant and (for even n) Nyquist modes are annihilated by the
    centered difference; their symbol entries are forced to exactly zero so
    the projection treats them as kernel modes instead of dividing by the
    roundoff-sized sin(pi).
    """
    kx = np.arange(n)
    ky = np.arange(n // 2 + 1)
    sx = np.sin(2.0 * np.pi * kx / n) / h
    sy = np.sin(2.0 * np.pi * ky / n) / h
    if n % 2 == 0:
        sx[n // 2] = 0.0
        sy[n // 2] = 0.0
    return sx[:, None] ** 2 + sy[None, :] ** 2


class PoissonSolver:
    """Solves -lap(psi) = g on the periodic grid for mean-zero g.

    method "spectral" diagonalizes the 5-point stencil with the FFT and is
    exact; "cg" runs conjugate gradients on the same stencil and stops at
    the relative residual ``tolerance``.
    """

    def __init__(self, grid: Grid2D, method: str = "spectral", tolerance: float = 1e-10):
        if method not in ("spectral", "cg"):
            raise ValueError(f"unknown Poisson method {method!r}")
        self.grid = grid
        self.method = method
        self.tolerance = tolerance

    def solve(self, g: ScalarField) -> ScalarField:
        if g.grid != self.grid:
            raise ValueError("right-hand side lives on a different grid")
        mean_bound = 1e-10 * lp_norm(g, 2) * self.grid.length
        if abs(integrate(g)) > mean_bound:
            raise NonZeroMeanError(
                f"Poisson right-hand side has mean {integrate(g):.3e}, "
                f"compatibility bound {mean_bound:.3e}"
            )
        if self.method == "spectral":
            sol = self._solve_spectral(g.values)
        else:
            sol = self._solve_cg(g.values)
        return ScalarField(self.grid, sol)

    def _solve_spectral(self, g: np.ndarray) -> np.ndarray:
        n, h = self.grid.n_cells, self.grid.h
        lam = _five_point_eigs(n, h)
        ghat = np.fft.rfft2(g)
        psihat = np.zeros_like(ghat)
        np.divide(ghat, lam, out=psihat, where=lam > 0)
        return np.fft.irfft2(psihat, s=(n, n))

    def _solve_cg(self, g: np.ndarray) -> np.ndarray:
        n, h = self.grid.n_cells, self.grid.h
        size = n * n

        def apply_neg_lap(v):
            return -_lap(v.reshape(n, n), h).ravel()

        op = LinearOperator((size, size), matvec=apply_neg_lap)
        rhs = g.ravel() - g.mean()  # strip the roundoff-level mean component
        maxiter = 20 * size
        sol, info = cg(op, rhs, rtol=self.tolerance, atol=0.0, maxiter=maxiter)
        if info != 0:
            raise NoConvergenceError(f"CG did not reach tolerance in {maxiter} iterations")
        sol = sol.reshape(n, n)
        return sol - sol.mean()


def poisson_solve(g: ScalarField, method: str = "spectral", tolerance: float = 1e-10) -> ScalarField:
    """One-shot mean-zero solve of -lap(psi) = g; see PoissonSolver."""
    return PoissonSolver(g.grid, method, tolerance).solve(g)


def hminus1_norm(f: ScalarField) -> float:
    """Discrete negative-Sobolev norm: sqrt(<psi, f~>) with -lap(psi) = f~.

    The mean of f is removed first, so constants map to zero.  Used as the
    convergence metric for the density across the diffusion-exponent ladder.
    """
    tilde = ScalarField(f.grid, f.values - f.values.mean())
    scale = float(np.abs(f.values).max())
    if float(np.abs(tilde.values).max()) <= 1e-14 * max(scale, 1.0):
        return 0.0  # constant up to roundoff
    psi = poisson_solve(tilde)
    val = integrate(ScalarField(f.grid, psi.values * tilde.values))
    return math.sqrt(max(val, 0.0))


def project_divergence_free(v: VectorField) -> tuple[VectorField, ScalarField]:
    """Split v into a centered-divergence-free part and a centered gradient.

    Returns (w, q) with v = w + grad(q), div(w) = 0 to machine precision and
    q mean-zero.  The potential solves div(grad(q)) = div(v) spectrally; the
    modes annihilated by the centered difference (constant and Nyquist) carry
    no divergence and are left untouched.
    """
    n, h = v.grid.n_cells, v.grid.h
    d = _div(v.x_values, v.y_values, h)
    s2 = _centered_symbol_sq(n, h)
    dhat = np.fft.rfft2(d)
    qhat = np.zeros_like(dhat)
    np.divide(dhat, -s2, out=qhat, where=s2 > 0)
    q = np.fft.irfft2(qhat, s=(n, n))
    w = VectorField(v.grid, v.x_values - _dx(q, h), v.y_values - _dy(q, h))
    return w, ScalarField(v.grid, q)
