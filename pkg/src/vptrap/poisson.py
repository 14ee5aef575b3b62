"""Force fields from the free-space Green function, and the kernel bound.

Sign convention: the potential of a unit point mass solves Delta phi = delta,
so phi(x) = log|x| / (2 pi) in 2D and -1/(4 pi |x|) in 3D, and the force
kernels (with Plummer softening eps_s) are

    n=2:  grad phi(x) = sum_p w_p (x - x_p) / (2 pi (|x - x_p|^2 + eps_s^2))
    n=3:  grad phi(x) = sum_p w_p (x - x_p) / (4 pi (|x - x_p|^2 + eps_s^2)^{3/2})

Smooth Plummer softening (rather than a cutoff) keeps the tangent-map ODEs
well conditioned.  Only grad phi is ever consumed downstream; the 2D
logarithmic potential's lack of decay at infinity is therefore harmless.

Summation is direct and blocked: desk scale is N <= 1e5 and determinism
matters more than asymptotics.  Each target accumulates sources in a fixed
order, so results are reproducible bit-for-bit run to run.  The grid
convolution evaluates the same midpoint-quadrature kernel sum through an
FFT of the kernel offset table (free space, zero padding - not a spectral
solve), which is exact to rounding and fast enough for the 3D runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .core import GridField

__all__ = [
    "SourceSet",
    "SingularEvaluationError",
    "QuadratureToleranceError",
    "pairwise_force",
    "grid_force_from_density",
    "grid_potential_from_density",
    "kernel_bound_quadrature",
    "scaled_kernel_decay",
]


class SingularEvaluationError(ZeroDivisionError):
    """Unsoftened kernel evaluated at a coincident target/source pair."""


class QuadratureToleranceError(RuntimeError):
    """Adaptive quadrature missed its relative tolerance; carries the estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class SourceSet:
    """Weighted point masses: the discrete carrier of a spatial density."""

    positions: np.ndarray  # (M, n)
    weights: np.ndarray  # (M,)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pos.shape[0] != w.shape[0]:
            raise ValueError("positions and weights must have equal length")
        if pos.shape[1] not in (2, 3):
            raise ValueError("sources must live in R^2 or R^3")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(w))):
            raise ValueError("sources must be finite")
        pos, w = pos.copy(), w.copy()
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def total_weight(self) -> float:
        return float(self.weights.sum())


def _kernel_factor(r2: np.ndarray, softening: float, n: int) -> np.ndarray:
    """Scalar factor k(r) with force = k * displacement."""
    soft = r2 + softening**2
    if n == 2:
        return 1.0 / (2.0 * math.pi * soft)
    return 1.0 / (4.0 * math.pi * soft**1.5)


def pairwise_force(
    targets: np.ndarray,
    sources: SourceSet,
    softening: float,
    block: int = 1024,
) -> np.ndarray:
    """grad phi at each target by direct blocked summation over sources."""
    tg = np.atleast_2d(np.asarray(targets, dtype=float))
    n = sources.dim
    if tg.shape[1] != n:
        raise ValueError("target dimension does not match sources")
    if softening < 0:
        raise ValueError("softening must be >= 0")
    pos, w = sources.positions, sources.weights
    out = np.empty_like(tg)
    for start in range(0, tg.shape[0], block):
        t_blk = tg[start : start + block]
        d = t_blk[:, None, :] - pos[None, :, :]  # (B, M, n)
        r2 = np.einsum("bmj,bmj->bm", d, d)
        if softening == 0.0 and np.any(r2 == 0.0):
            raise SingularEvaluationError(
                "coincident target/source with zero softening"
            )
        k = w * _kernel_factor(r2, softening, n)
        out[start : start + block] = np.einsum("bm,bmj->bj", k, d)
    return out


def _offset_tables(m: int, cell: float, softening: float, n: int):
    """Kernel values on the (2m-1)^n grid of node-offset vectors."""
    offs = (np.arange(2 * m - 1) - (m - 1)) * cell
    mesh = np.meshgrid(*([offs] * n), indexing="ij")
    r2 = sum(g**2 for g in mesh)
    return mesh, r2


def grid_force_from_density(rho: GridField, softening: float | None = None) -> GridField:
    """Midpoint-quadrature convolution of rho against the softened force kernel.

    Evaluated at all grid nodes; the default softening is one cell width,
    tied to the grid so the pairwise/grid dual route converges as cells
    double.
    """
    if rho.is_vector:
        raise ValueError("density must be a scalar field")
    n = rho.dim
    m = rho.cells
    h = rho.cell_width
    eps = h if softening is None or softening == 0.0 else softening
    mesh, r2 = _offset_tables(m, h, eps, n)
    k = _kernel_factor(r2, eps, n) * h**n
    sl = (slice(m - 1, 2 * m - 1),) * n
    comps = []
    for a in range(n):
        table = mesh[a] * k
        comps.append(fftconvolve(rho.values, table, mode="full")[sl])
    return GridField(np.stack(comps, axis=-1), scale=rho.scale, dim=n)


def grid_potential_from_density(rho: GridField, softening: float | None = None) -> GridField:
    """Softened potential on the grid; its gradient matches the force kernel."""
    if rho.is_vector:
        raise ValueError("density must be a scalar field")
    n = rho.dim
    m = rho.cells
    h = rho.cell_width
    eps = h if softening is None or softening == 0.0 else softening
    _, r2 = _offset_tables(m, h, eps, n)
    soft = r2 + eps**2
    if n == 2:
        table = np.log(soft) / (4.0 * math.pi)
    else:
        table = -1.0 / (4.0 * math.pi * np.sqrt(soft))
    table = table * h**n
    sl = (slice(m - 1, 2 * m - 1),) * n
    vals = fftconvolve(rho.values, table, mode="full")[sl]
    return GridField(vals, scale=rho.scale, dim=n)


# ---------------------------------------------------------------------------
# the uniform kernel bound and its exponential rescaling


def _angular_integral(r: float, R: float, shift: float, n: int) -> float:
    """Integral over directions of 1/(shift + |x + r w|)^n with |x| = R."""
    if n == 3:
        if r == 0.0 or R == 0.0:
            rho0 = max(r, R)
            return 4.0 * math.pi / (shift + rho0) ** 3
        # substitute u = cos(angle): rho^2 = r^2 + R^2 + 2 r R u, closed form
        def antider(rho):
            s = shift + rho
            return -1.0 / s + shift / (2.0 * s**2)

        lo, hi = abs(r - R), r + R
        return 2.0 * math.pi / (r * R) * (antider(hi) - antider(lo))
    # n == 2: one smooth periodic integrand, quadrature over half the circle
    def f(theta):
        rho = math.sqrt(r * r + R * R + 2 * r * R * math.cos(theta))
        return 1.0 / (shift + rho) ** 2

    val, _ = integrate.quad(f, 0.0, math.pi, limit=200)
    return 2.0 * val


def _radial_kernel_integral(R: float, shift: float, n: int, rel_tol: float) -> float:
    """Adaptive polar quadrature of int dy / (|y|^{n-1} (shift + |x - y|)^n)."""
    def g(r):
        return _angular_integral(r, R, shift, n)

    split = max(shift, R)
    total = 0.0
    err = 0.0
    v1, e1 = integrate.quad(g, 0.0, split, limit=300)
    v2, e2 = integrate.quad(g, split, np.inf, limit=300)
    total, err = v1 + v2, e1 + e2
    if not math.isfinite(total) or (total > 0 and err > rel_tol * total):
        raise QuadratureToleranceError(
            f"requested relative tolerance {rel_tol} not reached "
            f"(error estimate {err:.3e} on {total:.6e})",
            estimate=total,
        )
    return total


def kernel_bound_quadrature(n: int, x, rel_tol: float = 1e-4) -> float:
    """int_{R^n} dy / (|y|^{n-1} (1 + |x + y|)^n), uniformly bounded in x.

    Polar reduction around y = 0 (the |y|^{n-1} singularity cancels against
    the volume element) with the outer integral split at |y| ~ max(1, |x|).
    """
    if n not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    R = float(np.linalg.norm(np.asarray(x, dtype=float)))
    return _radial_kernel_integral(R, 1.0, n, rel_tol)


def scaled_kernel_decay(n: int, t: float, x, rel_tol: float = 1e-3) -> float:
    """int dy / (|y|^{n-1} (e^t + |x - y|)^n), checked against its rescaling.

    The substitution y = e^t y' gives exactly e^{-(n-1)t} times the t = 0
    kernel bound at x / e^t; both routes are computed and must agree to
    rel_tol before the direct value is returned.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    R = float(np.linalg.norm(np.asarray(x, dtype=float)))
    et = math.exp(t)
    direct = _radial_kernel_integral(R, et, n, rel_tol / 10.0)
    reference = math.exp(-(n - 1) * t) * kernel_bound_quadrature(
        n, np.asarray(x, dtype=float) / et, rel_tol=rel_tol / 10.0
    )
    if abs(direct - reference) > rel_tol * abs(reference):
        raise ArithmeticError(
            "change-of-variables identity violated: "
            f"direct {direct:.6e} vs rescaled {reference:.6e}"
        )
    return direct
