"""Characteristic-flow integration with an exact hyperbolic drift.

The characteristics solve dX/dt = V, dV/dt = X - mu grad phi(t, X).  A
generic integrator loses digits at rate e^t against the exponentially
unstable linear part, so the splitting keeps the linear flow exact:

    kick(h/2, t) . hyperbolic drift(h) . kick(h/2, t+h)

The step is exactly the closed-form linear flow when the force vanishes,
and all integration error is proportional to the (small) force.  Tangent
maps are propagated by the exact factor matrices: x-only force shears
(unit determinant by construction) times the hyperbolic drift block
(determinant cosh^2 - sinh^2 = 1), so volume is preserved to rounding.

Force samplers are callables (t, x_array) -> force_array plus a
support_scale(t) used to size finite-difference offsets; they must be
safe for concurrent read-only evaluation.  Stepping a single
characteristic is sequential; ensembles are batched over the leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PhasePoint, SimConfig
from .linear import flow_arrays

__all__ = [
    "ZeroForce",
    "FrozenSourceForce",
    "force_jacobian_fd",
    "strang_step_arrays",
    "strang_step",
    "Trajectory",
    "integrate_characteristic",
    "duhamel_residual",
]

_FD_OFFSET_FRAC = 1e-4  # offset = 1e-4 * support scale for force Jacobians


class ZeroForce:
    """The vacuum field."""

    def __init__(self, radius0: float = 4.0):
        self.radius0 = radius0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def support_scale(self, t: float) -> float:
        return self.radius0 * math.exp(min(t, 700.0))


class FrozenSourceForce:
    """Time-independent field of a fixed SourceSet (direct summation)."""

    def __init__(self, sources, softening: float, radius0: float = 4.0):
        from .poisson import pairwise_force

        self._sources = sources
        self._softening = softening
        self._pairwise = pairwise_force
        self.radius0 = radius0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        return self._pairwise(flat, self._sources, self._softening).reshape(x.shape)

    def support_scale(self, t: float) -> float:
        return self.radius0 * math.exp(min(t, 700.0))


def force_jacobian_fd(force, t: float, x: np.ndarray) -> np.ndarray:
    """Central-difference force Jacobian dF_j/dx_a, shape (..., n, n).

    Samplers are black boxes (grid histories or particle sums), so the
    Jacobian for the tangent shear comes from central differences with an
    offset scaled to the sampler's support.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    delta = _FD_OFFSET_FRAC * force.support_scale(t)
    jac = np.empty(x.shape[:-1] + (n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = delta
        jac[..., :, a] = (force(t, x + e) - force(t, x - e)) / (2.0 * delta)
    return jac


def _check_finite(F: np.ndarray, t: float, x: np.ndarray):
    if not np.all(np.isfinite(F)):
        bad = np.argwhere(~np.isfinite(np.sum(np.atleast_2d(F), axis=-1)))
        where = np.atleast_2d(x)[bad[0][0]] if bad.size else x
        raise FloatingPointError(f"non-finite force at t={t}, x={np.asarray(where)}")


def _kick(x, v, J, t, h_half, mu, force):
    F = force(t, x)
    _check_finite(F, t, x)
    v = v - h_half * mu * F
    if J is not None:
        n = x.shape[-1]
        A = -h_half * mu * force_jacobian_fd(force, t, x)
        J = J.copy()
        J[..., n:, :] += A @ J[..., :n, :]
    return v, J


def _drift(x, v, J, h):
    x, v = flow_arrays(h, x, v)
    if J is not None:
        n = x.shape[-1]
        c, s = math.cosh(h), math.sinh(h)
        top = c * J[..., :n, :] + s * J[..., n:, :]
        bot = s * J[..., :n, :] + c * J[..., n:, :]
        J = np.concatenate([top, bot], axis=-2)
    return x, v, J


def strang_step_arrays(x, v, J, t, h, mu, force):
    """One kick-drift-kick step on batched arrays; returns (x, v, J).

    The field is frozen per half-kick: the opening kick samples the force
    at time t, the closing kick at t + h (positions are already the t + h
    positions there, so a self-consistent field loop needs no iteration).
    """
    if h > 0.05:
        raise ValueError("step size must be <= 0.05")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    v, J = _kick(x, v, J, t, 0.5 * h, mu, force)
    x, v, J = _drift(x, v, J, h)
    v, J = _kick(x, v, J, t + h, 0.5 * h, mu, force)
    return x, v, J


def strang_step(p: PhasePoint, J, t, h, mu, force):
    """Single-point wrapper over strang_step_arrays."""
    x, v, Jn = strang_step_arrays(p.x, p.v, J, t, h, mu, force)
    return PhasePoint(x, v), Jn


@dataclass(frozen=True)
class Trajectory:
    """Sampled characteristic: times plus phase points (and tangent maps)."""

    times: np.ndarray  # (K,)
    xs: np.ndarray  # (K, n)
    vs: np.ndarray  # (K, n)
    tangents: np.ndarray | None  # (K, 2n, 2n) or None

    def point(self, k: int) -> PhasePoint:
        return PhasePoint(self.xs[k], self.vs[k])

    def __len__(self) -> int:
        return self.times.size


def _step_times(t0: float, t1: float, dt: float):
    """Fixed steps of dt from t0 to t1, last step shortened."""
    total = t1 - t0
    n_full = int(math.floor(total / dt + 1e-12))
    times = [t0 + k * dt for k in range(n_full + 1)]
    if times[-1] < t1 - 1e-12:
        times.append(t1)
    return times


def integrate_characteristic(
    p0: PhasePoint,
    t0: float,
    t1: float,
    cfg: SimConfig,
    force,
    with_tangent: bool = False,
) -> Trajectory:
    """Repeated strang steps from t0 to t1, sampled every snapshot_stride steps."""
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    n = p0.dim
    x, v = p0.x.copy(), p0.v.copy()
    J = np.eye(2 * n) if with_tangent else None
    node_times = _step_times(t0, t1, cfg.dt)

    rec_t = [t0]
    rec_x = [x.copy()]
    rec_v = [v.copy()]
    rec_J = [J.copy()] if with_tangent else None
    for k in range(len(node_times) - 1):
        ta, tb = node_times[k], node_times[k + 1]
        x, v, J = strang_step_arrays(x, v, J, ta, tb - ta, cfg.mu, force)
        last = k + 1 == len(node_times) - 1
        if (k + 1) % cfg.snapshot_stride == 0 or last:
            rec_t.append(tb)
            rec_x.append(x.copy())
            rec_v.append(v.copy())
            if with_tangent:
                rec_J.append(J.copy())
    return Trajectory(
        np.asarray(rec_t),
        np.asarray(rec_x),
        np.asarray(rec_v),
        np.asarray(rec_J) if with_tangent else None,
    )


def duhamel_residual(traj: Trajectory, p0: PhasePoint, mu, force):
    """Max normalized residuals of the two variation-of-constants identities.

    Along the flow, X+V grows like e^t (x+v) minus an e^t-weighted force
    integral, and X-V decays like e^-t (x-v) plus an e^-t-weighted one.
    Both are evaluated at every sample with trapezoid time quadrature; the
    unstable residual is reported times e^-t and the stable one times e^t,
    i.e. relative to the growing/decaying factor.
    """
    ts = traj.times
    F = np.stack([force(t, x) for t, x in zip(ts, traj.xs)])
    g_minus = np.exp(-ts)[:, None] * mu * F  # integrand of the unstable identity
    g_plus = np.exp(ts)[:, None] * mu * F

    def cumtrapz(g):
        out = np.zeros_like(g)
        dt = np.diff(ts)[:, None]
        out[1:] = np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)
        return out

    I_minus = cumtrapz(g_minus)
    I_plus = cumtrapz(g_plus)
    et = np.exp(ts)[:, None]
    xv0_plus = p0.x + p0.v
    xv0_minus = p0.x - p0.v

    res_unstable = traj.xs + traj.vs + et * I_minus - et * xv0_plus
    res_stable = traj.xs - traj.vs - I_plus / et - xv0_minus / et
    max_unstable = np.max(np.abs(res_unstable) / et, axis=0)
    max_stable = np.max(np.abs(res_stable) * et, axis=0)
    return max_unstable, max_stable
