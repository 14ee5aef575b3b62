"""Trapped set / stable manifold via the teleological fixed point.

A phase point is trapped iff the unstable component closes the loop

    x + v = integral_0^infty e^{-t} mu grad phi(t, X(t, x, v)) dt  =: phi_map(x, v)

(phi_map here is the forward-evolution map on phase points; the external
potential of the model is a different object and never called phi_map).
The recorded field history is treated as external data - a decaying
perturbation of the linearized particle system - and the infinite integral
is truncated at the history horizon, whose tail is bounded by
sup|grad phi(T)| e^{-T}.  Queries outside the history's spatial grid
return zero force, a modeling approximation justified by the spatial
decay of the field.

Picard iteration v <- -x + phi_map(x, v) contracts at rate O(sqrt(eps)),
so it converges unconditionally at desk scale; defects and contraction
ratios are measured and reported rather than assumed.  Manifold sampling
is embarrassingly parallel over grid points; the history is shared
read-only.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import PhasePoint, SimConfig
from .dynamics import _drift, _kick, _step_times
from .kinetic import FieldHistory, HistoryForce

__all__ = [
    "ManifoldPoint",
    "EscapeResult",
    "EscapedDuringEvaluation",
    "PicardConvergenceError",
    "NoEscapeError",
    "evaluate_phi",
    "psi_defect",
    "solve_trapped_velocity",
    "sample_manifold",
    "invariance_check",
    "escape_test",
    "contraction_probe",
    "write_manifold_csv",
]


class EscapedDuringEvaluation(RuntimeError):
    def __init__(self, time: float):
        super().__init__(f"escaped during evaluation at t={time:.3f}")
        self.time = time


class PicardConvergenceError(RuntimeError):
    def __init__(self, iterations: int, last_ratio: float):
        super().__init__(
            f"no convergence in {iterations} iterations "
            f"(last contraction ratio {last_ratio:.3g})"
        )
        self.last_ratio = last_ratio


class NoEscapeError(RuntimeError):
    """Perturbation too small to escape before the horizon."""


@dataclass(frozen=True)
class ManifoldPoint:
    """A solved sample of the trapped set, with its certificate numbers."""

    x: np.ndarray
    v: np.ndarray
    phi: np.ndarray  # the fixed-point value of the future force integral
    defect: float  # |x + v - phi| re-evaluated at the solution
    iterations: int
    contraction: float  # largest observed ratio of successive Picard updates
    error: str | None = None

    @property
    def point(self) -> PhasePoint:
        return PhasePoint(self.x, self.v)

    @property
    def converged(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class EscapeResult:
    escape_time: float
    growth_slope: float


def _integrate_collecting(x, v, sampler, mu, dt, t_end, check_escape=True):
    """Step a single phase point, accumulating the e^{-t}-weighted force.

    Returns (x, v, phi, norms, times); phi is the trapezoid of
    e^{-t} mu F(t, X(t)) over the step grid.
    """
    times = _step_times(0.0, t_end, dt)
    phi = np.zeros_like(np.asarray(x, dtype=float))
    g_prev = math.exp(-times[0]) * mu * sampler(times[0], x)
    norms = [math.hypot(np.linalg.norm(x), np.linalg.norm(v))]
    prev_xnorm = np.linalg.norm(x)
    for k in range(len(times) - 1):
        ta, tb = times[k], times[k + 1]
        v, _ = _kick(x, v, None, ta, 0.5 * (tb - ta), mu, sampler)
        x, v, _ = _drift(x, v, None, tb - ta)
        v, _ = _kick(x, v, None, tb, 0.5 * (tb - ta), mu, sampler)
        g = math.exp(-tb) * mu * sampler(tb, x)
        phi = phi + 0.5 * (tb - ta) * (g + g_prev)
        g_prev = g
        norms.append(math.hypot(np.linalg.norm(x), np.linalg.norm(v)))
        xnorm = np.linalg.norm(x)
        if check_escape:
            outside = np.max(np.abs(x)) > sampler.support_scale(tb)
            if outside and xnorm > prev_xnorm:
                raise EscapedDuringEvaluation(tb)
        prev_xnorm = xnorm
    return x, v, phi, np.asarray(norms), np.asarray(times)


def evaluate_phi(
    p: PhasePoint, history: FieldHistory, mu: int, cfg: SimConfig, t_shift: float = 0.0
) -> np.ndarray:
    """Future force integral along the characteristic from p.

    The tail beyond the history horizon is treated as zero; shifting by
    t_shift evaluates against the time-translated history (used by the
    invariance check).
    """
    sampler = HistoryForce(history, t_shift=t_shift)
    t_end = history.t_end - t_shift
    if t_end <= 0:
        raise ValueError("history does not cover the requested window")
    _, _, phi, _, _ = _integrate_collecting(
        p.x.copy(), p.v.copy(), sampler, mu, cfg.dt, t_end
    )
    return phi


def psi_defect(p: PhasePoint, history: FieldHistory, mu: int, cfg: SimConfig) -> np.ndarray:
    """x + v minus the future force integral; zero exactly on the manifold."""
    return p.x + p.v - evaluate_phi(p, history, mu, cfg)


def solve_trapped_velocity(
    x,
    history: FieldHistory,
    mu: int,
    cfg: SimConfig,
    tol: float = 1e-10,
    max_iter: int = 100,
    v0=None,
) -> ManifoldPoint:
    """Picard iteration v <- -x + phi_map(x, v) from v0 = -x."""
    x = np.asarray(x, dtype=float)
    v = -x.copy() if v0 is None else np.asarray(v0, dtype=float).copy()
    ratio_max = 0.0
    prev_delta = None
    phi = np.zeros_like(x)
    for it in range(1, max_iter + 1):
        phi = evaluate_phi(PhasePoint(x, v), history, mu, cfg)
        v_new = -x + phi
        delta = float(np.linalg.norm(v_new - v))
        if prev_delta is not None and prev_delta > 0:
            ratio_max = max(ratio_max, delta / prev_delta)
        prev_delta = delta
        v = v_new
        if delta < tol:
            defect = float(
                np.linalg.norm(
                    x + v - evaluate_phi(PhasePoint(x, v), history, mu, cfg)
                )
            )
            return ManifoldPoint(
                x=x, v=v, phi=phi, defect=defect, iterations=it,
                contraction=ratio_max,
            )
    raise PicardConvergenceError(max_iter, ratio_max)


def _solve_entry(args):
    x, history, mu, cfg, tol, max_iter = args
    try:
        return solve_trapped_velocity(x, history, mu, cfg, tol=tol, max_iter=max_iter)
    except (PicardConvergenceError, EscapedDuringEvaluation) as exc:
        n = len(x)
        nanv = np.full(n, np.nan)
        return ManifoldPoint(
            x=np.asarray(x, dtype=float), v=nanv, phi=nanv, defect=math.inf,
            iterations=0, contraction=math.nan, error=str(exc),
        )


def sample_manifold(
    xs,
    history: FieldHistory,
    mu: int,
    cfg: SimConfig,
    tol: float = 1e-10,
    max_iter: int = 100,
    workers: int = 1,
) -> list:
    """Solve the trapped velocity over an x-grid; failures recorded, not fatal."""
    jobs = [(np.asarray(x, dtype=float), history, mu, cfg, tol, max_iter) for x in xs]
    if workers <= 1:
        return [_solve_entry(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_entry, jobs))


def invariance_check(
    m: ManifoldPoint, history: FieldHistory, mu: int, cfg: SimConfig, dt_shift: float
) -> float:
    """Defect of the time-dt_shift image against the shifted history.

    The manifold is invariant: flowing a solved point forward and
    re-evaluating the future integral with the history shifted by the same
    amount must leave the defect at solver-tolerance size (amplified by
    e^{dt_shift}) plus quadrature error.
    """
    if dt_shift > history.t_end / 4.0:
        raise ValueError("dt_shift must be <= a quarter of the history horizon")
    sampler = HistoryForce(history)
    x, v, _, _, _ = _integrate_collecting(
        m.x.copy(), m.v.copy(), sampler, mu, cfg.dt, dt_shift
    )
    shifted = evaluate_phi(PhasePoint(x, v), history, mu, cfg, t_shift=dt_shift)
    return float(np.linalg.norm(x + v - shifted))


def contraction_probe(
    x, history: FieldHistory, mu: int, cfg: SimConfig, offset: float = 1e-4
) -> float:
    """Finite-difference Lipschitz estimate of v -> phi_map(x, v)."""
    x = np.asarray(x, dtype=float)
    v = -x
    n = x.size
    best = 0.0
    base = evaluate_phi(PhasePoint(x, v), history, mu, cfg)
    for a in range(n):
        e = np.zeros(n)
        e[a] = offset
        plus = evaluate_phi(PhasePoint(x, v + e), history, mu, cfg)
        best = max(best, float(np.linalg.norm(plus - base)) / offset)
    return best


def escape_test(
    m: ManifoldPoint,
    delta: float,
    history: FieldHistory,
    mu: int,
    cfg: SimConfig,
    threshold: float = 10.0,
    horizon: float | None = None,
) -> EscapeResult:
    """Perturb along the unstable direction and time the escape.

    The perturbed point leaves with log-slope ~ +1 (the positive Lyapunov
    exponent); the crossing of |(X, V)| > threshold happens near
    log(threshold * sqrt(2) / delta) for small delta.  Beyond the history
    horizon the force is zero, so integration may continue into the
    asymptotically linear regime.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if horizon is None:
        horizon = max(history.t_end, math.log(2.0 * threshold / delta) + 3.0)
    sampler = HistoryForce(history)
    x = m.x.copy()
    v = m.v.copy()
    v[0] += delta
    _, _, _, norms, times = _integrate_collecting(
        x, v, sampler, mu, cfg.dt, horizon, check_escape=False
    )
    above = np.nonzero(norms > threshold)[0]
    if above.size == 0:
        raise NoEscapeError(
            f"did not escape before t={horizon:.2f} (delta may be too small)"
        )
    k_cross = int(above[0])
    t_escape = float(times[k_cross])
    window = (norms >= threshold / math.e) & (np.arange(norms.size) <= k_cross)
    tw = times[window]
    yw = np.log(norms[window])
    A = np.stack([tw, np.ones_like(tw)], axis=1)
    coef, *_ = np.linalg.lstsq(A, yw, rcond=None)
    return EscapeResult(escape_time=t_escape, growth_slope=float(coef[0]))


def write_manifold_csv(points: list, path):
    """One row per sample: positions, velocities, phi values, defect, iters."""
    if not points:
        raise ValueError("no manifold points to write")
    n = points[0].x.size
    cols = (
        [f"x{i}" for i in range(1, n + 1)]
        + [f"v{i}" for i in range(1, n + 1)]
        + [f"phi{i}" for i in range(1, n + 1)]
        + ["defect", "iters"]
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for p in points:
            row = (
                [f"{val:.17g}" for val in p.x]
                + [f"{val:.17g}" for val in p.v]
                + [f"{val:.17g}" for val in p.phi]
                + [f"{p.defect:.17g}", str(p.iterations)]
            )
            fh.write(",".join(row) + "\n")
