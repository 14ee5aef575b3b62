"""Modified vector-field coefficients in 2D: sources, transport, bootstrap.

In two dimensions the stable/unstable decomposition of d_v costs a factor
e^t that the energy estimate cannot absorb, so each non-stable field Z^i
in {U_1, U_2, L, R_12} acquires coefficients phi_k^i(t, x, v) subtracting
stable-field multiples.  The coefficients vanish at t = 0, are identically
zero for stable base fields, and are transported along the nonlinear
characteristics with source

    -(mu/2) e^t d_xk (Z^i phi + c_i phi),   c_i = -2 for Z^i = L, else 0,

so the slowest-decaying commutator terms cancel.  The e^t weight makes the
source order one in time: the coefficients grow linearly in t, in contrast
with the logarithmic growth familiar from flat-space modifications.

Transport quadrature runs along each particle's stored trajectory at
snapshot resolution.  Coefficient gradients come from a per-particle
bundle of 4 offset characteristics re-integrated through the frozen
recorded field: the reported statistic is the largest directional
derivative along the transported bundle directions, a desk-scale
surrogate for |grad phi_k^i| (accuracy needs are modest: these feed bound
checks, not convergence studies).  Only the |alpha| = 0 instances of the
coefficient bounds are checked; that restriction is a deliberate scope
cut, labelled as such in the report.

A deterministic particle subsample (first `n_track` indices) stands in
for the sup over all particles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridField, SimConfig, grid_interpolate
from .dynamics import _drift, _kick, _step_times
from .kinetic import DiagnosticsReport, FieldHistory, HistoryForce
from .vfalgebra import MACRO, VectorFieldId, apply_macroscopic, deriv4, rotation, scaling, unstable

__all__ = [
    "BASE_FIELDS_2D",
    "CoefficientSeries",
    "BootstrapMargins",
    "modified_source",
    "transport_coefficients",
    "bootstrap_check",
    "coefficient_growth_slopes",
    "write_coefficients_csv",
]

BASE_FIELDS_2D = (unstable(1), unstable(2), scaling(), rotation(1, 2)[0])


def _scaling_shift(Z: VectorFieldId) -> float:
    return -2.0 if Z.kind == "L" else 0.0


@dataclass
class CoefficientSeries:
    """phi_k^i time series for a tracked particle subsample.

    entries[(label, k)] has shape (K, P); grads holds the bundle
    directional-derivative magnitudes on the same layout.
    """

    times: np.ndarray
    entries: dict
    grads: dict
    particle_ids: np.ndarray

    def channels(self):
        return list(self.entries)

    def max_abs(self, label: str, k: int) -> np.ndarray:
        return np.abs(self.entries[(label, k)]).max(axis=1)


@dataclass(frozen=True)
class BootstrapMargins:
    """B2-B4 statistics normalized so that < 1 means the bound holds."""

    b2: float
    b3: float
    b4: float

    def all_pass(self) -> bool:
        return self.b2 < 1.0 and self.b3 < 1.0 and self.b4 < 1.0


def modified_source(
    Zi: VectorFieldId, phi_grid: GridField, t: float, k: int, mu: int
) -> GridField:
    """Source -(mu/2) e^t d_xk(Z^i phi + c_i phi) on the grid.

    Z^i acts macroscopically (on x only); both derivatives use the shared
    4th-order stencils.
    """
    if Zi.kind == "S":
        raise ValueError("stable base fields carry no modification")
    if phi_grid.is_vector:
        raise ValueError("phi must be a scalar potential grid")
    term = apply_macroscopic(Zi.with_scope(MACRO), phi_grid, t).values
    shift = _scaling_shift(Zi)
    if shift:
        term = term + shift * phi_grid.values
    h_xi = 2.0 / phi_grid.cells
    dk = deriv4(term, k - 1, h_xi) / phi_grid.scale
    vals = -(mu / 2.0) * math.exp(t) * dk
    return GridField(vals, scale=phi_grid.scale, dim=phi_grid.dim)


def _interp_series(grids, scales, dim, positions):
    """Evaluate per-snapshot scalar grids at per-snapshot positions (K, P)."""
    K, P = positions.shape[0], positions.shape[1]
    out = np.empty((K, P))
    for j in range(K):
        field = GridField(grids[j], scale=float(scales[j]), dim=dim)
        out[j] = grid_interpolate(field, positions[j])
    return out


def _cumtrapz(values, times):
    out = np.zeros_like(values)
    dt = np.diff(times)[:, None]
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0)
    return out


def _bundle_trajectories(history: FieldHistory, z0x, z0v, mu, dt, offset0):
    """Re-integrate base + 4 offset characteristics through the frozen field.

    Returns positions and phase points at snapshot times, shapes
    (K, 5, P, n) for x and v.  The initial offsets sit along the four
    phase-space axes with magnitude offset0; transported, they track
    ~ offset0 * e^t, i.e. a fixed fraction of the grid scale.
    """
    sampler = HistoryForce(history)
    P, n = z0x.shape
    starts_x = [z0x]
    starts_v = [z0v]
    for a in range(n):
        e = np.zeros(n)
        e[a] = offset0
        starts_x.append(z0x + e)
        starts_v.append(z0v)
    for a in range(n):
        e = np.zeros(n)
        e[a] = offset0
        starts_x.append(z0x)
        starts_v.append(z0v + e)
    x = np.concatenate(starts_x)  # (5P, n)
    v = np.concatenate(starts_v)

    times = history.times
    node_times = _step_times(0.0, history.t_end, dt)
    rec_x = [x.reshape(2 * n + 1, P, n).copy()]
    rec_v = [v.reshape(2 * n + 1, P, n).copy()]
    k_snap = 1
    for k in range(len(node_times) - 1):
        ta, tb = node_times[k], node_times[k + 1]
        v, _ = _kick(x, v, None, ta, 0.5 * (tb - ta), mu, sampler)
        x, v, _ = _drift(x, v, None, tb - ta)
        v, _ = _kick(x, v, None, tb, 0.5 * (tb - ta), mu, sampler)
        if k_snap < times.size and abs(tb - times[k_snap]) < 1e-9:
            rec_x.append(x.reshape(2 * n + 1, P, n).copy())
            rec_v.append(v.reshape(2 * n + 1, P, n).copy())
            k_snap += 1
    return np.asarray(rec_x), np.asarray(rec_v)


def transport_coefficients(
    history: FieldHistory,
    mu: int,
    cfg: SimConfig,
    n_track: int = 256,
    bundle_offset_frac: float = 1e-4,
) -> CoefficientSeries:
    """Trapezoid transport of phi_k^i along stored trajectories, from 0.

    Needs a recording with potential snapshots and particle trajectories
    (run_simulation(record_extras=True)).
    """
    if cfg.dim != 2:
        raise ValueError("modified coefficients are a 2D construction")
    if history.potentials is None:
        raise ValueError("recording is missing potential snapshots")
    if history.traj_x is None:
        raise ValueError("recording is missing particle trajectories")
    times = history.times
    K = times.size
    P = min(n_track, history.traj_x.shape[1])
    track = history.traj_x[:, :P]  # (K, P, n)

    source_grids = {}
    for Z in BASE_FIELDS_2D:
        for k in (1, 2):
            grids = []
            for j in range(K):
                phi_grid = history.potential_field(j)
                grids.append(
                    modified_source(Z, phi_grid, float(times[j]), k, mu).values
                )
            source_grids[(Z.label(), k)] = grids

    entries = {}
    for key, grids in source_grids.items():
        g = _interp_series(grids, history.scales, history.dim, track)
        entries[key] = _cumtrapz(g, times)

    # gradients from the offset bundle, one re-integration for all members
    offset0 = bundle_offset_frac * float(history.scales[0])
    bx, bv = _bundle_trajectories(
        history, track[0].copy(), history.traj_v[0, :P].copy(), mu, cfg.dt, offset0
    )
    sep = np.sqrt(
        ((bx[:, 1:] - bx[:, :1]) ** 2).sum(axis=-1)
        + ((bv[:, 1:] - bv[:, :1]) ** 2).sum(axis=-1)
    )  # (K, 4, P)
    grads = {}
    for key, grids in source_grids.items():
        phis = np.empty((K, 5, P))
        for d in range(5):
            g = _interp_series(grids, history.scales, history.dim, bx[:, d])
            phis[:, d] = _cumtrapz(g, times)
        diff = np.abs(phis[:, 1:] - phis[:, :1])
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(sep > 0, diff / sep, 0.0)
        grads[key] = ratio.max(axis=1)  # (K, P)

    return CoefficientSeries(
        times=times.copy(),
        entries=entries,
        grads=grads,
        particle_ids=np.arange(P),
    )


def bootstrap_check(
    coeffs: CoefficientSeries, report: DiagnosticsReport, eps: float
) -> BootstrapMargins:
    """B2/B3/B4 margins; values >= 1 are reported failures, not errors.

    B4 consumes the report's own sup-force series, so the margin agrees
    bitwise with the kinetic diagnostics.
    """
    root = math.sqrt(eps)
    denom2 = root * (1.0 + coeffs.times)[:, None]
    b2 = max(
        float(np.max(np.abs(vals) / denom2)) for vals in coeffs.entries.values()
    )
    b3 = max(float(np.max(g)) for g in coeffs.grads.values()) / root
    sup_force = report.columns["sup_force"]
    b4 = float(np.max(sup_force * np.exp(report.times))) / root
    return BootstrapMargins(b2=b2, b3=b3, b4=b4)


def coefficient_growth_slopes(coeffs: CoefficientSeries) -> dict:
    """Least-squares slope of max_p |phi_k^i(t)| against t, per channel."""
    out = {}
    t = coeffs.times
    A = np.stack([t, np.ones_like(t)], axis=1)
    for key in coeffs.entries:
        y = coeffs.max_abs(*key)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        out[key] = float(coef[0])
    return out


def write_coefficients_csv(coeffs: CoefficientSeries, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,particle_id,base_field,k,phi_value\n")
        for (label, k), vals in coeffs.entries.items():
            for j, t in enumerate(coeffs.times):
                for p_idx, pid in enumerate(coeffs.particle_ids):
                    fh.write(
                        f"{t:.17g},{pid},{label},{k},{vals[j, p_idx]:.17g}\n"
                    )
