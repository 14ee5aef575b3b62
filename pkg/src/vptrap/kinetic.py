"""Nonlinear solver loop: sample, deposit, solve, push; plus diagnostics.

The distribution function is carried by weighted particles (weights are
constants of motion and never modified, so mass conservation is exact by
construction).  Each step deposits the spatial density on the co-expanding
grid with a mass-normalized gaussian kernel, solves for the force by the
free-space kernel convolution, and pushes every particle with the exact
hyperbolic splitting, the field frozen per half-kick.  Because positions
are unchanged by kicks, the closing half-kick can use the field deposited
from the post-drift positions: the loop is self-consistent without
iteration and remains a genuine kick-drift-kick step.

Deposit accumulates per-chunk partial sums merged in a fixed order; push
is batched over particles; diagnostics assembly is single threaded.
Identical inputs give identical outputs.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .core import (
    DecaySeries,
    GridField,
    SimConfig,
    grid_interpolate,
    grid_scale,
    node_radii,
)
from .dynamics import _drift, _kick, _step_times
from .linear import InitialData
from .poisson import grid_force_from_density, grid_potential_from_density
from .vfalgebra import lambda_fields

__all__ = [
    "ParticleEnsemble",
    "FieldHistory",
    "HistoryForce",
    "DiagnosticsReport",
    "FitResult",
    "EnergyEstimate",
    "DepositError",
    "sample_initial",
    "deposit_density",
    "run_simulation",
    "estimate_energy_first_order",
    "weighted_sup_density",
    "decay_fit",
    "write_history",
    "read_history",
]

_MAGIC = b"VPTRAP01"
_DEPOSIT_TRUNC_SIGMAS = 4.0  # stamp truncation; normalization restores mass
_OUTSIDE_WARN = 1e-3
_OUTSIDE_ERROR = 5e-2
_REJECTION_MIN_EFFICIENCY = 0.01


class DepositError(RuntimeError):
    """Too much particle mass left the grid box."""


@dataclass
class ParticleEnsemble:
    """Weighted phase-space samples with tangent maps and origin points."""

    positions: np.ndarray  # (N, n)
    velocities: np.ndarray  # (N, n)
    weights: np.ndarray  # (N,)
    tangents: np.ndarray | None  # (N, 2n, 2n)
    origins_x: np.ndarray  # (N, n)
    origins_v: np.ndarray  # (N, n)

    def __post_init__(self):
        N, n = self.positions.shape
        if n not in (2, 3):
            raise ValueError("particles must live in R^2 or R^3")
        for name in ("velocities", "origins_x", "origins_v"):
            if getattr(self, name).shape != (N, n):
                raise ValueError(f"{name} shape mismatch")
        if self.weights.shape != (N,):
            raise ValueError("weights shape mismatch")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if self.tangents is not None and self.tangents.shape != (N, 2 * n, 2 * n):
            raise ValueError("tangents shape mismatch")

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def mass(self) -> float:
        return float(self.weights.sum())

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(
            self.positions.copy(),
            self.velocities.copy(),
            self.weights.copy(),
            None if self.tangents is None else self.tangents.copy(),
            self.origins_x.copy(),
            self.origins_v.copy(),
        )


def sample_initial(f0: InitialData, N: int, seed: int) -> ParticleEnsemble:
    """Draw N i.i.d. samples from f0/mass; equal weights mass/N.

    Gaussian kinds use the inverse CDF on uniforms, the bump kind batched
    rejection from its support box.  A fixed seed gives identical
    ensembles.
    """
    if N < 1:
        raise ValueError("need at least one particle")
    mass = f0.mass()
    if mass == 0.0:
        # vacuum data: sample the unit-amplitude shape, carry zero weights
        from dataclasses import replace

        f0 = replace(f0, amplitude=1.0)
    elif not mass > 0:
        raise ValueError("initial data must have nonnegative mass")
    n = f0.dim
    rng = np.random.default_rng(seed)
    cx, cv = np.asarray(f0.center_x), np.asarray(f0.center_v)

    if f0.kind in ("gaussian", "product"):
        u = rng.random((N, 2 * n))
        u = np.clip(u, 2.0**-53, 1.0 - 2.0**-53)
        z = ndtri(u)
        x = cx + f0.width_x * z[:, :n]
        v = cv + f0.width_v * z[:, n:]
    else:
        rx, rv = f0.support_radii()
        box_volume = (2 * rx) ** n * (2 * rv) ** n
        xs, vs = [], []
        got, trials = 0, 0
        batch = max(4 * N, 8192)
        while got < N:
            px = cx + rx * (2.0 * rng.random((batch, n)) - 1.0)
            pv = cv + rv * (2.0 * rng.random((batch, n)) - 1.0)
            accept = rng.random(batch) * f0.amplitude < f0.value(px, pv)
            xs.append(px[accept])
            vs.append(pv[accept])
            got += int(accept.sum())
            trials += batch
            if trials >= batch and got / trials < _REJECTION_MIN_EFFICIENCY:
                raise RuntimeError(
                    f"rejection efficiency {got / trials:.2%} below 1% "
                    f"(envelope volume {box_volume:.3g})"
                )
        x = np.concatenate(xs)[:N]
        v = np.concatenate(vs)[:N]

    weights = np.full(N, mass / N)
    tangents = np.broadcast_to(np.eye(2 * n), (N, 2 * n, 2 * n)).copy()
    return ParticleEnsemble(x, v, weights, tangents, x.copy(), v.copy())


# ---------------------------------------------------------------------------
# density deposit


@dataclass(frozen=True)
class DepositStats:
    outside_fraction: float


def _deposit_arrays(positions, weights, t, cfg: SimConfig):
    n = cfg.dim
    m = cfg.grid_cells
    s = grid_scale(t, cfg)
    h = 2.0 / m  # rescaled cell width
    h_phys = 2.0 * s / m
    bw = 1.2 * h
    W = int(math.ceil(_DEPOSIT_TRUNC_SIGMAS * 1.2))
    offs = np.arange(-W, W + 1)

    xi = positions / s
    u = (xi + 1.0) / h - 0.5  # node-index coordinates
    i0 = np.rint(u).astype(np.int64)

    rho_flat = np.zeros(m**n)
    deposited = 0.0
    chunk = max(1, 2_000_000 // (2 * W + 1) ** n)
    for start in range(0, positions.shape[0], chunk):
        sl = slice(start, start + chunk)
        uc, ic, wc = u[sl], i0[sl], weights[sl]
        K, I = [], []
        all_inside = True
        for a in range(n):
            idx = ic[:, a, None] + offs  # (C, w)
            d = (idx - uc[:, a, None]) * h
            K.append(np.exp(-(d**2) / (2.0 * bw**2)))
            I.append(idx)
            all_inside = all_inside and bool(
                (ic[:, a].min() >= W) and (ic[:, a].max() < m - W)
            )
        S = np.prod([k.sum(axis=1) for k in K], axis=0)
        c = wc / (S * h_phys**n)
        if n == 2:
            vals = c[:, None, None] * K[0][:, :, None] * K[1][:, None, :]
            flat = I[0][:, :, None] * m + I[1][:, None, :]
        else:
            vals = (
                c[:, None, None, None]
                * K[0][:, :, None, None]
                * K[1][:, None, :, None]
                * K[2][:, None, None, :]
            )
            flat = (
                I[0][:, :, None, None] * m + I[1][:, None, :, None]
            ) * m + I[2][:, None, None, :]
        if all_inside:
            # fast path: no stamp clips the boundary
            deposited += float(wc.sum())
            rho_flat += np.bincount(
                flat.ravel(), weights=vals.ravel(), minlength=m**n
            )
        else:
            valid = np.ones(vals.shape, dtype=bool)
            for a in range(n):
                shape = [1] * vals.ndim
                shape[0] = vals.shape[0]
                shape[1 + a] = 2 * W + 1
                valid &= ((I[a] >= 0) & (I[a] < m)).reshape(shape)
            vals_in = np.where(valid, vals, 0.0)
            deposited += vals_in.sum() * h_phys**n
            rho_flat += np.bincount(
                flat.ravel()[valid.ravel()],
                weights=vals.ravel()[valid.ravel()],
                minlength=m**n,
            )
    total = float(weights.sum())
    outside = max(0.0, total - deposited) / total if total > 0 else 0.0
    field = GridField(rho_flat.reshape((m,) * n), scale=s, dim=n)
    return field, DepositStats(outside_fraction=outside)


def deposit_density(ens: ParticleEnsemble, t: float, cfg: SimConfig, return_stats=False):
    """Gaussian kernel deposit in rescaled coordinates, bandwidth 1.2 cells.

    Each particle's truncated stamp is normalized so the grid integral of
    the deposit equals the total weight exactly (up to mass that falls
    outside the box, which is tracked and bounded).
    """
    field, stats = _deposit_arrays(ens.positions, ens.weights, t, cfg)
    if stats.outside_fraction > _OUTSIDE_ERROR:
        raise DepositError(
            f"{stats.outside_fraction:.1%} of particle mass outside the grid at t={t}"
        )
    return (field, stats) if return_stats else field


# ---------------------------------------------------------------------------
# recorded field history


@dataclass(frozen=True)
class FieldHistory:
    """Time-stamped force-field snapshots with space-time interpolation.

    Optionally carries potential grids and per-snapshot particle
    trajectories (needed by the modified-coefficient transport); the binary
    file format stores force grids only.
    """

    times: np.ndarray  # (K,)
    scales: np.ndarray  # (K,)
    grids: tuple  # K arrays of shape (m,)*n + (n,)
    dim: int
    cells: int
    potentials: tuple | None = None
    traj_x: np.ndarray | None = None  # (K, N, n)
    traj_v: np.ndarray | None = None

    def __post_init__(self):
        if len(self.times) != len(self.grids) or len(self.times) != len(self.scales):
            raise ValueError("times, scales and grids must align")
        if self.times.size and not np.all(np.diff(self.times) > 0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def force_field(self, k: int) -> GridField:
        return GridField(self.grids[k], scale=float(self.scales[k]), dim=self.dim)

    def potential_field(self, k: int) -> GridField:
        if self.potentials is None:
            raise ValueError("history carries no potential snapshots")
        return GridField(self.potentials[k], scale=float(self.scales[k]), dim=self.dim)

    def force_at(self, t: float, points: np.ndarray) -> np.ndarray:
        """Space-time interpolated force; zero outside support in space or time."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ts = self.times
        if t > ts[-1] + 1e-12 or t < ts[0] - 1e-12:
            return np.zeros_like(pts)
        k = int(np.searchsorted(ts, t, side="right") - 1)
        k = min(max(k, 0), ts.size - 1)
        Fa = grid_interpolate(self.force_field(k), pts)
        if k == ts.size - 1 or t <= ts[k] + 1e-15:
            return Fa
        theta = (t - ts[k]) / (ts[k + 1] - ts[k])
        Fb = grid_interpolate(self.force_field(k + 1), pts)
        return (1.0 - theta) * Fa + theta * Fb

    def sampler(self) -> "HistoryForce":
        return HistoryForce(self)


class HistoryForce:
    """ForceSampler view of a FieldHistory (read-only, share freely)."""

    def __init__(self, history: FieldHistory, t_shift: float = 0.0):
        self.history = history
        self.t_shift = t_shift
        self._radius0 = float(history.scales[0] * math.exp(-history.times[0]))

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        out = self.history.force_at(t + self.t_shift, flat)
        return out.reshape(x.shape)

    def support_scale(self, t: float) -> float:
        return self._radius0 * math.exp(min(t + self.t_shift, 700.0))


def write_history(path, hist: FieldHistory):
    """Binary snapshot file: magic, dims, then (time, scale, force grid) rows."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIQ", hist.dim, hist.cells, len(hist.times)))
        for t, s, g in zip(hist.times, hist.scales, hist.grids):
            fh.write(struct.pack("<dd", float(t), float(s)))
            fh.write(np.ascontiguousarray(g, dtype="<f8").tobytes())


def read_history(path) -> FieldHistory:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"not a history file (magic {magic!r})")
        dim, cells, count = struct.unpack("<IIQ", fh.read(16))
        shape = (cells,) * dim + (dim,)
        nbytes = 8 * cells**dim * dim
        times, scales, grids = [], [], []
        for _ in range(count):
            t, s = struct.unpack("<dd", fh.read(16))
            buf = fh.read(nbytes)
            if len(buf) != nbytes:
                raise ValueError("truncated history file")
            grids.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
            times.append(t)
            scales.append(s)
    return FieldHistory(
        np.asarray(times), np.asarray(scales), tuple(grids), dim=dim, cells=cells
    )


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float


@dataclass
class EnergyEstimate:
    values: dict
    stderrs: dict
    skipped: int


@dataclass
class DiagnosticsReport:
    """Per-snapshot diagnostic series sharing one time base."""

    times: np.ndarray
    columns: dict  # name -> (K,) array; insertion order is the CSV order
    warnings: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def series(self, name: str) -> DecaySeries:
        return DecaySeries(self.times, self.columns[name])

    def column_names(self) -> list:
        return list(self.columns)

    def to_csv(self, path):
        names = self.column_names()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t," + ",".join(names) + "\n")
            for k, t in enumerate(self.times):
                row = [f"{t:.17g}"] + [f"{self.columns[c][k]:.17g}" for c in names]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsReport":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if header[0] != "t":
                raise ValueError("diagnostics CSV must start with a t column")
            rows = [
                [float(tok) for tok in line.strip().split(",")]
                for line in fh
                if line.strip()
            ]
        data = np.asarray(rows)
        cols = {name: data[:, i + 1] for i, name in enumerate(header[1:])}
        return cls(times=data[:, 0], columns=cols)


def weighted_sup_density(rho: GridField, t: float, n: int) -> float:
    """max over nodes of (e^t + |x|)^n rho(t, x)."""
    return float(np.max((math.exp(t) + node_radii(rho)) ** n * rho.values))


def decay_fit(series: DecaySeries, window) -> FitResult:
    """Least squares on (t, log value) over the window; slope stderr included."""
    sub = series.window(*window)
    if len(sub) < 5:
        raise ValueError(f"need >= 5 samples in window, got {len(sub)}")
    if np.any(sub.values <= 0):
        raise ValueError("nonpositive values in fit window")
    t = sub.times
    y = np.log(sub.values)
    A = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(sub) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    var_slope = sigma2 / float(((t - t.mean()) ** 2).sum())
    return FitResult(
        slope=float(coef[0]), intercept=float(coef[1]), stderr=math.sqrt(var_slope)
    )


def _field_vectors(Z, t, x, v):
    """Coefficient vector of a microscopic field at time t, shape (N, 2n)."""
    N, n = x.shape
    out = np.zeros((N, 2 * n))
    if Z.kind == "U":
        w = math.exp(t)
        out[:, Z.i - 1] = w
        out[:, n + Z.i - 1] = w
    elif Z.kind == "S":
        w = math.exp(-t)
        out[:, Z.i - 1] = w
        out[:, n + Z.i - 1] = -w
    elif Z.kind == "L":
        out[:, :n] = x
        out[:, n:] = v
    else:
        i, j = Z.i - 1, Z.j - 1
        out[:, j] = x[:, i]
        out[:, i] = -x[:, j]
        out[:, n + j] = v[:, i]
        out[:, n + i] = -v[:, j]
    return out


def _energy_from_arrays(x, v, J, weights, ox, ov, f0: InitialData, t: float):
    n = x.shape[1]
    N = x.shape[0]
    mass = float(weights.sum())
    f_vals = f0.value(ox, ov)
    keep = f_vals >= 1e-300
    skipped = int(N - keep.sum())
    gx, gv = f0.grad(ox, ov)
    grad0 = np.concatenate([gx, gv], axis=1)  # (N, 2n)
    Jinv = np.linalg.inv(J)
    values, stderrs = {}, {}
    for Z in lambda_fields(n):
        Zvec = _field_vectors(Z, t, x, v)
        pullback = np.einsum("nij,nj->ni", Jinv, Zvec)
        terms = np.zeros(N)
        terms[keep] = np.abs(
            np.einsum("ni,ni->n", pullback[keep], grad0[keep])
        ) / f_vals[keep]
        est = mass / N * float(terms.sum())
        std = float(terms.std(ddof=1)) if N > 1 else 0.0
        values[Z.label()] = est
        stderrs[Z.label()] = mass * std / math.sqrt(N)
    return EnergyEstimate(values=values, stderrs=stderrs, skipped=skipped)


def estimate_energy_first_order(ens: ParticleEnsemble, f0: InitialData, t: float):
    """Monte Carlo ||Z f(t)||_{L^1} for every Z in lambda.

    Uses f(t, z) = f0(z_0(z)): the phase-space gradient of f at a particle
    is the inverse-transpose tangent map applied to grad f0 at its origin,
    and the estimator importance-weights over the f0 samples.
    """
    if ens.tangents is None:
        raise ValueError("tangent maps required for energy estimation")
    return _energy_from_arrays(
        ens.positions,
        ens.velocities,
        ens.tangents,
        ens.weights,
        ens.origins_x,
        ens.origins_v,
        f0,
        t,
    )


# ---------------------------------------------------------------------------
# the main loop


class _GridSampler:
    """Force sampler over one frozen force grid (per half-kick)."""

    def __init__(self, field: GridField):
        self.field = field

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        return grid_interpolate(self.field, flat).reshape(x.shape)

    def support_scale(self, t):
        return self.field.scale


def run_simulation(cfg: SimConfig, f0: InitialData, record_extras: bool = False):
    """Full nonlinear run: returns (FieldHistory, DiagnosticsReport, ensemble).

    record_extras additionally stores potential grids and per-snapshot
    particle phase points on the history (required by the coefficient
    transport of the modified vector fields).
    """
    n = cfg.dim
    if f0.dim != n:
        raise ValueError("initial data dimension does not match config")
    ens = sample_initial(f0, cfg.n_particles, cfg.seed)
    x, v = ens.positions.copy(), ens.velocities.copy()
    J = ens.tangents.copy()
    weights = ens.weights
    soft = cfg.softening if cfg.softening > 0 else None

    snap_t, snap_s, snap_F, snap_P, snap_x, snap_v = [], [], [], [], [], []
    cols = {"sup_force": [], "weighted_sup_rho": [], "mass": []}
    energy_names = [Z.label() for Z in lambda_fields(n)]
    for name in energy_names:
        cols[f"E_{name}"] = []
    warn_list = []

    def field_at(t):
        rho, stats = _deposit_arrays(x, weights, t, cfg)
        if stats.outside_fraction > _OUTSIDE_ERROR:
            raise DepositError(
                f"{stats.outside_fraction:.1%} of mass outside the grid at t={t:.3f}"
            )
        if stats.outside_fraction > _OUTSIDE_WARN:
            warn_list.append(
                f"t={t:.3f}: {stats.outside_fraction:.2%} of mass outside the grid"
            )
        return rho, grid_force_from_density(rho, soft)

    def record(t, rho, force_grid):
        sup_force = float(np.sqrt((force_grid.values**2).sum(axis=-1)).max())
        stats = {
            "sup_force": sup_force,
            "weighted_sup_rho": weighted_sup_density(rho, t, n),
            "mass": float(weights.sum()),
        }
        energy = _energy_from_arrays(
            x, v, J, weights, ens.origins_x, ens.origins_v, f0, t
        )
        for name in energy_names:
            stats[f"E_{name}"] = energy.values[name]
        for key, val in stats.items():
            cols[key].append(val)
        if not np.all(np.isfinite(list(stats.values()))):
            raise FloatingPointError(f"non-finite diagnostics at t={t:.3f}")
        snap_t.append(t)
        snap_s.append(grid_scale(t, cfg))
        snap_F.append(force_grid.values)
        if record_extras:
            snap_P.append(grid_potential_from_density(rho, soft).values)
            snap_x.append(x.copy())
            snap_v.append(v.copy())

    node_times = _step_times(0.0, cfg.t_max, cfg.dt)
    rho, force_grid = field_at(0.0)
    record(0.0, rho, force_grid)
    n_steps = len(node_times) - 1
    for k in range(n_steps):
        ta, tb = node_times[k], node_times[k + 1]
        h = tb - ta
        v, J = _kick(x, v, J, ta, 0.5 * h, cfg.mu, _GridSampler(force_grid))
        x, v, J = _drift(x, v, J, h)
        rho, force_grid = field_at(tb)
        v, J = _kick(x, v, J, tb, 0.5 * h, cfg.mu, _GridSampler(force_grid))
        if (k + 1) % cfg.snapshot_stride == 0 or k + 1 == n_steps:
            record(tb, rho, force_grid)

    history = FieldHistory(
        np.asarray(snap_t),
        np.asarray(snap_s),
        tuple(snap_F),
        dim=n,
        cells=cfg.grid_cells,
        potentials=tuple(snap_P) if record_extras else None,
        traj_x=np.asarray(snap_x) if record_extras else None,
        traj_v=np.asarray(snap_v) if record_extras else None,
    )
    report = DiagnosticsReport(
        times=np.asarray(snap_t),
        columns={name: np.asarray(vals) for name, vals in cols.items()},
        warnings=warn_list,
    )
    # default fits over the second half of the run, where transients are gone
    window = (cfg.t_max / 2.0, cfg.t_max)
    for name in ("sup_force", "weighted_sup_rho"):
        try:
            report.fits[name] = decay_fit(report.series(name), window)
        except ValueError:
            pass
    final = ParticleEnsemble(
        x, v, weights.copy(), J, ens.origins_x.copy(), ens.origins_v.copy()
    )
    return history, report, final
