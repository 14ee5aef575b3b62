"""Shared domain types, configuration handling, and the co-expanding grid.

Everything is dimensionless: the external potential -|x|^2/2 fixes the time
and length units.  Solution support grows like e^t along the unstable
directions of the flow map, so all spatial grids co-expand with the flow:
at time t a grid covers the box [-s(t), s(t)]^n with s(t) = R0 * e^t, and
the rescaled coordinate is xi = x / s(t).  A fixed grid would lose all
particles by t ~ 3; the co-expanding one keeps the spatial density resolved
at constant relative resolution.

All types in this module are immutable value types and safe to share
between concurrent workers without synchronization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as _dc_fields
from typing import Iterator, Mapping

import numpy as np

__all__ = [
    "ConfigError",
    "PhasePoint",
    "SimConfig",
    "DecaySeries",
    "GridField",
    "validate_config",
    "parse_config_file",
    "grid_scale",
    "grid_axis",
    "node_radii",
    "grid_interpolate",
]


class ConfigError(ValueError):
    """Invalid, unknown, or out-of-range configuration entry."""


def _as_vector(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 1 or arr.size not in (2, 3):
        raise ValueError(f"{name} must be a vector of length 2 or 3")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A position-velocity pair (x, v) in R^n x R^n, n in {2, 3}."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vector(self.x, "x"))
        object.__setattr__(self, "v", _as_vector(self.v, "v"))
        if self.x.size != self.v.size:
            raise ValueError("x and v must have equal length")

    @property
    def dim(self) -> int:
        return self.x.size

    def norm(self) -> float:
        """Euclidean norm on R^2n (the convention adopted for escape tests)."""
        return float(math.hypot(np.linalg.norm(self.x), np.linalg.norm(self.v)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhasePoint):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.v, other.v)

    def __repr__(self) -> str:
        return f"PhasePoint(x={self.x.tolist()}, v={self.v.tolist()})"


@dataclass(frozen=True)
class SimConfig:
    """Validated run parameters.  Build one with validate_config()."""

    dim: int = 2
    mu: int = 1              # +1 attractive, -1 repulsive
    eps: float = 0.01        # data-smallness amplitude of f0
    n_particles: int = 20000
    dt: float = 0.02
    t_max: float = 5.0
    softening: float = 0.0   # 0 means automatic: one cell width at deposit time
    grid_radius0: float = 4.0
    grid_cells: int = 64
    seed: int = 1234
    snapshot_stride: int = 5

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in _dc_fields(self)}


_COERCERS = {
    "dim": int,
    "mu": int,
    "eps": float,
    "n_particles": int,
    "dt": float,
    "t_max": float,
    "softening": float,
    "grid_radius0": float,
    "grid_cells": int,
    "seed": int,
    "snapshot_stride": int,
}


def validate_config(raw: Mapping) -> SimConfig:
    """Apply defaults, coerce values, and enforce the small-data invariants.

    Unknown keys are rejected.  Validating the dict of an already-valid
    config returns an equal config (idempotence).
    """
    known = set(_COERCERS)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    values = {}
    for key, coerce in _COERCERS.items():
        if key not in raw:
            continue
        try:
            values[key] = coerce(raw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {raw[key]!r}") from exc
    cfg = SimConfig(**values)

    if cfg.dim not in (2, 3):
        raise ConfigError("dimension must be 2 or 3")
    if cfg.mu not in (1, -1):
        raise ConfigError("mu must be +1 (attractive) or -1 (repulsive)")
    if not cfg.eps > 0:
        raise ConfigError("eps must be positive")
    if cfg.eps > 0.1:
        raise ConfigError("outside small-data regime (eps must be <= 0.1)")
    if not 0 < cfg.dt < 0.1:
        raise ConfigError("dt must satisfy 0 < dt < 0.1")
    if cfg.t_max < cfg.dt:
        raise ConfigError("t_max must be >= dt")
    if cfg.softening < 0:
        raise ConfigError("softening must be >= 0")
    if not cfg.grid_radius0 > 0:
        raise ConfigError("grid_radius0 must be positive")
    if cfg.grid_cells < 16:
        raise ConfigError("grid_cells must be >= 16")
    if cfg.n_particles < 1:
        raise ConfigError("n_particles must be >= 1")
    if cfg.snapshot_stride < 1:
        raise ConfigError("snapshot_stride must be >= 1")
    if not -(2**63) <= cfg.seed < 2**64:
        raise ConfigError("seed must fit in 64 bits")
    return cfg


def parse_config_file(path) -> dict:
    """Read a flat UTF-8 key=value config file; '#' starts a comment."""
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {text!r}")
            key, _, value = text.partition("=")
            key, value = key.strip(), value.strip()
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value
    return raw


def grid_scale(t: float, cfg: SimConfig) -> float:
    """Half-width s(t) = R0 * e^t of the co-expanding grid box at time t."""
    return cfg.grid_radius0 * math.exp(t)


@dataclass(frozen=True)
class DecaySeries:
    """A diagnostic norm sampled on a strictly increasing time base."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise ValueError("times and values must be 1D arrays of equal length")
        if t.size and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        t, v = t.copy(), v.copy()
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.times.size

    def window(self, t_a: float, t_b: float) -> "DecaySeries":
        mask = (self.times >= t_a) & (self.times <= t_b)
        return DecaySeries(self.times[mask], self.values[mask])


@dataclass(frozen=True)
class GridField:
    """Scalar or vector field sampled at the cell centers of a co-expanding grid.

    The grid covers [-scale, scale]^dim with `cells` cells per axis; node i of
    an axis sits at the cell center -scale + (i + 1/2) * cell_width.  Scalar
    fields have shape (cells,)*dim, vector fields (cells,)*dim + (dim,).
    """

    values: np.ndarray
    scale: float
    dim: int

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        scalar_ok = arr.ndim == self.dim
        vector_ok = arr.ndim == self.dim + 1 and arr.shape[-1] == self.dim
        if not (scalar_ok or vector_ok):
            raise ValueError(f"bad field shape {arr.shape} for dim {self.dim}")
        m = arr.shape[0]
        if any(s != m for s in arr.shape[: self.dim]):
            raise ValueError("grid must have equal cells per axis")
        if m < 4:
            raise ValueError("grid too small")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field has non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == self.dim + 1

    @property
    def cells(self) -> int:
        return self.values.shape[0]

    @property
    def cell_width(self) -> float:
        """Physical node spacing (also the default softening length)."""
        return 2.0 * self.scale / self.cells

    def axis(self) -> np.ndarray:
        """Physical cell-center coordinates of one axis."""
        return grid_axis(self.cells, self.scale)

    def integral(self) -> float:
        """Midpoint-rule integral over the box (scalar fields)."""
        if self.is_vector:
            raise ValueError("integral() is for scalar fields")
        return float(self.values.sum() * self.cell_width**self.dim)


def grid_axis(cells: int, scale: float) -> np.ndarray:
    h = 2.0 * scale / cells
    return -scale + (np.arange(cells) + 0.5) * h


def node_radii(field: GridField) -> np.ndarray:
    """|x| at every node, shape (cells,)*dim."""
    ax = field.axis()
    grids = np.meshgrid(*([ax] * field.dim), indexing="ij")
    return np.sqrt(sum(g**2 for g in grids))


def _corner_iter(dim: int) -> Iterator[tuple]:
    for k in range(2**dim):
        yield tuple((k >> a) & 1 for a in range(dim))


def grid_interpolate(field: GridField, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of a GridField at physical points (B, dim).

    Points outside the hull of cell centers evaluate to zero; this matches
    the convention that fields vanish outside their declared support.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != field.dim:
        raise ValueError("points have wrong dimension")
    m = field.cells
    h = 2.0 / m  # rescaled spacing
    u = (pts / field.scale + 1.0) / h - 0.5
    i0 = np.floor(u).astype(np.int64)
    frac = u - i0
    valid = np.all((i0 >= 0) & (i0 <= m - 2), axis=1)

    out_shape = (pts.shape[0], field.dim) if field.is_vector else (pts.shape[0],)
    out = np.zeros(out_shape)
    if not np.any(valid):
        return out
    iv = i0[valid]
    fv = frac[valid]
    acc = 0.0
    for corner in _corner_iter(field.dim):
        w = np.ones(iv.shape[0])
        for a, c in enumerate(corner):
            w = w * (fv[:, a] if c else 1.0 - fv[:, a])
        idx = tuple(iv[:, a] + corner[a] for a in range(field.dim))
        vals = field.values[idx]
        acc = acc + (w[:, None] * vals if field.is_vector else w * vals)
    out[valid] = acc
    return out
