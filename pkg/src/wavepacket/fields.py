"""Uniform-grid complex wavefunctions: norms, pairings, and persistence.

Conventions used throughout the package:

* fields live on the periodic box [x_min, x_min + n*dx), sampled at n points;
* the L^2 pairing is sum(f * conj(g)) * dx, linear in the FIRST slot;
* the discrete Fourier transform of a field is numpy's unnormalized FFT of
  its samples, so Parseval reads ||f||_2^2 = (dx^2 / L) * sum |fft(f)|^2.

All containers are immutable after construction (sample arrays are locked),
so every operation here is a pure function safe to call concurrently.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "FieldFormatError",
    "Grid1D",
    "ComplexField",
    "SpacetimeField",
    "lp_norm",
    "inner_product",
    "mixed_norm",
    "save_field",
    "load_field",
    "boundary_amplitude",
    "gaussian_packet",
]

WPK1_MAGIC = b"WPK1"


class FieldFormatError(ValueError):
    """A WPK binary blob failed validation (magic, size, or finiteness)."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic sampling of the line: n points from x_min with spacing dx."""

    n: int
    x_min: float
    dx: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n!r}")
        if not (math.isfinite(self.x_min) and math.isfinite(self.dx)) or self.dx <= 0:
            raise ValueError("grid needs finite x_min and positive dx")

    @property
    def length(self) -> float:
        return self.n * self.dx

    @cached_property
    def xs(self) -> np.ndarray:
        arr = self.x_min + self.dx * np.arange(self.n)
        arr.setflags(write=False)
        return arr

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        arr = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        arr.setflags(write=False)
        return arr

    @cached_property
    def offsets(self) -> np.ndarray:
        """Signed periodic offsets: entry k is the wrapped distance k*dx in (-L/2, L/2]."""
        half = self.length / 2.0
        arr = np.mod(self.dx * np.arange(self.n) + half, self.length) - half
        arr.setflags(write=False)
        return arr


@dataclass(frozen=True)
class ComplexField:
    """A sampled complex wavefunction on a Grid1D (dimensionless amplitude)."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("field samples must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, values)

    @classmethod
    def zeros(cls, grid: Grid1D) -> "ComplexField":
        return cls(grid, np.zeros(grid.n, dtype=np.complex128))


@dataclass(frozen=True)
class SpacetimeField:
    """Time-indexed stack of ComplexField slices sharing one grid."""

    times: np.ndarray
    slices: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        slices = tuple(self.slices)
        if len(times) != len(slices) or len(times) < 2:
            raise ValueError("need at least two time slices, one per time")
        if not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        grid = slices[0].grid
        if any(s.grid != grid for s in slices):
            raise ValueError("all slices must share one grid")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "slices", slices)

    @property
    def grid(self) -> Grid1D:
        return self.slices[0].grid

    def __len__(self) -> int:
        return len(self.slices)

    def restricted(self, t_lo: float, t_hi: float) -> "SpacetimeField":
        """Sub-stack of slices with t_lo <= t <= t_hi (endpoints inclusive)."""
        mask = (self.times >= t_lo) & (self.times <= t_hi)
        idx = np.nonzero(mask)[0]
        if len(idx) < 2:
            raise ValueError("restriction keeps fewer than two slices")
        return SpacetimeField(self.times[idx], [self.slices[i] for i in idx])

    def masses(self) -> np.ndarray:
        return np.array([lp_norm(s, 2) ** 2 for s in self.slices])


def lp_norm(f: ComplexField, p: float) -> float:
    """(sum |f_k|^p dx)^(1/p); the max of |f_k| for p = inf."""
    if not (p >= 1.0):
        raise ValueError(f"p must satisfy p >= 1 (or inf), got {p}")
    mags = np.abs(f.values)
    if not np.all(np.isfinite(mags)):
        raise ValueError("field samples must be finite")
    if math.isinf(p):
        return float(mags.max())
    if p == 2.0:
        return float(math.sqrt(np.sum(mags * mags) * f.grid.dx))
    return float((np.sum(mags**p) * f.grid.dx) ** (1.0 / p))


def inner_product(f: ComplexField, g: ComplexField) -> complex:
    """<f, g> = sum f conj(g) dx, linear in the first argument."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return complex(np.sum(f.values * np.conj(g.values)) * f.grid.dx)


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.empty_like(times)
    w[0] = (times[1] - times[0]) / 2.0
    w[-1] = (times[-1] - times[-2]) / 2.0
    if len(times) > 2:
        w[1:-1] = (times[2:] - times[:-2]) / 2.0
    return w


def mixed_norm(u: SpacetimeField, q: float, r: float, weight=None) -> float:
    """Mixed spacetime norm ( sum_i w_i dt_i ||u(t_i)||_r^q )^(1/q).

    Time integration is trapezoidal over u.times; weight, if given, is a
    nonnegative sample array aligned with u.times.
    """
    if not (q >= 1.0 and r >= 1.0):
        raise ValueError("exponents must satisfy q, r >= 1")
    if len(u) < 2:
        raise ValueError("need at least two time slices")
    if weight is None:
        w = np.ones(len(u))
    else:
        w = np.asarray(weight, dtype=np.float64)
        if w.shape != u.times.shape or np.any(w < 0):
            raise ValueError("weight must be nonnegative and aligned with u.times")
    space = np.array([lp_norm(s, r) for s in u.slices])
    if math.isinf(q):
        return float((space * (w > 0)).max())
    dt = _trapezoid_weights(u.times)
    return float((np.sum(w * dt * space**q)) ** (1.0 / q))


def boundary_amplitude(f: ComplexField) -> float:
    """max |f| over the outer 5% of the box at each end (periodic-validity check)."""
    edge = max(1, int(0.05 * f.grid.n))
    mags = np.abs(f.values)
    return float(max(mags[:edge].max(), mags[-edge:].max()))


def gaussian_packet(
    grid: Grid1D,
    x0: float = 0.0,
    sigma: float = 1.0,
    xi0: float = 0.0,
    chirp: float = 0.0,
    amplitude: float | None = None,
) -> ComplexField:
    """Gaussian wavepacket amplitude * exp(-(x-x0)^2/(2 sigma^2) + i xi0 (x-x0) + i chirp (x-x0)^2/2).

    With the default amplitude (pi sigma^2)^(-1/4) the packet has unit L^2 norm.
    """
    if amplitude is None:
        amplitude = (math.pi * sigma**2) ** -0.25
    y = grid.xs - x0
    vals = amplitude * np.exp(-(y**2) / (2.0 * sigma**2) + 1j * xi0 * y + 0.5j * chirp * y**2)
    return ComplexField(grid, vals)


# ---------------------------------------------------------------------------
# Binary persistence (WPK1): magic "WPK1", little-endian u64 n, f64 x_min,
# f64 dx, then n interleaved (re, im) f64 pairs.  No padding, no checksum.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<Qdd")


def save_field(f: ComplexField, path) -> None:
    payload = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    blob = WPK1_MAGIC + _HEADER.pack(f.grid.n, f.grid.x_min, f.grid.dx) + payload
    Path(path).write_bytes(blob)


def load_field(path) -> ComplexField:
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != WPK1_MAGIC:
        raise FieldFormatError(f"{path}: bad magic, expected {WPK1_MAGIC!r}")
    if len(blob) < 4 + _HEADER.size:
        raise FieldFormatError(f"{path}: truncated header")
    n, x_min, dx = _HEADER.unpack_from(blob, 4)
    payload = blob[4 + _HEADER.size:]
    if len(payload) != 16 * n:
        raise FieldFormatError(
            f"{path}: declared n={n} needs {16 * n} payload bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    if not np.all(np.isfinite(values.view(np.float64))):
        raise FieldFormatError(f"{path}: non-finite samples")
    try:
        grid = Grid1D(int(n), x_min, dx)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from exc
    return ComplexField(grid, values)
