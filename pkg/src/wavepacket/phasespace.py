"""Wavepacket (Gabor) transform, phase-space symmetries, and Galilean covariance.

The fixed analysis window is the Gaussian

    psi(x) = (2 pi)^(-1/2) pi^(-1/4) exp(-x^2 / 2),

real, even, with ||psi||_2 = (2 pi)^(-1/2).  With that normalization the
transform Tf(z) = <f, psi_z>, psi_z = e^{i(x - x0) xi0} psi(x - x0), is an
isometry of L^2 onto L^2 of phase space with plain measure dx0 dxi0, and
T* T = identity.

Phase convention: pi(x0, xi0) f = e^{i (x - x0) xi0} f(x - x0) -- modulation
anchored at the translation target, not the symmetric Weyl convention.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.signal import czt

from .fields import ComplexField, FieldFormatError, Grid1D, SpacetimeField, inner_product, lp_norm
from .flows import PhasePoint, trajectory, action
from .potentials import Potential
from .propagator import EvolveParams, evolve

__all__ = [
    "WINDOW_AMPLITUDE",
    "Window",
    "PhaseGrid",
    "WavepacketCoefs",
    "translate_modulate",
    "translate_modulate_inverse",
    "dilate",
    "analyze",
    "synthesize",
    "recentered_potential",
    "galilean_covariance_residual",
    "lens_transform",
    "sampled_window_packet",
    "coefs_to_csv",
    "save_coefs",
    "load_coefs",
]

WINDOW_AMPLITUDE = (2.0 * math.pi) ** -0.5 * math.pi**-0.25
WPK2_MAGIC = b"WPK2"


@dataclass(frozen=True)
class WindowForm:
    """Closed form of a Gaussian window: amplitude * exp(-x^2 / (2 width^2))."""

    amplitude: float
    width: float

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.amplitude * np.exp(-(y**2) / (2.0 * self.width**2))


@dataclass(frozen=True)
class Window:
    """The fixed real even analysis window with ||psi||_2 = (2 pi)^(-1/2)."""

    generator: ComplexField
    analytic_form: WindowForm

    def __post_init__(self):
        vals = self.generator.values
        n = self.generator.grid.n
        if np.abs(vals.imag).max() > 1e-12:
            raise ValueError("window must be real")
        evenness = np.abs(vals[1:] - vals[1:][::-1]).max()  # grid index k <-> n - k
        if evenness > 1e-12:
            raise ValueError("window must be even")
        if abs(lp_norm(self.generator, 2) - (2 * math.pi) ** -0.5) > 1e-10:
            raise ValueError("window must have L2 norm (2 pi)^(-1/2)")

    @classmethod
    def gaussian(cls, grid: Grid1D, scale: float = 1.0) -> "Window":
        """S_scale of the unit window: amplitude scale^(-1/2) * C0, width = scale.

        Needs a symmetric box (x_min = -L/2) for the samples to be grid-even.
        """
        form = WindowForm(WINDOW_AMPLITUDE / math.sqrt(scale), scale)
        samples = form(grid.xs)
        return cls(ComplexField(grid, samples.astype(np.complex128)), form)

    @property
    def width(self) -> float:
        return self.analytic_form.width


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform rectangular sampling of phase space T*R."""

    x_centers: np.ndarray
    xi_centers: np.ndarray

    def __post_init__(self):
        for name in ("x_centers", "xi_centers"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1 or len(arr) == 0:
                raise ValueError(f"{name} must be a nonempty 1-D array")
            if len(arr) > 1:
                steps = np.diff(arr)
                if steps[0] <= 0 or np.abs(steps - steps[0]).max() > 1e-9 * abs(steps[0]):
                    raise ValueError(f"{name} must be uniformly increasing")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dx0(self) -> float:
        return float(self.x_centers[1] - self.x_centers[0]) if len(self.x_centers) > 1 else math.nan

    @property
    def dxi0(self) -> float:
        return float(self.xi_centers[1] - self.xi_centers[0]) if len(self.xi_centers) > 1 else math.nan

    @property
    def cell_area(self) -> float:
        return self.dx0 * self.dxi0

    @classmethod
    def spanning(cls, x_halfrange: float, xi_halfrange: float, window_width: float = 1.0) -> "PhaseGrid":
        """Grid meeting the analyze sampling preconditions for the given window."""
        dx0 = window_width / 5.0
        dxi0 = math.pi / (5.0 * window_width)
        nx = int(math.ceil(x_halfrange / dx0))
        nxi = int(math.ceil(xi_halfrange / dxi0))
        return cls(dx0 * np.arange(-nx, nx + 1), dxi0 * np.arange(-nxi, nxi + 1))


@dataclass(frozen=True)
class WavepacketCoefs:
    grid: PhaseGrid
    values: np.ndarray  # shape (len(x_centers), len(xi_centers))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        expected = (len(self.grid.x_centers), len(self.grid.xi_centers))
        if vals.shape != expected:
            raise ValueError(f"coefficient shape {vals.shape} != grid shape {expected}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def _fourier_shift(values: np.ndarray, grid: Grid1D, shift: float) -> np.ndarray:
    """Band-limited periodic translation: g(x) = f(x - shift).  Exactly unitary."""
    phase = np.exp(-1j * grid.wavenumbers * shift)
    return np.fft.ifft(phase * np.fft.fft(values))


def translate_modulate(z: PhasePoint, f: ComplexField) -> ComplexField:
    """pi(x0, xi0) f = e^{i (x - x0) xi0} f(x - x0); exactly unitary."""
    shifted = _fourier_shift(f.values, f.grid, z.x)
    return ComplexField(f.grid, np.exp(1j * z.xi * (f.grid.xs - z.x)) * shifted)


def translate_modulate_inverse(z: PhasePoint, g: ComplexField) -> ComplexField:
    """pi(z)^{-1} g(x) = e^{-i x xi0} g(x + x0)."""
    demodulated = np.exp(-1j * z.xi * (g.grid.xs - z.x)) * g.values
    return ComplexField(g.grid, _fourier_shift(demodulated, g.grid, -z.x))


DILATION_RANGE = (2.0**-12, 2.0**4)


def dilate(lam: float, f: ComplexField) -> ComplexField:
    """Unitary dilation S_lam f(x) = lam^(-1/2) f(x / lam) by band-limited resampling.

    The trigonometric interpolant of f is evaluated at x/lam with a chirp-z
    transform, so the result is exact (to roundoff) for band-limited samples.
    """
    if not (DILATION_RANGE[0] <= lam <= DILATION_RANGE[1]):
        raise ValueError(f"dilation factor {lam} outside guard range {DILATION_RANGE}")
    if lam == 1.0:
        return f
    grid = f.grid
    n, dk = grid.n, 2.0 * math.pi / grid.length
    coef = np.fft.fftshift(np.fft.fft(f.values))  # frequency order -n/2 .. n/2-1
    # Sample points y_m = x_m / lam; u_m = y_m - x_min = u0 + m dy.
    dy = grid.dx / lam
    u0 = grid.x_min / lam - grid.x_min
    spectral_sum = czt(coef, m=n, w=np.exp(1j * dk * dy), a=np.exp(-1j * dk * u0))
    u = u0 + dy * np.arange(n)
    values = spectral_sum * np.exp(-1j * dk * (n / 2.0) * u) / n
    # For lam < 1 some x/lam leave the box; the interpolant would alias ghost
    # copies of f there, so those samples are cut (f is assumed box-supported).
    y = grid.x_min + u
    outside = (y < grid.x_min) | (y >= grid.x_min + grid.length)
    values[outside] = 0.0
    return ComplexField(grid, values / math.sqrt(lam))


def _window_rows(window: Window, grid: Grid1D, x_centers: np.ndarray, block: int = 64):
    """Yield (slice, psi(y - x0) matrix) blocks using the analytic window form."""
    y = grid.xs
    for start in range(0, len(x_centers), block):
        xs0 = x_centers[start:start + block]
        yield slice(start, start + len(xs0)), window.analytic_form(y[None, :] - xs0[:, None])


def analyze(f: ComplexField, window: Window, grid: PhaseGrid) -> WavepacketCoefs:
    """Tf(x0, xi0) = <f, psi_{(x0, xi0)}> over the phase grid.

    Preconditions (sampling fine enough for the isometry): dxi0 <= pi/(5 width)
    and dx0 <= width/5.  Then sum |Tf|^2 dx0 dxi0 recovers ||f||_2^2 to ~1e-6.
    """
    width = window.width
    if len(grid.x_centers) > 1 and grid.dx0 > width / 5.0 + 1e-12:
        raise ValueError(f"phase grid too coarse in x0: {grid.dx0} > width/5 = {width / 5.0}")
    if len(grid.xi_centers) > 1 and grid.dxi0 > math.pi / (5.0 * width) + 1e-12:
        raise ValueError(f"phase grid too coarse in xi0: {grid.dxi0} > pi/(5 width)")
    y = f.grid.xs
    # E[m, j] = exp(-i y_m xi_j); row phases restore the e^{+i x0 xi0} factor.
    E = np.exp(-1j * np.outer(y, grid.xi_centers))
    out = np.empty((len(grid.x_centers), len(grid.xi_centers)), dtype=np.complex128)
    for rows, psi_block in _window_rows(window, f.grid, grid.x_centers):
        g_block = psi_block * f.values[None, :]
        out[rows] = (g_block @ E) * f.grid.dx
    out *= np.exp(1j * np.outer(grid.x_centers, grid.xi_centers))
    return WavepacketCoefs(grid, out)


def synthesize(coefs: WavepacketCoefs, window: Window) -> ComplexField:
    """T* F = integral of F(z) psi_z over the phase grid (discretized); T*T ~ identity."""
    grid = coefs.grid
    gen_grid = window.generator.grid
    y = gen_grid.xs
    # Fold the e^{-i x0 xi} phase into the coefficients, then sum per x0 row.
    F = coefs.values * np.exp(-1j * np.outer(grid.x_centers, grid.xi_centers))
    M = np.exp(1j * np.outer(y, grid.xi_centers))  # (n, n_xi)
    mod_sum = M @ F.T  # (n, n_x0)
    out = np.zeros(gen_grid.n, dtype=np.complex128)
    for rows, psi_block in _window_rows(window, gen_grid, grid.x_centers):
        out += np.einsum("ry,yr->y", psi_block, mod_sum[:, rows])
    cell = grid.cell_area if len(grid.x_centers) > 1 and len(grid.xi_centers) > 1 else 1.0
    return ComplexField(gen_grid, out * cell)


def sampled_window_packet(grid: Grid1D, lam: float, z: PhasePoint) -> ComplexField:
    """pi(z) S_lam psi evaluated analytically on the grid (no periodic wrap)."""
    y = grid.xs - z.x
    form = WindowForm(WINDOW_AMPLITUDE / math.sqrt(lam), lam)
    return ComplexField(grid, form(y) * np.exp(1j * z.xi * y))


# ---------------------------------------------------------------------------
# Galilean covariance: U(t, 0) pi(z0) phi = e^{i alpha} pi(z0^t) U^{z0}(t, 0) phi
# with the recentered potential V^{z0}(t, x) = V(t, x0^t + x) - V(t, x0^t)
# - x dV(t, x0^t) and alpha the classical action along z0^t.
# ---------------------------------------------------------------------------

def recentered_potential(p: Potential, z0: PhasePoint,
                         t_min: float = -1.0, t_max: float = 1.0,
                         flow_dt: float = 1e-4) -> Potential:
    """V^{z0} with derivatives, backed by the z0 trajectory (cubic Hermite in t)."""
    pad = 10 * flow_dt
    lo, hi = min(t_min, 0.0) - pad, max(t_max, 0.0) + pad
    fwd = trajectory(p, z0, 0.0, hi, flow_dt)
    bwd = trajectory(p, z0, 0.0, lo, flow_dt)
    times = np.concatenate([bwd.times[::-1][:-1], fwd.times])
    xs = np.concatenate([bwd.xs[::-1][:-1], fwd.xs])
    xis = np.concatenate([bwd.xis[::-1][:-1], fwd.xis])
    center = CubicHermiteSpline(times, xs, xis)  # dx/dt = xi exactly

    def v(t, x):
        c = float(center(t))
        return p.v(t, c + x) - p.v(t, c) - x * p.dv(t, c)

    def dv(t, x):
        c = float(center(t))
        return p.dv(t, c + x) - p.dv(t, c)

    def d2v(t, x):
        c = float(center(t))
        return p.d2v(t, c + x)

    return Potential(f"recentered({p.label})", v, dv, d2v, time_dependent=True,
                     declared_seminorms=p.declared_seminorms)


def galilean_covariance_residual(p: Potential, z0: PhasePoint, phi: ComplexField,
                                 t: float, params: EvolveParams | None = None,
                                 flow_dt: float = 1e-4) -> float:
    """L^2 distance between U(t,0) pi(z0) phi and e^{i alpha} pi(z0^t) U^{z0}(t,0) phi."""
    params = params or EvolveParams()
    lhs = evolve(p, translate_modulate(z0, phi), 0.0, t, params)
    traj = trajectory(p, z0, 0.0, t, flow_dt)
    z0_t = traj.final_point()
    alpha = float(traj.action_values[-1])
    vz = recentered_potential(p, z0, min(t, 0.0), max(t, 0.0), flow_dt)
    rhs_core = evolve(vz, phi, 0.0, t, params)
    rhs = translate_modulate(z0_t, rhs_core).values * np.exp(1j * alpha)
    return float(np.sqrt(np.sum(np.abs(lhs.values - rhs) ** 2) * phi.grid.dx))


def lens_transform(u_free: SpacetimeField, times) -> SpacetimeField:
    """Map a free solution to a harmonic-oscillator solution:

        Lu(t, x) = (cos t)^(-1/2) u(tan t, x / cos t) e^{-i x^2 tan t / 2}
                 = e^{-i x^2 tan t / 2} [S_{cos t} u(tan t, .)](x).

    u(tan t, .) is interpolated cubically across the recorded slices, the
    spatial rescaling is band-limited.  Requires |cos t| >= 0.1 and that
    u_free covers tan(t) for every requested t.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.abs(np.cos(times)) < 0.1):
        raise ValueError("lens transform requested too close to t = pi/2")
    needed = np.tan(times)
    if needed.min() < u_free.times[0] - 1e-12 or needed.max() > u_free.times[-1] + 1e-12:
        raise ValueError("free solution does not cover tan(t) for the requested times")
    grid = u_free.grid
    stack = np.stack([s.values for s in u_free.slices])
    interp = CubicSpline(u_free.times, stack, axis=0)
    out = []
    for t in times:
        slice_tan = ComplexField(grid, interp(math.tan(t)))
        scaled = dilate(math.cos(t), slice_tan)
        phase = np.exp(-0.5j * grid.xs**2 * math.tan(t))
        out.append(ComplexField(grid, phase * scaled.values))
    order = np.argsort(times)
    return SpacetimeField(times[order], [out[i] for i in order])


# ---------------------------------------------------------------------------
# Coefficient export: CSV (x0, xi0, re, im, abs) and the WPK2 binary layout
# "WPK2" | u64 nx | u64 nxi | nx f64 x-centers | nxi f64 xi-centers | payload.
# ---------------------------------------------------------------------------

def coefs_to_csv(coefs: WavepacketCoefs, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x0", "xi0", "re", "im", "abs"])
        for i, x0 in enumerate(coefs.grid.x_centers):
            for j, xi0 in enumerate(coefs.grid.xi_centers):
                c = coefs.values[i, j]
                writer.writerow([repr(float(x0)), repr(float(xi0)),
                                 repr(c.real), repr(c.imag), repr(abs(c))])


def save_coefs(coefs: WavepacketCoefs, path) -> None:
    nx, nxi = coefs.values.shape
    blob = WPK2_MAGIC + struct.pack("<QQ", nx, nxi)
    blob += np.ascontiguousarray(coefs.grid.x_centers, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(coefs.grid.xi_centers, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(coefs.values, dtype="<c16").tobytes()
    Path(path).write_bytes(blob)


def load_coefs(path) -> WavepacketCoefs:
    blob = Path(path).read_bytes()
    if blob[:4] != WPK2_MAGIC:
        raise FieldFormatError(f"{path}: bad magic, expected {WPK2_MAGIC!r}")
    nx, nxi = struct.unpack_from("<QQ", blob, 4)
    offset = 4 + 16
    need = offset + 8 * (nx + nxi) + 16 * nx * nxi
    if len(blob) != need:
        raise FieldFormatError(f"{path}: expected {need} bytes, found {len(blob)}")
    x_centers = np.frombuffer(blob, dtype="<f8", count=nx, offset=offset)
    offset += 8 * nx
    xi_centers = np.frombuffer(blob, dtype="<f8", count=nxi, offset=offset)
    offset += 8 * nxi
    values = np.frombuffer(blob, dtype="<c16", offset=offset).reshape(nx, nxi)
    return WavepacketCoefs(PhaseGrid(x_centers, xi_centers), values)
