"""Bicharacteristics of h = xi^2/2 + V(t, x) and the short-time trajectory estimates.

Integrator: velocity-Verlet in kick-drift-kick form with the force -dV/dx
evaluated at the step-midpoint time (symplectic, global error O(dt^2)).
State arguments may be scalars or equal-shape arrays; batches of initial
conditions integrate in lockstep.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .potentials import Potential, m2_bound

__all__ = [
    "PhasePoint",
    "Trajectory",
    "FlowError",
    "flow",
    "trajectory",
    "action",
    "check_pair_estimates",
    "collision_window",
    "cube_containment",
    "collision_delta",
    "trajectory_to_csv",
    "PairEstimateReport",
    "CollisionReport",
    "CubeReport",
]


class FlowError(RuntimeError):
    """Non-finite trajectory values; indicates a bad Potential."""


@dataclass(frozen=True)
class PhasePoint:
    x: float
    xi: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.xi)):
            raise ValueError("phase point must be finite")


@dataclass(frozen=True)
class Trajectory:
    """Discrete bicharacteristic: times, positions, momenta, accumulated action."""

    times: np.ndarray
    xs: np.ndarray
    xis: np.ndarray
    action_values: np.ndarray

    @property
    def points(self):
        return [PhasePoint(float(x), float(xi)) for x, xi in zip(self.xs, self.xis)]

    def final_point(self) -> PhasePoint:
        return PhasePoint(float(self.xs[-1]), float(self.xis[-1]))


def _integrate(p: Potential, x, xi, t0: float, t1: float, dt: float, record: bool):
    """Verlet integration from t0 to t1 (either direction), optionally recording.

    Returns (times, xs, xis, actions) as arrays when record else final (x, xi, action).
    The action integrates xi^2/2 - V along the discrete path by the trapezoid rule.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if abs(t1 - t0) > 10.0 + 1e-12:
        raise ValueError("flow window limited to |t1 - t0| <= 10")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    span = t1 - t0
    nsteps = max(1, int(math.ceil(abs(span) / dt - 1e-12))) if span != 0.0 else 0
    h = span / nsteps if nsteps else 0.0

    def lagrangian(t, xx, xxi):
        return 0.5 * xxi * xxi - p.v(t, xx)

    act = np.zeros_like(x)
    if record:
        times = np.empty(nsteps + 1)
        xs = np.empty((nsteps + 1,) + x.shape)
        xis = np.empty_like(xs)
        acts = np.empty_like(xs)
        times[0], xs[0], xis[0], acts[0] = t0, x, xi, 0.0
    lag_prev = lagrangian(t0, x, xi)
    for j in range(nsteps):
        t = t0 + j * h
        tm = t + 0.5 * h
        xi_half = xi - 0.5 * h * p.dv(tm, x)
        x = x + h * xi_half
        xi = xi_half - 0.5 * h * p.dv(tm, x)
        lag = lagrangian(t + h, x, xi)
        act = act + 0.5 * h * (lag_prev + lag)
        lag_prev = lag
        if record:
            times[j + 1], xs[j + 1], xis[j + 1], acts[j + 1] = t + h, x, xi, act
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
        raise FlowError(f"flow blew up under potential {p.label!r}")
    if record:
        if nsteps == 0:
            times = np.array([t0])
            xs = np.array([x])
            xis = np.array([xi])
            acts = np.zeros_like(xs)
        return times, xs, xis, acts
    return x, xi, act


def flow(p: Potential, z: PhasePoint, t0: float, t1: float, dt: float = 1e-4) -> PhasePoint:
    """Phi(t1, t0) applied to z."""
    x, xi, _ = _integrate(p, z.x, z.xi, t0, t1, dt, record=False)
    return PhasePoint(float(x), float(xi))


def trajectory(p: Potential, z: PhasePoint, t0: float, t1: float, dt: float = 1e-4) -> Trajectory:
    times, xs, xis, acts = _integrate(p, z.x, z.xi, t0, t1, dt, record=True)
    return Trajectory(times, xs, xis, acts)


def action(p: Potential, z: PhasePoint, t0: float, t1: float, dt: float = 1e-4) -> float:
    """Classical action along the trajectory: signed integral of xi^2/2 - V from t0 to t1."""
    if t1 == t0:
        return 0.0
    _, _, act = _integrate(p, z.x, z.xi, t0, t1, dt, record=False)
    return float(act)


@dataclass(frozen=True)
class PairEstimateReport:
    m2: float
    residuals: tuple  # three (lhs, rhs, satisfied) rows
    all_satisfied: bool


def check_pair_estimates(p: Potential, z0: PhasePoint, z1: PhasePoint,
                         s: float, t: float, dt: float = 1e-3) -> PairEstimateReport:
    """Both sides of the three short-time two-trajectory inequalities.

    With dx = |x0^s - x1^s|, dxi = |xi0^s - xi1^s|, M2 = sup |d2 V| and |t-s| <= 1:
      |x0^t - x1^t|                         <= (dx + |t-s| dxi) e^M2
      |dxi^t - dxi^s|                       <= (|t-s| dx + |t-s|^2 dxi) M2 e^M2
      |dx^t - dx^s - (t-s) dxi^s|           <= (|t-s|^2 dx + |t-s|^3 dxi) e^M2
    """
    if abs(t - s) > 1.0 + 1e-12:
        raise ValueError("pair estimates require |t - s| <= 1")
    m2 = m2_bound(p)
    x, xi, _ = _integrate(p, np.array([z0.x, z1.x]), np.array([z0.xi, z1.xi]),
                          s, t, dt, record=False)
    dx_s, dxi_s = z0.x - z1.x, z0.xi - z1.xi
    dx_t, dxi_t = x[0] - x[1], xi[0] - xi[1]
    ts = abs(t - s)
    growth = math.exp(m2)
    rows = []
    for lhs, rhs in [
        (abs(dx_t), (abs(dx_s) + ts * abs(dxi_s)) * growth),
        (abs(dxi_t - dxi_s), (ts * abs(dx_s) + ts**2 * abs(dxi_s)) * m2 * growth),
        (abs(dx_t - dx_s - (t - s) * dxi_s), (ts**2 * abs(dx_s) + ts**3 * abs(dxi_s)) * growth),
    ]:
        rows.append((float(lhs), float(rhs), bool(lhs <= rhs * (1 + 1e-9) + 1e-12)))
    return PairEstimateReport(m2, tuple(rows), all(r[2] for r in rows))


def collision_delta(m2: float) -> float:
    """Largest delta <= 1 with e^M2 (delta^2 + delta^3) <= 1/100.

    For M2 = 0 the short-time restriction can be dropped, so delta = 1.
    """
    if m2 == 0.0:
        return 1.0
    budget = 1e-2 * math.exp(-m2)
    lo, hi = 0.0, 1.0
    if hi**2 + hi**3 <= budget:
        return 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid**2 + mid**3 <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class CollisionReport:
    delta: float
    window_halfwidth: float      # min(delta, 2 C r / |dxi|); delta when dxi = 0
    drift_bound: float
    separation_ok: bool
    drift_ok: bool
    satisfied: bool
    zero_relative_velocity: bool


def collision_window(p: Potential, z0: PhasePoint, z1: PhasePoint,
                     s: float, r: float, C: float, dt: float = 1e-3) -> CollisionReport:
    """Single-interaction window and momentum-drift bound for a colliding pair.

    Requires |x0^s - x1^s| <= r and C >= 2.  Scans t in [s - delta, s + delta]:
    separation must exceed C r once |t - s| >= 2 C r / |dxi^s|, and the relative
    momentum drift must stay below min(delta, 2Cr/|dxi|) * C r * M2 * e^M2 while
    the separation remains <= C r.
    """
    if C < 2:
        raise ValueError("C must be at least 2")
    if abs(z0.x - z1.x) > r:
        raise ValueError("initial separation exceeds r")
    m2 = m2_bound(p)
    delta = collision_delta(m2)
    dxi_s = z0.xi - z1.xi
    zero_rel = dxi_s == 0.0
    t_free = math.inf if zero_rel else 2.0 * C * r / abs(dxi_s)
    window = delta if zero_rel else min(delta, t_free)
    bound = window * C * r * m2 * math.exp(m2)

    separation_ok = True
    drift_ok = True
    for sign in (+1.0, -1.0):
        times, xs, xis, _ = _integrate(
            p, np.array([z0.x, z1.x]), np.array([z0.xi, z1.xi]),
            s, s + sign * delta, dt, record=True)
        sep = np.abs(xs[:, 0] - xs[:, 1])
        drift = np.abs((xis[:, 0] - xis[:, 1]) - dxi_s)
        elapsed = np.abs(times - s)
        outside = elapsed >= t_free
        if np.any(sep[outside] < C * r * (1 - 1e-9)):
            separation_ok = False
        # contiguous stretch from s during which separation stays <= C r
        inside = sep <= C * r
        run = np.logical_and.accumulate(inside)
        if np.any(drift[run] > bound * (1 + 1e-9) + 1e-12):
            drift_ok = False
    return CollisionReport(delta, window, bound, separation_ok, drift_ok,
                           separation_ok and drift_ok, zero_rel)


@dataclass(frozen=True)
class CubeReport:
    entered: bool
    c_required: float  # nan when the trajectory never enters the tube


def cube_containment(p: Potential, z0ref: PhasePoint, z: PhasePoint,
                     t_center: float, eta: float, r: float,
                     samples: int = 256, dt: float = 1e-3) -> CubeReport:
    """Dilation factor needed at t_center when z^t visits z0ref^t + r Q_eta in a window.

    Q_eta = (0, eta) + [-1,1]^2; the window is |t - t_center| <= min(1/|eta|, 1).
    Both trajectories start at time 0.  When the moving point enters the tube at
    some window time, reports the smallest C >= 1 with z^{t_center} inside
    z0ref^{t_center} + C r Q_eta; otherwise entered=False.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    tau = min(1.0 / abs(eta), 1.0) if eta != 0.0 else 1.0
    x_pair = np.array([z.x, z0ref.x])
    xi_pair = np.array([z.xi, z0ref.xi])
    xc, xic, _ = _integrate(p, x_pair, xi_pair, 0.0, t_center, dt, record=False) \
        if t_center != 0.0 else (x_pair, xi_pair, None)
    c_req = max(1.0, max(abs(xc[0] - xc[1]), abs(xic[0] - xic[1] - eta)) / r)

    step = max(dt / 4.0, 2.0 * tau / samples)
    entered = False
    for sign in (+1.0, -1.0):
        _, xs, xis, _ = _integrate(p, xc, xic, t_center, t_center + sign * tau,
                                   step, record=True)
        in_x = np.abs(xs[:, 0] - xs[:, 1]) <= r
        in_xi = np.abs(xis[:, 0] - xis[:, 1] - eta) <= r
        if np.any(in_x & in_xi):
            entered = True
    return CubeReport(entered, c_req if entered else math.nan)


def trajectory_to_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "x", "xi", "action"])
        for row in zip(traj.times, traj.xs, traj.xis, traj.action_values):
            writer.writerow([repr(float(v)) for v in row])
