"""Runtime verification suites behind the `verify` CLI command.

Each suite is a list of named checks over the scenario's potential and grid.
The runner executes every check, catching exceptions as failures, and emits
one TAP-style line per check, so a malformed scenario (say, an oversized time
step) surfaces as a failed check rather than a crash.
"""

from __future__ import annotations

import math
import traceback
from dataclasses import dataclass

import numpy as np

from . import concentration, flows, phasespace, propagator
from .fields import ComplexField, Grid1D, gaussian_packet, inner_product, lp_norm
from .flows import PhasePoint
from .potentials import Potential, builtin, m2_bound

__all__ = ["CheckResult", "run_suite", "SUITES"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _check(name, fn):
    try:
        detail = fn()
        return CheckResult(name, True, detail or "")
    except AssertionError as exc:
        return CheckResult(name, False, str(exc))
    except Exception as exc:  # configuration errors count as failures, not crashes
        return CheckResult(name, False, f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# flow suite
# ---------------------------------------------------------------------------

def _flow_checks(p: Potential, grid: Grid1D, scenario) -> list:
    checks = []

    def symplectic():
        q = builtin("harmonic", omega=1.0)
        z = PhasePoint(1.0, 0.5)
        traj = flows.trajectory(q, z, 0.0, 1.0, 1e-4)
        energy = traj.xs**2 + traj.xis**2
        drift = np.abs(energy - energy[0]).max() / energy[0]
        assert drift <= 1e-8, f"energy drift {drift:.3e}"
        return f"drift {drift:.2e}"

    checks.append(("flow symplectic consistency (harmonic)", symplectic))

    def group_law():
        z = PhasePoint(0.7, -1.3)
        mid = flows.flow(p, z, 0.0, 0.4, 1e-4)
        two_leg = flows.flow(p, mid, 0.4, 0.8, 1e-4)
        one_leg = flows.flow(p, z, 0.0, 0.8, 1e-4)
        err = math.hypot(two_leg.x - one_leg.x, two_leg.xi - one_leg.xi)
        assert err <= 1e-8, f"group law error {err:.3e}"
        return f"error {err:.2e}"

    checks.append(("flow group law", group_law))

    def reversal():
        z = PhasePoint(-1.1, 2.0)
        fwd = flows.flow(p, z, 0.0, 0.9, 1e-4)
        back = flows.flow(p, fwd, 0.9, 0.0, 1e-4)
        err = math.hypot(back.x - z.x, back.xi - z.xi)
        assert err <= 1e-8, f"reversal error {err:.3e}"
        return f"error {err:.2e}"

    checks.append(("flow time reversal", reversal))

    def pair_estimates():
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            z0 = PhasePoint(*rng.uniform(-5, 5, 2))
            z1 = PhasePoint(*rng.uniform(-5, 5, 2))
            s = float(rng.uniform(-0.5, 0.5))
            t = s + float(rng.uniform(-1, 1))
            report = flows.check_pair_estimates(p, z0, z1, s, t, dt=2e-3)
            assert report.all_satisfied, f"violated at z0={z0}, z1={z1}, s={s}, t={t}"
            worst = max(worst, max(l / r for l, r, _ in report.residuals if r > 0))
        return f"1000 samples, worst lhs/rhs {worst:.3f}"

    checks.append(("trajectory pair estimates (1000 samples)", pair_estimates))

    def collisions():
        report = flows.collision_window(p, PhasePoint(0.0, 5.0), PhasePoint(0.0, -5.0),
                                        0.0, 0.1, 2.0)
        assert report.satisfied, "collision window bound violated"
        return f"delta {report.delta:.3f}"

    checks.append(("collision window lemma", collisions))

    def cube_sweep():
        worst = 0.0
        for eta in (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0):
            tau = min(1.0 / eta, 1.0)
            anchor = flows.flow(p, PhasePoint(0.0, 0.0), 0.0, 0.6 * tau, 1e-3)
            entry = PhasePoint(anchor.x + 0.7, anchor.xi + eta + 0.5)
            z = flows.flow(p, entry, 0.6 * tau, 0.0, 1e-3)
            report = flows.cube_containment(p, PhasePoint(0.0, 0.0), z, 0.0, eta, 1.0)
            assert report.entered, f"tube missed at eta={eta}"
            worst = max(worst, report.c_required)
        assert worst <= 20.0, f"containment constant {worst:.2f} too large"
        return f"max C {worst:.2f} over eta in 1..64"

    checks.append(("cube containment constant uniform in eta", cube_sweep))
    return checks


# ---------------------------------------------------------------------------
# propagator suite
# ---------------------------------------------------------------------------

def _propagator_checks(p: Potential, grid: Grid1D, scenario) -> list:
    checks = []
    dt = scenario.dt if scenario is not None else 2e-4

    def unitarity():
        params = propagator.EvolveParams(dt=dt)
        f = gaussian_packet(grid, x0=1.0, xi0=2.0)
        u = propagator.evolve(p, f, 0.0, 2000 * params.dt, params)
        drift = abs(lp_norm(u, 2) - 1.0)
        assert drift <= 1e-10, f"mass drift {drift:.3e}"
        return f"drift {drift:.2e} over 2000 steps"

    checks.append(("mass conservation", unitarity))

    def free_exact():
        zero = builtin("zero")
        f = gaussian_packet(grid)
        u = propagator.evolve(zero, f, 0.0, 1.0, propagator.EvolveParams(dt=min(dt, 1e-2)))
        k = grid.wavenumbers
        exact = np.fft.ifft(np.exp(-0.5j * 1.0 * k * k) * np.fft.fft(f.values))
        err = math.sqrt(float(np.sum(np.abs(u.values - exact) ** 2) * grid.dx))
        assert err <= 1e-10, f"free-particle error {err:.3e}"
        return f"L2 error {err:.2e}"

    checks.append(("free evolution matches Fourier multiplier", free_exact))

    def convergence():
        f = gaussian_packet(grid, x0=2.0)
        t = 0.25
        ref = propagator.evolve(p, f, 0.0, t, propagator.EvolveParams(dt=dt / 8.0))

        def err(step):
            u = propagator.evolve(p, f, 0.0, t, propagator.EvolveParams(dt=step))
            return math.sqrt(float(np.sum(np.abs(u.values - ref.values) ** 2) * grid.dx))

        ratio = err(dt) / err(dt / 2.0)
        assert 3.5 <= ratio <= 4.5, f"convergence ratio {ratio:.2f} outside [3.5, 4.5]"
        return f"halving ratio {ratio:.2f}"

    checks.append(("second-order convergence", convergence))

    if p.label == "harmonic":
        def coherent():
            omega = dict(p.params).get("omega", 1.0)
            f = gaussian_packet(grid, x0=2.0, sigma=1.0 / math.sqrt(omega))
            t = 0.8
            u = propagator.evolve(p, f, 0.0, t, propagator.EvolveParams(dt=min(dt, 2e-4)))
            center = 2.0 * math.cos(omega * t)
            expected = np.abs(gaussian_packet(grid, x0=center, sigma=1.0 / math.sqrt(omega)).values)
            err = np.abs(np.abs(u.values) - expected).max()
            assert err <= 1e-6, f"coherent-state modulus error {err:.3e}"
            return f"sup error {err:.2e}"

        checks.append(("coherent state tracks classical center", coherent))
    return checks


# ---------------------------------------------------------------------------
# phasespace suite
# ---------------------------------------------------------------------------

def _phasespace_checks(p: Potential, grid: Grid1D, scenario) -> list:
    checks = []
    window = phasespace.Window.gaussian(grid)

    def unitary_ops():
        rng = np.random.default_rng(3)
        f = gaussian_packet(grid, x0=1.3, xi0=-2.1)
        for _ in range(5):
            z = PhasePoint(*rng.uniform(-5, 5, 2))
            g = phasespace.translate_modulate(z, f)
            assert abs(lp_norm(g, 2) - 1.0) <= 1e-12
            back = phasespace.translate_modulate_inverse(z, g)
            assert np.abs(back.values - f.values).max() <= 1e-12
        return ""

    checks.append(("phase-space translation unitary and invertible", unitary_ops))

    def isometry_inversion():
        pg = phasespace.PhaseGrid.spanning(14.0, 14.0)
        f = gaussian_packet(grid, x0=0.7, xi0=1.2)
        coefs = phasespace.analyze(f, window, pg)
        total = float(np.sum(np.abs(coefs.values) ** 2) * pg.cell_area)
        assert abs(total - 1.0) <= 1e-6, f"isometry defect {abs(total - 1.0):.2e}"
        back = phasespace.synthesize(coefs, window)
        rel = math.sqrt(float(np.sum(np.abs(back.values - f.values) ** 2) * grid.dx))
        assert rel <= 1e-5, f"inversion error {rel:.2e}"
        return f"isometry defect {abs(total - 1.0):.2e}, inversion {rel:.2e}"

    checks.append(("wavepacket transform isometry and inversion", isometry_inversion))

    def reality_symmetry():
        pg = phasespace.PhaseGrid.spanning(6.0, 6.0)
        f = gaussian_packet(grid, sigma=1.4)
        coefs = phasespace.analyze(f, window, pg)
        flipped = coefs.values[:, ::-1]
        err = np.abs(flipped - np.conj(coefs.values)).max()
        assert err <= 1e-10, f"conjugation symmetry error {err:.2e}"
        return f"error {err:.2e}"

    checks.append(("real even data: Tf(x, -xi) = conj Tf(x, xi)", reality_symmetry))

    def galilean():
        rng = np.random.default_rng(11)
        phi = ComplexField(grid, phasespace.Window.gaussian(grid).generator.values)
        worst = 0.0
        for _ in range(6):
            z0 = PhasePoint(*rng.uniform(-3, 3, 2))
            t = float(rng.uniform(-0.5, 0.5))
            res = phasespace.galilean_covariance_residual(p, z0, phi, t)
            worst = max(worst, res)
        assert worst <= 1e-5, f"covariance residual {worst:.3e}"
        return f"worst residual {worst:.2e}"

    checks.append(("Galilean covariance residual", galilean))

    def tails():
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(3):
            z0 = PhasePoint(*rng.uniform(-4, 4, 2))
            packet = phasespace.translate_modulate(z0, phi_unit(grid))
            u = propagator.evolve_record(p, packet, 0.0, 0.5,
                                         propagator.EvolveParams(dt=2e-4, record_stride=500))
            traj = flows.trajectory(p, z0, 0.0, 0.5, 1e-3)
            for t, s in zip(u.times, u.slices):
                center = traj.xs[np.argmin(np.abs(traj.times - t))]
                brackets = np.sqrt(1.0 + (grid.xs - center) ** 2)
                worst = max(worst, float((brackets**4 * np.abs(s.values)).max()))
        assert worst <= 1e4, f"tail weight {worst:.2e}"
        return f"sup <x - x0^t>^4 |u| = {worst:.2f}"

    checks.append(("wavepacket tails stay bracketed", tails))
    return checks


def phi_unit(grid: Grid1D) -> ComplexField:
    return ComplexField(grid, phasespace.Window.gaussian(grid).generator.values)


# ---------------------------------------------------------------------------
# concentration suite
# ---------------------------------------------------------------------------

def _concentration_checks(p: Potential, grid: Grid1D, scenario) -> list:
    checks = []

    def scan_brute():
        rng = np.random.default_rng(2)
        times = np.linspace(-0.5, 0.5, 256)
        g = rng.random(256) ** 3
        fast = concentration.inverse_hls_scan(times, g, 2.0)
        dt = times[1] - times[0]
        prefix = np.concatenate([[0.0], np.cumsum(g)]) * dt
        best = 0.0
        w = 1
        widths = []
        while w < len(g):
            widths.append(w)
            w *= 2
        widths.append(len(g))
        for w in widths:
            for i in range(0, len(g) - w + 1, max(1, w // 2)):
                score = (w * dt) ** -0.5 * (prefix[i + w] - prefix[i])
                best = max(best, score)
        assert abs(fast.score - best) <= 1e-12, f"scan {fast.score} != brute {best}"
        return f"score {fast.score:.6f}"

    checks.append(("interval scan matches brute force", scan_brute))

    def detection_roundtrip():
        plant = PhasePoint(2.0, -3.0)
        f = concentration.sampled_window_packet(grid, 0.5, plant)
        search = concentration.SearchParams(t_stride=0.0625, x_halfrange=8.0, xi_halfrange=8.0)
        bubble = concentration.detect_bubble(p, f, search)
        assert bubble.abs_correlation >= 0.90 / (2 * math.pi), \
            f"correlation {bubble.abs_correlation:.4f} too small"
        return (f"lam {bubble.lam:.3f} t {bubble.t0:.3f} "
                f"z ({bubble.x0:.2f}, {bubble.xi0:.2f})")

    checks.append(("planted packet detected", detection_roundtrip))

    def decoupling():
        rng = np.random.default_rng(9)
        vals = sum(concentration.sampled_window_packet(
            grid, 1.0, PhasePoint(float(rng.uniform(-5, 5)), float(rng.uniform(-5, 5)))).values
            for _ in range(3))
        f = ComplexField(grid, vals)
        bubble = concentration.Bubble(1.0, 0.0, 0.5, -0.25, 0.01 + 0.0j, 0.01)
        result = concentration.extract_profile(p, f, bubble)
        tol = 1e-10 * lp_norm(f, 2) ** 2
        assert result.decoupling_residual <= tol, \
            f"residual {result.decoupling_residual:.2e} > {tol:.2e}"
        return f"residual {result.decoupling_residual:.2e}"

    checks.append(("extraction decoupling is exact", decoupling))

    def kernel_symmetry():
        zs = [PhasePoint(0.0, 1.0), PhasePoint(0.5, -1.0),
              PhasePoint(-0.5, 0.0), PhasePoint(0.0, 0.0)]
        kw = dict(delta0=0.25, grid=grid, dt=5e-4)
        base = concentration.kernel_K(p, *zs, **kw)
        swap12 = concentration.kernel_K(p, zs[1], zs[0], zs[2], zs[3], **kw)
        swap34 = concentration.kernel_K(p, zs[0], zs[1], zs[3], zs[2], **kw)
        err = max(abs(base - swap12), abs(base - swap34))
        assert err <= 1e-10, f"symmetry defect {err:.2e}"
        return f"K {base:.3e}, defect {err:.2e}"

    checks.append(("kernel permutation symmetry", kernel_symmetry))
    return checks


SUITES = {
    "flow": _flow_checks,
    "propagator": _propagator_checks,
    "phasespace": _phasespace_checks,
    "concentration": _concentration_checks,
}


def run_suite(name: str, p: Potential, grid: Grid1D, scenario=None) -> list:
    """Run one suite (or 'all'); returns CheckResults in execution order."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    results = []
    for suite_name in names:
        for check_name, fn in SUITES[suite_name](p, grid, scenario):
            results.append(_check(f"{suite_name}: {check_name}", fn))
    return results
