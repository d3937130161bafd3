import csv
import math

import numpy as np
import pytest

from wavepacket.flows import (
    PhasePoint,
    action,
    check_pair_estimates,
    collision_delta,
    collision_window,
    cube_containment,
    flow,
    trajectory,
    trajectory_to_csv,
)
from wavepacket.potentials import builtin

ZERO = builtin("zero")
HARMONIC = builtin("harmonic", omega=1.0)


class TestFlow:
    def test_free_straight_line(self):
        z = flow(ZERO, PhasePoint(1.0, 2.0), 0.0, 3.0, 1e-3)
        assert z.x == pytest.approx(7.0, abs=1e-12)
        assert z.xi == pytest.approx(2.0, abs=1e-15)

    def test_harmonic_quarter_period(self):
        z = flow(HARMONIC, PhasePoint(1.0, 0.0), 0.0, math.pi / 2, 1e-4)
        assert z.x == pytest.approx(0.0, abs=1e-6)
        assert z.xi == pytest.approx(-1.0, abs=1e-6)

    def test_harmonic_half_period(self):
        z = flow(HARMONIC, PhasePoint(0.0, 1.0), 0.0, math.pi, 1e-4)
        assert z.x == pytest.approx(0.0, abs=1e-6)
        assert z.xi == pytest.approx(-1.0, abs=1e-6)

    def test_window_guard(self):
        with pytest.raises(ValueError):
            flow(ZERO, PhasePoint(0.0, 0.0), 0.0, 11.0, 1e-3)


class TestAction:
    def test_free_particle(self):
        assert action(ZERO, PhasePoint(0.0, 2.0), 0.0, 1.0, 1e-4) == pytest.approx(2.0, abs=1e-8)

    def test_harmonic_full_period(self):
        # integral of (sin^2 - cos^2)/2 over a period vanishes
        assert action(HARMONIC, PhasePoint(1.0, 0.0), 0.0, 2 * math.pi, 1e-4) == \
            pytest.approx(0.0, abs=1e-5)

    def test_empty_interval(self):
        assert action(HARMONIC, PhasePoint(1.0, 1.0), 0.5, 0.5, 1e-4) == 0.0

    def test_signed_backward(self):
        fwd = action(ZERO, PhasePoint(0.0, 2.0), 0.0, 1.0, 1e-4)
        bwd = action(ZERO, PhasePoint(0.0, 2.0), 1.0, 0.0, 1e-4)
        assert bwd == pytest.approx(-fwd, abs=1e-10)


class TestConservation:
    def test_symplectic_energy(self):
        traj = trajectory(HARMONIC, PhasePoint(1.0, 0.5), 0.0, 1.0, 1e-4)
        energy = traj.xs**2 + traj.xis**2
        assert np.abs(energy - energy[0]).max() / energy[0] <= 1e-8

    def test_group_law(self, all_potentials):
        for p in all_potentials:
            z = PhasePoint(0.5, -1.0)
            via = flow(p, flow(p, z, 0.0, 0.35, 1e-4), 0.35, 0.7, 1e-4)
            direct = flow(p, z, 0.0, 0.7, 1e-4)
            assert math.hypot(via.x - direct.x, via.xi - direct.xi) <= 1e-8

    def test_time_reversal(self, all_potentials):
        for p in all_potentials:
            z = PhasePoint(-1.2, 1.7)
            back = flow(p, flow(p, z, 0.0, 0.8, 1e-4), 0.8, 0.0, 1e-4)
            assert math.hypot(back.x - z.x, back.xi - z.xi) <= 1e-8


class TestPairEstimates:
    def test_free_equality_pattern(self):
        z0, z1 = PhasePoint(1.0, 3.0), PhasePoint(0.0, 1.0)
        report = check_pair_estimates(ZERO, z0, z1, 0.0, 0.5)
        assert report.all_satisfied
        lhs, rhs, ok = report.residuals[0]
        assert ok and lhs == pytest.approx(abs(1.0 + 0.5 * 2.0), abs=1e-10)
        assert report.residuals[2][0] <= 1e-12  # third residual vanishes for V = 0

    def test_harmonic_example(self):
        report = check_pair_estimates(HARMONIC, PhasePoint(0.0, 0.0),
                                      PhasePoint(1.0, 0.0), 0.0, 0.5)
        assert report.all_satisfied

    def test_coincident_points(self):
        report = check_pair_estimates(HARMONIC, PhasePoint(1.0, 2.0),
                                      PhasePoint(1.0, 2.0), 0.0, 0.9)
        assert all(lhs <= 1e-12 for lhs, _, _ in report.residuals)

    def test_random_sweep(self, all_potentials):
        rng = np.random.default_rng(42)
        for p in all_potentials:
            for _ in range(60):
                s = float(rng.uniform(-0.5, 0.5))
                t = s + float(rng.uniform(-1.0, 1.0))
                z0 = PhasePoint(*rng.uniform(-5, 5, 2))
                z1 = PhasePoint(*rng.uniform(-5, 5, 2))
                report = check_pair_estimates(p, z0, z1, s, t, dt=2e-3)
                assert report.all_satisfied, (p.label, z0, z1, s, t)


class TestCollisionWindow:
    def test_free_fast_crossing(self):
        report = collision_window(ZERO, PhasePoint(0.5, 5.0), PhasePoint(-0.5, -5.0),
                                  0.0, 1.0, 2.0)
        # dropped short-time restriction for M2 = 0, window 2Cr/|dxi| = 0.4
        assert report.delta == 1.0
        assert report.window_halfwidth == pytest.approx(0.4)
        assert report.drift_bound == 0.0
        assert report.satisfied

    def test_harmonic_crossing(self):
        report = collision_window(HARMONIC, PhasePoint(0.0, 5.0), PhasePoint(0.0, -5.0),
                                  0.0, 0.1, 2.0)
        assert report.satisfied
        assert report.window_halfwidth == pytest.approx(0.04)

    def test_zero_relative_velocity(self):
        report = collision_window(HARMONIC, PhasePoint(0.05, 1.0), PhasePoint(-0.05, 1.0),
                                  0.0, 0.1, 2.0)
        assert report.zero_relative_velocity
        assert report.window_halfwidth == report.delta
        assert report.satisfied

    def test_delta_solves_margin(self):
        delta = collision_delta(1.0)
        assert math.exp(1.0) * (delta**2 + delta**3) <= 1e-2 + 1e-12
        assert math.exp(1.0) * ((delta * 1.01) ** 2 + (delta * 1.01) ** 3) > 1e-2

    def test_requires_close_start(self):
        with pytest.raises(ValueError):
            collision_window(ZERO, PhasePoint(5.0, 1.0), PhasePoint(-5.0, -1.0),
                             0.0, 1.0, 2.0)


class TestCubeContainment:
    def test_static_pair(self):
        report = cube_containment(ZERO, PhasePoint(0.0, 0.0), PhasePoint(0.5, 0.0),
                                  0.3, 0.0, 1.0)
        assert report.entered
        assert report.c_required == pytest.approx(1.0)

    def test_linear_drift(self):
        report = cube_containment(ZERO, PhasePoint(0.0, 0.0), PhasePoint(0.0, 0.5),
                                  0.0, 0.0, 1.0)
        assert report.entered and report.c_required <= 2.0

    def test_never_enters(self):
        report = cube_containment(ZERO, PhasePoint(0.0, 0.0), PhasePoint(30.0, 0.0),
                                  0.0, 0.0, 1.0)
        assert not report.entered
        assert math.isnan(report.c_required)

    def test_constant_uniform_in_eta(self, all_potentials):
        for p in all_potentials:
            worst = 0.0
            for eta in (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0):
                tau = min(1.0 / eta, 1.0)
                for frac, off_x, off_xi in ((0.9, 0.8, 0.5), (-0.95, -0.6, 0.9), (0.5, 0.9, -0.8)):
                    t_star = frac * tau
                    anchor = flow(p, PhasePoint(0.0, 0.0), 0.0, t_star, 1e-3)
                    entry = PhasePoint(anchor.x + off_x, anchor.xi + eta + off_xi)
                    z = flow(p, entry, t_star, 0.0, 1e-3)
                    report = cube_containment(p, PhasePoint(0.0, 0.0), z, 0.0, eta, 1.0)
                    assert report.entered, (p.label, eta, frac)
                    worst = max(worst, report.c_required)
            assert worst <= 20.0, (p.label, worst)


class TestExport:
    def test_trajectory_csv(self, tmp_path):
        traj = trajectory(HARMONIC, PhasePoint(1.0, 0.0), 0.0, 0.1, 1e-3)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["t", "x", "xi", "action"]
        assert len(rows) == len(traj.times) + 1
        assert float(rows[1][3]) == 0.0
