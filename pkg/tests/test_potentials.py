import math

import numpy as np
import pytest

from wavepacket.potentials import builtin, m2_bound, verify_subquadratic


class TestBuiltins:
    def test_harmonic_values(self):
        p = builtin("harmonic", omega=1.0)
        assert p.v(0.0, 2.0) == pytest.approx(2.0, abs=1e-15)
        assert p.dv(0.0, 2.0) == pytest.approx(2.0, abs=1e-15)
        assert p.d2v(0.0, 2.0) == pytest.approx(1.0, abs=1e-15)

    def test_zero_everywhere(self):
        p = builtin("zero")
        xs = np.linspace(-30, 30, 17)
        for t in (-1.0, 0.0, 2.0):
            assert not np.any(p.v(t, xs))
            assert not np.any(p.dv(t, xs))
            assert not np.any(p.d2v(t, xs))

    def test_soft_branch_curvature_at_origin(self):
        # d2/dx2 sqrt(1 + x^2) = (1 + x^2)^(-3/2), so exactly 1 at x = 0
        p = builtin("soft_branch")
        assert p.d2v(0.3, 0.0) == pytest.approx(1.0, abs=1e-15)
        xs = np.linspace(-5, 5, 11)
        assert np.allclose(p.d2v(0.0, xs), (1 + xs**2) ** -1.5, atol=1e-14)

    def test_linear(self):
        p = builtin("linear", E=2.5)
        assert p.v(0.0, 3.0) == pytest.approx(7.5)
        assert p.d2v(0.0, 3.0) == 0.0

    def test_breathing_amplitude_guard(self):
        with pytest.raises(ValueError):
            builtin("breathing", omega0=1.0, a=0.6)
        p = builtin("breathing", omega0=1.0, a=0.5)
        assert p.time_dependent

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            builtin("coulomb")

    def test_non_finite_parameter(self):
        with pytest.raises(ValueError):
            builtin("harmonic", omega=math.inf)


class TestDerivativeConsistency:
    def test_finite_differences_match(self, all_potentials):
        xs = np.linspace(-10, 10, 101)
        h = 1e-4
        for p in all_potentials:
            for t in (-1.0, 0.0, 1.0):
                fd1 = (p.v(t, xs + h) - p.v(t, xs - h)) / (2 * h)
                fd2 = (p.v(t, xs + h) - 2 * p.v(t, xs) + p.v(t, xs - h)) / h**2
                scale1 = max(np.abs(p.dv(t, xs)).max(), 1.0)
                scale2 = max(np.abs(p.d2v(t, xs)).max(), 1.0)
                assert np.abs(fd1 - p.dv(t, xs)).max() / scale1 <= 1e-5
                assert np.abs(fd2 - p.d2v(t, xs)).max() / scale2 <= 1e-5


class TestVerifySubquadratic:
    def test_harmonic_seminorms(self):
        p = builtin("harmonic", omega=1.0)
        report = verify_subquadratic(p, (-50.0, 50.0), (0.0, 0.0), 3)
        seminorms = dict(report.seminorms)
        assert seminorms[2] == pytest.approx(1.0, abs=1e-4)
        assert seminorms[3] == pytest.approx(0.0, abs=1e-6)
        assert report.decay_epsilon == math.inf  # third derivative vanishes

    def test_zero_all_vanish(self):
        report = verify_subquadratic(builtin("zero"), (-20.0, 20.0), (0.0, 0.0), 4)
        assert all(mk == pytest.approx(0.0, abs=1e-9) for _, mk in report.seminorms)

    def test_soft_branch_decay(self):
        # d3 sqrt(1 + x^2) = -3x (1 + x^2)^(-5/2) decays like <x>^-4, so eps ~ 3
        report = verify_subquadratic(builtin("soft_branch"), (-50.0, 50.0), (0.0, 0.0), 3)
        assert report.decay_epsilon == pytest.approx(3.0, abs=0.2)

    def test_k_max_guard(self):
        with pytest.raises(ValueError):
            verify_subquadratic(builtin("zero"), (-5.0, 5.0), (0.0, 0.0), 1)

    def test_harmonic_higher_orders_vanish(self):
        report = verify_subquadratic(builtin("harmonic", omega=2.0), (-20.0, 20.0),
                                     (0.0, 0.0), 4)
        seminorms = dict(report.seminorms)
        assert seminorms[2] == pytest.approx(4.0, rel=1e-4)
        assert seminorms[3] <= 1e-6
        assert seminorms[4] <= 1e-2  # fourth differences of x^2 are pure roundoff


class TestM2Bound:
    def test_declared_values(self):
        assert m2_bound(builtin("zero")) == 0.0
        assert m2_bound(builtin("harmonic", omega=2.0)) == 4.0
        assert m2_bound(builtin("breathing", omega0=1.0, a=0.5)) == pytest.approx(2.25)
