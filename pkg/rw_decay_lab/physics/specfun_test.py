"""Tests for the special function layer"""

import unittest

import numpy as np
from scipy import special

from rw_decay_lab.physics.errors import ModeIndexError, OverflowRangeError, PoleError
from rw_decay_lab.physics.specfun import (
    airy,
    bessel_imag_order,
    bessel_imag_order_derivative,
    complex_gamma,
    spherical_harmonic,
)


class TestAiry(unittest.TestCase):
    """Airy pair"""

    def test_wronskian(self):
        for x in [-10.0, 0.0, 5.0]:
            self.assertAlmostEqual(airy(x).wronskian, 1.0 / np.pi, delta=1e-10)

    def test_value_at_origin(self):
        self.assertAlmostEqual(airy(0.0).ai, 3.0 ** (-2.0 / 3.0) / special.gamma(2.0 / 3.0), places=12)
        self.assertAlmostEqual(airy(0.0).ai, 0.3550280539, places=10)

    def test_leading_asymptotics(self):
        x = 20.0
        xi = 2.0 / 3.0 * x**1.5
        ratio = airy(x).ai * 2.0 * np.sqrt(np.pi) * x**0.25 * np.exp(xi)
        self.assertAlmostEqual(ratio, 1.0, delta=1e-2)

    def test_overflow(self):
        with self.assertRaises(OverflowRangeError):
            airy(150.0)
        with self.assertRaises(OverflowRangeError):
            airy(-121.0)


class TestBessel(unittest.TestCase):
    """Modified Bessel functions of imaginary order"""

    def test_order_zero_matches_i0(self):
        xs = np.array([1e-6, 0.5, 1.9, 2.5, 10.0, 50.0])
        values, conjugates = bessel_imag_order(0.0, xs)
        np.testing.assert_allclose(values.real, special.iv(0, xs), rtol=1e-9)
        np.testing.assert_allclose(values.imag, 0.0, atol=1e-12 * np.abs(values).max())
        self.assertAlmostEqual(bessel_imag_order(0.0, 1e-8)[0].real, 1.0, places=12)

    def test_small_argument_law(self):
        nu, x = 2.0, 1e-3
        value, _ = bessel_imag_order(nu, x)
        normalized = value * complex_gamma(1 + 1j * nu) * (x / 2) ** (-1j * nu)
        self.assertLess(abs(normalized - 1.0), 1e-5)

    def test_conjugate_pair(self):
        value, conjugate = bessel_imag_order(1.3, 4.2)
        self.assertEqual(conjugate, np.conj(value))

    def test_wronskian_constant(self):
        nu = 1.5
        xs = np.linspace(0.2, 8.0, 40)
        values, _ = bessel_imag_order(nu, xs)
        derivs, _ = bessel_imag_order_derivative(nu, xs)
        wronskian = (values * np.conj(derivs) - derivs * np.conj(values)) * xs
        expected = -2j * np.sinh(np.pi * nu) / np.pi
        np.testing.assert_allclose(wronskian, expected, rtol=1e-6)

    def test_ode_residual(self):
        nu, h = 0.8, 1e-5
        mu2 = -(nu**2)
        for x in [0.5, 2.0, 4.0, 7.5, 12.0]:
            value, _ = bessel_imag_order(nu, x)
            first, _ = bessel_imag_order_derivative(nu, x)
            up, _ = bessel_imag_order_derivative(nu, x + h)
            down, _ = bessel_imag_order_derivative(nu, x - h)
            second = (up - down) / (2 * h)
            residual = x * x * second + x * first - (x * x + mu2) * value
            self.assertLess(abs(residual), 1e-7 * x * x * abs(value))

    def test_scaled_variant(self):
        value, _ = bessel_imag_order(0.5, 30.0)
        scaled, _ = bessel_imag_order(0.5, 30.0, scaled=True)
        self.assertAlmostEqual(abs(scaled * np.exp(30.0) / value), 1.0, places=10)
        big, _ = bessel_imag_order(0.5, 900.0, scaled=True)
        self.assertTrue(np.isfinite(big))

    def test_overflow(self):
        with self.assertRaises(OverflowRangeError):
            bessel_imag_order(1.0, 800.0)


class TestGamma(unittest.TestCase):
    """Complex Gamma"""

    def test_closed_forms(self):
        self.assertAlmostEqual(complex_gamma(1.0), 1.0, places=14)
        self.assertAlmostEqual(complex_gamma(0.5).real, np.sqrt(np.pi), places=13)

    def test_reflection_oracle(self):
        for y in [0.5, 2.0, 10.0]:
            expected = np.pi * y / np.sinh(np.pi * y)
            self.assertAlmostEqual(abs(complex_gamma(1 + 1j * y)) ** 2 / expected, 1.0, places=12)

    def test_recurrence(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            z = complex(rng.uniform(0.5, 2.0), rng.uniform(-100.0, 100.0))
            lhs = complex_gamma(z + 1)
            rhs = z * complex_gamma(z)
            self.assertLess(abs(lhs - rhs), 1e-11 * abs(lhs))

    def test_poles(self):
        for z in [0, -1, -7]:
            with self.assertRaises(PoleError):
                complex_gamma(z)


class TestSphericalHarmonics(unittest.TestCase):
    """Spherical harmonics"""

    def setUp(self):
        self.l_max = 20
        mu, self.weights_theta = np.polynomial.legendre.leggauss(self.l_max + 1)
        self.theta = np.arccos(mu)
        n_phi = 2 * self.l_max + 2
        self.phi = 2 * np.pi * np.arange(n_phi) / n_phi
        self.weight_phi = 2 * np.pi / n_phi

    def _integrate(self, values):
        return np.sum(values * self.weights_theta[:, None]) * self.weight_phi

    def test_constant_mode(self):
        theta, phi = np.meshgrid(self.theta, self.phi, indexing="ij")
        np.testing.assert_allclose(spherical_harmonic(0, 0, theta, phi), 1 / np.sqrt(4 * np.pi))

    def test_orthonormality(self):
        theta, phi = np.meshgrid(self.theta, self.phi, indexing="ij")
        for ell in [0, 1, 5, 12, 20]:
            for j in sorted({-ell, -ell // 2, 0, ell // 3, ell}):
                y = spherical_harmonic(ell, j, theta, phi)
                self.assertAlmostEqual(self._integrate(np.abs(y) ** 2), 1.0, delta=1e-10)
        a = spherical_harmonic(7, 3, theta, phi)
        b = spherical_harmonic(9, 3, theta, phi)
        self.assertLess(abs(self._integrate(a * np.conj(b))), 1e-12)

    def test_sup_growth(self):
        theta, phi = np.meshgrid(self.theta, self.phi, indexing="ij")
        ratios = []
        for ell in range(self.l_max + 1):
            peak = max(np.abs(spherical_harmonic(ell, j, theta, phi)).max() for j in range(-ell, ell + 1))
            ratios.append(peak / np.sqrt(1.0 + ell))
        self.assertLess(max(ratios) / min(ratios), 3.0)

    def test_azimuthal_dependence(self):
        theta = np.full(5, 0.7)
        phi = np.linspace(0.0, 6.0, 5)
        reduced = spherical_harmonic(4, -2, theta, phi) * np.exp(2j * phi)
        np.testing.assert_allclose(reduced, reduced[0], atol=1e-13)

    def test_index_error(self):
        with self.assertRaises(ModeIndexError):
            spherical_harmonic(2, 3, 0.1, 0.1)
        with self.assertRaises(IndexError):
            spherical_harmonic(1, -2, 0.1, 0.1)


if __name__ == '__main__':
    unittest.main(verbosity=2)
