"""Tests for Jost solutions, Wronskians, spectral measure and the resolvent kernel"""

import unittest

import numpy as np

from rw_decay_lab.physics.errors import DomainError
from rw_decay_lab.physics.geometry import FreePotential, Geometry, Grid, ModeContext, SquareBarrier, normalize_mode
from rw_decay_lab.physics.jost import (
    _riccati,
    green_kernel,
    jost_pair,
    jost_solution,
    plug_in_residual,
    spectral_measure,
    spectral_sample,
    wronskian,
)


def barrier_plus(x, k, p0, a, b):
    """f_+ for a square barrier of height p0 (in units of hbar^2) on [a, b], by transfer matrices."""
    kap = np.sqrt(complex(p0 - k * k))
    alpha = np.exp(1j * k * b) * (1 + 1j * k / kap) / (2 * np.exp(kap * b))
    beta = np.exp(1j * k * b) * (1 - 1j * k / kap) / (2 * np.exp(-kap * b))
    fa = alpha * np.exp(kap * a) + beta * np.exp(-kap * a)
    dfa = kap * (alpha * np.exp(kap * a) - beta * np.exp(-kap * a))
    c = (fa + dfa / (1j * k)) / (2 * np.exp(1j * k * a))
    d = (fa - dfa / (1j * k)) / (2 * np.exp(-1j * k * a))
    inside = alpha * np.exp(kap * x) + beta * np.exp(-kap * x)
    left = c * np.exp(1j * k * x) + d * np.exp(-1j * k * x)
    return np.where(x > b, np.exp(1j * k * x), np.where(x >= a, inside, left))


class TestFreeJost(unittest.TestCase):
    """V = 0 test hook"""

    def setUp(self):
        self.hbar = 0.5
        self.mode = ModeContext.for_potential(FreePotential(), hbar=self.hbar)
        self.grid = Grid.uniform(-5.0, 5.0, 101)

    def test_plane_waves(self):
        energy = 0.7
        k = energy / self.hbar
        plus, minus = jost_pair(energy, self.mode, self.grid)
        x = self.grid.nodes
        np.testing.assert_allclose(plus.values, np.exp(1j * k * x), atol=1e-10)
        np.testing.assert_allclose(minus.values, np.exp(-1j * k * x), atol=1e-10)
        np.testing.assert_allclose(plus.derivative, 1j * k * np.exp(1j * k * x), atol=1e-9)

    def test_wronskian(self):
        energy = 1.3
        plus, minus = jost_pair(energy, self.mode, self.grid)
        result = wronskian(plus, minus)
        self.assertLess(abs(result.value - (-2j * energy / self.hbar)), 1e-9)
        self.assertLess(result.variation, 1e-10)

    def test_spectral_measure_closed_form(self):
        energy = 0.9
        for x, y in [(0.0, 0.0), (-1.0, 2.5), (3.0, -0.5)]:
            expected = self.hbar / (2 * energy) * np.cos(energy * (x - y) / self.hbar)
            self.assertAlmostEqual(spectral_measure(energy, x, y, self.mode), expected, places=9)

    def test_green_kernel_closed_form(self):
        for x, y in [(0.0, 0.0), (-0.3, 0.4), (1.0, 2.2)]:
            result = green_kernel(x, y, self.mode)
            expected = np.exp(-abs(x - y) / self.hbar) / (2 * self.hbar)
            self.assertLess(abs(result.value / expected - 1.0), 1e-8)
            self.assertAlmostEqual(result.ratio, 0.5, places=8)

    def test_rejects_nonpositive_energy(self):
        with self.assertRaises(DomainError):
            jost_pair(0.0, self.mode, self.grid)
        with self.assertRaises(DomainError):
            jost_solution("plus", -1.0, self.mode, self.grid)
        with self.assertRaises(DomainError):
            jost_solution("sideways", 1.0, self.mode, self.grid)


class TestSquareBarrier(unittest.TestCase):
    """Transfer-matrix oracle"""

    def setUp(self):
        self.height, self.a, self.b = 2.0, -1.0, 1.0
        self.mode = ModeContext.for_potential(SquareBarrier(self.height, self.a, self.b), hbar=1.0)
        self.grid = Grid.uniform(-4.0, 4.0, 81)

    def test_below_and_above_barrier(self):
        for energy in [1.0, 0.4, 2.0]:
            plus = jost_solution("plus", energy, self.mode, self.grid)
            expected = barrier_plus(self.grid.nodes, energy, self.height, self.a, self.b)
            error = np.max(np.abs(plus.values - expected)) / np.max(np.abs(expected))
            self.assertLess(error, 1e-8, msg=f"E={energy}")
            self.assertAlmostEqual(abs(plus.values[-1]), 1.0, delta=1e-8)

    def test_minus_by_reflection(self):
        # the barrier is symmetric, so f_-(x) = f_+(-x)
        energy = 0.8
        plus, minus = jost_pair(energy, self.mode, self.grid)
        np.testing.assert_allclose(minus.values, plus.values[::-1], atol=1e-8 * np.max(np.abs(plus.values)))


class TestReggeWheelerJost(unittest.TestCase):
    """Normalized Regge-Wheeler mode"""

    @classmethod
    def setUpClass(cls):
        cls.mode = normalize_mode(2, Geometry(mass=1.0, sigma=1))
        cls.grid = Grid.uniform(-30.0, 40.0, 1401)

    def test_wronskian_constant(self):
        for energy in [0.3, 0.8, 1.5]:
            plus, minus = jost_pair(energy, self.mode, self.grid)
            result = wronskian(plus, minus)
            self.assertLess(result.variation, 1e-6, msg=f"E={energy}")
            self.assertGreater(abs(result.value), 0.0)

    def test_plug_in_residual(self):
        plus, minus = jost_pair(0.7, self.mode, self.grid)
        self.assertLess(plug_in_residual(plus, self.mode), 1e-5)
        self.assertLess(plug_in_residual(minus, self.mode), 1e-5)

    def test_horizon_plane_wave(self):
        energy = 0.6
        k = energy / self.mode.hbar
        grid = Grid.uniform(-80.0, -60.0, 21)
        minus = jost_solution("minus", energy, self.mode, grid)
        np.testing.assert_allclose(minus.values * np.exp(1j * k * grid.nodes), 1.0, atol=1e-8)

    def test_far_field_outgoing(self):
        energy = 1.0
        k = energy / self.mode.hbar
        grid = Grid.uniform(1900.0, 2000.0, 11)
        plus = jost_solution("plus", energy, self.mode, grid)
        np.testing.assert_allclose(np.abs(plus.values * np.exp(-1j * k * grid.nodes)), 1.0, atol=1e-2)

    def test_stepper_conjugation_symmetry(self):
        k = 0.9 / self.mode.hbar
        targets = np.linspace(-2.0, 6.0, 9)
        h0, z0 = 0.3 + 1.1j, 0.05 + 0.01j
        h, z = _riccati(self.mode, k, 8.0, -2.0, h0, z0, targets, 1j * k)
        h_bar, z_bar = _riccati(self.mode, k, 8.0, -2.0, np.conj(h0), np.conj(z0), targets, -1j * k)
        np.testing.assert_allclose(h_bar, np.conj(h), atol=1e-10)
        np.testing.assert_allclose(z_bar, np.conj(z), atol=1e-10)

    def test_spectral_sample_symmetric_and_positive(self):
        grid = Grid.uniform(-6.0, 8.0, 29)
        sample = spectral_sample(0.8, self.mode, grid)
        np.testing.assert_allclose(sample.values, sample.values.T, atol=1e-12 * np.max(np.abs(sample.values)))
        self.assertTrue(np.all(np.diag(sample.values) > 0))
        self.assertAlmostEqual(sample.values[3, 17], spectral_measure(0.8, grid.nodes[3], grid.nodes[17], self.mode),
                               delta=1e-8 * np.max(np.abs(sample.values)))

    def test_green_kernel_bound(self):
        for x, y in [(0.0, 0.0), (2.0, 3.5), (-4.0, 1.0), (10.0, 9.0)]:
            result = green_kernel(x, y, self.mode)
            self.assertGreater(result.value, 0.0)
            self.assertLessEqual(result.ratio, 0.5 + 1e-9)

    def test_modulus_flattens_above_the_barrier(self):
        grid = Grid.uniform(-20.0, 30.0, 501)
        deviations = []
        for energy in [3.0, 6.0, 12.0]:
            plus = jost_solution("plus", energy, self.mode, grid)
            deviations.append(np.max(np.abs(np.abs(plus.values) - 1.0)))
        self.assertLess(deviations[1], deviations[0])
        self.assertLess(deviations[2], deviations[1])
        self.assertLess(deviations[2], 1e-2)


class TestGreenKernelScaling(unittest.TestCase):
    """One constant for the exponential bound across hbar"""

    def test_ratio_bounded_across_hbar(self):
        geometry = Geometry(mass=1.0, sigma=1)
        ratios = []
        for ell in [26, 52, 104]:
            mode = normalize_mode(ell, geometry)
            for offset in [0.0, 0.5, 2.0]:
                result = green_kernel(mode.x_max, mode.x_max + offset, mode)
                self.assertGreater(result.value, 0.0)
                ratios.append(result.ratio)
        self.assertLessEqual(max(ratios), 0.5 + 1e-9)
        self.assertGreater(min(ratios), 0.0)


if __name__ == '__main__':
    unittest.main(verbosity=2)
