"""Tests for the finite-box Mourre machinery"""

import os
import unittest

import numpy as np

from rw_decay_lab.physics.errors import DomainError, EmptyProjectorError, FitError
from rw_decay_lab.physics.geometry import FreePotential, Geometry, ModeContext, normalize_mode
from rw_decay_lab.physics.mourre import (
    commutator,
    commutator_norms,
    discretize,
    fit_power,
    function_of_operator,
    minimal_velocity_curve,
    mourre_bound,
    position_commutator_norms,
    propagation_curve,
    recurrence_time,
    smooth_indicator,
    sqrt_mourre_bound,
    uncertainty_check,
    with_hbar,
)

SLOW = os.environ.get("RW_DECAY_LAB_SLOW") == "1"


def rw_mode(hbar, ell=10):
    return with_hbar(normalize_mode(ell, Geometry(mass=1.0, sigma=1)), hbar)


class TestDiscretize(unittest.TestCase):

    def setUp(self):
        self.free = ModeContext.for_potential(FreePotential(), hbar=0.1)

    def test_hermitian(self):
        pair = discretize(rw_mode(0.2), n_points=300)
        self.assertLess(np.max(np.abs(pair.a - pair.a.conj().T)), 1e-14)
        self.assertLess(np.max(np.abs(pair.h - pair.h.T)), 1e-14)
        self.assertLess(np.max(np.abs(pair.p - pair.p.conj().T)), 1e-14)

    def test_free_box_spectrum(self):
        expected = (0.1 * np.arange(1, 6) * np.pi / 100.0) ** 2
        for order, rtol in ((2, 1e-4), (4, 1e-6)):
            pair = discretize(self.free, n_points=999, order=order)
            np.testing.assert_allclose(pair.spectrum().values[:5], expected, rtol=rtol, err_msg=f"order {order}")

    def test_commutator_identity_on_smooth_states(self):
        mode = normalize_mode(4, Geometry(mass=1.0, sigma=1))
        pair = discretize(mode, n_points=1000)
        phi = np.exp(-0.5 * ((pair.nodes - mode.x_max) / 3.0) ** 2)
        exact = commutator(pair, formal=False) @ phi
        formal = commutator(pair) @ phi
        self.assertLess(np.linalg.norm(exact - formal) / np.linalg.norm(formal), 5e-3)

    def test_rejects_bad_boxes(self):
        with self.assertRaises(DomainError):
            discretize(self.free, n_points=100)
        with self.assertRaises(DomainError):
            discretize(self.free, domain=(-20.0, 50.0), n_points=400)
        with self.assertRaises(DomainError):
            discretize(self.free, n_points=400, order=3)
        with self.assertRaises(DomainError):
            with_hbar(self.free, 0.0)


class TestFunctionalCalculus(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.pair = discretize(rw_mode(0.2), n_points=400)

    def test_identity(self):
        scale = np.max(np.abs(self.pair.spectrum().values))
        np.testing.assert_allclose(function_of_operator(self.pair, lambda lam: lam), self.pair.h, atol=1e-10 * scale)

    def test_square_of_root(self):
        root = lambda lam: np.sqrt(np.clip(lam, 0.0, None))
        rebuilt = function_of_operator(self.pair, lambda lam: root(lam) ** 2)
        scale = np.max(np.abs(self.pair.spectrum().values))
        np.testing.assert_allclose(rebuilt, self.pair.h, atol=1e-10 * scale)

    def test_propagator_unitary(self):
        hbar = self.pair.hbar
        propagator = function_of_operator(self.pair, lambda lam: np.exp(-5j * lam / hbar))
        np.testing.assert_allclose(np.linalg.norm(propagator, axis=0), 1.0, atol=1e-9)


class TestMourre(unittest.TestCase):

    def test_free_commutator_is_twice_h(self):
        hbar = 0.1
        pair = discretize(ModeContext.for_potential(FreePotential(), hbar=hbar), n_points=400)
        interval = (0.075, 100.0)
        values = pair.spectrum().values
        lowest = values[values >= interval[0]][0]
        self.assertAlmostEqual(mourre_bound(pair, interval), 2.0 * lowest / hbar, places=8)
        self.assertGreaterEqual(mourre_bound(pair, interval), 0.15 / hbar * (1 - 1e-9))
        self.assertAlmostEqual(sqrt_mourre_bound(pair, interval), np.sqrt(lowest) / hbar, places=8)

    def test_regge_wheeler_positive(self):
        pair = discretize(rw_mode(0.2), n_points=800)
        self.assertGreater(mourre_bound(pair, (0.075, 100.0)), 0.0)
        self.assertGreater(sqrt_mourre_bound(pair, (0.075, 100.0)), 0.0)

    def test_interval_errors(self):
        pair = discretize(rw_mode(0.2), n_points=300)
        with self.assertRaises(EmptyProjectorError):
            mourre_bound(pair, (1e6, 2e6))
        with self.assertRaises(DomainError):
            mourre_bound(pair, (0.0, 1.0))


class TestUncertainty(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.hbar = 0.2
        cls.pair = discretize(rw_mode(cls.hbar), n_points=1000)

    def test_random_vectors(self):
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((100, self.pair.size)) + 1j * rng.standard_normal((100, self.pair.size))
        self.assertGreaterEqual(uncertainty_check(self.pair, vectors), self.hbar * (1 - 1e-3))

    def test_harmonic_ground_state_saturates(self):
        y = self.pair.nodes - self.pair.center
        ground = np.exp(-y**2 / (2 * self.hbar))
        self.assertAlmostEqual(uncertainty_check(self.pair, ground) / self.hbar, 1.0, delta=1e-3)
        self.assertAlmostEqual(uncertainty_check(self.pair, 7 * ground), uncertainty_check(self.pair, ground), places=12)

    def test_zero_vector(self):
        with self.assertRaises(DomainError):
            uncertainty_check(self.pair, np.zeros(self.pair.size))


class TestCommutatorNorms(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.pair = discretize(rw_mode(0.2), n_points=500)

    def test_zeroth_norm_is_sup(self):
        g = smooth_indicator((0.5, 1.5), 0.1)
        norms = commutator_norms(self.pair, g, k_max=2)
        self.assertAlmostEqual(norms[0], np.max(np.abs(g(self.pair.spectrum().values))), places=10)
        self.assertEqual(norms.shape, (3,))

    def test_cutoff_off_spectrum(self):
        norms = commutator_norms(self.pair, smooth_indicator((1e3, 2e3), 1.0), k_max=3)
        self.assertTrue(np.all(norms < 1e-10))

    def test_position_commutators(self):
        g = smooth_indicator((0.5, 1.5), 0.1)
        first, second = position_commutator_norms(self.pair, np.tanh, g)
        self.assertGreater(first, 0.0)
        self.assertGreater(second, 0.0)
        flat = position_commutator_norms(self.pair, lambda x: np.ones_like(x), g)
        self.assertEqual(flat, (0.0, 0.0))


class TestPropagation(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.pair = discretize(rw_mode(0.2), n_points=400)
        cls.g = staticmethod(smooth_indicator((0.5, 1.5), 0.1))
        cls.sup = float(np.max(cls.g(cls.pair.spectrum().values)))

    def test_unweighted_curve_constant(self):
        times = [0.0, 2.0, 7.5]
        for generator in ("H", "sqrtH"):
            curve = propagation_curve(self.pair, generator, self.g, 0.0, times)
            np.testing.assert_allclose(curve, self.sup, atol=1e-9, err_msg=generator)

    def test_weighted_curve_bounded(self):
        curve = propagation_curve(self.pair, "H", self.g, 2.0, [0.0, 1.0, 4.0], threads=2)
        self.assertLessEqual(curve[0], self.sup + 1e-12)
        self.assertTrue(np.all(curve <= self.sup + 1e-12))
        self.assertTrue(np.all(curve > 0.0))

    def test_minimal_velocity_bounded(self):
        curve = minimal_velocity_curve(self.pair, self.g, 0.5, [0.0, 2.0, 5.0])
        self.assertTrue(np.all(curve <= self.sup + 1e-12))

    def test_argument_checks(self):
        with self.assertRaises(DomainError):
            propagation_curve(self.pair, "H", self.g, -1.0, [0.0])
        with self.assertRaises(DomainError):
            propagation_curve(self.pair, "cosH", self.g, 1.0, [0.0])

    def test_recurrence_time(self):
        self.assertAlmostEqual(recurrence_time(self.pair, (0.5, 4.0)), 12.5)
        self.assertAlmostEqual(recurrence_time(self.pair, (0.5, 4.0), "sqrtH"), 50.0)


class TestFitPower(unittest.TestCase):

    def test_exact_power(self):
        times = np.linspace(0.0, 300.0, 301)
        values = 3.0 * (1.0 + (0.1 * times) ** 2) ** -1.0
        fit = fit_power(times, values, 0.1)
        self.assertAlmostEqual(fit.slope, -2.0, places=10)
        self.assertAlmostEqual(fit.constant, 3.0, places=8)

    def test_failures(self):
        times = np.linspace(0.0, 5.0, 6)
        with self.assertRaises(FitError):
            fit_power(times, np.ones(6), 0.1)
        with self.assertRaises(FitError):
            fit_power(np.linspace(0.0, 300.0, 31), np.zeros(31), 0.1)


class TestCoarseScaling(unittest.TestCase):
    """One small hbar pair on modest boxes"""

    @classmethod
    def setUpClass(cls):
        cls.hbars = np.array([0.2, 0.14])
        cls.pairs = [discretize(rw_mode(hbar), n_points=n) for hbar, n in zip(cls.hbars, (800, 1100))]

    def test_mourre_bound_pair(self):
        bounds = [mourre_bound(pair, (0.075, 100.0)) for pair in self.pairs]
        self.assertGreater(min(bounds), 0.0)
        self.assertLess(max(bounds) / min(bounds), 2.5)

    def test_commutator_norms_shrink_with_hbar(self):
        g = smooth_indicator((0.5, 1.5), 0.1)
        norms = np.array([commutator_norms(pair, g, k_max=2) for pair in self.pairs])
        for k in (1, 2):
            slope = np.polyfit(np.log(self.hbars), np.log(norms[:, k]), 1)[0]
            self.assertGreater(slope, 0.0, msg=f"k={k}")


@unittest.skipUnless(SLOW, "set RW_DECAY_LAB_SLOW=1 for large dense eigenproblems")
class TestSemiclassicalScaling(unittest.TestCase):

    def test_mourre_constant_uniform_in_hbar(self):
        bounds = [mourre_bound(discretize(rw_mode(hbar), n_points=n), (0.075, 100.0))
                  for hbar, n in ((0.1, 1500), (0.05, 2500))]
        self.assertGreater(min(bounds), 0.05)
        self.assertLess(max(bounds) / min(bounds), 2.0)

    def test_mourre_grid_refinement(self):
        coarse = mourre_bound(discretize(rw_mode(0.2), n_points=800), (0.075, 100.0))
        fine = mourre_bound(discretize(rw_mode(0.2), n_points=1600), (0.075, 100.0))
        self.assertAlmostEqual(coarse / fine, 1.0, delta=0.1)

    def test_commutator_norm_orders(self):
        g = smooth_indicator((0.5, 1.5), 0.1)
        hbars = np.array([0.2, 0.1, 0.05])
        norms = np.array([commutator_norms(discretize(rw_mode(hbar), n_points=n), g, k_max=2)
                          for hbar, n in zip(hbars, (800, 1500, 2500))])
        for k in (1, 2):
            slope = np.polyfit(np.log(hbars), np.log(norms[:, k]), 1)[0]
            self.assertAlmostEqual(slope, k, delta=0.5, msg=f"k={k}")

    def test_weighted_propagation_decays(self):
        pair = discretize(rw_mode(0.1), n_points=1500)
        g = smooth_indicator((0.5, 1.5), 0.1)
        t_max = recurrence_time(pair, (0.4, 1.6))
        times = np.linspace(0.0, t_max, 25)
        curve = propagation_curve(pair, "H", g, 2.0, times, threads=4)
        self.assertLess(curve[-1], 0.5 * curve[0])


if __name__ == '__main__':
    unittest.main(verbosity=2)
