"""Tests for the angular decomposition and the mode-summed evolution"""

import os
import unittest

import numpy as np
from scipy import integrate

from rw_decay_lab.physics.errors import DomainError, ModeIndexError
from rw_decay_lab.physics.evolution import bump, evolve_mode_timedomain
from rw_decay_lab.physics.fullwave import (
    SPECTRAL_FIT_SAMPLES,
    AngularField,
    _sample_times,
    angular_weighted_norm,
    decompose,
    evolve_full,
    mode_index,
    project_gauge,
    resum,
    sphere_quadrature,
    theorem_targets,
    truncate,
    verify_theorem,
)
from rw_decay_lab.physics.geometry import Geometry, Grid
from rw_decay_lab.physics.specfun import spherical_harmonic

SLOW = os.environ.get("RW_DECAY_LAB_SLOW") == "1"


def random_field(grid, l_max, filled, seed=0):
    rng = np.random.default_rng(seed)
    modes = {}
    for ell in range(filled + 1):
        for j in range(-ell, ell + 1):
            amplitude = rng.standard_normal() + 1j * rng.standard_normal()
            modes[(ell, j)] = (amplitude * bump(grid.nodes, center=rng.uniform(-2, 2)), np.zeros(grid.size))
    return AngularField.from_modes(grid, l_max, modes)


def stride_of(run, grid):
    return int(round((run.sample_nodes[1] - run.sample_nodes[0]) / grid.spacing))


def on_quadrature(field, quadrature):
    theta, phi = quadrature.directions
    values = resum(field, theta, phi)
    return values.reshape(field.grid.size, quadrature.theta.size, quadrature.phi.size)


class TestQuadrature(unittest.TestCase):

    def test_area(self):
        for l_max in (0, 3, 8):
            self.assertAlmostEqual(sphere_quadrature(l_max).weights.sum(), 4 * np.pi, places=12)

    def test_orthonormal_harmonics(self):
        quadrature = sphere_quadrature(6)
        theta, phi = quadrature.directions
        table = np.array([spherical_harmonic(ell, j, theta, phi) for ell in range(7) for j in range(-ell, ell + 1)])
        gram = (table * quadrature.weights.ravel()) @ table.conj().T
        np.testing.assert_allclose(gram, np.eye(49), atol=1e-12)

    def test_rejects_bad_degree(self):
        with self.assertRaises(DomainError):
            sphere_quadrature(-1)
        with self.assertRaises(DomainError):
            sphere_quadrature(40)


class TestDecompose(unittest.TestCase):

    def setUp(self):
        self.grid = Grid.uniform(-5.0, 5.0, 41)

    def test_band_limited_recovery(self):
        field = random_field(self.grid, 5, 3)
        recovered = decompose(on_quadrature(field, sphere_quadrature(5)), self.grid, sphere_quadrature(5))
        np.testing.assert_allclose(recovered.f, field.f, atol=1e-12)
        self.assertFalse(recovered.real)

    def test_resum_identity(self):
        quadrature = sphere_quadrature(4)
        field = random_field(self.grid, 4, 4, seed=3)
        samples = on_quadrature(field, quadrature)
        again = on_quadrature(decompose(samples, self.grid, quadrature), quadrature)
        self.assertLess(np.max(np.abs(again - samples)), 1e-8)

    def test_real_data_symmetry(self):
        quadrature = sphere_quadrature(3)
        theta, phi = np.meshgrid(quadrature.theta, quadrature.phi, indexing="ij")
        angular = 1.0 + np.cos(theta) + np.sin(theta) ** 2 * np.sin(2 * phi)
        samples = bump(self.grid.nodes)[:, None, None] * angular[None]
        field = decompose(samples, self.grid, quadrature)
        self.assertTrue(field.real)
        for ell in range(4):
            for j in range(1, ell + 1):
                plus, _ = field.coefficient(ell, j)
                minus, _ = field.coefficient(ell, -j)
                np.testing.assert_allclose(minus, (-1) ** j * np.conj(plus), atol=1e-13)
        values = resum(field, [0.3, 2.0], [1.0, 4.0])
        self.assertTrue(np.isrealobj(values))
        exact = bump(self.grid.nodes)[:, None] * (1.0 + np.cos([0.3, 2.0]) + np.sin([0.3, 2.0]) ** 2 * np.sin([2.0, 8.0]))
        np.testing.assert_allclose(values, exact, atol=1e-12)

    def test_aliasing_warning(self):
        quadrature = sphere_quadrature(2)
        theta, phi = np.meshgrid(quadrature.theta, quadrature.phi, indexing="ij")
        samples = bump(self.grid.nodes)[:, None, None] * (np.sin(theta) ** 3 * np.cos(3 * phi))[None]
        with self.assertLogs("rw_decay_lab.fullwave", level="WARNING"):
            decompose(samples, self.grid, quadrature)

    def test_shape_checks(self):
        with self.assertRaises(DomainError):
            decompose(np.zeros((41, 2, 2)), self.grid, sphere_quadrature(2))
        with self.assertRaises(ModeIndexError):
            mode_index(2, 3)
        with self.assertRaises(ModeIndexError):
            mode_index(4, 0, l_max=3)
        self.assertEqual(mode_index(2, -2), 4)

    def test_single_mode_resum(self):
        f = bump(self.grid.nodes)
        field = AngularField.from_modes(self.grid, 3, {(2, 1): (f, np.zeros_like(f))})
        theta, phi = np.array([0.2, 1.1, 2.9]), np.array([0.0, 2.5, 5.0])
        np.testing.assert_allclose(resum(field, theta, phi), f[:, None] * spherical_harmonic(2, 1, theta, phi)[None],
                                   atol=1e-14)


class TestNorms(unittest.TestCase):

    def setUp(self):
        self.grid = Grid.uniform(-5.0, 5.0, 81)

    def test_parseval(self):
        quadrature = sphere_quadrature(4)
        field = random_field(self.grid, 4, 4, seed=7)
        samples = on_quadrature(field, quadrature)
        density = np.tensordot(np.abs(samples) ** 2, quadrature.weights, axes=([1, 2], [0, 1]))
        direct = np.sqrt(integrate.simpson(density, x=self.grid.nodes))
        self.assertAlmostEqual(angular_weighted_norm(field) / direct, 1.0, places=10)

    def test_angular_weight(self):
        f = bump(self.grid.nodes)
        field = AngularField.from_modes(self.grid, 4, {(3, -2): (f, np.zeros_like(f))})
        base = angular_weighted_norm(field)
        for s in (0.5, 1.0, 2.0):
            self.assertAlmostEqual(angular_weighted_norm(field, s) / base, 12.0 ** (s / 2), places=10)
        self.assertEqual(angular_weighted_norm(field, component="g"), 0.0)

    def test_mode_sum_converges(self):
        modes = {(ell, 0): ((1.0 + ell) ** -8 * bump(self.grid.nodes), np.zeros(self.grid.size)) for ell in range(11)}
        field = AngularField.from_modes(self.grid, 10, modes)
        kept = truncate(field, 8)
        tail = field.replace(field.f - kept.f, field.g - kept.g)
        self.assertLess(angular_weighted_norm(tail) / angular_weighted_norm(field), 1e-4)


class TestGauge(unittest.TestCase):

    def setUp(self):
        self.field = random_field(Grid.uniform(-5.0, 5.0, 41), 3, 3, seed=11)

    def test_removed_modes(self):
        for sigma, removed in ((1, 0), (0, 1), (-3, 4)):
            projected = project_gauge(self.field, sigma)
            self.assertEqual(projected.sigma, sigma)
            self.assertFalse(np.any(projected.f[:removed]))
            np.testing.assert_array_equal(projected.f[removed:], self.field.f[removed:])

    def test_idempotent_and_symmetric(self):
        other = random_field(self.field.grid, 3, 3, seed=12)
        for sigma in (1, 0, -3):
            once = project_gauge(self.field, sigma)
            np.testing.assert_array_equal(project_gauge(once, sigma).f, once.f)
            left = np.vdot(project_gauge(self.field, sigma).f, other.f)
            right = np.vdot(self.field.f, project_gauge(other, sigma).f)
            self.assertAlmostEqual(abs(left - right), 0.0, places=12)

    def test_bad_sigma(self):
        with self.assertRaises(DomainError):
            project_gauge(self.field, 2)
        with self.assertRaises(DomainError):
            theorem_targets(5)

    def test_targets(self):
        self.assertEqual((theorem_targets(1).proved, theorem_targets(1).price), (-3.0, -3.0))
        self.assertEqual((theorem_targets(0).proved, theorem_targets(0).price), (-4.0, -5.0))
        self.assertEqual((theorem_targets(-3).proved, theorem_targets(-3).price), (-6.0, -7.0))
        targets = theorem_targets(1, ell_min=3)
        self.assertEqual((targets.ell_min, targets.proved, targets.price), (3, -8.0, -9.0))


class TestEvolveFull(unittest.TestCase):

    def setUp(self):
        self.grid = Grid.uniform(-30.0, 30.0, 601)
        self.geometry = Geometry(mass=1.0, sigma=1)
        self.profile = bump(self.grid.nodes, center=5.0, width=1.5)
        self.zero = np.zeros(self.grid.size)
        self.times = [0.0, 2.5, 5.0]

    def test_single_mode(self):
        field = AngularField.from_modes(self.grid, 2, {(2, 1): (self.profile, self.zero)})
        theta, phi = np.array([0.4, 1.7]), np.array([0.3, 3.3])
        run = evolve_full(field, self.geometry, self.times, directions=(theta, phi))
        mode = evolve_mode_timedomain(self.profile, self.zero, self.grid, 2, self.geometry, 5.0, times=self.times)
        harmonic = spherical_harmonic(2, 1, theta, phi)
        for k, state in enumerate(mode.states):
            expected = state.psi[:: stride_of(run, self.grid)][:, None] * harmonic[None]
            np.testing.assert_allclose(run.samples[k], expected, atol=1e-12)

    def test_linearity(self):
        a = AngularField.from_modes(self.grid, 2, {(0, 0): (self.profile, self.zero), (1, 0): (self.zero, self.profile)})
        b = AngularField.from_modes(self.grid, 2, {(2, -1): (0.5 * self.profile, self.zero)})
        total = evolve_full(a + b, self.geometry, self.times, threads=2)
        parts = [evolve_full(x, self.geometry, self.times) for x in (a, b)]
        np.testing.assert_allclose(total.samples, parts[0].samples + parts[1].samples, atol=1e-12)
        np.testing.assert_allclose(total.mode_observer, parts[0].mode_observer + parts[1].mode_observer, atol=1e-12)

    def test_radial_data_stays_radial(self):
        field = AngularField.from_modes(self.grid, 3, {(0, 0): (self.profile, self.zero)}, real=True)
        run = evolve_full(field, self.geometry, self.times)
        spread = np.max(np.abs(run.samples - run.samples[:, :, :1]))
        self.assertLess(spread, 1e-13 * np.max(np.abs(run.samples)))

    def test_real_field(self):
        quadrature = sphere_quadrature(1)
        theta, phi = np.meshgrid(quadrature.theta, quadrature.phi, indexing="ij")
        angular = np.sin(theta) * np.cos(phi)
        field = decompose(self.profile[:, None, None] * angular[None], self.grid, quadrature)
        run = evolve_full(field, self.geometry, self.times, directions=(np.array([1.0]), np.array([0.5])))
        mode = evolve_mode_timedomain(self.profile, self.zero, self.grid, 1, self.geometry, 5.0, times=self.times)
        stride = stride_of(run, self.grid)
        weight = (1.0 + self.grid.nodes**2) ** -2.3
        for k, state in enumerate(mode.states):
            np.testing.assert_allclose(run.samples[k, :, 0], state.psi[::stride] * np.sin(1.0) * np.cos(0.5), atol=1e-12)
            radial = np.sqrt(integrate.simpson(weight * state.psi**2, x=self.grid.nodes))
            self.assertAlmostEqual(run.weighted_l2[k] / (radial * np.sqrt(4 * np.pi / 3)), 1.0, places=10)

    def test_argument_checks(self):
        field = AngularField.from_modes(self.grid, 1, {(0, 0): (self.profile, self.zero)})
        with self.assertRaises(DomainError):
            evolve_full(field, Geometry(mass=1.0, sigma=0), self.times)
        with self.assertRaises(DomainError):
            evolve_full(field, self.geometry, self.times, method="leapfrog")
        with self.assertRaisesRegex(DomainError, "ell=0"):
            evolve_full(field, self.geometry, self.times, cfl=1.5)


class TestSampleTimes(unittest.TestCase):
    """Output times requested by verify_theorem"""

    def test_spectral_fills_fit_window(self):
        norm_times = np.linspace(150.0, 350.0, 12)
        times = _sample_times(norm_times, (150.0, 350.0), 350.0, "spectral")
        inside = times[(times >= 150.0) & (times <= 350.0)]
        self.assertGreaterEqual(inside.size, SPECTRAL_FIT_SAMPLES)
        self.assertTrue(np.all(np.diff(times) > 0))
        self.assertEqual(times[-1], 350.0)

    def test_window_clipped_to_final_time(self):
        times = _sample_times(np.array([10.0]), (20.0, 80.0), 50.0, "spectral")
        self.assertEqual(times.max(), 50.0)
        self.assertGreaterEqual(np.count_nonzero(times >= 20.0), SPECTRAL_FIT_SAMPLES)

    def test_timedomain_unchanged(self):
        norm_times = np.linspace(150.0, 350.0, 12)
        times = _sample_times(norm_times, (150.0, 350.0), 400.0, "timedomain")
        np.testing.assert_array_equal(times, np.append(norm_times, 400.0))


@unittest.skipUnless(SLOW, "set RW_DECAY_LAB_SLOW=1 for late-time tails")
class TestDecayTheorems(unittest.TestCase):

    def _data(self, half_width, spacing, sigma):
        grid = Grid.uniform(-half_width, half_width, int(round(2 * half_width / spacing)) + 1)
        quadrature = sphere_quadrature(1)
        theta, _ = np.meshgrid(quadrature.theta, quadrature.phi, indexing="ij")
        profile = bump(grid.nodes, center=10.0, width=3.0)
        samples = profile[:, None, None] * (1.0 + 0.5 * np.cos(theta))[None]
        return decompose(samples, grid, quadrature, sigma=sigma)

    def test_generic_data(self):
        field = self._data(500.0, 0.1, 1)
        report = verify_theorem(field, Geometry(mass=1.0, sigma=1), 350.0, (150.0, 350.0))
        self.assertEqual(report.targets.ell_min, 0)
        self.assertAlmostEqual(report.overall.exponent, -3.0, delta=0.3)
        self.assertTrue(report.passed)

    def test_gauge_removes_monopole(self):
        field = self._data(1200.0, 0.2, 0)
        report = verify_theorem(field, Geometry(mass=1.0, sigma=0), 800.0, (400.0, 800.0))
        self.assertEqual(report.targets.ell_min, 1)
        self.assertLessEqual(report.overall.exponent, -4.0)
        self.assertTrue(report.passed)


if __name__ == '__main__':
    unittest.main(verbosity=2)
