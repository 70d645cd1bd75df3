"""
Copyright © Enzo Busseti 2019.

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program.  If not, see <https://www.gnu.org/licenses/>.
"""

from unittest import TestCase
from .reachavoid_adp import *

import numpy as np
import scipy.integrate

from .sampling import draw


def grid_basis(horizon, per_side=4, variance=0.04):
    ticks = np.linspace(-1., 1., per_side)
    centers = np.array([[x, y] for x in ticks for y in ticks])
    return RbfBasis(tuple(centers for _ in range(horizon)),
                    tuple(np.full(len(centers), variance)
                          for _ in range(horizon)))


def short_spec(horizon):
    safe_sets = (Rectangle((-1., -1.), (1., 1.)),
                 Rectangle((-0.3, -0.3), (1., 1.)))
    return ReachAvoidSpec(target=Rectangle((0.8, 0.8), (1., 1.)),
                          avoid=Rectangle((-0.45, -0.2), (0.25, 0.15)),
                          safe_sets=safe_sets[:horizon],
                          noise_cov=0.01 * np.eye(2),
                          input_box=Rectangle((-2 * np.pi, -0.5),
                                              (2 * np.pi, 0.5)))


class TestSpec(TestCase):

    def test_reference_spec(self):
        spec = reference_spec()
        self.assertEqual(spec.horizon, 3)
        self.assertTrue(np.allclose(spec.noise_diag, [0.01, 0.01]))
        self.assertEqual(spec.to_dict()['target'], [[0.8, 0.8], [1., 1.]])

    def test_rectangles(self):
        rect = Rectangle((0., 0.), (1., 2.))
        self.assertTrue(rect.contains([1., 2.]))
        self.assertFalse(rect.contains([1., 2. + 1e-12]))
        self.assertEqual(Rectangle.from_list(rect.to_list()), rect)
        with self.assertRaises(DomainError):
            Rectangle((1., 0.), (0., 1.))
        box = bounding_box(reference_spec().safe_sets)
        self.assertEqual(box, Rectangle((-1., -1.), (1., 1.)))

    def test_invalid_specs(self):
        spec = reference_spec()
        with self.assertRaises(DomainError):
            ReachAvoidSpec(Rectangle((0.8, 0.8), (1.2, 1.)), spec.avoid,
                           spec.safe_sets, spec.noise_cov, spec.input_box)
        with self.assertRaises(DomainError):
            ReachAvoidSpec(spec.target, spec.avoid, spec.safe_sets,
                           np.array([[.01, .001], [.001, .01]]),
                           spec.input_box)
        with self.assertRaises(DimensionMismatchError):
            ReachAvoidSpec(spec.target, spec.avoid, spec.safe_sets,
                           spec.noise_cov, spec.input_box, horizon=2)


class TestBasis(TestCase):

    def test_sample(self):
        spec = reference_spec()
        basis = RbfBasis.sample(spec, (20, 15, 10), RngHandle(0, 5))
        self.assertEqual(basis.stage_dims, (20, 15, 10))
        for safe, centers, variances in zip(spec.safe_sets, basis.centers,
                                            basis.variances):
            self.assertTrue(np.all(safe.contains(centers)))
            self.assertTrue(np.all((variances > 0.) & (variances <= 0.01)))
        again = RbfBasis.sample(spec, (20, 15, 10), RngHandle(0, 5))
        self.assertEqual(again.to_dict(), basis.to_dict())
        copy = RbfBasis.from_dict(basis.to_dict())
        self.assertEqual(copy.to_dict(), basis.to_dict())

    def test_sample_errors(self):
        with self.assertRaises(DimensionMismatchError):
            RbfBasis.sample(reference_spec(), (20, 15), RngHandle(0))
        with self.assertRaises(DomainError):
            RbfBasis.sample(reference_spec(), (2, 2, 2), RngHandle(0),
                            variance_range=(0.1, 0.1))
        with self.assertRaises(DomainError):
            RbfBasis((np.zeros((1, 2)),), (np.zeros(1),))

    def test_rbf_matrix(self):
        basis = grid_basis(1)
        points = np.array([[-1., -1.], [0., 0.], [5., 5.]])
        values = rbf_matrix(points, basis, 1)
        self.assertEqual(values.shape, (3, 16))
        self.assertEqual(values[0, 0], 1.)
        distances = np.sum((basis.centers[0] - [0., 0.])**2, axis=1)
        self.assertTrue(np.allclose(values[1], np.exp(-distances / 0.08)))
        self.assertTrue(np.all(values[2] == 0.))
        with self.assertRaises(DomainError):
            rbf_matrix(points, basis, 2)


class TestExpectations(TestCase):

    def test_dynamics(self):
        self.assertTrue(np.allclose(dynamics_mean([0., 0.], [0., 0.5]),
                                    [0.5, 0.]))
        self.assertTrue(np.allclose(dynamics_mean([1., 1.],
                                                  [np.pi / 2, 0.2]),
                                    [1., 1.2]))
        states = np.zeros((3, 2))
        inputs = np.array([[0., 1.], [np.pi, 1.], [0., 0.]])
        self.assertTrue(np.allclose(dynamics_mean(states, inputs),
                                    [[1., 0.], [-1., 0.], [0., 0.]]))

    def test_expected_value_closed_form(self):
        self.assertAlmostEqual(
            expected_basis_value([0., 0.], 0.01, [0., 0.], 0.01 * np.eye(2)),
            0.5)
        self.assertAlmostEqual(
            expected_basis_value([0.3, -0.2], 0.02, [0.1, 0.4],
                                 np.zeros((2, 2))),
            np.exp(-(0.2**2 + 0.6**2) / 0.04))

    def test_expected_value_monte_carlo(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            center = rng.uniform(-1, 1, 2)
            mean = center + rng.uniform(-0.2, 0.2, 2)
            variance = rng.uniform(0.001, 0.01)
            noise = rng.uniform(0.001, 0.02, 2)
            draws = mean + rng.standard_normal((100000, 2)) * np.sqrt(noise)
            values = np.exp(-np.sum((draws - center)**2, axis=1) /
                            (2 * variance))
            exact = expected_basis_value(center, variance, mean,
                                         np.diag(noise))
            self.assertLess(abs(values.mean() - exact),
                            4.5 * values.std() / np.sqrt(100000) + 1e-12)

    def test_expected_matrix(self):
        basis = grid_basis(2)
        means = np.array([[0.1, 0.2], [0.9, 0.95], [50., 50.]])
        noise = np.diag([0.01, 0.02])
        matrix = expected_basis_matrix(means, basis, 2, noise)
        for s in range(2):
            for j in range(16):
                exact = expected_basis_value(basis.centers[1][j], 0.04,
                                             means[s], noise)
                self.assertLess(abs(matrix[s, j] - exact), RBF_CUTOFF)
                if exact > RBF_CUTOFF:
                    self.assertAlmostEqual(matrix[s, j], exact, places=12)
        self.assertTrue(np.all(matrix[2] == 0.))

    def test_rectangle_integrals(self):
        centers = np.array([[0., 0.], [0.5, -0.3]])
        variances = np.array([0.01, 0.03])
        huge = rbf_rectangle_integrals(centers, variances,
                                       Rectangle((-50., -50.), (50., 50.)))
        self.assertTrue(np.allclose(huge, 2 * np.pi * variances))
        flat = rbf_rectangle_integrals(centers, variances,
                                       Rectangle((0., -1.), (0., 1.)))
        self.assertTrue(np.all(flat == 0.))

        rect = Rectangle((-0.3, -0.3), (1., 1.))
        values = rbf_rectangle_integrals(centers, variances, rect)
        for c, v, value in zip(centers, variances, values):
            oracle, _ = scipy.integrate.dblquad(
                lambda y, x: np.exp(-((x - c[0])**2 + (y - c[1])**2) /
                                    (2 * v)),
                rect.lower[0], rect.upper[0], rect.lower[1], rect.upper[1],
                epsabs=1e-12)
            self.assertAlmostEqual(value, oracle, places=8)
        inner = rbf_rectangle_integrals(centers, variances,
                                        Rectangle((0., 0.), (0.5, 0.5)))
        self.assertTrue(np.all(inner <= values))

    def test_gaussian_mass(self):
        sigma = 0.1
        rect = Rectangle((-1.959963984540054 * sigma,) * 2,
                         (1.959963984540054 * sigma,) * 2)
        mass = gaussian_rectangle_mass([[0., 0.]], sigma**2 * np.eye(2),
                                       rect)
        self.assertAlmostEqual(mass[0], 0.95**2, places=10)
        self.assertAlmostEqual(gaussian_rectangle_mass(
            [[0., 0.]], np.eye(2), Rectangle((-50., -50.), (50., 50.)))[0],
            1.)


class TestRewards(TestCase):

    def setUp(self):
        self.spec = reference_spec()
        self.basis = grid_basis(3)
        self.weights = np.linspace(0.1, 1.6, 16)

    def test_target_and_avoid(self):
        for stage in (1, 2, 3):
            self.assertEqual(reward_h([0.9, 0.9, 0., 0.5], stage,
                                      self.weights, self.basis, self.spec),
                             1.)
        self.assertEqual(reward_h([0., 0., 0., 0.5], 1, self.weights,
                                  self.basis, self.spec), 0.)
        # outside S_3
        self.assertEqual(reward_h([0., 0.9, 0., 0.5], 3, self.weights,
                                  self.basis, self.spec), 0.)

    def test_terminal_stage(self):
        delta = np.array([0.6, 0.7, np.pi / 4, 0.3])
        mean = dynamics_mean(delta[:2], delta[2:])
        expected = gaussian_rectangle_mass(mean, self.spec.noise_cov,
                                           self.spec.target)[0]
        self.assertAlmostEqual(reward_h(delta, 3, None, self.basis,
                                        self.spec), expected)
        self.assertGreater(expected, 0.)

    def test_monte_carlo_rollout(self):
        delta = np.array([0.5, 0.1, 0.3, 0.4])
        mean = dynamics_mean(delta[:2], delta[2:])
        rng = np.random.default_rng(1)
        nexts = mean + 0.1 * rng.standard_normal((100000, 2))
        values = rbf_matrix(nexts, self.basis, 2) @ self.weights
        h = reward_h(delta, 1, self.weights, self.basis, self.spec)
        self.assertLess(abs(values.mean() - h),
                        3 * values.std() / np.sqrt(100000) + 1e-8)

    def test_batch_matches_single(self):
        samples = draw(sampling_domain(self.spec), 50, RngHandle(0))
        batch = reward_h(samples, 1, self.weights, self.basis, self.spec)
        for delta, value in zip(samples[:10], batch[:10]):
            self.assertAlmostEqual(reward_h(delta, 1, self.weights,
                                            self.basis, self.spec), value)
        self.assertTrue(np.all(batch >= 0.))

    def test_constraint_row(self):
        delta = np.array([0.5, 0.1, 0.3, 0.4])
        a, r = constraint_row(delta, 1, self.weights, self.basis, self.spec)
        self.assertTrue(np.allclose(a, rbf_matrix(delta[None], self.basis,
                                                  1)[0]))
        self.assertEqual(r, reward_h(delta, 1, self.weights, self.basis,
                                     self.spec))
        a, r = constraint_row([0.9, 0.9, 0., 0.], 2, self.weights,
                              self.basis, self.spec)
        self.assertEqual(r, 1.)

    def test_stage_rows(self):
        samples = draw(sampling_domain(self.spec), 40, RngHandle(2))
        current = np.linspace(1., 2., 16)
        rows = stage_constraint_rows(samples, 1, self.basis, self.spec)
        self.assertEqual(rows.coupled.shape, (40, 16))
        values = rows.own @ current + rows.coupled @ self.weights + \
            rows.constant
        expected = reward_h(samples, 1, self.weights, self.basis,
                            self.spec) - \
            rbf_matrix(samples, self.basis, 1) @ current
        self.assertTrue(np.allclose(values, expected, atol=1e-12))
        last = stage_constraint_rows(samples, 3, self.basis, self.spec)
        self.assertIsNone(last.coupled)
        self.assertTrue(np.allclose(
            last.constant, reward_h(samples, 3, None, self.basis, self.spec)))

    def test_bad_samples(self):
        with self.assertRaises(DimensionMismatchError):
            reward_h(np.zeros((3, 2)), 1, self.weights, self.basis,
                     self.spec)
        with self.assertRaises(DomainError):
            reward_h([0., 0., 0., 0.], 4, self.weights, self.basis,
                     self.spec)


class TestSamplingDomain(TestCase):

    def test_box(self):
        spec = reference_spec()
        samples = draw(sampling_domain(spec), 500, RngHandle(0))
        self.assertEqual(samples.shape, (500, 4))
        self.assertTrue(np.all(np.abs(samples[:, :2]) <= 1.))
        self.assertTrue(np.all(np.abs(samples[:, 2]) <= 2 * np.pi))
        self.assertTrue(np.all(np.abs(samples[:, 3]) <= 0.5))

    def test_stage_domains(self):
        spec = reference_spec()
        domains = stage_sampling_domains(spec)
        self.assertEqual(len(domains), 3)
        for stage, domain in enumerate(domains, 1):
            samples = draw(domain, 300, RngHandle(stage))
            rect = spec.safe_sets[stage - 1]
            self.assertTrue(np.all(samples[:, :2] >= rect.lower))
            self.assertTrue(np.all(samples[:, :2] <= rect.upper))
        with self.assertRaises(DomainError):
            sampling_domain(spec, stage=4)

    def test_hit_and_run(self):
        domain = sampling_domain(reference_spec(), 'hit_and_run', burn_in=10,
                                 thinning=2)
        samples = draw(domain, 200, RngHandle(0))
        self.assertTrue(np.all(np.abs(samples[:, :2]) <= 1. + 1e-12))
        with self.assertRaises(DomainError):
            sampling_domain(reference_spec(), 'grid')


class TestRunAdp(TestCase):

    def test_single_stage(self):
        spec = short_spec(1)
        basis = grid_basis(1)
        weights, solution, report = run_adp(spec, basis, 'standard', 0.1,
                                            0.01, seed=3, n_validation=500)
        self.assertEqual(len(weights.weights), 1)
        self.assertTrue(np.all(weights.weights[0] >= -1e-9))
        S = solution.certificate.per_stage[0].samples
        samples = draw(sampling_domain(spec), S, RngHandle(3, 0))
        values = weights.evaluate(basis, 1, samples[:, :2])
        rewards = reward_h(samples, 1, None, basis, spec)
        self.assertTrue(np.all(values >= rewards - 1e-7))
        self.assertEqual(report.n_validation, 500)
        self.assertLessEqual(report.epsilon_hat_overall, report.cp_upper)

    def test_two_stages_resampled(self):
        spec = short_spec(2)
        basis = grid_basis(2)
        weights, solution, report = run_adp(spec, basis,
                                            'recursive_resampled', 0.1,
                                            0.02, seed=0, n_validation=300)
        self.assertEqual(solution.training_streams, (1, 2))
        self.assertEqual(len(solution.per_stage_status), 2)
        self.assertLessEqual(solution.training_residuals, 1e-7)
        again = run_adp(spec, basis, 'recursive_resampled', 0.1, 0.02,
                        seed=0, n_validation=300)
        self.assertEqual(again[0].to_dict(), weights.to_dict())
        self.assertEqual(again[2].to_dict(), report.to_dict())

    def test_per_stage_measure(self):
        spec = reference_spec()
        basis = grid_basis(3)
        weights, solution, report = run_adp(spec, basis,
                                            'recursive_resampled', 0.1,
                                            0.03, seed=1, n_validation=300)
        certificate = solution.certificate
        self.assertEqual(certificate.measure, 'per_stage')
        self.assertEqual(certificate.beta_total, 0.03)
        self.assertEqual(solution.training_streams, (1, 2, 3))
        self.assertLessEqual(solution.training_residuals, 1e-7)
        self.assertEqual(len(report.epsilon_hat_stage_measure), 3)

        samples = draw(sampling_domain(spec, stage=3),
                       certificate.per_stage[2].samples, RngHandle(1, 3))
        values = weights.evaluate(basis, 3, samples[:, :2])
        rewards = reward_h(samples, 3, None, basis, spec)
        self.assertTrue(np.all(values >= rewards - 1e-7))

        shared = build_program(spec, basis, stage_domains=())
        self.assertIsNone(shared.stage_domains)
        _, standard, _ = run_adp(short_spec(1), grid_basis(1), 'standard',
                                 0.1, 0.01, seed=1, n_validation=100)
        self.assertEqual(standard.certificate.measure, 'shared')

    def test_weight_bounds(self):
        spec = short_spec(1)
        basis = grid_basis(1)
        self.assertEqual(build_program(spec, basis).decision_lower, 0.)
        free = build_program(spec, basis, weight_lower=None)
        self.assertEqual(free.decision_lower, -np.inf)
        self.assertEqual(free.decision_upper, np.inf)
        capped = build_program(spec, basis, weight_upper=5.)
        self.assertEqual(capped.decision_upper, 5.)
        with self.assertRaises(DimensionMismatchError):
            build_program(spec, grid_basis(2))


class TestLevelSetGrid(TestCase):

    def test_zero_weights(self):
        basis = grid_basis(1)
        grid = level_set_grid(ValueWeights((np.zeros(16),)), basis, 1,
                              Rectangle((-1., -1.), (1., 1.)), 11)
        self.assertEqual(grid.shape, (11, 11))
        self.assertEqual(grid.index.name, 'y')
        self.assertTrue(np.all(grid.values == 0.))

    def test_single_weight(self):
        basis = grid_basis(1)
        weights = np.zeros(16)
        weights[5] = 1.
        grid = level_set_grid(ValueWeights((weights,)), basis, 1,
                              Rectangle((-1., -0.5), (1., 0.5)), 5)
        for y in grid.index:
            for x in grid.columns:
                self.assertAlmostEqual(
                    grid.loc[y, x],
                    rbf_matrix(np.array([[x, y]]), basis, 1)[0, 5])

    def test_errors(self):
        basis = grid_basis(1)
        with self.assertRaises(DomainError):
            level_set_grid(ValueWeights((np.zeros(16),)), basis, 1,
                           Rectangle((-1., -1.), (1., 1.)), 1)
        with self.assertRaises(DimensionMismatchError):
            level_set_grid(ValueWeights((np.zeros(3),)), basis, 1,
                           Rectangle((-1., -1.), (1., 1.)), 3)
