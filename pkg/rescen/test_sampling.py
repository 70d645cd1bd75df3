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
from .sampling import *

import numpy as np
import scipy.stats


class TestRngHandle(TestCase):

    def test_reproducible(self):
        domain = BoxDomain([0., -1.], [1., 1.])
        first = draw(domain, 50, RngHandle(3, 1))
        second = draw(domain, 50, RngHandle(3, 1))
        self.assertEqual(first.tobytes(), second.tobytes())
        other = draw(domain, 50, RngHandle(3, 2))
        self.assertFalse(np.allclose(first, other))

    def test_streams_uncorrelated(self):
        domain = GaussianDomain([0.], [[1.]])
        first = draw(domain, 10000, RngHandle(0, 0))[:, 0]
        second = draw(domain, 10000, RngHandle(0, 1))[:, 0]
        self.assertLess(abs(np.corrcoef(first, second)[0, 1]), 0.05)

    def test_child(self):
        rng = RngHandle(5, 10)
        self.assertEqual(rng.child(3), RngHandle(5, 13))
        self.assertEqual(rng.with_stream(VALIDATION_STREAM).stream_id,
                         VALIDATION_STREAM)
        self.assertNotEqual(VALIDATION_STREAM, BASIS_STREAM)

    def test_bad_handles(self):
        with self.assertRaises(DomainError):
            RngHandle(-1)
        with self.assertRaises(DomainError):
            RngHandle(0, -2)
        with self.assertRaises(DomainError):
            RngHandle(1.5)

    def test_bad_count(self):
        with self.assertRaises(DomainError):
            draw(BoxDomain([0.], [1.]), 0, RngHandle(0))


class TestDomains(TestCase):

    def test_box(self):
        domain = BoxDomain([0., -1.], [1., 1.])
        samples = draw(domain, 1000, RngHandle(0))
        self.assertEqual(samples.shape, (1000, 2))
        self.assertTrue(np.all(samples >= domain.lower))
        self.assertTrue(np.all(samples <= domain.upper))
        self.assertLess(abs(samples[:, 1].mean()), 4 / np.sqrt(3 * 1000))

    def test_box_errors(self):
        with self.assertRaises(DomainError):
            BoxDomain([1.], [0.])
        with self.assertRaises(DimensionMismatchError):
            BoxDomain([0., 0.], [1.])

    def test_gaussian_mean(self):
        mean = np.array([1., -2.])
        cov = np.array([[1., .5], [.5, 2.]])
        domain = GaussianDomain(mean, cov)
        samples = draw(domain, 100000, RngHandle(1))
        self.assertTrue(np.all(np.abs(samples.mean(0) - mean) <=
                               4 * np.sqrt(np.diag(cov) / 100000)))
        self.assertTrue(np.allclose(np.cov(samples.T), cov, atol=0.05))

    def test_gaussian_errors(self):
        with self.assertRaises(DomainError):
            GaussianDomain([0., 0.], [[1., 2.], [2., 1.]])
        with self.assertRaises(DomainError):
            GaussianDomain([0., 0.], [[1., 0.], [.5, 1.]])
        with self.assertRaises(DimensionMismatchError):
            GaussianDomain([0.], [[1., 0.], [0., 1.]])

    def test_product(self):
        domain = ProductDomain((BoxDomain([0.], [1.]),
                                GaussianDomain([0., 0.], np.eye(2))))
        self.assertEqual(domain.dim, 3)
        samples = draw(domain, 20, RngHandle(0))
        self.assertEqual(samples.shape, (20, 3))
        self.assertTrue(np.all((samples[:, 0] >= 0) & (samples[:, 0] <= 1)))

    def test_from_dict(self):
        domain = ProductDomain((BoxDomain([0.], [1.]),
                                PolytopeDomain.from_box([0., 0.], [1., 2.])))
        copy = domain_from_dict(domain.to_dict())
        self.assertEqual(copy.to_dict(), domain.to_dict())
        self.assertEqual(draw(copy, 10, RngHandle(2)).tobytes(),
                         draw(domain, 10, RngHandle(2)).tobytes())


class TestHitAndRun(TestCase):

    def test_chebyshev_center(self):
        center, radius = chebyshev_center(
            np.vstack([-np.eye(2), np.eye(2)]), np.array([0., 0., 2., 4.]))
        self.assertAlmostEqual(radius, 1., places=7)
        self.assertAlmostEqual(center[0], 1., places=7)

    def test_uniform_on_square(self):
        domain = PolytopeDomain.from_box([0., 0.], [1., 1.], thinning=25)
        samples = draw(domain, 4000, RngHandle(0))
        counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1],
                                      bins=4, range=[[0, 1], [0, 1]])
        self.assertEqual(counts.sum(), 4000)
        self.assertGreater(scipy.stats.chisquare(counts.ravel()).pvalue,
                           1e-3)

    def test_uniform_with_default_thinning(self):
        domain = PolytopeDomain.from_box([0., 0.], [1., 1.])
        self.assertEqual(domain.thinning, 10)
        samples = draw(domain, 10**4, RngHandle(1))
        counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1],
                                      bins=4, range=[[0, 1], [0, 1]])
        self.assertGreater(scipy.stats.chisquare(counts.ravel()).pvalue,
                           1e-3)

    def test_stays_inside(self):
        A = np.array([[-1., 0.], [0., -1.], [1., 1.]])
        b = np.array([0., 0., 1.])
        domain = PolytopeDomain(A, b)
        samples = draw(domain, 2000, RngHandle(4))
        self.assertLessEqual(np.max(samples @ A.T - b), 1e-12)
        # mean of the uniform distribution on the simplex
        self.assertTrue(np.allclose(samples.mean(0), [1 / 3, 1 / 3],
                                    atol=0.03))

    def test_empty(self):
        with self.assertRaises(EmptyPolytopeError):
            PolytopeDomain(np.array([[1.], [-1.]]), np.array([-1., -1.]))
        with self.assertRaises(EmptyPolytopeError):
            PolytopeDomain.from_box([0., 0.], [1., 0.])

    def test_unbounded(self):
        with self.assertRaises(DomainError):
            PolytopeDomain(np.array([[-1., 0.]]), np.array([0.]))

    def test_bad_thinning(self):
        with self.assertRaises(DomainError):
            PolytopeDomain.from_box([0.], [1.], thinning=0)
