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
from fractions import Fraction
from math import comb, log
from .sample_bounds import *

import numpy as np


class TestBinomialTail(TestCase):

    def test_small_cases(self):
        self.assertAlmostEqual(binomial_tail_log(1, 0, 0.5), np.log(0.5))
        self.assertAlmostEqual(binomial_tail_log(10, 9, 0.3),
                               np.log1p(-0.3**10), places=12)
        self.assertAlmostEqual(binomial_tail_log(44, 0, 0.1),
                               44 * np.log(0.9), places=10)

    def test_against_rational_sum(self):
        for n, k_max, p in [(20, 3, '1/10'), (100, 10, '1/20'),
                            (200, 5, '3/10'), (150, 149, '1/2'),
                            (60, 0, '1/100'), (200, 60, '3/10')]:
            p = Fraction(p)
            exact = sum(comb(n, i) * p**i * (1 - p)**(n - i)
                        for i in range(k_max + 1))
            self.assertLess(abs(binomial_tail_log(n, k_max, float(p)) -
                                log(exact)), 1e-10)

    def test_nonpositive(self):
        self.assertLessEqual(binomial_tail_log(5, 4, 1e-9), 0.)

    def test_domain(self):
        with self.assertRaises(DomainError):
            binomial_tail_log(3, 3, 0.5)
        with self.assertRaises(DomainError):
            binomial_tail_log(3, -1, 0.5)
        with self.assertRaises(DomainError):
            binomial_tail_log(3, 1, 1.)


class TestExactSampleSize(TestCase):

    def test_closed_form_cases(self):
        self.assertEqual(exact_sample_size(BoundQuery(0.5, 0.5, 1)).samples,
                         1)
        result = exact_sample_size(BoundQuery(0.1, 0.01, 1))
        self.assertEqual(result.samples, 44)
        self.assertEqual(result.bound_kind, BoundKind.IMPLICIT_EXACT)
        self.assertEqual(result.samples,
                         int(np.ceil(np.log(0.01) / np.log(0.9))))

    def test_linear_scan(self):
        q = BoundQuery(0.1, 0.001, 5)
        n = 5
        while binomial_tail_log(n, 4, 0.1) > np.log(0.001):
            n += 1
        self.assertEqual(exact_sample_size(q).samples, n)

    def test_grid_properties(self):
        grid = [0.01, 0.05, 0.1, 0.3]
        dims = [1, 5, 20, 100]
        sizes = {}
        for eps in grid:
            for beta in grid:
                for d in dims:
                    q = BoundQuery(eps, beta, d)
                    result = exact_sample_size(q)
                    N = result.samples
                    sizes[eps, beta, d] = N
                    self.assertLessEqual(binomial_tail_log(N, d - 1, eps),
                                         np.log(beta))
                    self.assertAlmostEqual(result.tail_value,
                                           binomial_tail_log(N, d - 1, eps))
                    if N > d:
                        self.assertGreater(
                            binomial_tail_log(N - 1, d - 1, eps),
                            np.log(beta))
                    self.assertGreaterEqual(
                        explicit_sample_size(q).samples, N)

        for i in range(len(grid) - 1):
            for other in grid:
                for d in dims:
                    self.assertGreaterEqual(sizes[grid[i], other, d],
                                            sizes[grid[i + 1], other, d])
                    self.assertGreaterEqual(sizes[other, grid[i], d],
                                            sizes[other, grid[i + 1], d])
        for eps in grid:
            for beta in grid:
                for i in range(len(dims) - 1):
                    self.assertLessEqual(sizes[eps, beta, dims[i]],
                                         sizes[eps, beta, dims[i + 1]])

    def test_overflow(self):
        with self.assertRaises(SampleSizeOverflowError) as context:
            exact_sample_size(BoundQuery(1e-6, 1e-6, 100), max_samples=1000)
        self.assertEqual(context.exception.cap, 1000)


class TestExplicitSampleSize(TestCase):

    def test_values(self):
        self.assertEqual(explicit_sample_size(
            BoundQuery(0.1, 0.01, 10)).samples, 216)
        self.assertEqual(explicit_sample_size(
            BoundQuery(0.99, 0.5, 1)).samples, 2)
        self.assertEqual(explicit_sample_size(
            BoundQuery(0.05, 0.01, 450)).samples, 14352)

    def test_query_validation(self):
        for args in [(0., 0.1, 1), (1., 0.1, 1), (0.1, 0., 1),
                     (0.1, 1.5, 1), (0.1, 0.1, 0), (0.1, 0.1, 2.5),
                     (0.1, 0.1, True)]:
            with self.assertRaises(DomainError):
                BoundQuery(*args)

    def test_dispatch(self):
        q = BoundQuery(0.1, 0.01, 10)
        self.assertEqual(sample_size(q, 'explicit').samples, 216)
        self.assertEqual(sample_size(q, 'explicit_closed_form').bound_kind,
                         BoundKind.EXPLICIT_CLOSED_FORM)
        self.assertEqual(sample_size(q).samples,
                         exact_sample_size(q).samples)
        with self.assertRaises(ValueError):
            sample_size(q, 'chernoff')
