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

"""Seeded generation of i.i.d. scenarios.

Every draw goes through an RngHandle, a (seed, stream_id) pair mapped to
an independent PCG64 stream with numpy's SeedSequence spawn keys, so the
same pair gives the same samples on every platform."""

import numpy as np
import numba as nb
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple
logger = logging.getLogger(__name__)

from .errors import EmptyPolytopeError, DimensionMismatchError, DomainError
from .lp_solver import LpStandardForm, LpStatus, solve_lp
from .utils import check_finite_array, check_positive_integer

# Stream ids reserved for draws that must never overlap training samples.
VALIDATION_STREAM = 2**31 - 1
BASIS_STREAM = 2**31 - 2

DEFAULT_BURN_IN = 100
DEFAULT_THINNING = 10


@dataclass(frozen=True)
class RngHandle:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or \
                not 0 <= self.seed < 2**64:
            raise DomainError('seed must be a 64-bit unsigned integer, '
                              'got %r.' % (self.seed,))
        if not isinstance(self.stream_id, (int, np.integer)) or \
                self.stream_id < 0:
            raise DomainError('stream_id must be a nonnegative integer.')

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(int(self.seed),
                                          spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(sequence))

    def child(self, offset: int):
        """Handle on the stream offset ids further along."""
        return RngHandle(self.seed, self.stream_id + offset)

    def with_stream(self, stream_id: int):
        return RngHandle(self.seed, stream_id)


class DomainKind(str, Enum):
    BOX = 'box'
    GAUSSIAN = 'gaussian'
    HIT_AND_RUN_POLYTOPE = 'hit_and_run_polytope'
    PRODUCT = 'product'


class UncertaintyDomain:
    """Support and distribution of the uncertain parameter."""
    kind = None
    dim = None

    def sample(self, count, generator):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class BoxDomain(UncertaintyDomain):
    lower: np.ndarray
    upper: np.ndarray
    kind = DomainKind.BOX

    def __post_init__(self):
        lower = check_finite_array(self.lower, 'lower', ndim=1)
        upper = check_finite_array(self.upper, 'upper', ndim=1)
        if lower.shape != upper.shape:
            raise DimensionMismatchError('Box bounds of different lengths.')
        if np.any(lower > upper):
            raise DomainError('Box lower bounds exceed upper bounds.')
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def dim(self):
        return len(self.lower)

    def sample(self, count, generator):
        return self.lower + (self.upper - self.lower) * \
            generator.random((count, self.dim))

    def to_dict(self):
        return {'kind': self.kind.value, 'lower': self.lower.tolist(),
                'upper': self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class GaussianDomain(UncertaintyDomain):
    mean: np.ndarray
    cov: np.ndarray
    kind = DomainKind.GAUSSIAN

    def __post_init__(self):
        mean = check_finite_array(self.mean, 'mean', ndim=1)
        cov = check_finite_array(self.cov, 'cov', ndim=2)
        if cov.shape != (len(mean), len(mean)):
            raise DimensionMismatchError('cov must be %d x %d.' %
                                         (len(mean), len(mean)))
        if not np.allclose(cov, cov.T):
            raise DomainError('cov must be symmetric.')
        try:
            factor = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise DomainError('cov must be positive definite.')
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)
        object.__setattr__(self, '_factor', factor)

    @property
    def dim(self):
        return len(self.mean)

    def sample(self, count, generator):
        return self.mean + generator.standard_normal((count, self.dim)) @ \
            self._factor.T

    def to_dict(self):
        return {'kind': self.kind.value, 'mean': self.mean.tolist(),
                'cov': self.cov.tolist()}


def chebyshev_center(A, b):
    """Center and radius of the largest ball inside {x | A x <= b}."""
    n = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    lp = LpStandardForm(cost=np.r_[np.zeros(n), -1.],
                        ineq_matrix=np.hstack([A, norms[:, None]]),
                        ineq_rhs=b,
                        var_lower=np.r_[np.full(n, -np.inf), 0.])
    solution = solve_lp(lp)
    if solution.status is LpStatus.INFEASIBLE:
        raise EmptyPolytopeError('Polytope is empty.')
    if solution.status is LpStatus.UNBOUNDED:
        raise DomainError('Polytope is unbounded; hit-and-run needs a '
                          'bounded body.')
    center, radius = solution.x[:n], solution.x[n]
    if radius <= 1e-12:
        raise EmptyPolytopeError('Polytope has empty interior.')
    logger.debug('Chebyshev center %s, radius %.3e' % (center, radius))
    return center, radius


@nb.jit(nopython=True)
def _hit_and_run_chain(A, b, x0, directions, uniforms, burn_in, thinning,
                       count):
    m, n = A.shape
    result = np.empty((count, n))
    x = x0.copy()
    k = 0
    for step in range(burn_in + count * thinning):
        t_low = -np.inf
        t_high = np.inf
        for i in range(m):
            slope = 0.
            slack = b[i]
            for j in range(n):
                slope += A[i, j] * directions[step, j]
                slack -= A[i, j] * x[j]
            if slack < 0.:
                slack = 0.
            if slope > 0.:
                t_high = min(t_high, slack / slope)
            elif slope < 0.:
                t_low = max(t_low, slack / slope)
        t = t_low + uniforms[step] * (t_high - t_low)
        for j in range(n):
            x[j] += t * directions[step, j]
        if step >= burn_in and (step - burn_in) % thinning == thinning - 1:
            result[k] = x
            k += 1
    return result


@dataclass(frozen=True, eq=False)
class PolytopeDomain(UncertaintyDomain):
    """Uniform distribution on a bounded polytope, sampled by hit-and-run
    started from the Chebyshev center."""
    A: np.ndarray
    b: np.ndarray
    burn_in: int = DEFAULT_BURN_IN
    thinning: int = DEFAULT_THINNING
    kind = DomainKind.HIT_AND_RUN_POLYTOPE

    def __post_init__(self):
        A = np.ascontiguousarray(check_finite_array(self.A, 'A', ndim=2))
        b = np.ascontiguousarray(check_finite_array(self.b, 'b', ndim=1))
        if A.shape[0] != len(b):
            raise DimensionMismatchError('A has %d rows, b has %d entries.' %
                                         (A.shape[0], len(b)))
        if not isinstance(self.burn_in, (int, np.integer)) or \
                self.burn_in < 0:
            raise DomainError('burn_in must be a nonnegative integer.')
        check_positive_integer(self.thinning, 'thinning')
        center, radius = chebyshev_center(A, b)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'radius', radius)

    @classmethod
    def from_box(cls, lower, upper, **kwargs):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = len(lower)
        return cls(A=np.vstack([-np.eye(n), np.eye(n)]),
                   b=np.r_[-lower, upper], **kwargs)

    @property
    def dim(self):
        return self.A.shape[1]

    def sample(self, count, generator):
        steps = self.burn_in + count * self.thinning
        directions = generator.standard_normal((steps, self.dim))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        uniforms = generator.random(steps)
        return _hit_and_run_chain(self.A, self.b, self.center, directions,
                                  uniforms, self.burn_in, self.thinning,
                                  count)

    def to_dict(self):
        return {'kind': self.kind.value, 'A': self.A.tolist(),
                'b': self.b.tolist(), 'burn_in': int(self.burn_in),
                'thinning': int(self.thinning)}


@dataclass(frozen=True, eq=False)
class ProductDomain(UncertaintyDomain):
    """Independent factors, concatenated in order."""
    factors: Tuple[UncertaintyDomain, ...] = field(default=())
    kind = DomainKind.PRODUCT

    def __post_init__(self):
        if not len(self.factors):
            raise DomainError('A product domain needs at least one factor.')
        object.__setattr__(self, 'factors', tuple(self.factors))

    @property
    def dim(self):
        return sum(f.dim for f in self.factors)

    def sample(self, count, generator):
        return np.hstack([f.sample(count, generator) for f in self.factors])

    def to_dict(self):
        return {'kind': self.kind.value,
                'factors': [f.to_dict() for f in self.factors]}


def domain_from_dict(data) -> UncertaintyDomain:
    kind = DomainKind(data['kind'])
    if kind is DomainKind.BOX:
        return BoxDomain(data['lower'], data['upper'])
    if kind is DomainKind.GAUSSIAN:
        return GaussianDomain(data['mean'], data['cov'])
    if kind is DomainKind.HIT_AND_RUN_POLYTOPE:
        return PolytopeDomain(data['A'], data['b'],
                              burn_in=data.get('burn_in', DEFAULT_BURN_IN),
                              thinning=data.get('thinning', DEFAULT_THINNING))
    return ProductDomain(tuple(domain_from_dict(f) for f in data['factors']))


def draw(domain: UncertaintyDomain, count: int, rng: RngHandle) -> np.ndarray:
    """count i.i.d. draws from domain, as a (count, dim) array."""
    check_positive_integer(count, 'count')
    if not isinstance(domain, UncertaintyDomain):
        raise DomainError('Expected an UncertaintyDomain, got %r.' % domain)
    samples = domain.sample(int(count), rng.generator())
    assert samples.shape == (count, domain.dim)
    logger.debug('Drew %d samples of dimension %d from %s (stream %d).' %
                 (count, domain.dim, domain.kind.value, rng.stream_id))
    return samples
