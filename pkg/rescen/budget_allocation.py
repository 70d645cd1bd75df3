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

"""Allocation of the overall violation and confidence budgets across
stages, and the cubic solver-cost model of the four scenario methods."""

import numpy as np
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence, Tuple
logger = logging.getLogger(__name__)

from .errors import DomainError, AllocationConvergenceError, BudgetError, \
    DimensionMismatchError
from .sample_bounds import BoundQuery, BoundKind, sample_size, EXPLICIT_FACTOR
from .utils import check_probability, check_positive_integer, \
    check_same_length


class Method(str, Enum):
    STANDARD = 'standard'
    MULTISTAGE = 'multistage'
    RECURSIVE_SHARED = 'recursive_shared'
    RECURSIVE_RESAMPLED = 'recursive_resampled'

    @property
    def allocated(self):
        """Whether the method takes stage-wise (eps_i, beta_i) budgets."""
        return self in (Method.MULTISTAGE, Method.RECURSIVE_RESAMPLED)

    @property
    def recursive(self):
        return self in (Method.RECURSIVE_SHARED, Method.RECURSIVE_RESAMPLED)


@dataclass(frozen=True)
class AllocationProblem:
    epsilon_total: float
    beta_total: float
    dims: Tuple[int, ...]
    beta_fixed: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        check_probability(self.epsilon_total, 'epsilon_total')
        check_probability(self.beta_total, 'beta_total')
        object.__setattr__(self, 'dims', tuple(
            check_positive_integer(d, 'dims[%d]' % i)
            for i, d in enumerate(self.dims)))
        if not len(self.dims):
            raise DomainError('At least one stage is needed.')
        if self.beta_fixed is not None:
            object.__setattr__(self, 'beta_fixed', tuple(
                check_probability(b, 'beta_fixed[%d]' % i)
                for i, b in enumerate(self.beta_fixed)))
            check_same_length('dims and beta_fixed', self.dims,
                              self.beta_fixed)
            if not within_rounding(self.beta_fixed, self.beta_total):
                raise BudgetError('Fixed stage confidences sum to %r > %r.' %
                                  (sum(self.beta_fixed), self.beta_total))
            object.__setattr__(self, 'beta_fixed', tuple(
                float(b) for b in fit_to_budget(self.beta_fixed,
                                                self.beta_total)))

    @property
    def M(self):
        return len(self.dims)


@dataclass(frozen=True)
class Allocation:
    epsilons: Tuple[float, ...]
    betas: Tuple[float, ...]
    stage_samples: Tuple[int, ...]
    total_samples: int
    objective: float
    epsilon_total: float
    beta_total: float
    dims: Tuple[int, ...] = field(default=())
    bound_kind: BoundKind = BoundKind.EXPLICIT_CLOSED_FORM

    @property
    def M(self):
        return len(self.epsilons)

    def to_dict(self):
        return {'epsilons': list(self.epsilons),
                'betas': list(self.betas),
                'stage_samples': [int(s) for s in self.stage_samples],
                'total_samples': int(self.total_samples),
                'objective': float(self.objective),
                'epsilon_total': self.epsilon_total,
                'beta_total': self.beta_total,
                'dims': list(self.dims),
                'bound_kind': self.bound_kind.value}

    @classmethod
    def from_dict(cls, data):
        return cls(epsilons=tuple(data['epsilons']),
                   betas=tuple(data['betas']),
                   stage_samples=tuple(data['stage_samples']),
                   total_samples=data['total_samples'],
                   objective=data['objective'],
                   epsilon_total=data['epsilon_total'],
                   beta_total=data['beta_total'],
                   dims=tuple(data.get('dims', ())),
                   bound_kind=BoundKind.parse(data['bound_kind']))


def budget_respected(values, total) -> bool:
    """Exact rational check of sum(values) <= total."""
    return sum(Fraction(float(v)) for v in values) <= Fraction(float(total))


def within_rounding(values, total) -> bool:
    """Whether sum(values) <= total up to the round-off of summing
    len(values) doubles, so that (0.01, 0.01, 0.01) fits 0.03."""
    values = np.asarray(values, dtype=float)
    return float(np.sum(values)) <= \
        total * (1. + len(values) * np.finfo(float).eps)


def fit_to_budget(values, total):
    """Rescale values onto the budget when their float sum exceeds it, then
    shrink them one ulp at a time until their exact sum does not exceed
    total."""
    values = np.array(values, dtype=float)
    if values.sum() > total:
        values *= total / values.sum()
    for _ in range(64):
        if budget_respected(values, total):
            return values
        values = np.nextafter(values, 0.)
    raise BudgetError('Values %s do not fit the budget %r.' %
                      (values, total))


def stage_constants(dims, betas):
    """c_i = e/(e-1) (d_i - 1 + ln(1/beta_i)), so S_i = c_i / eps_i."""
    dims = np.asarray(dims, dtype=float)
    betas = np.asarray(betas, dtype=float)
    return EXPLICIT_FACTOR * (dims - 1. + np.log(1. / betas))


def optimal_epsilon_split(c, epsilon):
    """Minimize sum_i c_i / eps_i subject to sum_i eps_i <= epsilon.

    The KKT point is eps_i proportional to sqrt(c_i), with optimal value
    (sum_i sqrt(c_i))^2 / epsilon."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0.) or not np.all(np.isfinite(c)):
        raise DomainError('Stage constants must be positive, got %s.' % c)
    root_c = np.sqrt(c)
    epsilons = fit_to_budget(epsilon * root_c / root_c.sum(), epsilon)
    return epsilons, float(np.sum(c / epsilons))


def _stage_samples(epsilons, betas, dims, bound):
    return tuple(sample_size(BoundQuery(float(e), float(b), int(d)),
                             bound).samples
                 for e, b, d in zip(epsilons, betas, dims))


def _make_allocation(p, epsilons, betas, bound):
    bound = BoundKind.parse(bound)
    epsilons = fit_to_budget(epsilons, p.epsilon_total)
    betas = fit_to_budget(betas, p.beta_total)
    stage_samples = _stage_samples(epsilons, betas, p.dims, bound)
    objective = float(np.sum(stage_constants(p.dims, betas) / epsilons))
    allocation = Allocation(epsilons=tuple(float(e) for e in epsilons),
                            betas=tuple(float(b) for b in betas),
                            stage_samples=stage_samples,
                            total_samples=int(sum(stage_samples)),
                            objective=objective,
                            epsilon_total=p.epsilon_total,
                            beta_total=p.beta_total,
                            dims=p.dims,
                            bound_kind=bound)
    logger.info('Allocated eps=%s, beta=%s, samples=%s (total %d)' %
                (np.round(epsilons, 5), np.round(betas, 5), stage_samples,
                 allocation.total_samples))
    return allocation


def allocate_fixed_beta(p: AllocationProblem,
                        bound='explicit') -> Allocation:
    """Optimal violation levels for pre-fixed stage confidences."""
    if p.beta_fixed is None:
        raise DomainError('allocate_fixed_beta needs beta_fixed.')
    c = stage_constants(p.dims, p.beta_fixed)
    epsilons, _ = optimal_epsilon_split(c, p.epsilon_total)
    return _make_allocation(p, epsilons, p.beta_fixed, bound)


def uniform_allocation(p: AllocationProblem, bound='explicit') -> Allocation:
    """Split both budgets evenly; the baseline optimised splits beat."""
    betas = p.beta_fixed if p.beta_fixed is not None else \
        np.full(p.M, p.beta_total / p.M)
    return _make_allocation(p, np.full(p.M, p.epsilon_total / p.M),
                            betas, bound)


def joint_objective(epsilons, betas, dims):
    return float(np.sum(stage_constants(dims, betas) / epsilons))


def project_capped_simplex(v, total, floor):
    """Euclidean projection of v onto {w >= floor, sum(w) <= total}."""
    w = np.maximum(v, floor)
    if w.sum() <= total:
        return w
    u = v - floor
    s = total - floor * len(v)
    assert s > 0
    ordered = np.sort(u)[::-1]
    cumulative = np.cumsum(ordered) - s
    index = np.arange(1, len(u) + 1)
    positive = ordered - cumulative / index > 0
    rho = index[positive][-1]
    theta = cumulative[positive][-1] / rho
    return np.maximum(u - theta, 0.) + floor


def allocate_joint(p: AllocationProblem,
                   bound='explicit',
                   mu: float = 1e-9,
                   max_iter: int = 10**6,
                   rtol: float = 1e-10,
                   window: int = 50) -> Allocation:
    """Jointly choose (eps_i, beta_i) minimizing the total explicit sample
    count, by projected gradient descent on [mu, 1)^(2M).

    The step starts at 1 and only ever shrinks, by halving whenever the
    sufficient decrease test fails."""
    if p.beta_fixed is not None:
        raise DomainError('allocate_joint chooses the stage confidences; '
                          'use allocate_fixed_beta when they are fixed.')
    M = p.M
    if M == 1:
        return _make_allocation(p, [p.epsilon_total], [p.beta_total], bound)

    dims = np.array(p.dims, dtype=float)
    betas = np.full(M, p.beta_total / M)
    epsilons, _ = optimal_epsilon_split(stage_constants(dims, betas),
                                        p.epsilon_total)

    def objective(eps, bet):
        return float(np.sum(EXPLICIT_FACTOR * (dims - 1. - np.log(bet)) /
                            eps))

    def gradient(eps, bet):
        return (-EXPLICIT_FACTOR * (dims - 1. - np.log(bet)) / eps**2,
                -EXPLICIT_FACTOR / (eps * bet))

    value = objective(epsilons, betas)
    history = [value]
    step = 1.
    for iteration in range(max_iter):
        grad_eps, grad_beta = gradient(epsilons, betas)
        while True:
            new_eps = project_capped_simplex(epsilons - step * grad_eps,
                                             p.epsilon_total, mu)
            new_beta = project_capped_simplex(betas - step * grad_beta,
                                              p.beta_total, mu)
            d_eps, d_beta = new_eps - epsilons, new_beta - betas
            new_value = objective(new_eps, new_beta)
            model = value + grad_eps @ d_eps + grad_beta @ d_beta + \
                (d_eps @ d_eps + d_beta @ d_beta) / (2 * step)
            if new_value <= model:
                break
            step /= 2.
            if step < 1e-300:
                raise AllocationConvergenceError(
                    'Step size underflow at iteration %d.' % iteration)

        epsilons, betas, value = new_eps, new_beta, new_value
        history.append(value)
        if len(history) > window and \
                abs(history[-window - 1] - value) <= rtol * abs(value):
            logger.debug('Joint allocation converged in %d iterations, '
                         'objective %.6e' % (iteration + 1, value))
            return _make_allocation(p, epsilons, betas, bound)

    raise AllocationConvergenceError(
        'Joint allocation did not converge in %d iterations '
        '(objective %.6e).' % (max_iter, value))


def allocate(p: AllocationProblem, bound='explicit', **kwargs) -> Allocation:
    """Fixed-beta allocation when stage confidences are given, joint
    otherwise."""
    if p.beta_fixed is not None:
        return allocate_fixed_beta(p, bound)
    return allocate_joint(p, bound, **kwargs)


def _check_samples(method, dims, samples, M):
    if method in (Method.STANDARD, Method.RECURSIVE_SHARED):
        if len(samples) != 1:
            raise DimensionMismatchError(
                '%s uses a single sample count, got %d.' %
                (method.value, len(samples)))
    else:
        check_same_length('dims and samples', dims, samples)
        if M != len(dims):
            raise DimensionMismatchError('M=%d but %d stages given.' %
                                         (M, len(dims)))


def predict_complexity(method, dims: Sequence[int], samples: Sequence[int],
                       M: Optional[int] = None) -> float:
    """Cubic interior-point cost of the LPs a method solves, in units of
    (variables + constraints)^3."""
    method = Method(method)
    dims = [int(d) for d in dims]
    samples = [int(s) for s in samples]
    M = len(dims) if M is None else M
    _check_samples(method, dims, samples, M)
    d = sum(dims)

    if method is Method.STANDARD:
        cost = (d + M * samples[0])**3
    elif method is Method.MULTISTAGE:
        cost = (d + sum(samples))**3
    elif method is Method.RECURSIVE_SHARED:
        cost = sum((d_i + samples[0])**3 for d_i in dims)
    else:
        cost = sum((d_i + s_i)**3 for d_i, s_i in zip(dims, samples))
    return float(cost)


def constraint_counts(method, samples: Sequence[int], M: int):
    """Number of constraints of each LP the method solves."""
    method = Method(method)
    samples = [int(s) for s in samples]
    if method is Method.STANDARD:
        return [M * samples[0]]
    if method is Method.MULTISTAGE:
        return [sum(samples)]
    if method is Method.RECURSIVE_SHARED:
        return [samples[0]] * M
    return list(samples)
