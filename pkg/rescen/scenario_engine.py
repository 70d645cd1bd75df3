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

"""Robust programs with separable structure, solved by the four scenario
methods: standard, multistage, recursive with a shared sample set and
recursive with fresh samples per stage.

A program has M stages with decision blocks x_1, ..., x_M, a linear
separable cost sum_i f_i^T x_i and one constraint function per stage.
Sampled constraints are affine,

    g_i(x_i, x_{i+1}, delta) = own(delta) x_i + coupled(delta) x_{i+1}
                               + constant(delta) <= 0,

where the coupled term is absent for independent stages and for the
last stage of a pairwise coupled program."""

import numpy as np
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple
logger = logging.getLogger(__name__)

from .budget_allocation import Method, Allocation, AllocationProblem, \
    allocate_fixed_beta
from .errors import BudgetError, DimensionMismatchError, DomainError, \
    ProgramStructureError, ScenarioInfeasibleError
from .lp_solver import LpStandardForm, LpStatus, solve_lp, DEFAULT_TOL
from .sample_bounds import BoundKind, BoundQuery, sample_size
from .sampling import RngHandle, UncertaintyDomain, draw
from .utils import check_positive_integer, check_finite_array


class Coupling(str, Enum):
    INDEPENDENT_DOMAINS = 'independent_domains'
    PAIRWISE_COUPLED = 'pairwise_coupled'


@dataclass
class StageRows:
    """Coefficients of one stage's constraint at S samples."""
    own: np.ndarray
    constant: np.ndarray
    coupled: Optional[np.ndarray] = None

    @property
    def count(self):
        return len(self.constant)


@dataclass(frozen=True, eq=False)
class UncertainProgram:
    """Every decision coordinate lies in [decision_lower, decision_upper].

    domain is the measure of the methods that share one sample set.
    stage_domains, when given, holds one measure per stage for the methods
    that draw a fresh set per stage."""
    stage_dims: Tuple[int, ...]
    stage_costs: Tuple[np.ndarray, ...]
    constraint_builders: Tuple[Callable[[np.ndarray], StageRows], ...]
    coupling: Coupling
    domain: UncertaintyDomain
    decision_lower: float = -np.inf
    decision_upper: float = np.inf
    stage_domains: Optional[Tuple[UncertaintyDomain, ...]] = None

    def __post_init__(self):
        if np.isnan(self.decision_lower) or np.isnan(self.decision_upper) \
                or self.decision_lower > self.decision_upper:
            raise DomainError('Need decision_lower <= decision_upper.')
        dims = tuple(check_positive_integer(d, 'stage_dims[%d]' % i)
                     for i, d in enumerate(self.stage_dims))
        if not len(dims):
            raise DomainError('A program needs at least one stage.')
        costs = tuple(check_finite_array(c, 'stage_costs[%d]' % i, ndim=1)
                      for i, c in enumerate(self.stage_costs))
        if len(costs) != len(dims) or len(self.constraint_builders) != \
                len(dims):
            raise DimensionMismatchError(
                'Need one cost and one constraint builder per stage.')
        for i, (c, d) in enumerate(zip(costs, dims)):
            if len(c) != d:
                raise DimensionMismatchError(
                    'Stage %d cost has length %d, expected %d.' %
                    (i + 1, len(c), d))
        object.__setattr__(self, 'stage_dims', dims)
        object.__setattr__(self, 'stage_costs', costs)
        object.__setattr__(self, 'constraint_builders',
                           tuple(self.constraint_builders))
        object.__setattr__(self, 'coupling', Coupling(self.coupling))
        if self.stage_domains is not None:
            domains = tuple(self.stage_domains)
            if len(domains) != len(dims):
                raise DimensionMismatchError(
                    'Need one stage domain per stage, got %d for %d.' %
                    (len(domains), len(dims)))
            for i, domain in enumerate(domains):
                if domain.dim != self.domain.dim:
                    raise DimensionMismatchError(
                        'Stage %d domain has dimension %d, expected %d.' %
                        (i + 1, domain.dim, self.domain.dim))
            object.__setattr__(self, 'stage_domains', domains)

    @property
    def M(self):
        return len(self.stage_dims)

    @property
    def total_dim(self):
        return sum(self.stage_dims)

    @property
    def offsets(self):
        return tuple(np.r_[0, np.cumsum(self.stage_dims)].astype(int))

    def stage_domain(self, stage):
        """Measure of stage (0-based) under the per-stage methods."""
        if self.stage_domains is None:
            return self.domain
        return self.stage_domains[stage]

    def block(self, x, stage):
        """Decision block x_stage (0-based) of a concatenated vector."""
        offsets = self.offsets
        return x[offsets[stage]:offsets[stage + 1]]

    def rows(self, stage: int, samples: np.ndarray) -> StageRows:
        """Sampled constraint coefficients of stage (0-based)."""
        rows = self.constraint_builders[stage](samples)
        S = len(samples)
        own = check_finite_array(rows.own, 'own', ndim=2)
        constant = check_finite_array(rows.constant, 'constant', ndim=1)
        if own.shape != (S, self.stage_dims[stage]) or len(constant) != S:
            raise DimensionMismatchError(
                'Stage %d builder returned shapes %s, %s for %d samples.' %
                (stage + 1, own.shape, constant.shape, S))
        coupled = rows.coupled
        if coupled is not None:
            if self.coupling is Coupling.INDEPENDENT_DOMAINS:
                raise ProgramStructureError(
                    'Stage %d is coupled in a program with independent '
                    'stages.' % (stage + 1))
            if stage == self.M - 1:
                raise ProgramStructureError(
                    'The last stage cannot depend on a next block.')
            coupled = check_finite_array(coupled, 'coupled', ndim=2)
            if coupled.shape != (S, self.stage_dims[stage + 1]):
                raise DimensionMismatchError(
                    'Stage %d coupled block has shape %s.' %
                    (stage + 1, coupled.shape))
        return StageRows(own=own, constant=constant, coupled=coupled)

    def evaluate_stage(self, stage, x, samples):
        """g_stage(x, delta) at every sample."""
        rows = self.rows(stage, samples)
        values = rows.own @ self.block(x, stage) + rows.constant
        if rows.coupled is not None:
            values += rows.coupled @ self.block(x, stage + 1)
        return values


@dataclass(frozen=True)
class StageLevel:
    epsilon: float
    beta: float
    samples: int
    dim: int


SHARED_MEASURE = 'shared'
PER_STAGE_MEASURE = 'per_stage'


@dataclass(frozen=True)
class FeasibilityCertificate:
    """Stage levels of a solution. measure is 'shared' when every stage
    was sampled from the program's domain and 'per_stage' when stage i was
    sampled from its own stage domain."""
    method: Method
    epsilon_total: float
    beta_total: float
    per_stage: Tuple[StageLevel, ...]
    bound_kind: BoundKind
    measure: str = SHARED_MEASURE

    def __post_init__(self):
        object.__setattr__(self, 'method', Method(self.method))
        object.__setattr__(self, 'bound_kind',
                           BoundKind.parse(self.bound_kind))
        object.__setattr__(self, 'per_stage', tuple(self.per_stage))
        if self.measure not in (SHARED_MEASURE, PER_STAGE_MEASURE):
            raise DomainError('Unknown sampling measure %r.' % self.measure)
        if self.measure == PER_STAGE_MEASURE and not self.method.allocated:
            raise DomainError('%s draws one sample set and cannot be '
                              'certified per stage.' % self.method.value)
        epsilon_sum = sum(Fraction(s.epsilon) for s in self.per_stage)
        beta_sum = sum(Fraction(s.beta) for s in self.per_stage)
        if epsilon_sum > Fraction(self.epsilon_total):
            raise BudgetError('Stage violation levels sum to %r > %r.' %
                              (float(epsilon_sum), self.epsilon_total))
        if beta_sum > Fraction(self.beta_total):
            raise BudgetError('Stage confidences sum to %r > %r.' %
                              (float(beta_sum), self.beta_total))

    @property
    def total_samples(self):
        return sum(s.samples for s in self.per_stage)

    def to_dict(self):
        return {'method': self.method.value,
                'epsilon_total': self.epsilon_total,
                'beta_total': self.beta_total,
                'bound_kind': self.bound_kind.value,
                'measure': self.measure,
                'per_stage': [{'epsilon': s.epsilon, 'beta': s.beta,
                               'samples': int(s.samples), 'dim': int(s.dim)}
                              for s in self.per_stage]}

    @classmethod
    def from_dict(cls, data):
        return cls(method=Method(data['method']),
                   epsilon_total=data['epsilon_total'],
                   beta_total=data['beta_total'],
                   per_stage=tuple(StageLevel(**s)
                                   for s in data['per_stage']),
                   bound_kind=BoundKind.parse(data['bound_kind']),
                   measure=data.get('measure', SHARED_MEASURE))


def default_allocation(epsilon, beta, dims, bound='explicit'):
    """Optimal violation levels with the confidence split evenly."""
    M = len(dims)
    return allocate_fixed_beta(
        AllocationProblem(epsilon, beta, tuple(dims),
                          beta_fixed=(beta / M,) * M), bound)


def certify(method, dims: Sequence[int], epsilon: Optional[float] = None,
            beta: Optional[float] = None,
            allocation: Optional[Allocation] = None,
            bound='exact',
            per_stage_measure: bool = False) -> FeasibilityCertificate:
    """Certificate a method would attach to its solution, without solving.

    Standard and recursive_shared use one sample set sized for the whole
    dimension sum(dims) at (epsilon, beta). Multistage and
    recursive_resampled take stage-wise levels from allocation (computed
    by default_allocation when only epsilon and beta are given), and are
    certified on their stage domains when per_stage_measure is set."""
    method = Method(method)
    dims = tuple(check_positive_integer(d, 'dims') for d in dims)
    if not method.allocated:
        if epsilon is None or beta is None:
            raise DomainError('%s needs epsilon and beta.' % method.value)
        bound = BoundKind.parse(bound)
        q = BoundQuery(float(epsilon), float(beta), sum(dims))
        samples = sample_size(q, bound).samples
        return FeasibilityCertificate(
            method=method, epsilon_total=q.epsilon, beta_total=q.beta,
            per_stage=(StageLevel(q.epsilon, q.beta, samples, sum(dims)),),
            bound_kind=bound)

    if allocation is None:
        if epsilon is None or beta is None:
            raise DomainError('%s needs an allocation or epsilon and beta.' %
                              method.value)
        allocation = default_allocation(epsilon, beta, dims)
    if allocation.M != len(dims) or \
            (allocation.dims and tuple(allocation.dims) != dims):
        raise DimensionMismatchError('Allocation for dims %s used with dims '
                                     '%s.' % (allocation.dims, dims))
    return FeasibilityCertificate(
        method=method, epsilon_total=allocation.epsilon_total,
        beta_total=allocation.beta_total,
        per_stage=tuple(StageLevel(e, b, int(s), d) for e, b, s, d in
                        zip(allocation.epsilons, allocation.betas,
                            allocation.stage_samples, dims)),
        bound_kind=allocation.bound_kind,
        measure=PER_STAGE_MEASURE if per_stage_measure else SHARED_MEASURE)


@dataclass(frozen=True)
class SolverOptions:
    method: str = 'highs'
    tol: float = DEFAULT_TOL


@dataclass
class ScenarioSolution:
    method: Method
    x_star: np.ndarray
    objective: float
    certificate: FeasibilityCertificate
    stage_dims: Tuple[int, ...]
    per_stage_status: Tuple[str, ...]
    training_residuals: float
    stage_residuals: Tuple[float, ...]
    constraint_counts: Tuple[int, ...]
    training_streams: Tuple[int, ...]
    degenerate: bool = False
    wall_times: dict = field(default_factory=dict)
    lps: list = field(default_factory=list, repr=False)

    @property
    def M(self):
        return len(self.stage_dims)

    def block(self, stage):
        offsets = np.r_[0, np.cumsum(self.stage_dims)].astype(int)
        return self.x_star[offsets[stage]:offsets[stage + 1]]

    def to_dict(self, timings=True):
        data = {'method': self.method.value,
                'x_star': self.x_star.tolist(),
                'objective': self.objective,
                'certificate': self.certificate.to_dict(),
                'stage_dims': list(self.stage_dims),
                'per_stage_status': list(self.per_stage_status),
                'training_residuals': self.training_residuals,
                'stage_residuals': list(self.stage_residuals),
                'constraint_counts': [int(c) for c in self.constraint_counts],
                'training_streams': [int(s) for s in self.training_streams],
                'degenerate': bool(self.degenerate)}
        if timings:
            data['wall_times'] = self.wall_times
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(method=Method(data['method']),
                   x_star=np.array(data['x_star'], dtype=float),
                   objective=data['objective'],
                   certificate=FeasibilityCertificate.from_dict(
                       data['certificate']),
                   stage_dims=tuple(data['stage_dims']),
                   per_stage_status=tuple(data['per_stage_status']),
                   training_residuals=data['training_residuals'],
                   stage_residuals=tuple(data['stage_residuals']),
                   constraint_counts=tuple(data['constraint_counts']),
                   training_streams=tuple(data['training_streams']),
                   degenerate=data.get('degenerate', False),
                   wall_times=data.get('wall_times', {}))


def stage_stream(rng: RngHandle, stage: int) -> RngHandle:
    """Stream of the fresh sample set of stage (0-based)."""
    return rng.child(1 + stage)


def _timed_draw(domain, count, rng):
    start = time.perf_counter()
    samples = draw(domain, count, rng)
    return samples, time.perf_counter() - start


def _check_override(samples, count, stage):
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise DimensionMismatchError('Sample override must be 2-d.')
    if len(samples) < count:
        logger.warning('Stage %d uses %d samples, fewer than the %d '
                       'certified.' % (stage + 1, len(samples), count))
    return samples


def _solve(lp, solver, stage=None):
    start = time.perf_counter()
    solution = solve_lp(lp, tol=solver.tol, method=solver.method)
    elapsed = time.perf_counter() - start
    if solution.status is not LpStatus.OPTIMAL:
        where = 'combined program' if stage is None else \
            'stage %d' % (stage + 1)
        raise ScenarioInfeasibleError(
            'Sampled %s is %s.' % (where, solution.status.value),
            stage=None if stage is None else stage + 1,
            status=solution.status)
    return solution, elapsed


def assemble_combined(p: UncertainProgram, stage_samples) -> LpStandardForm:
    """One LP over the concatenated blocks; stage i's constraint is
    enforced on stage_samples[i]."""
    offsets = p.offsets
    blocks = []
    rhs = []
    for i, samples in enumerate(stage_samples):
        rows = p.rows(i, samples)
        block = np.zeros((rows.count, p.total_dim))
        block[:, offsets[i]:offsets[i + 1]] = rows.own
        if rows.coupled is not None:
            block[:, offsets[i + 1]:offsets[i + 2]] = rows.coupled
        blocks.append(block)
        rhs.append(-rows.constant)
    lp = LpStandardForm(cost=np.concatenate(p.stage_costs),
                        ineq_matrix=np.vstack(blocks),
                        ineq_rhs=np.concatenate(rhs),
                        var_lower=np.full(p.total_dim, p.decision_lower),
                        var_upper=np.full(p.total_dim, p.decision_upper))
    logger.info('Assembled combined LP with %d variables, %d constraints.' %
                (lp.n, lp.m))
    return lp


def assemble_stage(p: UncertainProgram, stage, samples, x_next=None):
    """LP of one recursion step, with the next block fixed to x_next."""
    rows = p.rows(stage, samples)
    constant = rows.constant
    if rows.coupled is not None:
        constant = constant + rows.coupled @ x_next
    return LpStandardForm(cost=p.stage_costs[stage], ineq_matrix=rows.own,
                          ineq_rhs=-constant,
                          var_lower=np.full(p.stage_dims[stage],
                                            p.decision_lower),
                          var_upper=np.full(p.stage_dims[stage],
                                            p.decision_upper))


def _stage_residuals(p, x, stage_samples):
    return tuple(float(np.max(p.evaluate_stage(i, x, s)))
                 for i, s in enumerate(stage_samples))


def _solve_combined(p, certificate, stage_samples, streams,
                    sampling_times, solver):
    lp = assemble_combined(p, stage_samples)
    solution, solver_time = _solve(lp, solver)
    residuals = _stage_residuals(p, solution.x, stage_samples)
    logger.info('%s solved in %.3f s, objective %.6e' %
                (certificate.method.value, solver_time, solution.objective))
    return ScenarioSolution(
        method=certificate.method, x_star=solution.x,
        objective=solution.objective, certificate=certificate,
        stage_dims=p.stage_dims,
        per_stage_status=(solution.status.value,) * p.M,
        training_residuals=max(residuals), stage_residuals=residuals,
        constraint_counts=(lp.m,), training_streams=streams,
        degenerate=solution.degenerate,
        wall_times={'sampling': float(sum(sampling_times)),
                    'solver': solver_time,
                    'stage_sampling': list(sampling_times),
                    'stage_solver': [solver_time]},
        lps=[lp])


def _solve_backward(p, certificate, stage_samples, streams,
                    sampling_times, solver):
    if p.coupling is not Coupling.PAIRWISE_COUPLED:
        raise ProgramStructureError('Recursive methods need a pairwise '
                                    'coupled program.')
    x = np.zeros(p.total_dim)
    offsets = p.offsets
    lps = [None] * p.M
    solver_times = [0.] * p.M
    statuses = [None] * p.M
    degenerate = False
    x_next = None
    for i in reversed(range(p.M)):
        lp = assemble_stage(p, i, stage_samples[i], x_next)
        solution, solver_times[i] = _solve(lp, solver, stage=i)
        logger.info('Stage %d: %d constraints solved in %.3f s' %
                    (i + 1, lp.m, solver_times[i]))
        x[offsets[i]:offsets[i + 1]] = solution.x
        lps[i] = lp
        statuses[i] = solution.status.value
        degenerate |= solution.degenerate
        x_next = solution.x
    residuals = _stage_residuals(p, x, stage_samples)
    return ScenarioSolution(
        method=certificate.method, x_star=x,
        objective=float(np.concatenate(p.stage_costs) @ x),
        certificate=certificate, stage_dims=p.stage_dims,
        per_stage_status=tuple(statuses),
        training_residuals=max(residuals), stage_residuals=residuals,
        constraint_counts=tuple(lp.m for lp in lps),
        training_streams=streams, degenerate=degenerate,
        wall_times={'sampling': float(sum(sampling_times)),
                    'solver': float(sum(solver_times)),
                    'stage_sampling': list(sampling_times),
                    'stage_solver': solver_times},
        lps=lps)


def _shared_samples(p, certificate, rng, samples):
    S = certificate.per_stage[0].samples
    if samples is None:
        shared, elapsed = _timed_draw(p.domain, S, rng)
        return [shared] * p.M, (rng.stream_id,), [elapsed]
    return [_check_override(samples, S, 0)] * p.M, (), [0.]


def _fresh_samples(p, certificate, rng, samples):
    if samples is not None:
        if len(samples) != p.M:
            raise DimensionMismatchError('Need one sample set per stage.')
        return [_check_override(s, level.samples, i) for i, (s, level) in
                enumerate(zip(samples, certificate.per_stage))], (), \
            [0.] * p.M
    stage_samples, streams, times = [], [], []
    for i, level in enumerate(certificate.per_stage):
        stream = stage_stream(rng, i)
        drawn, elapsed = _timed_draw(p.stage_domain(i), level.samples,
                                     stream)
        stage_samples.append(drawn)
        streams.append(stream.stream_id)
        times.append(elapsed)
    return stage_samples, tuple(streams), times


def solve_standard(p: UncertainProgram, epsilon, beta, rng: RngHandle,
                   bound='exact', samples=None,
                   solver=SolverOptions()) -> ScenarioSolution:
    """Every constraint on every one of S samples, S sized for the full
    dimension, in one LP. ``samples`` replaces the draw."""
    certificate = certify(Method.STANDARD, p.stage_dims, epsilon, beta,
                          bound=bound)
    logger.info('Standard method: %d samples for d=%d' %
                (certificate.per_stage[0].samples, p.total_dim))
    stage_samples, streams, times = _shared_samples(p, certificate, rng,
                                                    samples)
    return _solve_combined(p, certificate, stage_samples, streams,
                           times, solver)


def solve_multistage(p: UncertainProgram, allocation: Allocation,
                     rng: RngHandle, samples=None,
                     solver=SolverOptions()) -> ScenarioSolution:
    """Stage i's constraint on its own S_i samples, in one LP."""
    certificate = certify(Method.MULTISTAGE, p.stage_dims,
                          allocation=allocation,
                          per_stage_measure=p.stage_domains is not None)
    stage_samples, streams, times = _fresh_samples(p, certificate, rng,
                                                   samples)
    return _solve_combined(p, certificate, stage_samples, streams,
                           times, solver)


def solve_recursive_shared(p: UncertainProgram, epsilon, beta,
                           rng: RngHandle, bound='exact', samples=None,
                           solver=SolverOptions()) -> ScenarioSolution:
    """Backward recursion M, ..., 1 reusing one sample set sized for the
    sum of the stage dimensions."""
    if p.coupling is not Coupling.PAIRWISE_COUPLED:
        raise ProgramStructureError('Recursive methods need a pairwise '
                                    'coupled program.')
    certificate = certify(Method.RECURSIVE_SHARED, p.stage_dims, epsilon,
                          beta, bound=bound)
    stage_samples, streams, times = _shared_samples(p, certificate, rng,
                                                    samples)
    return _solve_backward(p, certificate, stage_samples, streams,
                           times, solver)


def solve_recursive_resampled(p: UncertainProgram, allocation: Allocation,
                              rng: RngHandle, samples=None,
                              solver=SolverOptions()) -> ScenarioSolution:
    """Backward recursion with a fresh sample set of size S_i per stage."""
    if p.coupling is not Coupling.PAIRWISE_COUPLED:
        raise ProgramStructureError('Recursive methods need a pairwise '
                                    'coupled program.')
    certificate = certify(Method.RECURSIVE_RESAMPLED, p.stage_dims,
                          allocation=allocation,
                          per_stage_measure=p.stage_domains is not None)
    stage_samples, streams, times = _fresh_samples(p, certificate, rng,
                                                   samples)
    return _solve_backward(p, certificate, stage_samples, streams,
                           times, solver)


def solve(method, p: UncertainProgram, rng: RngHandle,
          epsilon: Optional[float] = None, beta: Optional[float] = None,
          allocation: Optional[Allocation] = None, bound='exact',
          solver=SolverOptions()) -> ScenarioSolution:
    """Run any of the four methods. Allocated methods fall back to
    default_allocation when no allocation is given."""
    method = Method(method)
    if method is Method.STANDARD:
        return solve_standard(p, epsilon, beta, rng, bound, solver=solver)
    if method is Method.RECURSIVE_SHARED:
        return solve_recursive_shared(p, epsilon, beta, rng, bound,
                                      solver=solver)
    if allocation is None:
        allocation = default_allocation(epsilon, beta, p.stage_dims)
    if method is Method.MULTISTAGE:
        return solve_multistage(p, allocation, rng, solver=solver)
    return solve_recursive_resampled(p, allocation, rng, solver=solver)
