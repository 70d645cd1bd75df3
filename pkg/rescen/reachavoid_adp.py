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

"""Approximate dynamic programming for a three-step stochastic
reach-avoid problem on a planar unicycle.

The state (x, y) moves to (x + v cos(theta), y + v sin(theta)) plus
Gaussian noise N(0, noise_cov), with inputs (theta, v) in input_box.
Value functions are weighted sums of isotropic Gaussian RBFs,

    V_i(y) = sum_j w_ij exp(-|y - c_ij|^2 / (2 s_ij)),

and the weights solve the coupled robust LPs

    minimize    w_i^T I_i
    subject to  V_i(delta_x) >= h_i(delta)  for all delta = (x, y, theta, v),

with h_i = 1_T + 1_{(S_i - A) - T} E[V_{i+1}(next state)] and V after the
last stage equal to 1_T. Stages are numbered from 1 in this module."""

import numpy as np
import numba as nb
import pandas as pd
import logging
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence, Tuple
from scipy.special import ndtr
logger = logging.getLogger(__name__)

from .budget_allocation import Method
from .errors import DomainError, DimensionMismatchError
from .sampling import RngHandle, BoxDomain, PolytopeDomain, ProductDomain, \
    DEFAULT_BURN_IN, DEFAULT_THINNING
from .scenario_engine import Coupling, StageRows, UncertainProgram, \
    SolverOptions, default_allocation, solve
from .validation import empirical_violation, validation_rng, \
    DEFAULT_N_VALIDATION
from .utils import check_finite_array, check_positive_integer

# RBF and expected RBF values below this are treated as zero.
RBF_CUTOFF = 1e-9
REFERENCE_VARIANCE_RANGE = (0., 0.01)


@dataclass(frozen=True)
class Rectangle:
    """Closed axis-aligned rectangle [lower, upper]."""
    lower: Tuple[float, float]
    upper: Tuple[float, float]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != 2 or len(upper) != 2:
            raise DimensionMismatchError('Rectangles are two dimensional.')
        if not np.all(np.isfinite(lower + upper)):
            raise DomainError('Rectangle bounds must be finite.')
        if lower[0] > upper[0] or lower[1] > upper[1]:
            raise DomainError('Rectangle lower corner exceeds upper corner.')
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        return np.all((points >= self.lower) & (points <= self.upper),
                      axis=-1)

    @property
    def corners(self):
        (x0, y0), (x1, y1) = self.lower, self.upper
        return np.array([[x0, y0], [x1, y0], [x0, y1], [x1, y1]])

    def to_list(self):
        return [list(self.lower), list(self.upper)]

    @classmethod
    def from_list(cls, data):
        if len(data) != 2:
            raise DimensionMismatchError('Expected [[xlo, ylo], [xhi, yhi]].')
        return cls(tuple(data[0]), tuple(data[1]))


def bounding_box(rectangles):
    lower = np.min([r.lower for r in rectangles], axis=0)
    upper = np.max([r.upper for r in rectangles], axis=0)
    return Rectangle(tuple(lower), tuple(upper))


@dataclass(frozen=True, eq=False)
class ReachAvoidSpec:
    target: Rectangle
    avoid: Rectangle
    safe_sets: Tuple[Rectangle, ...]
    noise_cov: np.ndarray
    input_box: Rectangle
    horizon: Optional[int] = None

    def __post_init__(self):
        safe_sets = tuple(self.safe_sets)
        horizon = len(safe_sets) if self.horizon is None else self.horizon
        check_positive_integer(horizon, 'horizon')
        if len(safe_sets) != horizon:
            raise DimensionMismatchError('%d safe sets for horizon %d.' %
                                         (len(safe_sets), horizon))
        for i, safe in enumerate(safe_sets):
            if not np.all(safe.contains(self.target.corners)):
                raise DomainError('Target is not inside safe set %d.' %
                                  (i + 1))
        cov = check_finite_array(self.noise_cov, 'noise_cov', ndim=2)
        if cov.shape != (2, 2) or cov[0, 1] != 0. or cov[1, 0] != 0.:
            raise DomainError('noise_cov must be a diagonal 2x2 matrix.')
        if np.any(np.diag(cov) <= 0.):
            raise DomainError('noise_cov diagonal must be positive.')
        object.__setattr__(self, 'safe_sets', safe_sets)
        object.__setattr__(self, 'horizon', horizon)
        object.__setattr__(self, 'noise_cov', cov)

    @property
    def noise_diag(self):
        return np.ascontiguousarray(np.diag(self.noise_cov))

    def to_dict(self):
        return {'target': self.target.to_list(),
                'avoid': self.avoid.to_list(),
                'safe_sets': [s.to_list() for s in self.safe_sets],
                'noise_cov': self.noise_diag.tolist(),
                'input_box': self.input_box.to_list()}


def reference_spec(noise_variance=0.01) -> ReachAvoidSpec:
    """Target [0.8, 1]^2, obstacle [-0.45, 0.25] x [-0.2, 0.15], shrinking
    safe sets over three steps, theta in [-2 pi, 2 pi], v in [-0.5, 0.5]."""
    return ReachAvoidSpec(
        target=Rectangle((0.8, 0.8), (1., 1.)),
        avoid=Rectangle((-0.45, -0.2), (0.25, 0.15)),
        safe_sets=(Rectangle((-1., -1.), (1., 1.)),
                   Rectangle((-0.3, -0.3), (1., 1.)),
                   Rectangle((0.4, 0.4), (1., 1.))),
        noise_cov=noise_variance * np.eye(2),
        input_box=Rectangle((-2 * np.pi, -0.5), (2 * np.pi, 0.5)))


@dataclass(frozen=True, eq=False)
class RbfBasis:
    centers: Tuple[np.ndarray, ...]
    variances: Tuple[np.ndarray, ...]

    def __post_init__(self):
        centers = tuple(np.ascontiguousarray(
            check_finite_array(c, 'centers', ndim=2)) for c in self.centers)
        variances = tuple(np.ascontiguousarray(
            check_finite_array(v, 'variances', ndim=1))
            for v in self.variances)
        if len(centers) != len(variances):
            raise DimensionMismatchError('Need centers and variances for '
                                         'every stage.')
        for i, (c, v) in enumerate(zip(centers, variances)):
            if c.shape != (len(v), 2):
                raise DimensionMismatchError(
                    'Stage %d has %d centers and %d variances.' %
                    (i + 1, len(c), len(v)))
            if np.any(v <= 0.):
                raise DomainError('RBF variances must be positive.')
        object.__setattr__(self, 'centers', centers)
        object.__setattr__(self, 'variances', variances)

    @property
    def stage_dims(self):
        return tuple(len(v) for v in self.variances)

    @classmethod
    def sample(cls, spec: ReachAvoidSpec, dims: Sequence[int],
               rng: RngHandle,
               variance_range=REFERENCE_VARIANCE_RANGE):
        """Centers uniform on each stage's safe set, variances uniform on
        the half-open range (low, high]."""
        if len(dims) != spec.horizon:
            raise DimensionMismatchError('%d basis sizes for horizon %d.' %
                                         (len(dims), spec.horizon))
        low, high = variance_range
        if not 0. <= low < high:
            raise DomainError('variance_range must satisfy 0 <= low < high.')
        generator = rng.generator()
        centers, variances = [], []
        for safe, d in zip(spec.safe_sets, dims):
            d = check_positive_integer(d, 'dims')
            lower, upper = np.array(safe.lower), np.array(safe.upper)
            centers.append(lower + (upper - lower) *
                           generator.random((d, 2)))
            variances.append(high - (high - low) * generator.random(d))
        return cls(tuple(centers), tuple(variances))

    def to_dict(self):
        return {'centers': [c.tolist() for c in self.centers],
                'variances': [v.tolist() for v in self.variances]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(np.array(c, dtype=float) for c in data['centers']),
                   tuple(np.array(v, dtype=float)
                         for v in data['variances']))


@nb.jit(nopython=True)
def _rbf_kernel(points, centers, variances, cutoff):
    result = np.zeros((points.shape[0], centers.shape[0]))
    for s in range(points.shape[0]):
        for j in range(centers.shape[0]):
            dx = points[s, 0] - centers[j, 0]
            dy = points[s, 1] - centers[j, 1]
            value = np.exp(-(dx * dx + dy * dy) / (2. * variances[j]))
            if value >= cutoff:
                result[s, j] = value
    return result


@nb.jit(nopython=True)
def _expected_rbf_kernel(means, centers, variances, noise_diag, cutoff):
    result = np.zeros((means.shape[0], centers.shape[0]))
    for j in range(centers.shape[0]):
        s0 = variances[j] + noise_diag[0]
        s1 = variances[j] + noise_diag[1]
        scale = np.sqrt(variances[j] / s0) * np.sqrt(variances[j] / s1)
        for s in range(means.shape[0]):
            dx = means[s, 0] - centers[j, 0]
            dy = means[s, 1] - centers[j, 1]
            value = scale * np.exp(-dx * dx / (2. * s0) - dy * dy / (2. * s1))
            if value >= cutoff:
                result[s, j] = value
    return result


def rbf_matrix(points, basis: RbfBasis, stage: int):
    """phi_j(point) for the stage's basis, shape (len(points), d_stage)."""
    if not 1 <= stage <= len(basis.stage_dims):
        raise DomainError('stage must lie in 1..%d.' % len(basis.stage_dims))
    points = np.ascontiguousarray(np.asarray(points, dtype=float)[:, :2])
    return _rbf_kernel(points, basis.centers[stage - 1],
                       basis.variances[stage - 1], RBF_CUTOFF)


def expected_basis_matrix(means, basis: RbfBasis, stage: int, noise_cov):
    """E[phi_j(mean + w)], w ~ N(0, noise_cov), for the stage's basis."""
    means = np.ascontiguousarray(np.asarray(means, dtype=float))
    return _expected_rbf_kernel(means, basis.centers[stage - 1],
                                basis.variances[stage - 1],
                                np.ascontiguousarray(np.diag(noise_cov)),
                                RBF_CUTOFF)


def dynamics_mean(state, inputs):
    """Noise-free successor of state under inputs = (theta, v)."""
    state = np.asarray(state, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    theta, v = inputs[..., 0], inputs[..., 1]
    return np.stack([state[..., 0] + v * np.cos(theta),
                     state[..., 1] + v * np.sin(theta)], axis=-1)


def expected_basis_value(center, variance, mean, noise_cov) -> float:
    """Integral of exp(-|y - center|^2 / (2 variance)) against
    N(mean, noise_cov), noise_cov diagonal."""
    if not variance > 0.:
        raise DomainError('variance must be positive.')
    noise = np.diag(check_finite_array(noise_cov, 'noise_cov', ndim=2))
    if np.any(noise < 0.):
        raise DomainError('noise_cov must be positive semidefinite.')
    total = variance + noise
    offset = np.asarray(mean, dtype=float) - np.asarray(center, dtype=float)
    return float(np.prod(np.sqrt(variance / total) *
                         np.exp(-offset**2 / (2. * total))))


def gaussian_rectangle_mass(means, noise_cov, rect: Rectangle):
    """P[mean + w in rect], w ~ N(0, noise_cov) diagonal, for each mean."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    scale = np.sqrt(np.diag(noise_cov))
    lower = (np.array(rect.lower) - means) / scale
    upper = (np.array(rect.upper) - means) / scale
    return np.prod(ndtr(upper) - ndtr(lower), axis=-1)


def rbf_rectangle_integrals(centers, variances, rect: Rectangle):
    """Lebesgue integral over rect of each RBF, in closed form."""
    centers = np.asarray(centers, dtype=float)
    sigma = np.sqrt(np.asarray(variances, dtype=float))[:, None]
    lower = (np.array(rect.lower) - centers) / sigma
    upper = (np.array(rect.upper) - centers) / sigma
    factors = sigma * np.sqrt(2 * np.pi) * (ndtr(upper) - ndtr(lower))
    return np.prod(factors, axis=1)


def objective_integrals(basis: RbfBasis, stage: int, spec: ReachAvoidSpec):
    """I_stage: integral of each stage RBF over the stage's safe set."""
    return rbf_rectangle_integrals(basis.centers[stage - 1],
                                   basis.variances[stage - 1],
                                   spec.safe_sets[stage - 1])


def _reward_terms(points, stage, basis, spec):
    """Indicator of T, indicator of (S_i - A) - T, and the expectation
    coefficients of the next value function at every sample.

    The avoid set takes precedence over the target."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 4:
        raise DimensionMismatchError('Samples are (x, y, theta, v).')
    if not 1 <= stage <= spec.horizon:
        raise DomainError('stage must lie in 1..%d.' % spec.horizon)
    states = points[:, :2]
    in_avoid = spec.avoid.contains(states)
    in_target = spec.target.contains(states) & ~in_avoid
    propagate = spec.safe_sets[stage - 1].contains(states) & \
        ~in_avoid & ~in_target
    means = dynamics_mean(states, points[:, 2:])
    if stage == spec.horizon:
        expectation = gaussian_rectangle_mass(means, spec.noise_cov,
                                              spec.target)
        expectation[expectation < RBF_CUTOFF] = 0.
    else:
        expectation = expected_basis_matrix(means, basis, stage + 1,
                                            spec.noise_cov)
    return in_target.astype(float), propagate.astype(float), expectation


def reward_h(delta, stage: int, next_weights, basis: RbfBasis,
             spec: ReachAvoidSpec):
    """One-step reward h at delta (a 4-vector or an (S, 4) array); at the
    last stage next_weights is ignored and the successor value is 1_T."""
    target, propagate, expectation = _reward_terms(delta, stage, basis, spec)
    if stage < spec.horizon:
        expectation = expectation @ np.asarray(next_weights, dtype=float)
    h = target + propagate * expectation
    return float(h[0]) if np.ndim(delta) == 1 else h


def constraint_row(delta, stage: int, next_weights, basis: RbfBasis,
                   spec: ReachAvoidSpec):
    """Coefficients a and right hand side r of a^T w_stage >= r."""
    a = rbf_matrix(np.atleast_2d(delta), basis, stage)
    r = reward_h(delta, stage, next_weights, basis, spec)
    return (a[0], r) if np.ndim(delta) == 1 else (a, r)


def stage_constraint_rows(samples, stage: int, basis: RbfBasis,
                          spec: ReachAvoidSpec) -> StageRows:
    """h - V_stage <= 0 at every sample, in the engine's affine form."""
    target, propagate, expectation = _reward_terms(samples, stage, basis,
                                                   spec)
    own = -rbf_matrix(samples, basis, stage)
    if stage == spec.horizon:
        return StageRows(own=own, constant=target + propagate * expectation)
    return StageRows(own=own, constant=target,
                     coupled=propagate[:, None] * expectation)


def _state_domain(rect: Rectangle, state_sampler, burn_in, thinning):
    if state_sampler == 'box':
        return BoxDomain(rect.lower, rect.upper)
    if state_sampler == 'hit_and_run':
        return PolytopeDomain.from_box(rect.lower, rect.upper,
                                       burn_in=burn_in, thinning=thinning)
    raise DomainError('Unknown state sampler %r.' % state_sampler)


def sampling_domain(spec: ReachAvoidSpec, state_sampler='box',
                    burn_in=DEFAULT_BURN_IN, thinning=DEFAULT_THINNING,
                    stage: Optional[int] = None):
    """States uniform on the safe set of stage (1-based), or on the
    bounding box of all safe sets when stage is None; inputs uniform on
    the input box."""
    if stage is None:
        states = bounding_box(spec.safe_sets)
    elif 1 <= stage <= spec.horizon:
        states = spec.safe_sets[stage - 1]
    else:
        raise DomainError('Stage must be in 1..%d, got %r.' %
                          (spec.horizon, stage))
    return ProductDomain((_state_domain(states, state_sampler, burn_in,
                                        thinning),
                          BoxDomain(spec.input_box.lower,
                                    spec.input_box.upper)))


def stage_sampling_domains(spec: ReachAvoidSpec, state_sampler='box',
                           burn_in=DEFAULT_BURN_IN,
                           thinning=DEFAULT_THINNING):
    return tuple(sampling_domain(spec, state_sampler, burn_in, thinning, i)
                 for i in range(1, spec.horizon + 1))


def build_program(spec: ReachAvoidSpec, basis: RbfBasis, domain=None,
                  weight_lower: Optional[float] = 0.,
                  weight_upper: Optional[float] = None,
                  stage_domains=None) -> UncertainProgram:
    """Coupled weight LPs over the basis. Weights are nonnegative unless
    weight_lower is None; None leaves a side unbounded.

    Per-stage methods sample stage i on its safe set by default; an empty
    stage_domains keeps the shared domain for every stage."""
    if len(basis.stage_dims) != spec.horizon:
        raise DimensionMismatchError('Basis has %d stages, horizon is %d.' %
                                     (len(basis.stage_dims), spec.horizon))
    stages = range(1, spec.horizon + 1)
    return UncertainProgram(
        stage_dims=basis.stage_dims,
        stage_costs=tuple(objective_integrals(basis, i, spec)
                          for i in stages),
        constraint_builders=tuple(partial(stage_constraint_rows, stage=i,
                                          basis=basis, spec=spec)
                                  for i in stages),
        coupling=Coupling.PAIRWISE_COUPLED,
        domain=sampling_domain(spec) if domain is None else domain,
        decision_lower=-np.inf if weight_lower is None else weight_lower,
        decision_upper=np.inf if weight_upper is None else weight_upper,
        stage_domains=(stage_sampling_domains(spec) if stage_domains is None
                       else tuple(stage_domains) or None))


@dataclass(frozen=True, eq=False)
class ValueWeights:
    weights: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, 'weights', tuple(
            check_finite_array(w, 'weights', ndim=1) for w in self.weights))

    @classmethod
    def from_solution(cls, solution):
        return cls(tuple(solution.block(i) for i in range(solution.M)))

    def check(self, basis: RbfBasis):
        if tuple(len(w) for w in self.weights) != basis.stage_dims:
            raise DimensionMismatchError('Weights do not match the basis.')

    def evaluate(self, basis: RbfBasis, stage: int, points):
        """Approximate value V_stage at an (N, 2) array of states."""
        self.check(basis)
        return rbf_matrix(np.atleast_2d(points), basis, stage) @ \
            self.weights[stage - 1]

    def to_dict(self):
        return {'weights': [w.tolist() for w in self.weights]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(np.array(w, dtype=float) for w in data['weights']))


def run_adp(spec: ReachAvoidSpec, basis: RbfBasis, method, epsilon: float,
            beta: float, allocation=None, seed: int = 0,
            n_validation: int = DEFAULT_N_VALIDATION, bound='exact',
            solver=SolverOptions(), domain=None, confidence=0.95,
            weight_lower=0., weight_upper=None, stage_domains=None):
    """Train the value function weights with a scenario method and
    validate them on fresh samples.

    Returns (ValueWeights, ScenarioSolution, ViolationReport)."""
    method = Method(method)
    program = build_program(spec, basis, domain, weight_lower, weight_upper,
                            stage_domains)
    if method.allocated and allocation is None:
        allocation = default_allocation(epsilon, beta, program.stage_dims)
    logger.info('Running %s on a reach-avoid program with dims %s' %
                (method.value, program.stage_dims))
    solution = solve(method, program, RngHandle(seed), epsilon=epsilon,
                     beta=beta, allocation=allocation, bound=bound,
                     solver=solver)
    report = empirical_violation(solution, program, n=n_validation,
                                 rng=validation_rng(seed), conf=confidence)
    return ValueWeights.from_solution(solution), solution, report


def level_set_grid(weights: ValueWeights, basis: RbfBasis, stage: int,
                   bounds: Rectangle, resolution: int) -> pd.DataFrame:
    """V_stage on a resolution x resolution grid over bounds; rows are
    indexed by y and columns by x."""
    if not isinstance(resolution, (int, np.integer)) or resolution < 2:
        raise DomainError('resolution must be an integer >= 2.')
    xs = np.linspace(bounds.lower[0], bounds.upper[0], resolution)
    ys = np.linspace(bounds.lower[1], bounds.upper[1], resolution)
    X, Y = np.meshgrid(xs, ys)
    values = weights.evaluate(basis, stage,
                              np.column_stack([X.ravel(), Y.ravel()]))
    return pd.DataFrame(values.reshape(resolution, resolution),
                        index=pd.Index(ys, name='y'),
                        columns=pd.Index(xs, name='x'))
