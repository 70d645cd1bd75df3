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

"""Dense linear programs

    minimize    c^T x
    subject to  A x <= b,  lower <= x <= upper,

solved either by the HiGHS dual simplex shipped with scipy or by a
built-in Mehrotra predictor-corrector interior point method."""

import numpy as np
import logging
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
import scipy.linalg
import scipy.optimize
logger = logging.getLogger(__name__)

from .errors import LpNumericalError, DimensionMismatchError, DomainError
from .utils import check_finite_array

DEFAULT_TOL = 1e-8
# Optimal solutions whose KKT residual exceeds tol by more than this factor
# are rejected; smaller excesses are only logged.
RESIDUAL_ACCEPTANCE = 1e3


class LpStatus(str, Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'


def _bound_vector(bound, n, fill, name):
    if bound is None:
        return np.full(n, fill)
    bound = np.array(bound, dtype=float).reshape(-1)
    if len(bound) != n:
        raise DimensionMismatchError('%s has length %d, expected %d.' %
                                     (name, len(bound), n))
    if np.any(np.isnan(bound)):
        raise DomainError('%s contains NaN.' % name)
    return bound


@dataclass(frozen=True, eq=False)
class LpStandardForm:
    cost: np.ndarray
    ineq_matrix: np.ndarray
    ineq_rhs: np.ndarray
    var_lower: Optional[np.ndarray] = None
    var_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        cost = np.ascontiguousarray(
            check_finite_array(self.cost, 'cost', ndim=1))
        n = len(cost)
        matrix = np.asarray(self.ineq_matrix, dtype=float)
        if matrix.size == 0:
            matrix = np.zeros((0, n))
        matrix = np.ascontiguousarray(
            check_finite_array(matrix, 'ineq_matrix', ndim=2))
        rhs = np.ascontiguousarray(
            check_finite_array(self.ineq_rhs, 'ineq_rhs').reshape(-1))
        if matrix.shape != (len(rhs), n):
            raise DimensionMismatchError(
                'ineq_matrix has shape %s, expected (%d, %d).' %
                (matrix.shape, len(rhs), n))
        lower = _bound_vector(self.var_lower, n, -np.inf, 'var_lower')
        upper = _bound_vector(self.var_upper, n, np.inf, 'var_upper')
        if np.any(lower > upper):
            raise DomainError('var_lower exceeds var_upper.')
        object.__setattr__(self, 'cost', cost)
        object.__setattr__(self, 'ineq_matrix', matrix)
        object.__setattr__(self, 'ineq_rhs', rhs)
        object.__setattr__(self, 'var_lower', lower)
        object.__setattr__(self, 'var_upper', upper)

    @property
    def n(self):
        return len(self.cost)

    @property
    def m(self):
        return len(self.ineq_rhs)

    def to_bytes(self) -> bytes:
        return b''.join([np.array([self.n, self.m], dtype=np.int64).tobytes(),
                         self.cost.tobytes(), self.ineq_matrix.tobytes(),
                         self.ineq_rhs.tobytes(), self.var_lower.tobytes(),
                         self.var_upper.tobytes()])

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def scipy_bounds(self):
        return [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
                for lo, hi in zip(self.var_lower, self.var_upper)]

    @classmethod
    def from_text(cls, text: str):
        """Parse "n m", a cost row, then m rows "a_1 ... a_n b"."""
        rows = [line.split() for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith('#')]
        if not rows or len(rows[0]) != 2:
            raise DomainError('First line must be "n m".')
        n, m = int(rows[0][0]), int(rows[0][1])
        if len(rows) != m + 2:
            raise DimensionMismatchError('Expected %d lines after the header, '
                                         'got %d.' % (m + 1, len(rows) - 1))
        cost = np.array(rows[1], dtype=float)
        body = np.array(rows[2:], dtype=float).reshape(m, -1)
        if len(cost) != n or body.shape[1] != n + 1:
            raise DimensionMismatchError('Rows must have n (cost) and n + 1 '
                                         '(constraints) entries.')
        return cls(cost, body[:, :n], body[:, n])


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective: float
    duals: np.ndarray
    iterations: int
    max_residual: float
    degenerate: bool = False
    backend: str = 'highs'
    residuals: dict = field(default_factory=dict)

    def to_dict(self):
        return {'status': self.status.value,
                'x': self.x.tolist(),
                'objective': self.objective,
                'duals': self.duals.tolist(),
                'iterations': int(self.iterations),
                'max_residual': self.max_residual,
                'degenerate': bool(self.degenerate),
                'backend': self.backend,
                'residuals': self.residuals}


def kkt_residuals(p: LpStandardForm, x, duals, lower_duals, upper_duals):
    """Primal feasibility, dual feasibility, stationarity and complementary
    slackness residuals (infinity norms) of a primal-dual pair.

    lower_duals/upper_duals are the nonnegative multipliers of
    x >= lower and x <= upper."""
    slack = p.ineq_rhs - p.ineq_matrix @ x
    finite_lo = np.isfinite(p.var_lower)
    finite_hi = np.isfinite(p.var_upper)
    lo_slack = np.where(finite_lo, x - p.var_lower, 0.)
    hi_slack = np.where(finite_hi, p.var_upper - x, 0.)

    def inf_norm(v):
        return float(np.max(np.abs(v))) if len(v) else 0.

    primal = max(inf_norm(np.minimum(slack, 0.)),
                 inf_norm(np.minimum(lo_slack, 0.)),
                 inf_norm(np.minimum(hi_slack, 0.)))
    dual = max(inf_norm(np.minimum(duals, 0.)),
               inf_norm(np.minimum(lower_duals, 0.)),
               inf_norm(np.minimum(upper_duals, 0.)))
    stationarity = inf_norm(p.cost + p.ineq_matrix.T @ duals -
                            lower_duals + upper_duals) / \
        (1. + inf_norm(p.cost))
    complementarity = max(inf_norm(duals * slack),
                          inf_norm(lower_duals * lo_slack),
                          inf_norm(upper_duals * hi_slack))
    return {'primal': primal, 'dual': dual, 'stationarity': stationarity,
            'complementarity': complementarity}


def _is_degenerate(p, x, duals, lower_duals, upper_duals, tol):
    """A unique nondegenerate vertex has exactly n active constraints,
    all with strictly positive multipliers."""
    scale = 1e-9 * (1. + np.abs(p.ineq_rhs))
    active = np.abs(p.ineq_rhs - p.ineq_matrix @ x) <= scale
    active_lo = np.isfinite(p.var_lower) & \
        (np.abs(x - p.var_lower) <= 1e-9 * (1. + np.abs(x)))
    active_hi = np.isfinite(p.var_upper) & \
        (np.abs(p.var_upper - x) <= 1e-9 * (1. + np.abs(x)))
    n_active = active.sum() + active_lo.sum() + active_hi.sum()
    n_strict = (duals[active] > tol).sum() + \
        (lower_duals[active_lo] > tol).sum() + \
        (upper_duals[active_hi] > tol).sum()
    return bool(n_active != p.n or n_strict != p.n)


def _failed_solution(p, status, iterations, backend):
    objective = np.inf if status is LpStatus.INFEASIBLE else -np.inf
    return LpSolution(status=status, x=np.full(p.n, np.nan),
                      objective=objective, duals=np.zeros(p.m),
                      iterations=iterations, max_residual=np.nan,
                      backend=backend)


def _optimal_solution(p, x, duals, lower_duals, upper_duals, iterations,
                      backend, tol):
    residuals = kkt_residuals(p, x, duals, lower_duals, upper_duals)
    degenerate = _is_degenerate(p, x, duals, lower_duals, upper_duals, tol)
    if degenerate:
        logger.debug('Optimal point is degenerate or not unique.')
    return LpSolution(status=LpStatus.OPTIMAL, x=x,
                      objective=float(p.cost @ x), duals=duals,
                      iterations=iterations,
                      max_residual=max(residuals.values()),
                      degenerate=degenerate, backend=backend,
                      residuals=residuals)


def _linprog_highs(p, options):
    return scipy.optimize.linprog(
        p.cost,
        A_ub=p.ineq_matrix if p.m else None,
        b_ub=p.ineq_rhs if p.m else None,
        bounds=p.scipy_bounds(),
        method='highs-ds',
        options=options)


def _solve_highs(p: LpStandardForm, tol, max_iter):
    options = {'primal_feasibility_tolerance': max(tol, 1e-10),
               'dual_feasibility_tolerance': max(tol, 1e-10)}
    if max_iter is not None:
        options['maxiter'] = max_iter
    result = _linprog_highs(p, options)
    if result.status in (2, 3):
        # presolve may not tell infeasible from unbounded
        result = _linprog_highs(p, dict(options, presolve=False))
    iterations = int(getattr(result, 'nit', 0))
    logger.debug('HiGHS returned status %d after %d iterations: %s' %
                 (result.status, iterations, result.message))

    if result.status == 2:
        return _failed_solution(p, LpStatus.INFEASIBLE, iterations, 'highs')
    if result.status == 3:
        return _failed_solution(p, LpStatus.UNBOUNDED, iterations, 'highs')
    if result.status != 0:
        raise LpNumericalError('HiGHS failed: %s' % result.message,
                               iterations=iterations)

    x = np.asarray(result.x, dtype=float)
    duals = -np.asarray(result.ineqlin.marginals, dtype=float) if p.m \
        else np.zeros(0)
    lower_duals = np.asarray(result.lower.marginals, dtype=float)
    upper_duals = -np.asarray(result.upper.marginals, dtype=float)
    return _optimal_solution(p, x, duals, lower_duals, upper_duals,
                             iterations, 'highs', tol)


def _stacked_inequalities(p: LpStandardForm):
    """Fold finite variable bounds into G x <= h."""
    n = p.n
    finite_lo = np.flatnonzero(np.isfinite(p.var_lower))
    finite_hi = np.flatnonzero(np.isfinite(p.var_upper))
    G = np.vstack([p.ineq_matrix,
                   -np.eye(n)[finite_lo],
                   np.eye(n)[finite_hi]])
    h = np.concatenate([p.ineq_rhs,
                        -p.var_lower[finite_lo],
                        p.var_upper[finite_hi]])
    return G, h, finite_lo, finite_hi


def _max_step(v, dv):
    negative = dv < 0
    if not np.any(negative):
        return np.inf
    return float(np.min(-v[negative] / dv[negative]))


def _newton_direction(G, W, s, r_d, r_p, r_c):
    """Solve the reduced Newton system of the primal-dual iteration."""
    H = G.T @ (W[:, None] * G)
    rhs = -r_d - G.T @ (W * r_p - r_c / s)
    try:
        dx = scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), rhs)
    except (np.linalg.LinAlgError, ValueError):
        dx = np.linalg.lstsq(H, rhs, rcond=None)[0]
    dz = W * (G @ dx + r_p) - r_c / s
    ds = -r_p - G @ dx
    return dx, ds, dz


def _solve_interior_point(p: LpStandardForm, tol, max_iter):
    max_iter = 200 if max_iter is None else max_iter
    G, h, finite_lo, finite_hi = _stacked_inequalities(p)
    c = p.cost
    m, n = G.shape

    if m == 0:
        if np.any(c != 0.):
            return _failed_solution(p, LpStatus.UNBOUNDED, 0, 'interior-point')
        return _optimal_solution(p, np.zeros(n), np.zeros(0), np.zeros(n),
                                 np.zeros(n), 0, 'interior-point', tol)

    x = np.zeros(n)
    s = np.maximum(h - G @ x, 1.)
    z = np.ones(m)
    h_scale = 1. + np.max(np.abs(h))
    c_scale = 1. + np.max(np.abs(c))
    residuals = {}

    for iteration in range(max_iter):
        r_d = c + G.T @ z
        r_p = G @ x + s - h
        mu = s @ z / m
        primal_obj = c @ x
        residuals = {'primal': np.max(np.abs(r_p)) / h_scale,
                     'dual': np.max(np.abs(r_d)) / c_scale,
                     'gap': abs(primal_obj + h @ z) / (1. + abs(primal_obj))}
        logger.debug('IPM iteration %d: %s, mu=%.2e' %
                     (iteration, residuals, mu))

        if max(residuals.values()) <= tol and mu <= tol:
            duals = z[:p.m]
            lower_duals = np.zeros(n)
            upper_duals = np.zeros(n)
            lower_duals[finite_lo] = z[p.m:p.m + len(finite_lo)]
            upper_duals[finite_hi] = z[p.m + len(finite_lo):]
            return _optimal_solution(p, x, duals, lower_duals, upper_duals,
                                     iteration, 'interior-point', tol)

        # Farkas certificates: z >= 0, G^T z = 0, h^T z < 0 proves
        # infeasibility; G d <= 0, c^T d < 0 proves unboundedness.
        z_norm = np.sum(z)
        if z_norm > 1e8 and h @ z < 0 and \
                np.max(np.abs(G.T @ z)) <= 1e-7 * -(h @ z):
            return _failed_solution(p, LpStatus.INFEASIBLE, iteration,
                                    'interior-point')
        x_norm = np.max(np.abs(x))
        if x_norm > 1e8 and primal_obj < 0 and \
                np.max(G @ x) <= 1e-7 * -primal_obj:
            return _failed_solution(p, LpStatus.UNBOUNDED, iteration,
                                    'interior-point')

        W = z / s
        dx_a, ds_a, dz_a = _newton_direction(G, W, s, r_d, r_p, s * z)
        alpha_a = min(1., _max_step(s, ds_a), _max_step(z, dz_a))
        mu_a = (s + alpha_a * ds_a) @ (z + alpha_a * dz_a) / m
        sigma = (mu_a / mu)**3

        r_c = s * z + ds_a * dz_a - sigma * mu
        dx, ds, dz = _newton_direction(G, W, s, r_d, r_p, r_c)
        alpha = min(1., 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
        if alpha < 1e-12:
            break

        x = x + alpha * dx
        s = s + alpha * ds
        z = z + alpha * dz

    raise LpNumericalError('Interior point method did not converge.',
                           iterations=iteration + 1, residuals=residuals)


BACKENDS = {'highs': _solve_highs,
            'interior-point': _solve_interior_point}


def solve_lp(p: LpStandardForm, tol: float = DEFAULT_TOL,
             method: str = 'highs',
             max_iter: Optional[int] = None) -> LpSolution:
    """Solve a dense LP. Infeasibility and unboundedness are reported in
    the returned status; anything else that stops the backend raises
    LpNumericalError."""
    if tol <= 0:
        raise DomainError('tol must be positive.')
    if method not in BACKENDS:
        raise DomainError('Unknown LP method %r, use one of %s.' %
                          (method, sorted(BACKENDS)))
    logger.debug('Solving LP with %d variables and %d constraints (%s).' %
                 (p.n, p.m, method))
    return check_acceptance(BACKENDS[method](p, tol, max_iter), tol)


def check_acceptance(solution: LpSolution, tol) -> LpSolution:
    """Raise LpNumericalError on an optimal status whose KKT residual is
    above RESIDUAL_ACCEPTANCE * max(tol, 1e-9)."""
    if solution.status is not LpStatus.OPTIMAL or \
            solution.max_residual <= tol:
        return solution
    if solution.max_residual > RESIDUAL_ACCEPTANCE * max(tol, 1e-9):
        raise LpNumericalError(
            '%s returned an optimal status with KKT residual %.2e.' %
            (solution.backend, solution.max_residual),
            iterations=solution.iterations, residuals=solution.residuals)
    logger.warning('LP solution has KKT residual %.2e.' %
                   solution.max_residual)
    return solution
