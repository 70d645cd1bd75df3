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

"""Empirical violation of scenario solutions on fresh samples."""

import numpy as np
import logging
from dataclasses import dataclass
from typing import Tuple
from scipy.optimize import bisect
from scipy.special import betainc
logger = logging.getLogger(__name__)

from .errors import DomainError, StreamCollisionError
from .sampling import RngHandle, VALIDATION_STREAM, draw
from .utils import check_probability, check_positive_integer

VIOLATION_TOL = 1e-9
DEFAULT_CONFIDENCE = 0.95
DEFAULT_N_VALIDATION = 1000


def clopper_pearson_upper(k: int, n: int, conf: float) -> float:
    """Exact one-sided upper confidence bound on a binomial proportion
    after k successes in n trials.

    Solves P[Binomial(n, p) <= k] = 1 - conf for p, i.e.
    I_p(k + 1, n - k) = conf, by bisection on the incomplete beta."""
    check_positive_integer(n, 'n')
    if not isinstance(k, (int, np.integer)) or not 0 <= k <= n:
        raise DomainError('Need 0 <= k <= n, got k=%r, n=%r.' % (k, n))
    check_probability(conf, 'conf')
    if k == n:
        return 1.
    return float(bisect(lambda p: betainc(k + 1, n - k, p) - conf,
                        0., 1., xtol=1e-15, rtol=8.9e-16, maxiter=200))


@dataclass(frozen=True)
class ViolationReport:
    n_validation: int
    violations_per_stage: Tuple[int, ...]
    epsilon_hat_per_stage: Tuple[float, ...]
    violations_overall: int
    epsilon_hat_overall: float
    cp_upper: float
    confidence: float
    validation_stream: int
    training_streams: Tuple[int, ...]
    violations_stage_measure: Tuple[int, ...] = ()
    epsilon_hat_stage_measure: Tuple[float, ...] = ()

    def to_dict(self):
        return {'n_validation': int(self.n_validation),
                'violations_per_stage': [int(v) for v in
                                         self.violations_per_stage],
                'epsilon_hat_per_stage': list(self.epsilon_hat_per_stage),
                'violations_overall': int(self.violations_overall),
                'epsilon_hat_overall': self.epsilon_hat_overall,
                'cp_upper': self.cp_upper,
                'confidence': self.confidence,
                'validation_stream': int(self.validation_stream),
                'training_streams': [int(s) for s in self.training_streams],
                'violations_stage_measure': [
                    int(v) for v in self.violations_stage_measure],
                'epsilon_hat_stage_measure': list(
                    self.epsilon_hat_stage_measure)}


def validation_rng(seed) -> RngHandle:
    return RngHandle(seed, VALIDATION_STREAM)


def empirical_violation(sol, p, n: int = DEFAULT_N_VALIDATION,
                        rng: RngHandle = None,
                        conf: float = DEFAULT_CONFIDENCE,
                        tol: float = VIOLATION_TOL) -> ViolationReport:
    """Fraction of n fresh samples at which x* violates each stage
    constraint, and the joint event that some stage is violated.

    Samples come from the program's shared domain. When the program has
    stage domains, stage i is also checked on n samples of its own domain,
    which is the measure a per-stage certificate refers to."""
    check_positive_integer(n, 'n')
    check_probability(conf, 'conf')
    if rng is None:
        raise DomainError('A validation RngHandle is required.')
    if rng.stream_id in sol.training_streams:
        raise StreamCollisionError(
            'Validation stream %d was used for training.' % rng.stream_id)

    samples = draw(p.domain, n, rng)
    violated = np.column_stack([p.evaluate_stage(i, sol.x_star, samples)
                                > tol for i in range(p.M)])
    per_stage = tuple(int(c) for c in violated.sum(axis=0))
    overall = int(np.any(violated, axis=1).sum())
    if p.stage_domains is None:
        stage_measure = per_stage
    else:
        stage_measure = tuple(
            int(np.sum(p.evaluate_stage(i, sol.x_star,
                                        draw(p.stage_domain(i), n, rng))
                       > tol)) for i in range(p.M))
    report = ViolationReport(
        n_validation=n, violations_per_stage=per_stage,
        epsilon_hat_per_stage=tuple(c / n for c in per_stage),
        violations_overall=overall, epsilon_hat_overall=overall / n,
        cp_upper=clopper_pearson_upper(overall, n, conf), confidence=conf,
        validation_stream=rng.stream_id,
        training_streams=tuple(sol.training_streams),
        violations_stage_measure=stage_measure,
        epsilon_hat_stage_measure=tuple(c / n for c in stage_measure))
    logger.info('Empirical violation %.4f (%d/%d), upper bound %.4f' %
                (report.epsilon_hat_overall, overall, n, report.cp_upper))
    return report
