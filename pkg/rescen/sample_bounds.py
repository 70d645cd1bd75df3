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

"""Sample sizes for scenario programs.

The implicit bound is the smallest N with

    sum_{i=0}^{d-1} C(N, i) eps^i (1 - eps)^(N - i) <= beta,

the explicit bound is the closed form

    ceil( e / (e - 1) / eps * (d - 1 + ln(1 / beta)) ),

which upper bounds the implicit one.
"""

import numpy as np
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional
from scipy.special import gammaln, logsumexp
logger = logging.getLogger(__name__)

from .errors import DomainError, SampleSizeOverflowError
from .utils import check_probability, check_positive_integer

EXPLICIT_FACTOR = np.e / (np.e - 1.)
DEFAULT_MAX_SAMPLES = 10**8


class BoundKind(str, Enum):
    IMPLICIT_EXACT = 'implicit_exact'
    EXPLICIT_CLOSED_FORM = 'explicit_closed_form'

    @classmethod
    def parse(cls, name):
        """Accept the enum, its value, or the short CLI names."""
        if isinstance(name, cls):
            return name
        aliases = {'exact': cls.IMPLICIT_EXACT,
                   'explicit': cls.EXPLICIT_CLOSED_FORM}
        if name in aliases:
            return aliases[name]
        return cls(name)


@dataclass(frozen=True)
class BoundQuery:
    epsilon: float
    beta: float
    dim: int

    def __post_init__(self):
        check_probability(self.epsilon, 'epsilon')
        check_probability(self.beta, 'beta')
        check_positive_integer(self.dim, 'dim')


@dataclass(frozen=True)
class BoundResult:
    samples: int
    bound_kind: BoundKind
    tail_value: Optional[float] = None

    def to_dict(self):
        return {'samples': int(self.samples),
                'bound_kind': self.bound_kind.value,
                'tail_log': self.tail_value}


def binomial_tail_log(n: int, k_max: int, p: float) -> float:
    """Log of P[Binomial(n, p) <= k_max], in log space throughout."""
    if not (0 <= k_max < n):
        raise DomainError('Need 0 <= k_max < n, got k_max=%r, n=%r.' %
                          (k_max, n))
    check_probability(p, 'p')
    i = np.arange(k_max + 1, dtype=float)
    log_terms = gammaln(n + 1.) - gammaln(i + 1.) - gammaln(n - i + 1.) + \
        i * np.log(p) + (n - i) * np.log1p(-p)
    return min(float(logsumexp(log_terms)), 0.)


def exact_sample_size(q: BoundQuery,
                      max_samples: int = DEFAULT_MAX_SAMPLES) -> BoundResult:
    """Minimal N >= dim whose binomial tail is below beta.

    The tail is strictly decreasing in N, so we double an upper bracket
    and then bisect."""
    log_beta = np.log(q.beta)
    k_max = q.dim - 1

    def tail(n):
        return binomial_tail_log(n, k_max, q.epsilon)

    if tail(q.dim) <= log_beta:
        return BoundResult(q.dim, BoundKind.IMPLICIT_EXACT, tail(q.dim))

    low, high = q.dim, 2 * q.dim
    while tail(high) > log_beta:
        if high >= max_samples:
            raise SampleSizeOverflowError(
                max_samples,
                'Implicit sample size for eps=%g, beta=%g, d=%d exceeds %d.'
                % (q.epsilon, q.beta, q.dim, max_samples))
        low, high = high, min(2 * high, max_samples)
    logger.debug('Sample size bracket (%d, %d]' % (low, high))

    while high - low > 1:
        middle = (low + high) // 2
        if tail(middle) <= log_beta:
            high = middle
        else:
            low = middle

    logger.debug('Implicit sample size for eps=%g, beta=%g, d=%d is %d' %
                 (q.epsilon, q.beta, q.dim, high))
    return BoundResult(high, BoundKind.IMPLICIT_EXACT, tail(high))


def explicit_sample_size(q: BoundQuery) -> BoundResult:
    value = EXPLICIT_FACTOR / q.epsilon * (q.dim - 1 + np.log(1. / q.beta))
    return BoundResult(max(int(np.ceil(value)), 1),
                       BoundKind.EXPLICIT_CLOSED_FORM)


def sample_size(q: BoundQuery, bound='exact', **kwargs) -> BoundResult:
    """Dispatch on the bound kind ('exact' / 'explicit' or a BoundKind)."""
    if BoundKind.parse(bound) is BoundKind.IMPLICIT_EXACT:
        return exact_sample_size(q, **kwargs)
    return explicit_sample_size(q)
