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

import numpy as np
import logging
logger = logging.getLogger(__name__)

from .errors import DomainError, DimensionMismatchError


def check_probability(value, name='value'):
    """Check value is a float in the open interval (0, 1)."""
    if not np.isscalar(value) or not np.isfinite(value):
        raise DomainError('%s must be a finite scalar, got %r.' % (name, value))
    if not 0. < value < 1.:
        raise DomainError('%s must lie in (0, 1), got %r.' % (name, value))
    return float(value)


def check_positive_integer(value, name='value'):
    if isinstance(value, (bool, np.bool_)) or \
            not isinstance(value, (int, np.integer)):
        raise DomainError('%s must be an integer, got %r.' % (name, value))
    if value < 1:
        raise DomainError('%s must be positive, got %d.' % (name, value))
    return int(value)


def check_finite_array(array, name='array', ndim=None):
    array = np.asarray(array, dtype=float)
    if ndim is not None and array.ndim != ndim:
        raise DimensionMismatchError('%s must have %d dimensions, got %d.' %
                                     (name, ndim, array.ndim))
    if not np.all(np.isfinite(array)):
        raise DomainError('%s contains non-finite entries.' % name)
    return array


def check_same_length(name, *sequences):
    lengths = set(len(seq) for seq in sequences)
    if len(lengths) > 1:
        raise DimensionMismatchError(
            '%s have inconsistent lengths %s.' % (name, sorted(lengths)))


def json_default(obj):
    """Make numpy scalars and arrays JSON serializable."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError('Object of type %s is not JSON serializable' %
                    type(obj).__name__)
