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

"""Exception types raised by rescen.

Each one specialises the builtin exception a caller would expect, so
``except ValueError`` keeps working around argument errors."""


class DomainError(ValueError):
    """Argument outside the domain of a bound or probability function."""


class DimensionMismatchError(ValueError):
    pass


class SampleSizeOverflowError(OverflowError):
    """The minimal sample size exceeds the configured search cap."""

    def __init__(self, cap, message=None):
        self.cap = cap
        super().__init__(message or 'Sample size exceeds cap of %d.' % cap)


class AllocationConvergenceError(RuntimeError):
    pass


class BudgetError(ValueError):
    """Stage-wise violation or confidence levels exceed the overall budget."""


class LpNumericalError(RuntimeError):
    """The LP backend neither converged nor certified infeasibility or
    unboundedness."""

    def __init__(self, message, iterations=None, residuals=None):
        self.iterations = iterations
        self.residuals = residuals if residuals is not None else {}
        details = ', '.join('%s=%.2e' % (k, v)
                            for k, v in sorted(self.residuals.items()))
        super().__init__(message + (' (%s)' % details if details else ''))


class EmptyPolytopeError(ValueError):
    pass


class ProgramStructureError(ValueError):
    """The uncertain program does not have the structure a method needs."""


class ScenarioInfeasibleError(RuntimeError):
    """A sampled program is infeasible or unbounded, i.e. the uniqueness
    and existence assumption on the scenario program fails."""

    def __init__(self, message, stage=None, status=None):
        self.stage = stage
        self.status = status
        super().__init__(message)


class StreamCollisionError(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` is the dotted field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__('%s: %s' % (path, message))
