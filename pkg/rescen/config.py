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

"""Experiment configuration, read from JSON.

Every section is a dataclass with defaults reproducing the reference
reach-avoid experiment; load_config rejects unknown fields and wrong
types with a ConfigError naming the dotted field path."""

import copy
import json
import logging
from dataclasses import dataclass, field, fields, is_dataclass
from typing import List, Optional
import numpy as np
logger = logging.getLogger(__name__)

from .budget_allocation import Method
from .errors import ConfigError
from .lp_solver import BACKENDS, DEFAULT_TOL
from .reachavoid_adp import Rectangle, ReachAvoidSpec, reference_spec, \
    REFERENCE_VARIANCE_RANGE
from .sampling import DEFAULT_BURN_IN, DEFAULT_THINNING


def _reference_problem_field(name):
    return lambda: copy.deepcopy(_REFERENCE_PROBLEM[name])


_REFERENCE = reference_spec()
_REFERENCE_PROBLEM = {
    'target': _REFERENCE.target.to_list(),
    'avoid': _REFERENCE.avoid.to_list(),
    'safe_sets': [s.to_list() for s in _REFERENCE.safe_sets],
    'noise_cov': _REFERENCE.noise_diag.tolist(),
    'input_box': _REFERENCE.input_box.to_list()}


@dataclass
class BasisConfig:
    dims: List[int] = field(default_factory=lambda: [200, 150, 100])
    variance_range: List[float] = field(
        default_factory=lambda: list(REFERENCE_VARIANCE_RANGE))
    weight_lower: Optional[float] = 0.
    weight_upper: Optional[float] = None


@dataclass
class ProblemConfig:
    target: list = field(default_factory=_reference_problem_field('target'))
    avoid: list = field(default_factory=_reference_problem_field('avoid'))
    safe_sets: list = field(default_factory=_reference_problem_field('safe_sets'))
    noise_cov: List[float] = field(
        default_factory=_reference_problem_field('noise_cov'))
    input_box: list = field(default_factory=_reference_problem_field('input_box'))
    basis: BasisConfig = field(default_factory=BasisConfig)

    def reach_avoid_spec(self) -> ReachAvoidSpec:
        return ReachAvoidSpec(
            target=Rectangle.from_list(self.target),
            avoid=Rectangle.from_list(self.avoid),
            safe_sets=tuple(Rectangle.from_list(s) for s in self.safe_sets),
            noise_cov=np.diag(np.array(self.noise_cov, dtype=float)),
            input_box=Rectangle.from_list(self.input_box))


@dataclass
class BudgetConfig:
    epsilon: float = 0.1
    beta: float = 0.03
    stage_betas: Optional[List[float]] = None
    joint: bool = False
    bound: str = 'explicit'


@dataclass
class SamplingConfig:
    seed: Optional[int] = None
    state_sampler: str = 'box'
    burn_in: int = DEFAULT_BURN_IN
    thinning: int = DEFAULT_THINNING
    per_stage_domains: bool = True


@dataclass
class ValidationConfig:
    n: int = 1000
    confidence: float = 0.95


@dataclass
class SolverConfig:
    method: str = 'highs'
    tol: float = DEFAULT_TOL


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    methods: List[str] = field(default_factory=lambda: [m.value
                                                        for m in Method])
    budgets: BudgetConfig = field(default_factory=BudgetConfig)
    seeds: List[int] = field(default_factory=lambda: list(range(10)))
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = 'results'

    def to_dict(self):
        return _to_dict(self)


def _to_dict(obj):
    if is_dataclass(obj):
        return {f.name: _to_dict(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, list):
        return [_to_dict(v) for v in obj]
    return obj


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check(condition, path, message):
    if not condition:
        raise ConfigError(path, message)


def _from_dict(cls, data, path):
    _check(isinstance(data, dict), path or '<root>', 'expected an object')
    known = {f.name: f for f in fields(cls)}
    for key in data:
        _check(key in known, '%s.%s' % (path, key) if path else key,
               'unknown field')
    values = {}
    for name, value in data.items():
        field_path = '%s.%s' % (path, name) if path else name
        if is_dataclass(known[name].type):
            values[name] = _from_dict(known[name].type, value, field_path)
        else:
            values[name] = value
    return cls(**values)


def _validate_rectangle(value, path):
    _check(isinstance(value, list) and len(value) == 2 and
           all(isinstance(c, list) and len(c) == 2 and
               all(_is_number(v) for v in c) for c in value),
           path, 'expected [[xlo, ylo], [xhi, yhi]]')
    _check(value[0][0] <= value[1][0] and value[0][1] <= value[1][1],
           path, 'lower corner exceeds upper corner')


def _validate_probability(value, path):
    _check(_is_number(value) and 0. < value < 1., path,
           'expected a number in (0, 1)')


def validate(config: ExperimentConfig):
    problem = config.problem
    for name in ('target', 'avoid', 'input_box'):
        _validate_rectangle(getattr(problem, name), 'problem.' + name)
    _check(isinstance(problem.safe_sets, list) and len(problem.safe_sets),
           'problem.safe_sets', 'expected a nonempty list of rectangles')
    for i, safe in enumerate(problem.safe_sets):
        _validate_rectangle(safe, 'problem.safe_sets[%d]' % i)
    _check(isinstance(problem.noise_cov, list) and
           len(problem.noise_cov) == 2 and
           all(_is_number(v) and v > 0 for v in problem.noise_cov),
           'problem.noise_cov', 'expected two positive variances')
    dims = problem.basis.dims
    _check(isinstance(dims, list) and
           len(dims) == len(problem.safe_sets) and
           all(isinstance(d, int) and not isinstance(d, bool) and d >= 1
               for d in dims),
           'problem.basis.dims', 'expected one positive integer per safe set')
    low_high = problem.basis.variance_range
    _check(isinstance(low_high, list) and len(low_high) == 2 and
           all(_is_number(v) for v in low_high) and
           0 <= low_high[0] < low_high[1],
           'problem.basis.variance_range', 'expected [low, high], '
           '0 <= low < high')
    bounds = (problem.basis.weight_lower, problem.basis.weight_upper)
    for name, value in zip(('weight_lower', 'weight_upper'), bounds):
        _check(value is None or _is_number(value), 'problem.basis.' + name,
               'expected a number or null')
    _check(None in bounds or bounds[0] <= bounds[1],
           'problem.basis.weight_upper', 'must not be below weight_lower')

    _check(isinstance(config.methods, list) and len(config.methods),
           'methods', 'expected a nonempty list')
    for i, method in enumerate(config.methods):
        _check(method in [m.value for m in Method], 'methods[%d]' % i,
               'unknown method %r' % (method,))

    budgets = config.budgets
    _validate_probability(budgets.epsilon, 'budgets.epsilon')
    _validate_probability(budgets.beta, 'budgets.beta')
    if budgets.stage_betas is not None:
        _check(isinstance(budgets.stage_betas, list) and
               len(budgets.stage_betas) == len(dims),
               'budgets.stage_betas', 'expected one value per stage')
        for i, b in enumerate(budgets.stage_betas):
            _validate_probability(b, 'budgets.stage_betas[%d]' % i)
        _check(not budgets.joint, 'budgets.joint',
               'cannot be combined with stage_betas')
    _check(isinstance(budgets.joint, bool), 'budgets.joint',
           'expected a boolean')
    _check(budgets.bound in ('exact', 'explicit'), 'budgets.bound',
           'expected "exact" or "explicit"')

    _check(isinstance(config.seeds, list) and len(config.seeds) and
           all(isinstance(s, int) and not isinstance(s, bool) and s >= 0
               for s in config.seeds),
           'seeds', 'expected a nonempty list of nonnegative integers')

    sampling = config.sampling
    _check(sampling.seed is None or
           (isinstance(sampling.seed, int) and sampling.seed >= 0),
           'sampling.seed', 'expected a nonnegative integer')
    _check(sampling.state_sampler in ('box', 'hit_and_run'),
           'sampling.state_sampler', 'expected "box" or "hit_and_run"')
    _check(isinstance(sampling.burn_in, int) and sampling.burn_in >= 0,
           'sampling.burn_in', 'expected a nonnegative integer')
    _check(isinstance(sampling.thinning, int) and sampling.thinning >= 1,
           'sampling.thinning', 'expected a positive integer')
    _check(isinstance(sampling.per_stage_domains, bool),
           'sampling.per_stage_domains', 'expected true or false')

    _check(isinstance(config.validation.n, int) and config.validation.n >= 1,
           'validation.n', 'expected a positive integer')
    _validate_probability(config.validation.confidence,
                          'validation.confidence')
    _check(config.solver.method in BACKENDS, 'solver.method',
           'expected one of %s' % sorted(BACKENDS))
    _check(_is_number(config.solver.tol) and config.solver.tol > 0,
           'solver.tol', 'expected a positive number')
    _check(isinstance(config.output_dir, str), 'output_dir',
           'expected a string')

    try:
        problem.reach_avoid_spec()
    except ValueError as e:
        raise ConfigError('problem', str(e))
    return config


def config_from_dict(data) -> ExperimentConfig:
    return validate(_from_dict(ExperimentConfig, data, ''))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError('<file>', 'cannot read %s: %s' % (path, e))
    except json.JSONDecodeError as e:
        raise ConfigError('<file>', 'invalid JSON: %s' % e)
    config = config_from_dict(data)
    logger.info('Loaded configuration from %s' % path)
    return config
