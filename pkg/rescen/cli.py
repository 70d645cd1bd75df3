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

"""Command line front end.

    rescen bounds    --epsilon 0.1 --beta 0.01 --dim 10
    rescen allocate  --epsilon 0.1 --beta 0.03 --dims 200,150,100
    rescen solve-lp  problem.txt
    rescen run       --config exp.json --method recursive_resampled --seed 3
    rescen compare   --config exp.json
    rescen validate  --run results/runs/standard_seed3.json --n 1000
    rescen grid      --run results/runs/standard_seed3.json --stage 1

Exit codes: 0 success, 1 runtime failure, 2 configuration error."""

import argparse
import json
import logging
import os
import sys
import time
import numpy as np
import pandas as pd
logger = logging.getLogger(__name__)

from .budget_allocation import Method, AllocationProblem, allocate, \
    allocate_joint, uniform_allocation, predict_complexity
from .config import ExperimentConfig, load_config, validate, \
    config_from_dict
from .errors import ConfigError
from .lp_solver import LpStandardForm, solve_lp, BACKENDS
from .reachavoid_adp import RbfBasis, ValueWeights, Rectangle, \
    build_program, sampling_domain, stage_sampling_domains, run_adp, \
    level_set_grid
from .sample_bounds import BoundQuery, exact_sample_size, \
    explicit_sample_size
from .sampling import RngHandle, BASIS_STREAM
from .scenario_engine import ScenarioSolution, SolverOptions, \
    default_allocation
from .utils import json_default
from .validation import empirical_violation, validation_rng

TABLE_COLUMNS = ['method', 'seed', 'stage', 'epsilon', 'epsilon_hat',
                 'epsilon_hat_stage', 'confidence', 'd', 'constraints',
                 'solver_seconds', 'sampling_seconds', 'status']


def _dump(data, path=None):
    text = json.dumps(data, indent=2, default=json_default)
    if path is None:
        print(text)
    else:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text + '\n')


def _int_list(text):
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma separated integers')


def _float_list(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma separated numbers')


def _str_list(text):
    return [v.strip() for v in text.split(',') if v.strip()]


def cmd_bounds(args):
    q = BoundQuery(args.epsilon, args.beta, args.dim)
    result = {'epsilon': q.epsilon, 'beta': q.beta, 'dim': q.dim}
    if args.bound in ('exact', 'both'):
        result['exact'] = exact_sample_size(q, args.max_samples).to_dict()
    if args.bound in ('explicit', 'both'):
        result['explicit'] = explicit_sample_size(q).to_dict()
    _dump(result)


def cmd_allocate(args):
    p = AllocationProblem(args.epsilon, args.beta, tuple(args.dims),
                          None if args.betas is None else tuple(args.betas))
    if args.joint or p.beta_fixed is not None:
        allocation = allocate(p, args.bound)
    else:
        allocation = default_allocation(p.epsilon_total, p.beta_total,
                                        p.dims, args.bound)
    baseline = uniform_allocation(p, args.bound)
    _dump({'allocation': allocation.to_dict(),
           'uniform': baseline.to_dict(),
           'predicted_complexity': {
               m.value: predict_complexity(m, p.dims, allocation.stage_samples)
               for m in (Method.MULTISTAGE, Method.RECURSIVE_RESAMPLED)}})


def cmd_solve_lp(args):
    if args.file == '-':
        text = sys.stdin.read()
    else:
        with open(args.file, encoding='utf-8') as f:
            text = f.read()
    solution = solve_lp(LpStandardForm.from_text(text), tol=args.tol,
                        method=args.method)
    _dump(solution.to_dict())


def apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, 'methods', None):
        config.methods = args.methods
    if getattr(args, 'seeds', None):
        config.seeds = args.seeds
    if getattr(args, 'seed', None) is not None:
        config.sampling.seed = args.seed
    if config.sampling.seed is not None:
        config.seeds = [config.sampling.seed]
    if getattr(args, 'epsilon', None) is not None:
        config.budgets.epsilon = args.epsilon
    if getattr(args, 'beta', None) is not None:
        config.budgets.beta = args.beta
    if getattr(args, 'output_dir', None):
        config.output_dir = args.output_dir
    return validate(config)


def config_allocation(config: ExperimentConfig):
    """Stage budgets of the allocated methods, as configured."""
    budgets = config.budgets
    dims = tuple(config.problem.basis.dims)
    if budgets.stage_betas is not None:
        return allocate(AllocationProblem(budgets.epsilon, budgets.beta, dims,
                                          tuple(budgets.stage_betas)),
                        budgets.bound)
    if budgets.joint:
        return allocate_joint(AllocationProblem(budgets.epsilon, budgets.beta,
                                                dims), budgets.bound)
    return default_allocation(budgets.epsilon, budgets.beta, dims,
                              budgets.bound)


def config_domains(config: ExperimentConfig, spec):
    """Shared sampling domain and the per-stage ones, as configured."""
    sampling = config.sampling
    domain = sampling_domain(spec, sampling.state_sampler, sampling.burn_in,
                             sampling.thinning)
    if not sampling.per_stage_domains:
        return domain, ()
    return domain, stage_sampling_domains(spec, sampling.state_sampler,
                                          sampling.burn_in,
                                          sampling.thinning)


def run_experiment(config: ExperimentConfig, method, seed, allocation=None):
    """One (method, seed) run: basis, training, validation."""
    method = Method(method)
    spec = config.problem.reach_avoid_spec()
    basis = RbfBasis.sample(spec, config.problem.basis.dims,
                            RngHandle(seed, BASIS_STREAM),
                            tuple(config.problem.basis.variance_range))
    domain, stage_domains = config_domains(config, spec)
    if method.allocated and allocation is None:
        allocation = config_allocation(config)
    weights, solution, report = run_adp(
        spec, basis, method, config.budgets.epsilon, config.budgets.beta,
        allocation=allocation if method.allocated else None, seed=seed,
        n_validation=config.validation.n, bound='exact',
        solver=SolverOptions(config.solver.method, config.solver.tol),
        domain=domain, confidence=config.validation.confidence,
        weight_lower=config.problem.basis.weight_lower,
        weight_upper=config.problem.basis.weight_upper,
        stage_domains=stage_domains)
    return {'method': method.value, 'seed': seed,
            'config': config.to_dict(), 'basis': basis.to_dict(),
            'weights': weights.to_dict(), 'solution': solution.to_dict(),
            'validation': report.to_dict()}


def _run_rows(run):
    solution = ScenarioSolution.from_dict(run['solution'])
    report = run['validation']
    certificate = solution.certificate
    wall = solution.wall_times
    M = solution.M
    rows = [{'method': run['method'], 'seed': run['seed'], 'stage': 'overall',
             'epsilon': certificate.epsilon_total,
             'epsilon_hat': report['epsilon_hat_overall'],
             'epsilon_hat_stage': np.nan,
             'confidence': 1. - certificate.beta_total,
             'd': sum(solution.stage_dims),
             'constraints': int(sum(solution.constraint_counts)),
             'solver_seconds': wall['solver'],
             'sampling_seconds': wall['sampling'], 'status': 'ok'}]
    per_stage = certificate.per_stage
    if len(per_stage) == M:
        stage_constraints = [level.samples for level in per_stage]
    else:
        stage_constraints = [per_stage[0].samples] * M
    stage_solver = wall['stage_solver'] if len(wall['stage_solver']) == M \
        else [np.nan] * M
    stage_sampling = wall['stage_sampling'] \
        if len(wall['stage_sampling']) == M else [np.nan] * M
    stage_measure = report.get('epsilon_hat_stage_measure') or \
        report['epsilon_hat_per_stage']
    for i in range(M):
        level = per_stage[i] if len(per_stage) == M else None
        rows.append({
            'method': run['method'], 'seed': run['seed'], 'stage': str(i + 1),
            'epsilon': np.nan if level is None else level.epsilon,
            'epsilon_hat': report['epsilon_hat_per_stage'][i],
            'epsilon_hat_stage': stage_measure[i],
            'confidence': np.nan if level is None else 1. - level.beta,
            'd': solution.stage_dims[i],
            'constraints': int(stage_constraints[i]),
            'solver_seconds': stage_solver[i],
            'sampling_seconds': stage_sampling[i], 'status': 'ok'})
    return rows


def run_compare(config: ExperimentConfig, output_dir=None):
    """Every configured method on every seed. Writes the per-run table,
    its seed average, per-run JSON and a summary; returns
    (table, aggregate, summary)."""
    output_dir = config.output_dir if output_dir is None else output_dir
    runs_dir = os.path.join(output_dir, 'runs')
    os.makedirs(runs_dir, exist_ok=True)
    allocation = None
    if any(Method(m).allocated for m in config.methods):
        allocation = config_allocation(config)

    rows, failures = [], []
    for method in config.methods:
        for seed in config.seeds:
            start = time.perf_counter()
            try:
                run = run_experiment(config, method, seed, allocation)
            except Exception as e:
                logger.warning('Run %s, seed %d failed: %s' %
                               (method, seed, e))
                failures.append({'method': method, 'seed': seed,
                                 'error': '%s: %s' % (type(e).__name__, e)})
                rows.append(dict({c: np.nan for c in TABLE_COLUMNS},
                                 method=method, seed=seed, stage='overall',
                                 status='failed: %s' % type(e).__name__))
                continue
            _dump(run, os.path.join(runs_dir, '%s_seed%d.json' %
                                    (method, seed)))
            rows.extend(_run_rows(run))
            logger.info('Run %s, seed %d done in %.2f s' %
                        (method, seed, time.perf_counter() - start))

    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    ok = table[table.status == 'ok']
    numeric = ['epsilon', 'epsilon_hat', 'epsilon_hat_stage', 'confidence',
               'd', 'constraints', 'solver_seconds', 'sampling_seconds']
    aggregate = ok.groupby(['method', 'stage'], sort=False)[numeric].mean()
    aggregate['runs'] = ok.groupby(['method', 'stage'], sort=False).size()
    aggregate = aggregate.reset_index()

    table.to_csv(os.path.join(output_dir, 'comparison.csv'), index=False)
    aggregate.to_csv(os.path.join(output_dir, 'comparison_mean.csv'),
                     index=False)
    summary = {'n_runs': len(config.methods) * len(config.seeds),
               'n_failed': len(failures), 'failures': failures,
               'config': config.to_dict(),
               'allocation': None if allocation is None
               else allocation.to_dict(),
               'aggregate': aggregate.to_dict(orient='records')}
    _dump(summary, os.path.join(output_dir, 'summary.json'))
    return table, aggregate, summary


def cmd_compare(args):
    config = apply_overrides(load_config(args.config), args)
    table, aggregate, summary = run_compare(config)
    print(aggregate.to_string(index=False))
    if summary['n_failed'] == summary['n_runs']:
        logger.error('All %d runs failed.' % summary['n_runs'])
        return 1
    return 0


def cmd_run(args):
    config = ExperimentConfig() if args.config is None \
        else load_config(args.config)
    config = apply_overrides(config, args)
    run = run_experiment(config, args.method, config.seeds[0])
    if args.output is None:
        _dump(run)
    else:
        _dump(run, args.output)
        logger.info('Wrote %s' % args.output)


def _load_run(path):
    with open(path, encoding='utf-8') as f:
        run = json.load(f)
    config = config_from_dict(run['config'])
    return run, config


def cmd_validate(args):
    run, config = _load_run(args.run)
    spec = config.problem.reach_avoid_spec()
    domain, stage_domains = config_domains(config, spec)
    program = build_program(spec, RbfBasis.from_dict(run['basis']), domain,
                            config.problem.basis.weight_lower,
                            config.problem.basis.weight_upper,
                            stage_domains)
    solution = ScenarioSolution.from_dict(run['solution'])
    seed = run['seed'] if args.seed is None else args.seed
    report = empirical_violation(solution, program, n=args.n,
                                 rng=validation_rng(seed),
                                 conf=args.confidence)
    _dump(report.to_dict())


def cmd_grid(args):
    if len(args.bounds) != 4:
        raise ValueError('--bounds needs xlo,ylo,xhi,yhi.')
    run, config = _load_run(args.run)
    grid = level_set_grid(ValueWeights.from_dict(run['weights']),
                          RbfBasis.from_dict(run['basis']), args.stage,
                          Rectangle(tuple(args.bounds[:2]),
                                    tuple(args.bounds[2:])),
                          args.resolution)
    if args.output is None:
        grid.to_csv(sys.stdout)
    else:
        grid.to_csv(args.output)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='rescen',
        description='Scenario approximation of robust convex programs.')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for info, -vv for debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('bounds', help='sample size bounds')
    p.add_argument('--epsilon', type=float, required=True)
    p.add_argument('--beta', type=float, required=True)
    p.add_argument('--dim', type=int, required=True)
    p.add_argument('--bound', choices=['exact', 'explicit', 'both'],
                   default='both')
    p.add_argument('--max-samples', type=int, default=10**8)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser('allocate', help='stage-wise budget allocation')
    p.add_argument('--epsilon', type=float, required=True)
    p.add_argument('--beta', type=float, required=True)
    p.add_argument('--dims', type=_int_list, required=True)
    p.add_argument('--betas', type=_float_list, default=None,
                   help='fixed stage confidences')
    p.add_argument('--joint', action='store_true',
                   help='optimise confidences jointly')
    p.add_argument('--bound', choices=['exact', 'explicit'],
                   default='explicit')
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser('solve-lp', help='solve a dense LP in text format')
    p.add_argument('file', help='"n m", cost row, m rows "a_1 ... a_n b"; '
                   '- for stdin')
    p.add_argument('--method', choices=sorted(BACKENDS), default='highs')
    p.add_argument('--tol', type=float, default=1e-8)
    p.set_defaults(func=cmd_solve_lp)

    for name, func in (('run', cmd_run), ('compare', cmd_compare)):
        p = sub.add_parser(name, help='single experiment' if name == 'run'
                           else 'compare methods over seeds')
        p.add_argument('--config', required=name == 'compare')
        p.add_argument('--seed', type=int, default=None)
        p.add_argument('--epsilon', type=float, default=None)
        p.add_argument('--beta', type=float, default=None)
        p.add_argument('--output-dir', default=None)
        if name == 'run':
            p.add_argument('--method', choices=[m.value for m in Method],
                           required=True)
            p.add_argument('--output', default=None)
        else:
            p.add_argument('--methods', type=_str_list, default=None)
            p.add_argument('--seeds', type=_int_list, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser('validate', help='empirical violation of a run')
    p.add_argument('--run', '--solution', dest='run', required=True,
                   help='run JSON file')
    p.add_argument('--n', type=int, default=1000)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--confidence', type=float, default=0.95)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('grid', help='level-set grid of a value function')
    p.add_argument('--run', required=True, help='run JSON file')
    p.add_argument('--stage', type=int, default=1)
    p.add_argument('--bounds', type=_float_list, default=[-1., -1., 1., 1.],
                   help='xlo,ylo,xhi,yhi')
    p.add_argument('--resolution', type=int, default=101)
    p.add_argument('--output', default=None)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][
            min(args.verbose, 2)],
        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        return args.func(args) or 0
    except ConfigError as e:
        print('configuration error: %s' % e, file=sys.stderr)
        return 2
    except Exception as e:
        logger.debug('Failure', exc_info=True)
        print('error: %s: %s' % (type(e).__name__, e), file=sys.stderr)
        return 1
