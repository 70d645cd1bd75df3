import unittest
import os
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__),
                                                '..')))

from rescen.budget_allocation import predict_complexity
from rescen.cli import run_compare
from rescen.config import load_config

CONFIG = os.path.join(os.path.dirname(__file__), '..', 'configs',
                      'desk_scale.json')


@unittest.skipUnless(os.environ.get('RESCEN_SLOW'),
                     'set RESCEN_SLOW=1 to run the desk-scale experiment')
class DeskScaleTest(unittest.TestCase):

    def test_violation_and_ordering(self):
        config = load_config(CONFIG)
        with tempfile.TemporaryDirectory() as directory:
            table, aggregate, summary = run_compare(config, directory)
        self.assertEqual(summary['n_failed'], 0)

        epsilon, beta = config.budgets.epsilon, config.budgets.beta
        overall = table[table.stage == 'overall']
        for method, runs in overall.groupby('method'):
            print(method, runs.epsilon_hat.values)
            R = len(runs)
            self.assertLessEqual((runs.epsilon_hat > epsilon).mean(),
                                 beta + 3 * np.sqrt(beta * (1 - beta) / R))

        solver = overall.pivot(index='seed', columns='method',
                               values='solver_seconds')
        print(solver)
        self.assertGreaterEqual(
            (solver.recursive_shared < solver.standard).sum(), 8)
        self.assertGreaterEqual(
            (solver.recursive_resampled < solver.multistage).sum(), 8)

        allocation = summary['allocation']['stage_samples']
        standard_samples = overall[overall.method == 'standard'] \
            .constraints.iloc[0] // 3
        dims = config.problem.basis.dims
        self.assertLess(
            predict_complexity('recursive_shared', dims,
                               [standard_samples]),
            predict_complexity('standard', dims, [standard_samples]))
        self.assertLess(
            predict_complexity('recursive_resampled', dims, allocation),
            predict_complexity('multistage', dims, allocation))


if __name__ == '__main__':
    unittest.main()
