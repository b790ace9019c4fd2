"""
Tests for the mean-field module: induced load, reset-chain laws and the fixed-point iteration.
"""
import os
import tempfile
import unittest

import numpy as np

from astra_aoi_tools.calibration import success_prob
from astra_aoi_tools.mdp_solver import build_model, relative_value_iteration
from astra_aoi_tools.mean_field import (
    Equilibrium,
    equilibrium_metrics,
    induced_load,
    occupation_load,
    reset_chain_distribution,
    save_equilibrium,
    solve_equilibrium,
    stationary_distribution,
)
from astra_aoi_tools.tests.fixtures import SMALL_POPULATION, make_table
from astra_aoi_tools.utils.helpers import read_commented_csv
from astra_aoi_tools.utils.models import IDLE, Action, FixedPointConfig, PopulationConfig

A11, A21 = Action(d=1, q=1), Action(d=2, q=1)
DEFAULT_POPULATION = PopulationConfig()


class TestInducedLoad(unittest.TestCase):
    """Load produced by a policy and a population distribution."""

    def test_all_transmit_once(self):
        self.assertAlmostEqual(induced_load([1.0, 0.0, 0.0], [A11] * 3, DEFAULT_POPULATION), 29.0 / 3.0)

    def test_idle_population(self):
        self.assertEqual(induced_load([0.2, 0.3, 0.5], [IDLE] * 3, DEFAULT_POPULATION), 0.0)

    def test_double_replicas(self):
        self.assertAlmostEqual(induced_load([0.1, 0.9], [A21, A21], DEFAULT_POPULATION), 29.0 * 2.0 / 3.0)

    def test_randomized_policy_matrix(self):
        probs = np.array([[1.0, 0.0], [0.5, 0.5]])
        load = induced_load([0.5, 0.5], probs, DEFAULT_POPULATION, actions=[IDLE, A11])
        self.assertAlmostEqual(load, 29.0 / 3.0 * 0.25)

    def test_randomized_policy_needs_actions(self):
        with self.assertRaises(ValueError):
            induced_load([1.0], np.array([[1.0]]), DEFAULT_POPULATION)

    def test_length_mismatch(self):
        with self.assertRaises(ValueError):
            induced_load([0.5, 0.5], [A11], DEFAULT_POPULATION)

    def test_occupation_load_matches_deterministic_policy(self):
        m = np.array([0.4, 0.35, 0.25])
        policy = [IDLE, A11, A21]
        actions = [IDLE, A11, A21]
        x = np.zeros((3, 3))
        for s, action in enumerate(policy):
            x[s, actions.index(action)] = m[s]
        self.assertAlmostEqual(occupation_load(x, actions, DEFAULT_POPULATION),
                               induced_load(m, policy, DEFAULT_POPULATION))


class TestResetChain(unittest.TestCase):
    """Stationary laws of the truncated reset chain."""

    def test_constant_success(self):
        law = reset_chain_distribution([0.5, 0.5, 0.5])
        np.testing.assert_allclose(law.m, [0.5, 0.25, 0.25])
        self.assertFalse(law.degenerate)

    def test_certain_first_success(self):
        law = reset_chain_distribution([1.0, 0.0, 0.0])
        np.testing.assert_allclose(law.m, [1.0, 0.0, 0.0])
        self.assertFalse(law.degenerate)

    def test_absorbing_truncation(self):
        law = reset_chain_distribution([0.0, 0.0, 0.0])
        np.testing.assert_allclose(law.m, [0.0, 0.0, 1.0])
        self.assertTrue(law.degenerate)

    def test_threshold_policy(self):
        law = reset_chain_distribution([0.0, 0.0, 1.0])
        np.testing.assert_allclose(law.m, [1 / 3, 1 / 3, 1 / 3])

    def test_sums_to_one(self):
        p = np.random.default_rng(4).uniform(0.0, 1.0, 50)
        self.assertAlmostEqual(reset_chain_distribution(p).m.sum(), 1.0)

    def test_too_short(self):
        with self.assertRaises(ValueError):
            reset_chain_distribution([0.5])

    def test_stationary_distribution_uses_table(self):
        table = make_table()
        law = stationary_distribution([A11] * 40, 5.0, table, 40)
        p = success_prob(table, A11, 5.0)
        self.assertAlmostEqual(law.m[0], p, places=9)
        self.assertAlmostEqual(law.m[1], p * (1 - p), places=9)
        with self.assertRaises(ValueError):
            stationary_distribution([A11] * 39, 5.0, table, 40)

    def test_metrics(self):
        eq = Equilibrium(eta=0.0, policy=[A11, A11, IDLE], m=np.array([0.5, 0.25, 0.25]), lambda_star=0.0,
                         rho=0.0, avg_aoi=0.0, avg_energy=0.0, converged=True, outer_iters=1,
                         load_residual=0.0, dist_residual=0.0)
        avg_aoi, avg_energy = equilibrium_metrics(eq)
        self.assertAlmostEqual(avg_aoi, 1.75)
        self.assertAlmostEqual(avg_energy, 0.75)
        self.assertEqual(eq.switch_points(), [3])
        self.assertEqual(eq.delta_max, 3)


class TestSolveEquilibrium(unittest.TestCase):
    """The damped fixed-point iteration on the synthetic table."""

    @classmethod
    def setUpClass(cls):
        cls.table = make_table()
        cls.fp = FixedPointConfig()
        cls.free = solve_equilibrium(0.0, cls.table, SMALL_POPULATION, cls.fp, 40)

    def test_free_energy_equilibrium(self):
        eq = self.free
        self.assertTrue(eq.converged)
        self.assertTrue(all(a == A11 for a in eq.policy))
        self.assertAlmostEqual(eq.lambda_star, 4.5, delta=1e-3)
        self.assertAlmostEqual(eq.avg_energy, 1.0)
        p = success_prob(self.table, A11, 4.5)
        self.assertAlmostEqual(eq.avg_aoi, 1.0 / p, delta=1e-2)
        self.assertLessEqual(eq.load_residual, self.fp.tol_load)
        self.assertLessEqual(eq.dist_residual, self.fp.tol_dist)
        self.assertAlmostEqual(eq.m.sum(), 1.0)

    def test_reported_policy_is_best_response(self):
        model = build_model(self.table, self.free.lambda_star, 0.0, 40)
        self.assertEqual(relative_value_iteration(model).policy, self.free.policy)

    def test_load_consistency(self):
        eq = self.free
        self.assertAlmostEqual(eq.lambda_star, induced_load(eq.m, eq.policy, SMALL_POPULATION), delta=1e-3)

    def test_prohibitive_energy_price(self):
        eq = solve_equilibrium(1e6, self.table, SMALL_POPULATION, self.fp, 40)
        self.assertTrue(eq.converged)
        self.assertTrue(all(a == IDLE for a in eq.policy))
        self.assertEqual(eq.lambda_star, 0.0)
        self.assertEqual(eq.avg_energy, 0.0)
        self.assertAlmostEqual(eq.avg_aoi, 40.0, delta=1e-3)
        self.assertTrue(eq.degenerate)

    def test_iteration_cap_returns_best_iterate(self):
        fp = FixedPointConfig(max_outer_iters=2)
        eq = solve_equilibrium(0.0, self.table, SMALL_POPULATION, fp, 40)
        self.assertFalse(eq.converged)
        self.assertEqual(eq.outer_iters, 2)
        self.assertEqual(len(eq.residual_trace), 2)

    def test_rejects_bad_initial_distribution(self):
        with self.assertRaises(ValueError):
            solve_equilibrium(0.0, self.table, SMALL_POPULATION, self.fp, 40, m_init=np.ones(40))
        with self.assertRaises(ValueError):
            solve_equilibrium(0.0, self.table, SMALL_POPULATION, self.fp, 40, m_init=np.ones(10) / 10)

    def test_save_equilibrium(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "eq.csv")
            save_equilibrium(self.free, path, comments=[('seed', '1')])
            comments, header, rows = read_commented_csv(path)
        self.assertEqual(header, ['delta', 'd', 'q', 'm'])
        self.assertEqual(len(rows), 40)
        self.assertEqual(comments['converged'], 'true')
        self.assertAlmostEqual(float(comments['lambda_star']), self.free.lambda_star)
        self.assertAlmostEqual(sum(float(r[3]) for r in rows), 1.0)


if __name__ == '__main__':
    unittest.main()
