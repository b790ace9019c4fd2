"""
Tests for the experiments module: sweeps, comparisons, closed-loop simulation and verification.
"""
import math
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from astra_aoi_tools.experiments import (
    PARETO_HEADER,
    SweepRecord,
    check_sweep_monotone,
    closed_loop_simulate,
    compare_with_randomized,
    eta_grid,
    random_model,
    run_verification,
    sweep_eta,
    write_pareto_csv,
)
from astra_aoi_tools.mean_field import Equilibrium
from astra_aoi_tools.tests.fixtures import SMALL_POPULATION, make_table
from astra_aoi_tools.utils.errors import ConvergenceError, LinearProgramError
from astra_aoi_tools.utils.helpers import read_commented_csv, spawn_rng
from astra_aoi_tools.utils.models import IDLE, Action, FixedPointConfig, PopulationConfig, SystemConfig

A11 = Action(d=1, q=1)


def fake_equilibrium(eta=1.0, converged=True, avg_aoi=2.0, avg_energy=0.5):
    return Equilibrium(eta=eta, policy=[IDLE, A11, A11], m=np.array([0.5, 0.3, 0.2]), lambda_star=1.0, rho=3.0,
                       avg_aoi=avg_aoi, avg_energy=avg_energy, converged=converged, outer_iters=10,
                       load_residual=0.0, dist_residual=0.0)


def record(eta, energy, converged=True):
    return SweepRecord(eta=eta, lambda_star=1.0, avg_aoi=3.0, avg_energy=energy, rho=4.0, converged=converged)


class TestSweep(unittest.TestCase):
    """Energy-multiplier sweeps."""

    @classmethod
    def setUpClass(cls):
        cls.table = make_table()
        cls.records = sweep_eta([1e6, 0.0], cls.table, SMALL_POPULATION, FixedPointConfig(), 40)

    def test_eta_grid(self):
        grid = eta_grid(1e-3, 1e2, 6)
        self.assertEqual(len(grid), 6)
        self.assertAlmostEqual(grid[0], 1e-3)
        self.assertAlmostEqual(grid[-1], 1e2)
        self.assertAlmostEqual(grid[1] / grid[0], 10.0)
        self.assertEqual(eta_grid(0.5, 10.0, 1), [0.5])

    def test_extreme_multipliers(self):
        low, high = self.records
        self.assertEqual((low.eta, high.eta), (0.0, 1e6))
        self.assertTrue(low.converged and high.converged)
        self.assertAlmostEqual(low.avg_energy, 1.0)
        self.assertEqual(high.avg_energy, 0.0)
        self.assertEqual(high.policy_switch_points, [])
        self.assertEqual(low.attempts, 1)
        self.assertEqual(check_sweep_monotone(self.records), [])

    def test_rejects_bad_grids(self):
        for grid in ([], [-1.0, 1.0], [1.0, 1.0]):
            with self.assertRaises(ValueError):
                sweep_eta(grid, self.table, SMALL_POPULATION, FixedPointConfig(), 40)

    def test_compare_with_randomized(self):
        comparisons = compare_with_randomized(self.records, self.table, SMALL_POPULATION)
        self.assertEqual(len(comparisons), 2)
        idle = comparisons[1]
        self.assertTrue(math.isinf(idle.randomized_aoi))
        self.assertTrue(idle.dominates)
        self.assertAlmostEqual(comparisons[0].randomized_aoi, comparisons[0].astra_aoi, delta=1e-2)

    def test_pareto_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "pareto.csv")
            write_pareto_csv(self.records, path, comments=[('seed', '2')])
            comments, header, rows = read_commented_csv(path)
        self.assertEqual(header, PARETO_HEADER)
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[1][0], '1000000.0')
        self.assertEqual(rows[0][-1], 'true')
        self.assertEqual(comments['seed'], '2')


class TestIntermediateSweep(unittest.TestCase):
    """Staircase ordering and baseline dominance away from the extreme multipliers."""

    @classmethod
    def setUpClass(cls):
        cls.table = make_table()
        cls.pop = PopulationConfig()
        cls.high, cls.low = sweep_eta([eta_grid(1e-3, 1e2, 20)[15], 100.0], cls.table, cls.pop, FixedPointConfig(),
                                      SystemConfig().delta_max)

    def test_points_converge_below_unit_energy(self):
        for rec in (self.high, self.low):
            self.assertTrue(rec.converged, rec)
            self.assertGreater(rec.avg_energy, 0.0)
            self.assertLessEqual(rec.avg_energy, 1.0)
        self.assertLess(self.low.avg_energy, self.high.avg_energy)

    def test_energy_nondecreasing_in_age(self):
        for rec in (self.high, self.low):
            energies = [a.energy for a in rec.policy]
            self.assertEqual(energies, sorted(energies), rec.policy_switch_points)

    def test_lower_budget_switches_later(self):
        self.assertTrue(self.high.policy_switch_points and self.low.policy_switch_points)
        self.assertGreater(self.low.policy_switch_points[0], self.high.policy_switch_points[0])

    def test_strictly_beats_randomized_mix(self):
        comparisons = compare_with_randomized([self.high, self.low], self.table, self.pop, max_energy=1.0)
        self.assertEqual(len(comparisons), 2)
        for comparison in comparisons:
            self.assertTrue(comparison.dominates, comparison)
            self.assertLess(comparison.astra_aoi, comparison.randomized_aoi)


class TestRetries(unittest.TestCase):
    """Re-solving non-converged points with reduced damping."""

    def setUp(self):
        self.table = make_table()
        self.fp = FixedPointConfig(damp_load=0.4, damp_dist=0.6)

    @patch('astra_aoi_tools.experiments.solve_equilibrium')
    def test_retry_halves_damping(self, mock_solve):
        mock_solve.side_effect = [fake_equilibrium(converged=False), fake_equilibrium(converged=True)]
        records = sweep_eta([1.0], self.table, SMALL_POPULATION, self.fp, 3, retries=2)
        self.assertTrue(records[0].converged)
        self.assertEqual(records[0].attempts, 2)
        second_fp = mock_solve.call_args_list[1].args[3]
        self.assertAlmostEqual(second_fp.damp_load, 0.2)
        self.assertAlmostEqual(second_fp.damp_dist, 0.3)

    @patch('astra_aoi_tools.experiments.solve_equilibrium')
    def test_last_attempt_reported(self, mock_solve):
        mock_solve.return_value = fake_equilibrium(converged=False, avg_aoi=7.0)
        records = sweep_eta([1.0], self.table, SMALL_POPULATION, self.fp, 3, retries=1)
        self.assertFalse(records[0].converged)
        self.assertEqual(records[0].attempts, 2)
        self.assertEqual(records[0].avg_aoi, 7.0)
        self.assertEqual(mock_solve.call_count, 2)

    @patch('astra_aoi_tools.experiments.solve_equilibrium')
    def test_no_retries(self, mock_solve):
        mock_solve.return_value = fake_equilibrium(converged=False)
        sweep_eta([1.0], self.table, SMALL_POPULATION, self.fp, 3, retries=0)
        self.assertEqual(mock_solve.call_count, 1)

    @patch('astra_aoi_tools.experiments.solve_equilibrium')
    def test_best_response_failure(self, mock_solve):
        mock_solve.side_effect = ConvergenceError("stuck", residual=1.0, iterations=5)
        records = sweep_eta([1.0], self.table, SMALL_POPULATION, self.fp, 3)
        self.assertFalse(records[0].converged)
        self.assertTrue(math.isnan(records[0].avg_aoi))


class TestMonotoneCheck(unittest.TestCase):
    """Energy monotonicity along the sweep."""

    def test_violation_reported(self):
        violations = check_sweep_monotone([record(0.1, 2.0), record(1.0, 2.5), record(10.0, 1.0)])
        self.assertEqual(len(violations), 1)
        self.assertEqual(violations[0]['eta_high'], 1.0)

    def test_unconverged_records_skipped(self):
        self.assertEqual(check_sweep_monotone([record(0.1, 2.0), record(1.0, 9.0, converged=False),
                                               record(10.0, 1.0)]), [])


class TestClosedLoop(unittest.TestCase):
    """Packet-level simulation of a population following one policy."""

    def test_all_idle_population(self):
        result = closed_loop_simulate([IDLE] * 20, PopulationConfig(N=5, R=3), SystemConfig(), frames=300,
                                      warmup=250)
        self.assertEqual(result.mean_aoi, 20.0)
        self.assertEqual(result.mean_energy, 0.0)
        self.assertEqual(result.mean_load, 0.0)
        self.assertEqual(len(result.per_device_aoi), 5)

    def test_lone_device_always_delivers(self):
        cfg = SystemConfig(N=1, rician_k=None)
        result = closed_loop_simulate([A11] * 10, PopulationConfig(N=1, R=3), cfg, frames=200, warmup=10)
        self.assertEqual(result.mean_aoi, 1.0)
        self.assertEqual(result.mean_energy, 1.0)
        self.assertEqual(result.mean_load, 0.0)

    def test_deterministic(self):
        pop = PopulationConfig(N=6, R=3)
        a = closed_loop_simulate([IDLE, A11, A11, A11], pop, SystemConfig(), frames=120, warmup=20, seed=4)
        b = closed_loop_simulate([IDLE, A11, A11, A11], pop, SystemConfig(), frames=120, warmup=20, seed=4)
        self.assertEqual(a, b)
        self.assertTrue(all(1.0 <= x <= 4.0 for x in a.per_device_aoi))

    def test_prediction_gap_flagged(self):
        cfg = SystemConfig(N=1, rician_k=None)
        prediction = fake_equilibrium(avg_aoi=2.0, avg_energy=1.0)
        result = closed_loop_simulate([A11] * 10, PopulationConfig(N=1, R=3), cfg, frames=50, warmup=5,
                                      prediction=prediction)
        self.assertAlmostEqual(result.aoi_gap, 0.5)
        self.assertAlmostEqual(result.energy_gap, 0.0)
        self.assertTrue(result.flagged)
        self.assertEqual(result.predicted_load, 1.0)

    def test_rejects_bad_warmup(self):
        with self.assertRaises(ValueError):
            closed_loop_simulate([A11] * 5, SMALL_POPULATION, SystemConfig(), frames=10, warmup=10)


class TestVerification(unittest.TestCase):
    """The oracle suite and its random models."""

    def test_random_model(self):
        model = random_model(spawn_rng(1), 10, 4, 1.0)
        self.assertEqual(model.actions[0], IDLE)
        self.assertEqual(len(model.actions), 4)
        self.assertTrue(np.all((model.p[1:] >= 0) & (model.p[1:] <= 1)))

    def test_suite_passes(self):
        report = run_verification(delta_max=8, n_models=5)
        self.assertTrue(report.passed, [c for c in report.checks if not c.passed])
        self.assertEqual([c.name for c in report.checks],
                         ['lp_matches_rvi', 'geometric_average_cost', 'h_nondecreasing', 'threshold_ordered',
                          'dominated_never_selected', 'stationary_closed_form', 'fading_unit_mean'])

    def test_lp_check_at_twenty_states(self):
        report = run_verification(delta_max=20, n_models=3)
        lp = next(c for c in report.checks if c.name == 'lp_matches_rvi')
        self.assertTrue(lp.passed, lp.detail)

    def test_lp_failure_fails_check(self):
        with patch('astra_aoi_tools.experiments.occupation_lp_solve', side_effect=LinearProgramError('stuck')):
            report = run_verification(delta_max=8, n_models=2)
        lp = next(c for c in report.checks if c.name == 'lp_matches_rvi')
        self.assertFalse(lp.passed)
        self.assertIn('LP failures = 25', lp.detail)
        self.assertFalse(report.passed)


if __name__ == '__main__':
    unittest.main()
