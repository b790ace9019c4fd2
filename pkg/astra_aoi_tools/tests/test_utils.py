"""
Tests for the utils package: models, helpers, configuration loading and errors.
"""
import json
import os
import tempfile
import unittest

from pydantic import ValidationError

from astra_aoi_tools.utils import (
    IDLE,
    Action,
    AstraError,
    CalibrationSettings,
    ConfigError,
    ExperimentConfig,
    InvalidActionError,
    SystemConfig,
    UnknownActionError,
    ValidationSettings,
    action_set,
    apply_overrides,
    config_digest,
    file_header,
    load_config,
    parse_action,
    read_commented_csv,
    spawn_rng,
    write_commented_csv,
)


class TestModels(unittest.TestCase):
    """Test cases for the pydantic data models."""

    def test_action_energy_and_order(self):
        self.assertEqual(Action(d=2, q=3).energy, 6)
        self.assertTrue(IDLE.is_idle)
        self.assertEqual(str(Action(d=1, q=2)), "(1,2)")
        self.assertLess(Action(d=1, q=2).sort_key(), Action(d=2, q=1).sort_key())

    def test_action_rejects_half_idle(self):
        with self.assertRaises(ValidationError):
            Action(d=0, q=1)
        with self.assertRaises(ValidationError):
            Action(d=2, q=0)

    def test_action_is_hashable(self):
        self.assertEqual(len({Action(d=1, q=1), Action(d=1, q=1), IDLE}), 2)

    def test_system_config_defaults(self):
        cfg = SystemConfig()
        self.assertEqual((cfg.N, cfg.R, cfg.M), (30, 3, 3))
        self.assertAlmostEqual(cfg.T_s, 1.0 / 3.0)
        self.assertTrue(cfg.fading)
        self.assertFalse(SystemConfig(rician_k=None).fading)

    def test_system_config_rejects_long_packets(self):
        with self.assertRaises(ValidationError):
            SystemConfig(T_p=0.5)

    def test_system_config_rejects_too_many_repetitions(self):
        with self.assertRaises(ValidationError):
            SystemConfig(D=4)

    def test_calibration_grid(self):
        grid = CalibrationSettings().grid()
        self.assertEqual(len(grid), 13)
        self.assertEqual(grid[0], 0.0)
        self.assertEqual(grid[-1], 24.0)

    def test_effective_warmup(self):
        self.assertEqual(ValidationSettings(frames=50_000).effective_warmup(), 5000)
        self.assertEqual(ValidationSettings(frames=2000).effective_warmup(), 500)
        self.assertEqual(ValidationSettings(frames=300).effective_warmup(), 299)
        self.assertEqual(ValidationSettings(frames=300, warmup=10).effective_warmup(), 10)


class TestHelpers(unittest.TestCase):
    """Test cases for the helper functions."""

    def test_action_set(self):
        actions = action_set(3, 3)
        self.assertEqual(len(actions), 10)
        self.assertEqual(actions[0], IDLE)
        energies = [a.energy for a in actions]
        self.assertEqual(energies, sorted(energies))

    def test_parse_action(self):
        self.assertEqual(parse_action("(2,1)"), Action(d=2, q=1))
        self.assertEqual(parse_action("1,3"), Action(d=1, q=3))
        self.assertEqual(parse_action("2x2"), Action(d=2, q=2))
        with self.assertRaises(ValueError):
            parse_action("7")

    def test_config_digest_tracks_phy_fields_only(self):
        base = SystemConfig()
        self.assertEqual(config_digest(base), config_digest(SystemConfig(N=5, delta_max=50)))
        self.assertNotEqual(config_digest(base), config_digest(SystemConfig(sigma2=1.0)))
        self.assertEqual(len(config_digest(base)), 16)

    def test_spawn_rng_is_keyed(self):
        a = spawn_rng(7, 1, 2).random(5)
        b = spawn_rng(7, 1, 2).random(5)
        c = spawn_rng(7, 2, 1).random(5)
        self.assertEqual(a.tolist(), b.tolist())
        self.assertNotEqual(a.tolist(), c.tolist())

    def test_commented_csv_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "nested", "out.csv")
            write_commented_csv(path, file_header(seed=3, cfg_digest="abc", eta=0.5), ["x", "y"], [[1, 2], [3, 4]])
            comments, header, rows = read_commented_csv(path)
        self.assertEqual(comments["seed"], "3")
        self.assertEqual(comments["cfg_digest"], "abc")
        self.assertEqual(comments["eta"], "0.5")
        self.assertTrue(comments["tool"].startswith("astra-aoi-tools"))
        self.assertEqual(header, ["x", "y"])
        self.assertEqual(rows, [["1", "2"], ["3", "4"]])


class TestConfig(unittest.TestCase):
    """Test cases for configuration loading and overrides."""

    def test_defaults_without_file(self):
        self.assertEqual(load_config(), ExperimentConfig())

    def test_partial_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "cfg.json")
            with open(path, "w") as fh:
                json.dump({"seed": 11, "system": {"sigma2": 1.0}}, fh)
            config = load_config(path)
        self.assertEqual(config.seed, 11)
        self.assertEqual(config.system.sigma2, 1.0)
        self.assertEqual(config.system.N, 30)

    def test_empty_file_is_valid(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "cfg.json")
            open(path, "w").close()
            self.assertEqual(load_config(path), ExperimentConfig())

    def test_bad_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            broken = os.path.join(tmp, "broken.json")
            with open(broken, "w") as fh:
                fh.write("{not json")
            invalid = os.path.join(tmp, "invalid.json")
            with open(invalid, "w") as fh:
                json.dump({"system": {"R": 0}}, fh)
            for path in (broken, invalid, os.path.join(tmp, "missing.json")):
                with self.assertRaises(ConfigError):
                    load_config(path)

    def test_overrides(self):
        config = apply_overrides(ExperimentConfig(), {"seed": 3, "system.sigma2": 1.0, "sweep.eta_points": None})
        self.assertEqual(config.seed, 3)
        self.assertEqual(config.system.sigma2, 1.0)
        self.assertEqual(config.sweep.eta_points, 20)

    def test_override_errors(self):
        with self.assertRaises(ConfigError):
            apply_overrides(ExperimentConfig(), {"system.nope": 1})
        with self.assertRaises(ConfigError):
            apply_overrides(ExperimentConfig(), {"system.T_p": 0.9})


class TestErrors(unittest.TestCase):
    """The error hierarchy keeps builtin compatibility."""

    def test_hierarchy(self):
        self.assertTrue(issubclass(InvalidActionError, ValueError))
        self.assertTrue(issubclass(UnknownActionError, KeyError))
        self.assertTrue(issubclass(ConfigError, AstraError))


if __name__ == '__main__':
    unittest.main()
