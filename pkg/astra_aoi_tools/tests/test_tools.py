"""
Test the LangChain tools and the configuration injection helper.
"""
import os
import tempfile
import unittest
from unittest.mock import patch

from langchain_core.messages import AIMessage, HumanMessage, RemoveMessage

from astra_aoi_tools import get_langchain_tools
from astra_aoi_tools.calibration import save_table
from astra_aoi_tools.tests.fixtures import make_table
from astra_aoi_tools.tools import (
    ConfigManager,
    calibrate_success_table,
    describe_policy_structure,
    evaluate_irsa_baseline,
    evaluate_randomized_baseline,
    solve_mean_field_equilibrium,
)
from astra_aoi_tools.utils.add_config_to_langchain_tool_call import add_config_to_langchain_tool_call
from astra_aoi_tools.utils.models import ExperimentConfig, SystemConfig


class TestTools(unittest.TestCase):
    """Test the tool functions with an injected configuration."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.table_path = os.path.join(self.tmp.name, "table.csv")
        save_table(make_table(), self.table_path)
        self.config = ExperimentConfig(system=SystemConfig(N=10, R=2, delta_max=30))

    def tearDown(self):
        self.tmp.cleanup()

    def test_tools_registered(self):
        names = [t.name for t in get_langchain_tools()]
        self.assertEqual(names, ['calibrate_success_table', 'solve_mean_field_equilibrium',
                                 'evaluate_randomized_baseline', 'evaluate_irsa_baseline',
                                 'describe_policy_structure'])

    def test_config_hidden_from_model(self):
        for tool in get_langchain_tools():
            properties = tool.tool_call_schema.model_json_schema().get('properties', {})
            self.assertNotIn('config', properties, tool.name)

    @patch('astra_aoi_tools.tools.calibrate_table')
    def test_calibrate_success_table(self, mock_calibrate):
        mock_calibrate.return_value = make_table(trials=50)
        output = os.path.join(self.tmp.name, "out", "calibrated.csv")
        content, artifact = calibrate_success_table.func(output, trials=50, seed=3, config=self.config)

        args = mock_calibrate.call_args.args
        self.assertEqual(args[2], 50)
        self.assertEqual(args[3], 3)
        self.assertTrue(os.path.exists(output))
        self.assertIn("saved to", content)
        self.assertEqual(artifact["type"], "file")
        self.assertEqual(artifact["path"], output)
        self.assertEqual(len(artifact["actions"]), 5)

    def test_solve_mean_field_equilibrium(self):
        output = os.path.join(self.tmp.name, "eq.csv")
        content, artifact = solve_mean_field_equilibrium.func(self.table_path, 0.0, output, config=self.config)
        self.assertTrue(artifact["converged"])
        self.assertAlmostEqual(artifact["lambda_star"], 4.5, delta=1e-3)
        self.assertEqual(artifact["policy"], ["(1,1)"] * 30)
        self.assertTrue(os.path.exists(output))
        self.assertIn("converged=True", content)

    def test_evaluate_randomized_baseline(self):
        result = evaluate_randomized_baseline.func(self.table_path, 0.0, config=self.config)
        self.assertFalse(result["reached"])
        self.assertIsNone(result["avg_aoi"])
        result = evaluate_randomized_baseline.func(self.table_path, 1.0, config=self.config)
        self.assertEqual(result["mix"], {"(1,1)": 1.0})
        self.assertAlmostEqual(result["load"], 4.5)

    def test_evaluate_irsa_baseline(self):
        result = evaluate_irsa_baseline.func(self.table_path, 0.5, 1.0, config=self.config)
        self.assertTrue(result["feasible"])
        self.assertAlmostEqual(result["theta"], 2.0 / 3.0)
        self.assertFalse(evaluate_irsa_baseline.func(self.table_path, 0.5, 1.9, config=self.config)["feasible"])

    def test_describe_policy_structure(self):
        result = describe_policy_structure.func(self.table_path, 1.0, 4.5, config=self.config)
        self.assertTrue(result["h_nondecreasing"])
        self.assertTrue(result["threshold_ordered"])
        self.assertEqual(result["dominated_selected"], [])
        self.assertEqual(len(result["policy"]), 30)

    def test_manager_config_used_when_none_injected(self):
        manager = ConfigManager()
        manager.set_config(self.config)
        with patch('astra_aoi_tools.tools.config_manager', manager):
            result = evaluate_irsa_baseline.func(self.table_path, 0.5, 1.0)
        self.assertTrue(result["feasible"])


class TestConfigManager(unittest.TestCase):
    """Test the fallback configuration holder."""

    def test_defaults_and_reset(self):
        manager = ConfigManager()
        self.assertEqual(manager.get_config(), ExperimentConfig())
        manager.set_config(ExperimentConfig(seed=3))
        self.assertEqual(manager.get_config().seed, 3)
        manager.set_config_path(None)
        self.assertEqual(manager.get_config().seed, 7)


class TestAddConfig(unittest.TestCase):
    """Test injecting the configuration into pending tool calls."""

    def test_injects_into_every_call(self):
        config = ExperimentConfig(seed=11)
        message = AIMessage(content="", id="ai-1", tool_calls=[
            {"name": "evaluate_irsa_baseline", "args": {"alpha_irsa": 0.5}, "id": "call-1"},
            {"name": "describe_policy_structure", "args": {"eta": 1.0}, "id": "call-2"},
        ])
        state = {"messages": [HumanMessage(content="hi", id="h-1"), message]}
        update = add_config_to_langchain_tool_call(config, state, "messages")

        removed, replaced = update["messages"]
        self.assertIsInstance(removed, RemoveMessage)
        self.assertEqual(removed.id, "ai-1")
        self.assertTrue(all(call["args"]["config"] is config for call in replaced.tool_calls))

    def test_non_tool_message_untouched(self):
        message = AIMessage(content="done", id="ai-2")
        update = add_config_to_langchain_tool_call(ExperimentConfig(), {"messages": [message]}, "messages")
        self.assertEqual(update["messages"][1].content, "done")


if __name__ == '__main__':
    unittest.main()
