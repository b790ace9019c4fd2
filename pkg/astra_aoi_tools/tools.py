"""
LangChain tools for ASTRA AoI Tools.
Exposes calibration, equilibrium solving, baselines and policy-structure reports to
agent frameworks. Every tool takes the experiment configuration as an injected
argument; when none is injected the tool manager's configuration is used.
"""

import math
from typing import Annotated, Any, Dict, Optional, Tuple

from langchain.tools import tool
from langchain_core.tools import InjectedToolArg

from astra_aoi_tools.baselines import irsa_baseline, randomized_lp
from astra_aoi_tools.calibration import calibrate_table, load_table, save_table
from astra_aoi_tools.mdp_solver import build_model, extract_structure, relative_value_iteration
from astra_aoi_tools.mean_field import save_equilibrium, solve_equilibrium
from astra_aoi_tools.utils.config import load_config
from astra_aoi_tools.utils.helpers import config_digest, file_header
from astra_aoi_tools.utils.models import ExperimentConfig, PopulationConfig


class ConfigManager:
    """Holds the experiment configuration used when a tool call carries none."""

    def __init__(self):
        self.config = None
        self.config_path = None

    def set_config_path(self, config_path):
        self.config_path = config_path
        self.config = None

    def set_config(self, config: ExperimentConfig):
        self.config = config

    def get_config(self) -> ExperimentConfig:
        if self.config is None:
            self.config = load_config(self.config_path)
        return self.config


config_manager = ConfigManager()


def _resolve(config):
    return config if config is not None else config_manager.get_config()


def _finite(value):
    return None if value is None or math.isinf(value) else value


@tool(response_format="content_and_artifact")
def calibrate_success_table(
    output_path: Annotated[str, "Path of the success-table file to write"],
    trials: Annotated[Optional[int], "Monte Carlo frames per cell; defaults to the configured value"] = None,
    seed: Annotated[Optional[int], "Master seed; defaults to the configured value"] = None,
    config: Annotated[Optional[ExperimentConfig], InjectedToolArg] = None,
) -> Annotated[Tuple[str, Dict[str, Any]], "Tuple of (content message, artifact) with the table file and summary"]:
    """
    Calibrates the per-action frame success probability over the load grid by
    packet-level simulation and writes the table file.
    """
    config = _resolve(config)
    settings = config.calibration
    seed = config.seed if seed is None else seed
    table = calibrate_table(config.system, settings.grid(), trials or settings.trials, seed,
                            workers=settings.workers)
    save_table(table, output_path)
    content = (f"Calibrated {len(table.actions)} actions on {len(table.load_grid)} loads "
               f"({table.trials} frames per cell), saved to {output_path}")
    artifact = {
        "type": "file",
        "path": output_path,
        "cfg_digest": table.cfg_digest,
        "load_grid": table.load_grid,
        "actions": [str(a) for a in table.actions],
    }
    return content, artifact


@tool(response_format="content_and_artifact")
def solve_mean_field_equilibrium(
    table_path: Annotated[str, "Path of a calibrated success table"],
    eta: Annotated[float, "Energy multiplier (non-negative)"],
    output_path: Annotated[Optional[str], "Optional path for the equilibrium export"] = None,
    config: Annotated[Optional[ExperimentConfig], InjectedToolArg] = None,
) -> Annotated[Tuple[str, Dict[str, Any]], "Tuple of (content message, artifact) with the operating point"]:
    """
    Solves the stationary mean-field operating point for an energy multiplier:
    the AoI policy, consistent load, average AoI and average energy.
    """
    config = _resolve(config)
    table = load_table(table_path, expected_digest=config_digest(config.system))
    eq = solve_equilibrium(eta, table, PopulationConfig.from_system(config.system), config.fixed_point,
                           config.system.delta_max)
    if output_path:
        save_equilibrium(eq, output_path, file_header(seed=config.seed, cfg_digest=table.cfg_digest))
    content = (f"eta={eta:g}: load {eq.lambda_star:.4f}, average AoI {eq.avg_aoi:.4f}, "
               f"average energy {eq.avg_energy:.4f}, converged={eq.converged}")
    artifact = {
        "eta": eq.eta,
        "lambda_star": eq.lambda_star,
        "rho": eq.rho,
        "avg_aoi": eq.avg_aoi,
        "avg_energy": eq.avg_energy,
        "converged": eq.converged,
        "outer_iters": eq.outer_iters,
        "switch_points": eq.switch_points(),
        "policy": [str(a) for a in eq.policy],
        "path": output_path,
    }
    return content, artifact


@tool
def evaluate_randomized_baseline(
    table_path: Annotated[str, "Path of a calibrated success table"],
    energy: Annotated[float, "Average replicas per frame c"],
    config: Annotated[Optional[ExperimentConfig], InjectedToolArg] = None,
) -> Annotated[Dict[str, Any], "Optimal age-independent mix and its AoI"]:
    """
    Finds the best age-independent randomized mix of actions at a given average
    energy and reports its success probability and average AoI.
    """
    config = _resolve(config)
    table = load_table(table_path, expected_digest=config_digest(config.system))
    base = randomized_lp(table, energy, PopulationConfig.from_system(config.system))
    return {
        "energy": base.energy,
        "load": base.load,
        "mix": {str(a): w for a, w in zip(base.support, base.weights)},
        "p_star": base.p_star,
        "avg_aoi": _finite(base.avg_aoi),
        "reached": base.reached,
    }


@tool
def evaluate_irsa_baseline(
    table_path: Annotated[str, "Path of a calibrated success table"],
    alpha_irsa: Annotated[float, "Degree-one fraction in (0, 1)"],
    budget: Annotated[float, "Average replicas per frame B"],
    config: Annotated[Optional[ExperimentConfig], InjectedToolArg] = None,
) -> Annotated[Dict[str, Any], "Energy-matched repetition-coded mix and its AoI"]:
    """
    Builds the energy-matched repetition-coded baseline (one or two replicas in a
    single pool) for a budget and reports its success probability and AoI.
    """
    config = _resolve(config)
    table = load_table(table_path, expected_digest=config_digest(config.system))
    base = irsa_baseline(alpha_irsa, budget, table, PopulationConfig.from_system(config.system))
    if not base.feasible:
        return {"alpha_irsa": alpha_irsa, "budget": budget, "feasible": False}
    return {
        "alpha_irsa": alpha_irsa,
        "budget": budget,
        "feasible": True,
        "theta": base.theta,
        "mix": {str(a): w for a, w in zip(base.actions, base.weights)},
        "p_success": base.p_success,
        "avg_aoi": _finite(base.avg_aoi),
    }


@tool
def describe_policy_structure(
    table_path: Annotated[str, "Path of a calibrated success table"],
    eta: Annotated[float, "Energy multiplier (non-negative)"],
    load: Annotated[float, "Per-pool load at which to solve the best response"],
    config: Annotated[Optional[ExperimentConfig], InjectedToolArg] = None,
) -> Annotated[Dict[str, Any], "Structure of the best-response policy"]:
    """
    Solves the best response at a fixed load and describes its structure:
    switch points, threshold ordering along the non-dominated actions, and
    monotonicity of the relative value increments.
    """
    config = _resolve(config)
    table = load_table(table_path, expected_digest=config_digest(config.system))
    model = build_model(table, load, eta, config.system.delta_max)
    solution = relative_value_iteration(model, tol=config.fixed_point.rvi_tol,
                                        max_iters=config.fixed_point.rvi_max_iters)
    structure = extract_structure(solution)
    return {
        "rho": solution.rho,
        "policy": [str(a) for a in solution.policy],
        "switch_points": structure.switch_points,
        "effective_actions": [str(a) for a in structure.effective_actions],
        "h_nondecreasing": structure.h_nondecreasing,
        "energy_nondecreasing": structure.energy_nondecreasing,
        "threshold_ordered": structure.threshold_ordered,
        "argmin_agreement": structure.argmin_agreement,
        "dominated_selected": [str(a) for a in structure.dominated_selected],
    }
