"""
ASTRA AoI Tools

Age-of-Information-aware random access for asynchronous multi-pool uplinks,
modelled as a mean-field game. This package provides:

- A packet-level PHY simulator with capture and successive interference cancellation
- Monte Carlo calibration of per-action frame success probabilities
- An average-cost MDP solver with policy-structure reports and an LP oracle
- The damped mean-field fixed-point iteration and energy-multiplier sweeps
- Age-independent baselines and closed-loop N-device validation

The main operations are also exposed as LangChain tools and over MCP.
"""

from astra_aoi_tools.phy_core import (
    Replica,
    DecodeResult,
    place_tagged_replicas,
    generate_background,
    run_sic_pool,
    decode_frame,
    frame_success,
    estimate_success,
    sample_rician_gain
)

from astra_aoi_tools.calibration import (
    SuccessTable,
    calibrate_table,
    success_prob,
    success_vector,
    save_table,
    load_table,
    check_monotone_congestion,
    pool_diversity_report
)

from astra_aoi_tools.mdp_solver import (
    MdpModel,
    MdpSolution,
    StructureReport,
    build_model,
    next_state_law,
    relative_value_iteration,
    filter_dominated,
    pairwise_threshold,
    extract_structure,
    occupation_lp_solve,
    save_solution
)

from astra_aoi_tools.mean_field import (
    Equilibrium,
    induced_load,
    occupation_load,
    reset_chain_distribution,
    stationary_distribution,
    solve_equilibrium,
    equilibrium_metrics,
    save_equilibrium
)

from astra_aoi_tools.baselines import (
    RandomizedBaseline,
    IrsaBaseline,
    randomized_lp,
    irsa_baseline,
    budget_from_load,
    load_from_budget,
    baseline_aoi_simulation_check,
    baseline_rows
)

from astra_aoi_tools.experiments import (
    SweepRecord,
    ClosedLoopResult,
    VerificationReport,
    sweep_eta,
    check_sweep_monotone,
    write_pareto_csv,
    compare_with_randomized,
    closed_loop_simulate,
    run_verification
)

from astra_aoi_tools.tools import (
    calibrate_success_table,
    solve_mean_field_equilibrium,
    evaluate_randomized_baseline,
    evaluate_irsa_baseline,
    describe_policy_structure
)

from astra_aoi_tools.utils.add_config_to_langchain_tool_call import (
    add_config_to_langchain_tool_call
)

# Create a list of all LangChain tools
langchain_tools = [
    calibrate_success_table,
    solve_mean_field_equilibrium,
    evaluate_randomized_baseline,
    evaluate_irsa_baseline,
    describe_policy_structure
]


def get_langchain_tools():
    """
    Get all available LangChain tools.

    Returns:
        List of LangChain tools that can be used with LangChain agents and frameworks.
    """
    return langchain_tools


__all__ = [
    # PHY
    'Replica',
    'DecodeResult',
    'place_tagged_replicas',
    'generate_background',
    'run_sic_pool',
    'decode_frame',
    'frame_success',
    'estimate_success',
    'sample_rician_gain',

    # Calibration
    'SuccessTable',
    'calibrate_table',
    'success_prob',
    'success_vector',
    'save_table',
    'load_table',
    'check_monotone_congestion',
    'pool_diversity_report',

    # MDP solver
    'MdpModel',
    'MdpSolution',
    'StructureReport',
    'build_model',
    'next_state_law',
    'relative_value_iteration',
    'filter_dominated',
    'pairwise_threshold',
    'extract_structure',
    'occupation_lp_solve',
    'save_solution',

    # Mean field
    'Equilibrium',
    'induced_load',
    'occupation_load',
    'reset_chain_distribution',
    'stationary_distribution',
    'solve_equilibrium',
    'equilibrium_metrics',
    'save_equilibrium',

    # Baselines
    'RandomizedBaseline',
    'IrsaBaseline',
    'randomized_lp',
    'irsa_baseline',
    'budget_from_load',
    'load_from_budget',
    'baseline_aoi_simulation_check',
    'baseline_rows',

    # Experiments
    'SweepRecord',
    'ClosedLoopResult',
    'VerificationReport',
    'sweep_eta',
    'check_sweep_monotone',
    'write_pareto_csv',
    'compare_with_randomized',
    'closed_loop_simulate',
    'run_verification',

    # LangChain tools
    'calibrate_success_table',
    'solve_mean_field_equilibrium',
    'evaluate_randomized_baseline',
    'evaluate_irsa_baseline',
    'describe_policy_structure',
    'add_config_to_langchain_tool_call',
    'get_langchain_tools',
    'langchain_tools'
]
