"""
Command-line interface for ASTRA AoI Tools.

Subcommands: calibrate, solve, sweep, baseline, validate and verify. Settings come
from an optional JSON config file; flags given on the command line win.
"""

import argparse
import logging
import os
import sys

import numpy as np

from astra_aoi_tools.baselines import baseline_rows, irsa_baseline, randomized_lp, save_baselines
from astra_aoi_tools.calibration import calibrate_table, check_monotone_congestion, load_table, save_table
from astra_aoi_tools.experiments import (
    check_sweep_monotone,
    closed_loop_simulate,
    compare_with_randomized,
    eta_grid,
    run_verification,
    sweep_eta,
    write_comparison_csv,
    write_pareto_csv,
)
from astra_aoi_tools.mdp_solver import build_model, extract_structure, relative_value_iteration, save_solution
from astra_aoi_tools.mean_field import save_equilibrium, solve_equilibrium
from astra_aoi_tools.utils.config import apply_overrides, load_config
from astra_aoi_tools.utils.errors import AstraError, ConfigError, TableSchemaError
from astra_aoi_tools.utils.helpers import config_digest, file_header, format_float, write_commented_csv
from astra_aoi_tools.utils.models import PopulationConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VERIFY = 4
EXIT_SOLVER = 5

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    """Bad command line."""


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--config', help='JSON experiment config file')
    parent.add_argument('--seed', type=int, dest='seed', help='Master seed for every random stream')
    parent.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    return parent


def _system_parent():
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group('system overrides')
    group.add_argument('--devices', type=int, dest='system.N', help='Number of devices N')
    group.add_argument('--pools', type=int, dest='system.R', help='Resource pools R')
    group.add_argument('--sigma2', type=float, dest='system.sigma2', help='Noise power')
    group.add_argument('--rician-k', type=float, dest='system.rician_k', help='Rician K-factor')
    group.add_argument('--no-fading', action='store_true', help='Receive every replica at p_bar (no Rician fading)')
    group.add_argument('--delta-max', type=int, dest='system.delta_max', help='AoI truncation')
    group.add_argument('--cross-pool-cancel', action='store_const', const=True, dest='system.cross_pool_cancel',
                       help='Cancel decoded packets in every pool')
    return parent


def build_parser():
    common, system = _common_parent(), _system_parent()
    parser = CliParser(prog='astra-aoi', description='AoI-aware random access: calibration, '
                                                     'mean-field equilibria, baselines and validation')
    sub = parser.add_subparsers(dest='command')

    calibrate = sub.add_parser('calibrate', parents=[common, system], help='Calibrate the success table')
    calibrate.add_argument('--out', required=True, help='Table file to write')
    calibrate.add_argument('--trials', type=int, dest='calibration.trials')
    calibrate.add_argument('--load-step', type=float, dest='calibration.load_step')
    calibrate.add_argument('--load-max', type=float, dest='calibration.load_max')
    calibrate.add_argument('--workers', type=int, dest='calibration.workers')

    solve = sub.add_parser('solve', parents=[common, system], help='Solve one equilibrium')
    solve.add_argument('--table', required=True)
    solve.add_argument('--eta', type=float, required=True)
    solve.add_argument('--out', required=True, help='Equilibrium file to write')
    solve.add_argument('--policy-out', help='Optional policy dump (delta,d,q,V)')

    sweep = sub.add_parser('sweep', parents=[common, system], help='Sweep the energy multiplier')
    sweep.add_argument('--table', required=True)
    sweep.add_argument('--out', required=True, help='Pareto CSV to write')
    sweep.add_argument('--eta-min', type=float, dest='sweep.eta_min')
    sweep.add_argument('--eta-max', type=float, dest='sweep.eta_max')
    sweep.add_argument('--eta-points', type=int, dest='sweep.eta_points')
    sweep.add_argument('--workers', type=int, dest='sweep.workers')
    sweep.add_argument('--retries', type=int, dest='sweep.retries')
    sweep.add_argument('--compare', action='store_true',
                       help='Compare against the randomized baseline; writes <out stem>_compare.csv')

    baseline = sub.add_parser('baseline', parents=[common, system], help='Randomized and IRSA baseline curves')
    baseline.add_argument('--table', required=True)
    baseline.add_argument('--out', required=True)
    baseline.add_argument('--points', type=int, default=21, help='Budget grid points per curve')
    baseline.add_argument('--alpha', type=float, action='append', help='IRSA degree-one fraction (repeatable)')

    validate = sub.add_parser('validate', parents=[common, system], help='Closed-loop packet-level run')
    validate.add_argument('--table', required=True)
    validate.add_argument('--eta', type=float, required=True)
    validate.add_argument('--out', required=True, help='Per-device results to write')
    validate.add_argument('--frames', type=int, dest='validation.frames')
    validate.add_argument('--warmup', type=int, dest='validation.warmup')

    verify = sub.add_parser('verify', parents=[common], help='Run the oracle verification suite')
    verify.add_argument('--delta-max', type=int, default=12, dest='verify_delta_max')
    verify.add_argument('--models', type=int, default=50)
    return parser


def _overrides(args):
    return {key: value for key, value in vars(args).items() if '.' in key or key == 'seed'}


def _build_config(args):
    config = apply_overrides(load_config(args.config), _overrides(args))
    if getattr(args, 'no_fading', False):
        config = config.model_copy(update={'system': config.system.model_copy(update={'rician_k': None})})
    return config


def _load_table(path, config):
    return load_table(path, expected_digest=config_digest(config.system))


def cmd_calibrate(args, config):
    cal = config.calibration
    table = calibrate_table(config.system, cal.grid(), cal.trials, config.seed, workers=cal.workers)
    save_table(table, args.out)
    violations = check_monotone_congestion(table)
    if violations:
        logger.warning("%d grid steps break monotone congestion beyond Monte Carlo slack", len(violations))
    return EXIT_OK


def cmd_solve(args, config):
    table = _load_table(args.table, config)
    pop = PopulationConfig.from_system(config.system)
    delta_max = config.system.delta_max
    eq = solve_equilibrium(args.eta, table, pop, config.fixed_point, delta_max)
    header = file_header(seed=config.seed, cfg_digest=table.cfg_digest)
    save_equilibrium(eq, args.out, header)
    logger.info("eta=%g lambda*=%.6f avg_aoi=%.6f avg_energy=%.6f converged=%s switch points %s",
                eq.eta, eq.lambda_star, eq.avg_aoi, eq.avg_energy, eq.converged, eq.switch_points())

    if args.policy_out:
        model = build_model(table, eq.lambda_star, args.eta, delta_max)
        solution = relative_value_iteration(model, tol=config.fixed_point.rvi_tol,
                                            max_iters=config.fixed_point.rvi_max_iters, v_init=eq.v)
        structure = extract_structure(solution)
        logger.info("Policy structure: h nondecreasing=%s, threshold ordered=%s, argmin agreement=%s",
                    structure.h_nondecreasing, structure.threshold_ordered, structure.argmin_agreement)
        save_solution(solution, args.policy_out, header)
    return EXIT_OK


def cmd_sweep(args, config):
    table = _load_table(args.table, config)
    pop = PopulationConfig.from_system(config.system)
    settings = config.sweep
    grid = eta_grid(settings.eta_min, settings.eta_max, settings.eta_points)
    records = sweep_eta(grid, table, pop, config.fixed_point, config.system.delta_max,
                        workers=settings.workers, retries=settings.retries)
    write_pareto_csv(records, args.out, file_header(seed=config.seed, cfg_digest=table.cfg_digest))
    check_sweep_monotone(records)
    if args.compare:
        comparisons = compare_with_randomized(records, table, pop)
        for item in comparisons:
            logger.info("energy %.4f: ASTRA AoI %.4f, randomized AoI %.4f%s", item.avg_energy, item.astra_aoi,
                        item.randomized_aoi, "" if item.dominates else " (not dominated)")
        stem, ext = os.path.splitext(args.out)
        write_comparison_csv(comparisons, f"{stem}_compare{ext or '.csv'}",
                             file_header(seed=config.seed, cfg_digest=table.cfg_digest))
    return EXIT_OK


def cmd_baseline(args, config):
    table = _load_table(args.table, config)
    pop = PopulationConfig.from_system(config.system)
    energies = np.linspace(0.0, table.max_energy, args.points)
    randomized = [randomized_lp(table, float(c), pop) for c in energies]
    irsa = []
    for alpha in args.alpha or [0.5, 0.1, 0.9]:
        for budget in np.linspace(0.0, 2.0, args.points):
            irsa.append(irsa_baseline(alpha, float(budget), table, pop))
    rows = baseline_rows(randomized, irsa, config.system.delta_max)
    save_baselines(rows, args.out, file_header(seed=config.seed, cfg_digest=table.cfg_digest))
    return EXIT_OK


def cmd_validate(args, config):
    table = _load_table(args.table, config)
    pop = PopulationConfig.from_system(config.system)
    eq = solve_equilibrium(args.eta, table, pop, config.fixed_point, config.system.delta_max)
    if not eq.converged:
        logger.warning("Validating a non-converged operating point at eta=%g", args.eta)
    settings = config.validation
    result = closed_loop_simulate(eq.policy, pop, config.system, settings.frames, settings.effective_warmup(),
                                  config.seed, prediction=eq, report_threshold=settings.report_threshold)
    summary = file_header(seed=config.seed, cfg_digest=table.cfg_digest) + [
        ('eta', format_float(args.eta)),
        ('frames', str(result.frames)),
        ('warmup', str(result.warmup)),
        ('mean_aoi', format_float(result.mean_aoi)),
        ('mean_energy', format_float(result.mean_energy)),
        ('mean_load', format_float(result.mean_load)),
        ('predicted_aoi', format_float(eq.avg_aoi)),
        ('predicted_energy', format_float(eq.avg_energy)),
        ('predicted_load', format_float(eq.lambda_star)),
        ('aoi_gap', format_float(result.aoi_gap) if result.aoi_gap is not None else ''),
        ('energy_gap', format_float(result.energy_gap) if result.energy_gap is not None else ''),
        ('flagged', str(result.flagged).lower()),
    ]
    rows = [[n, format_float(a), format_float(e)]
            for n, (a, e) in enumerate(zip(result.per_device_aoi, result.per_device_energy))]
    write_commented_csv(args.out, summary, ['device', 'avg_aoi', 'avg_energy'], rows)
    return EXIT_OK


def cmd_verify(args, config):
    try:
        report = run_verification(args.verify_delta_max, config.seed, args.models)
    except AstraError as exc:
        logger.error("Verification aborted: %s", exc)
        return EXIT_VERIFY
    failed = [check.name for check in report.checks if not check.passed]
    if failed:
        logger.error("Verification failed: %s", ", ".join(failed))
        return EXIT_VERIFY
    logger.info("All %d verification checks passed", len(report.checks))
    return EXIT_OK


COMMANDS = {
    'calibrate': cmd_calibrate,
    'solve': cmd_solve,
    'sweep': cmd_sweep,
    'baseline': cmd_baseline,
    'validate': cmd_validate,
    'verify': cmd_verify,
}


def run_cli(argv=None):
    """
    Runs one subcommand.

    Returns:
        int: 0 ok, 1 usage error, 2 config error, 3 I/O error, 4 verification failure,
            5 solver failure (iteration cap or linear program error)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"astra-aoi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("astra-aoi: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        config = _build_config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except TableSchemaError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        logger.error("Invalid parameter: %s", exc)
        return EXIT_CONFIG
    except AstraError as exc:
        logger.error("Solver failure: %s", exc)
        return EXIT_SOLVER


def main():
    """Console entry point."""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
