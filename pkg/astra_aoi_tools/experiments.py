"""
Experiments module for ASTRA AoI Tools.
Energy-multiplier sweeps tracing the AoI/energy tradeoff, comparison against the
randomized baseline, closed-loop packet-level validation of a mean-field
operating point, and the oracle verification suite.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from tenacity import Retrying, retry_if_result, stop_after_attempt

from astra_aoi_tools.baselines import randomized_lp
from astra_aoi_tools.calibration import SuccessTable
from astra_aoi_tools.mdp_solver import (
    MdpModel,
    extract_structure,
    filter_dominated,
    occupation_lp_solve,
    relative_value_iteration,
)
from astra_aoi_tools.mean_field import Equilibrium, reset_chain_distribution, solve_equilibrium
from astra_aoi_tools.phy_core import FrameArrays, decode_frame_arrays, sample_rician_gain, tagged_arrays
from astra_aoi_tools.utils.errors import ConvergenceError, LinearProgramError
from astra_aoi_tools.utils.helpers import action_set, format_float, spawn_rng, write_commented_csv
from astra_aoi_tools.utils.models import IDLE, Action, FixedPointConfig, PopulationConfig, SystemConfig

logger = logging.getLogger(__name__)

PARETO_HEADER = ['eta', 'lambda_star', 'avg_aoi', 'avg_energy', 'rho', 'converged']
COMPARISON_HEADER = ['eta', 'avg_energy', 'astra_aoi', 'randomized_aoi', 'dominates']


class SweepRecord(BaseModel):
    eta: float = Field(description="Energy multiplier")
    lambda_star: float = Field(description="Consistent per-pool load")
    avg_aoi: float = Field(description="Stationary average AoI")
    avg_energy: float = Field(description="Stationary average replicas per frame")
    rho: float = Field(description="Average cost of the best response")
    converged: bool = Field(description="Whether the fixed-point iteration met its tolerances")
    policy_switch_points: List[int] = Field(default_factory=list, description="States where the action changes")
    policy: List[Action] = Field(default_factory=list, description="Action in each AoI state")
    load_residual: float = Field(math.nan, description="Load residual of the returned iterate")
    dist_residual: float = Field(math.nan, description="L1 distribution residual of the returned iterate")
    attempts: int = Field(1, description="Solves run, including retries with reduced damping")

    @classmethod
    def from_equilibrium(cls, eq: Equilibrium, attempts=1) -> 'SweepRecord':
        return cls(eta=eq.eta, lambda_star=eq.lambda_star, avg_aoi=eq.avg_aoi, avg_energy=eq.avg_energy,
                   rho=eq.rho, converged=eq.converged, policy_switch_points=eq.switch_points(),
                   policy=eq.policy, load_residual=eq.load_residual, dist_residual=eq.dist_residual,
                   attempts=attempts)


class ParetoComparison(BaseModel):
    eta: float
    avg_energy: float
    astra_aoi: float
    randomized_aoi: float
    dominates: bool = Field(description="ASTRA AoI strictly below the randomized baseline at the same energy")


class ClosedLoopResult(BaseModel):
    frames: int = Field(description="Frames simulated, warmup included")
    warmup: int = Field(description="Frames discarded before averaging")
    seed: int
    per_device_aoi: List[float] = Field(description="Empirical mean AoI of each device")
    per_device_energy: List[float] = Field(description="Empirical mean replicas per frame of each device")
    mean_aoi: float = Field(description="Population mean AoI")
    mean_energy: float = Field(description="Population mean replicas per frame")
    mean_load: float = Field(description="Mean per-pool load seen by a device from the other N-1 devices")
    predicted_aoi: Optional[float] = None
    predicted_energy: Optional[float] = None
    predicted_load: Optional[float] = None
    aoi_gap: Optional[float] = Field(None, description="|empirical - predicted| / predicted")
    energy_gap: Optional[float] = None
    flagged: bool = Field(False, description="A gap exceeds the reporting threshold")


class VerificationCheck(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class VerificationReport(BaseModel):
    checks: List[VerificationCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(VerificationCheck(name=name, passed=bool(passed), detail=detail))
        log = logger.info if passed else logger.warning
        log("verify %-28s %s %s", name, "ok" if passed else "FAILED", detail)


def _failed_record(eta, attempts) -> SweepRecord:
    return SweepRecord(eta=eta, lambda_star=math.nan, avg_aoi=math.nan, avg_energy=math.nan, rho=math.nan,
                       converged=False, attempts=attempts)


def _solve_point(job) -> SweepRecord:
    eta, table, pop, fp, delta_max, retries = job
    retrying = Retrying(
        stop=stop_after_attempt(retries + 1),
        retry=retry_if_result(lambda eq: not eq.converged),
        retry_error_callback=lambda state: state.outcome.result(),
    )
    eq = None
    attempts = 0
    try:
        for attempt in retrying:
            with attempt:
                attempts = attempt.retry_state.attempt_number
                scale = 0.5 ** (attempts - 1)
                damped = fp.model_copy(update={'damp_load': fp.damp_load * scale,
                                               'damp_dist': fp.damp_dist * scale})
                if attempts > 1:
                    logger.info("Retrying eta=%g with damping (%g, %g)", eta, damped.damp_load, damped.damp_dist)
                eq = solve_equilibrium(eta, table, pop, damped, delta_max)
            if not attempt.retry_state.outcome.failed:
                attempt.retry_state.set_result(eq)
    except ConvergenceError as exc:
        logger.warning("Best response at eta=%g failed: %s", eta, exc)
        return _failed_record(eta, attempts)
    return SweepRecord.from_equilibrium(eq, attempts=attempts)


def sweep_eta(eta_grid: Sequence[float], table: SuccessTable, pop: PopulationConfig, fp: FixedPointConfig,
              delta_max, workers=1, retries=2) -> List[SweepRecord]:
    """
    Solves one equilibrium per energy multiplier.

    A point that does not converge is re-solved with both damping factors halved,
    up to `retries` more times; the last attempt is reported as it stands.

    Args:
        eta_grid (list): Energy multipliers (non-negative, distinct)
        table (SuccessTable): Calibrated success law
        pop (PopulationConfig): Population parameters
        fp (FixedPointConfig): Fixed-point settings
        delta_max (int): AoI truncation
        workers (int): Worker processes; 1 runs serially
        retries (int): Extra attempts per non-converged point

    Returns:
        list: SweepRecords sorted by eta
    """
    grid = sorted(float(eta) for eta in eta_grid)
    if not grid:
        raise ValueError("eta grid is empty")
    if grid[0] < 0:
        raise ValueError("energy multipliers must be non-negative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("eta grid has repeated values")

    jobs = [(eta, table, pop, fp, delta_max, retries) for eta in grid]
    logger.info("Sweeping %d energy multipliers in [%g, %g] with %d workers", len(grid), grid[0], grid[-1], workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_solve_point, jobs))
    else:
        records = [_solve_point(job) for job in jobs]

    for record in records:
        logger.info("eta=%-10g lambda*=%.4f aoi=%.4f energy=%.4f converged=%s", record.eta, record.lambda_star,
                    record.avg_aoi, record.avg_energy, record.converged)
    converged = sum(r.converged for r in records)
    logger.info("Sweep finished: %d of %d points converged", converged, len(records))
    return records


def eta_grid(eta_min, eta_max, points) -> List[float]:
    """Log-spaced energy multipliers."""
    if points == 1:
        return [float(eta_min)]
    return [float(x) for x in np.logspace(math.log10(eta_min), math.log10(eta_max), points)]


def check_sweep_monotone(records: List[SweepRecord], tol=1e-6) -> List[dict]:
    """
    Lists adjacent converged records whose average energy increases with eta.

    Violations are logged as warnings and returned, never raised.
    """
    usable = [r for r in records if r.converged]
    violations = []
    for low, high in zip(usable, usable[1:]):
        if high.avg_energy > low.avg_energy + tol:
            violations.append({'eta_low': low.eta, 'eta_high': high.eta,
                               'energy_low': low.avg_energy, 'energy_high': high.avg_energy})
            logger.warning("Average energy rises from %.6f to %.6f between eta=%g and eta=%g",
                           low.avg_energy, high.avg_energy, low.eta, high.eta)
    return violations


def write_pareto_csv(records: List[SweepRecord], path, comments=()):
    """Writes eta,lambda_star,avg_aoi,avg_energy,rho,converged, one row per record."""
    rows = [[format_float(r.eta), format_float(r.lambda_star), format_float(r.avg_aoi),
             format_float(r.avg_energy), format_float(r.rho), str(r.converged).lower()] for r in records]
    write_commented_csv(path, list(comments), PARETO_HEADER, rows)
    logger.info("Saved %d sweep records to %s", len(rows), path)


def compare_with_randomized(records: List[SweepRecord], table: SuccessTable, pop: PopulationConfig,
                            max_energy=None) -> List[ParetoComparison]:
    """
    Evaluates the optimized randomized baseline at each converged record's
    average energy and reports whether the age-dependent policy is strictly better.

    Args:
        records (list): Sweep records
        table (SuccessTable): Calibrated success law
        pop (PopulationConfig): Population parameters
        max_energy (float, optional): Only compare records with energy up to this value

    Returns:
        list: One ParetoComparison per compared record
    """
    limit = table.max_energy if max_energy is None else max_energy
    comparisons = []
    for record in records:
        if not record.converged or not 0 <= record.avg_energy <= limit:
            continue
        base = randomized_lp(table, record.avg_energy, pop)
        comparisons.append(ParetoComparison(eta=record.eta, avg_energy=record.avg_energy, astra_aoi=record.avg_aoi,
                                            randomized_aoi=base.avg_aoi,
                                            dominates=record.avg_aoi < base.avg_aoi))
    return comparisons


def write_comparison_csv(comparisons: List[ParetoComparison], path, comments=()):
    """Writes eta,avg_energy,astra_aoi,randomized_aoi,dominates, one row per comparison."""
    rows = [[format_float(c.eta), format_float(c.avg_energy), format_float(c.astra_aoi),
             format_float(c.randomized_aoi), str(c.dominates).lower()] for c in comparisons]
    write_commented_csv(path, list(comments), COMPARISON_HEADER, rows)
    logger.info("Saved %d baseline comparisons to %s", len(rows), path)


def _relative_gap(empirical, predicted):
    if predicted is None or predicted == 0:
        return None
    return abs(empirical - predicted) / abs(predicted)


def closed_loop_simulate(policy: Sequence[Action], pop: PopulationConfig, cfg: SystemConfig, frames, warmup=None,
                         seed=0, prediction: Optional[Equilibrium] = None, report_threshold=0.15) -> ClosedLoopResult:
    """
    Runs N devices that share the pools and each follow the same AoI policy.

    Every frame, each device picks pi(AoI), all replicas go into the shared
    pools, the actual PHY decodes the frame, and each AoI resets to 1 on
    delivery or grows by one (capped at the truncation state). Devices start at
    AoI 1; averages are taken over the frames after warmup.

    Args:
        policy (list): Action for each AoI state 1..delta_max
        pop (PopulationConfig): Population parameters (N devices)
        cfg (SystemConfig): PHY parameters
        frames (int): Total frames, warmup included
        warmup (int, optional): Frames discarded; max(500, frames // 10) by default
        seed (int): Master seed
        prediction (Equilibrium, optional): Mean-field operating point to compare against
        report_threshold (float): Relative gap that flags the run

    Returns:
        ClosedLoopResult: Empirical metrics and, with a prediction, the gaps
    """
    if warmup is None:
        warmup = min(max(500, frames // 10), frames - 1)
    if not 0 <= warmup < frames:
        raise ValueError(f"need 0 <= warmup < frames, got warmup={warmup}, frames={frames}")
    delta_max = len(policy)
    if delta_max < 2:
        raise ValueError("policy must cover at least two AoI states")

    n = pop.N
    rng = spawn_rng(seed, 0)
    aoi = np.ones(n, dtype=np.int64)
    energy_of = np.array([a.energy for a in policy], dtype=float)
    aoi_sum = np.zeros(n)
    energy_sum = np.zeros(n)
    load_sum = 0.0
    counted = frames - warmup

    for frame_index in range(frames):
        parts = []
        for device in range(n):
            action = policy[aoi[device] - 1]
            if not action.is_idle:
                parts.append(tagged_arrays(action, cfg, rng, packet_id=device))
        frame = FrameArrays.concat(parts)
        decoded = decode_frame_arrays(frame, cfg) if len(frame.packet) else set()

        if frame_index >= warmup:
            spent = energy_of[aoi - 1]
            aoi_sum += aoi
            energy_sum += spent
            load_sum += (spent.sum() * (n - 1) / n) / (pop.R * pop.T_f)

        delivered = np.zeros(n, dtype=bool)
        if decoded:
            delivered[list(decoded)] = True
        aoi = np.where(delivered, 1, np.minimum(aoi + 1, delta_max))

    per_device_aoi = aoi_sum / counted
    per_device_energy = energy_sum / counted
    result = ClosedLoopResult(
        frames=frames, warmup=warmup, seed=seed,
        per_device_aoi=per_device_aoi.tolist(), per_device_energy=per_device_energy.tolist(),
        mean_aoi=float(per_device_aoi.mean()), mean_energy=float(per_device_energy.mean()),
        mean_load=load_sum / counted,
    )
    if prediction is not None:
        result.predicted_aoi = prediction.avg_aoi
        result.predicted_energy = prediction.avg_energy
        result.predicted_load = prediction.lambda_star
        result.aoi_gap = _relative_gap(result.mean_aoi, prediction.avg_aoi)
        result.energy_gap = _relative_gap(result.mean_energy, prediction.avg_energy)
        gaps = [g for g in (result.aoi_gap, result.energy_gap) if g is not None]
        result.flagged = any(g > report_threshold for g in gaps)
        if result.flagged:
            logger.warning("Closed-loop gaps exceed %.0f%%: AoI %.4f vs %.4f, energy %.4f vs %.4f",
                           100 * report_threshold, result.mean_aoi, prediction.avg_aoi,
                           result.mean_energy, prediction.avg_energy)
    logger.info("Closed loop: %d devices, %d frames, mean AoI %.4f, mean energy %.4f, mean load %.4f",
                n, frames, result.mean_aoi, result.mean_energy, result.mean_load)
    return result


def random_model(rng, delta_max, n_actions, eta, effective=False) -> MdpModel:
    """
    Draws a small MDP: idle plus n_actions-1 distinct non-idle actions from
    D = R = 3, each with a uniform success probability.
    """
    candidates = [a for a in action_set(3, 3) if not a.is_idle]
    picks = rng.choice(len(candidates), size=n_actions - 1, replace=False)
    actions = [IDLE] + [candidates[i] for i in sorted(picks)]
    p = np.concatenate([[0.0], rng.random(n_actions - 1)])
    if effective:
        keep = filter_dominated(actions, p, eta)
        lookup = dict(zip(actions, p))
        actions, p = keep, np.array([lookup[a] for a in keep])
    return MdpModel(delta_max=delta_max, actions=actions, p=p, eta=eta)


def run_verification(delta_max=12, seed=7, n_models=50) -> VerificationReport:
    """
    Runs the oracle suite: occupation LP against value iteration, the geometric
    reset chain, structural properties on random dominance-filtered models, the
    closed-form stationary law, and the unit mean of the fading samples.

    Args:
        delta_max (int): Truncation of the random models (the LP comparison caps it at 20)
        seed (int): Master seed
        n_models (int): Random models for the structure checks

    Returns:
        VerificationReport: One named check per property
    """
    report = VerificationReport()

    lp_states = min(delta_max, 20)
    rng = spawn_rng(seed, 1)
    worst = 0.0
    lp_failures = 0
    for trial in range(25):
        eta = (0.0, 0.5, 2.0)[trial % 3]
        model = random_model(rng, lp_states, int(rng.integers(2, 6)), eta)
        try:
            lp_rho = occupation_lp_solve(model).rho
        except LinearProgramError as exc:
            logger.warning("Occupation LP failed on random model %d: %s", trial, exc)
            lp_failures += 1
            continue
        worst = max(worst, abs(relative_value_iteration(model).rho - lp_rho))
    report.add('lp_matches_rvi', worst <= 1e-6 and not lp_failures,
               f"max |rho_rvi - rho_lp| = {worst:.3e}, LP failures = {lp_failures}")

    geometric = MdpModel(delta_max=200, actions=[Action(d=1, q=1)], p=[0.5], eta=0.0)
    rho = relative_value_iteration(geometric).rho
    report.add('geometric_average_cost', abs(rho - 2.0) <= 1e-6, f"rho = {rho:.12f}")

    rng = spawn_rng(seed, 2)
    h_ok = ordered = clean = 0
    for _ in range(n_models):
        model = random_model(rng, delta_max, int(rng.integers(2, 8)), float(rng.choice([0.5, 1.0, 2.0])),
                             effective=True)
        structure = extract_structure(relative_value_iteration(model))
        h_ok += structure.h_nondecreasing
        ordered += structure.threshold_ordered
        full = random_model(rng, delta_max, int(rng.integers(2, 8)), float(rng.choice([0.5, 1.0, 2.0])))
        clean += not extract_structure(relative_value_iteration(full)).dominated_selected
    report.add('h_nondecreasing', h_ok == n_models, f"{h_ok}/{n_models} models")
    report.add('threshold_ordered', ordered == n_models, f"{ordered}/{n_models} models")
    report.add('dominated_never_selected', clean == n_models, f"{clean}/{n_models} models")

    rng = spawn_rng(seed, 3)
    worst = 0.0
    for _ in range(20):
        p = float(rng.uniform(0.05, 1.0))
        m = reset_chain_distribution(np.full(delta_max, p)).m
        closed = np.array([p * (1 - p) ** (k - 1) for k in range(1, delta_max)] + [(1 - p) ** (delta_max - 1)])
        worst = max(worst, float(np.max(np.abs(m - closed))))
    report.add('stationary_closed_form', worst <= 1e-12, f"max deviation = {worst:.3e}")

    gains = sample_rician_gain(10.0, 200_000, spawn_rng(seed, 4))
    std_error = gains.std() / math.sqrt(len(gains))
    report.add('fading_unit_mean', abs(gains.mean() - 1.0) <= 5 * std_error, f"mean = {gains.mean():.5f}")
    return report
