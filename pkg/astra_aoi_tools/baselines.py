"""
Baselines module for ASTRA AoI Tools.
Age-independent comparison policies: the optimized randomized mix over the action
set and the energy-matched repetition-coded (IRSA-style) mixes, with a reset-chain
simulation that checks their geometric AoI law.
"""

import logging
import math
from itertools import combinations
from typing import Dict, List, Mapping, Optional

import numpy as np
from pydantic import BaseModel, Field

from astra_aoi_tools.calibration import SuccessTable, success_prob, success_vector
from astra_aoi_tools.utils.errors import InfeasibleBudgetError
from astra_aoi_tools.utils.helpers import format_float, spawn_rng, write_commented_csv
from astra_aoi_tools.utils.models import Action, IDLE, PopulationConfig

logger = logging.getLogger(__name__)

BASELINE_HEADER = ['kind', 'parameter', 'budget', 'p', 'avg_aoi', 'feasible', 'reached']
ENERGY_TOL = 1e-12
IRSA_DEGREE_ONE = Action(d=1, q=1)
IRSA_DEGREE_TWO = Action(d=2, q=1)
MIN_CHECK_FRAMES = 10_000


class RandomizedBaseline(BaseModel):
    energy: float = Field(description="Average replica budget c")
    load: float = Field(description="Per-pool load Lambda(c) induced when every device spends c")
    support: List[Action] = Field(description="Actions with positive probability")
    weights: List[float] = Field(description="Probability of each support action")
    p_star: float = Field(description="Achieved average success probability")
    avg_aoi: float = Field(description="1/p_star, infinite when nothing is delivered")
    reached: bool = Field(description="False when p_star is zero and the AoI is unbounded")

    def mix(self) -> Dict[Action, float]:
        return dict(zip(self.support, self.weights))


class IrsaBaseline(BaseModel):
    alpha_irsa: float = Field(description="Fraction of active frames that send a single replica")
    budget: float = Field(description="Average energy budget B")
    feasible: bool = Field(description="Whether 0 <= B <= 2 - alpha")
    theta: Optional[float] = Field(None, description="Probability of being active in a frame")
    actions: List[Action] = Field(default_factory=list, description="Idle, (1,1) and (2,1)")
    weights: List[float] = Field(default_factory=list, description="Probability of each action")
    load: Optional[float] = Field(None, description="Per-pool load Lambda_B")
    p_success: Optional[float] = Field(None, description="Average success probability")
    avg_aoi: Optional[float] = Field(None, description="1/p, infinite when nothing is delivered")

    @property
    def average_energy(self) -> float:
        return sum(w * a.energy for a, w in zip(self.actions, self.weights))

    def mix(self) -> Dict[Action, float]:
        return dict(zip(self.actions, self.weights))


class AoiSimulationCheck(BaseModel):
    empirical_mean: float = Field(description="Time-average AoI of the simulated reset chain")
    analytic_mean: float = Field(description="1/p, infinite when p is zero")
    std_error: float = Field(description="Batch-means standard error of the empirical mean")
    p_success: float = Field(description="Per-frame success probability of the mix")
    frames: int = Field(description="Frames simulated")

    @property
    def within(self) -> float:
        """Distance between empirical and analytic means in standard errors."""
        if math.isinf(self.analytic_mean):
            return math.inf
        if self.std_error == 0:
            return 0.0 if self.empirical_mean == self.analytic_mean else math.inf
        return abs(self.empirical_mean - self.analytic_mean) / self.std_error


def _check_population(pop: PopulationConfig):
    if pop.N < 2:
        raise ValueError("budget and load are related through N-1 interferers; N must be at least 2")


def load_from_budget(budget, pop: PopulationConfig) -> float:
    """Lambda_B = (N-1)*B/(R*T_f): the per-pool load when every device spends B replicas per frame."""
    return (pop.N - 1) * budget / (pop.R * pop.T_f)


def budget_from_load(load, pop: PopulationConfig) -> float:
    """B(G) = R*T_f*G/(N-1): the per-device budget that produces a per-pool load G."""
    _check_population(pop)
    return pop.R * pop.T_f * load / (pop.N - 1)


def randomized_lp(table: SuccessTable, c, pop: PopulationConfig) -> RandomizedBaseline:
    """
    Best age-independent randomized mix at average energy c.

    maximise sum r_i*p(a_i; Lambda(c)) subject to sum r_i = 1, sum r_i*E(a_i) = c,
    r >= 0. With two equality constraints every vertex has at most two positive
    entries, so all single actions with E = c and all pairs bracketing c are
    enumerated; ties keep the first candidate in (energy, d, q) order.

    Args:
        table (SuccessTable): Calibrated success law
        c (float): Average energy budget
        pop (PopulationConfig): Population parameters

    Returns:
        RandomizedBaseline: The optimal mix and its AoI
    """
    max_energy = table.max_energy
    if not -ENERGY_TOL <= c <= max_energy + ENERGY_TOL:
        raise InfeasibleBudgetError(f"energy budget {c} outside [0, {max_energy}]")
    c = min(max(float(c), 0.0), float(max_energy))
    lam = load_from_budget(c, pop)
    actions = sorted(table.actions, key=Action.sort_key)
    p = success_vector(table, actions, lam)
    energies = [a.energy for a in actions]

    best = None
    for i, action in enumerate(actions):
        if abs(energies[i] - c) <= ENERGY_TOL:
            candidate = (float(p[i]), [action], [1.0])
            if best is None or candidate[0] > best[0]:
                best = candidate
    for i, j in combinations(range(len(actions)), 2):
        lo, hi = (i, j) if energies[i] < energies[j] else (j, i)
        if not energies[lo] < c < energies[hi]:
            continue
        w_hi = (c - energies[lo]) / (energies[hi] - energies[lo])
        value = (1.0 - w_hi) * p[lo] + w_hi * p[hi]
        if best is None or value > best[0]:
            best = (float(value), [actions[lo], actions[hi]], [1.0 - w_hi, w_hi])
    if best is None:
        raise InfeasibleBudgetError(f"no mix of the table's actions has average energy {c}")

    p_star, support, weights = best
    reached = p_star > 0
    return RandomizedBaseline(energy=c, load=lam, support=support, weights=weights, p_star=p_star,
                              avg_aoi=1.0 / p_star if reached else math.inf, reached=reached)


def irsa_baseline(alpha_irsa, budget, table: SuccessTable, pop: PopulationConfig) -> IrsaBaseline:
    """
    Energy-matched repetition-coded baseline with degrees {1, 2} in a single pool.

    An active device (probability theta = B/(2 - alpha)) sends one replica with
    probability alpha and two otherwise, so the average energy is exactly B.

    Args:
        alpha_irsa (float): Degree-one fraction in (0, 1)
        budget (float): Average energy budget B
        table (SuccessTable): Calibrated success law containing (1,1) and (2,1)
        pop (PopulationConfig): Population parameters

    Returns:
        IrsaBaseline: The mix and its metrics, or an infeasible record
    """
    if not 0 < alpha_irsa < 1:
        raise ValueError(f"alpha_irsa must lie in (0, 1), got {alpha_irsa}")
    ceiling = 2.0 - alpha_irsa
    if not 0 <= budget <= ceiling + ENERGY_TOL:
        logger.debug("IRSA budget %g infeasible for alpha=%g (limit %g)", budget, alpha_irsa, ceiling)
        return IrsaBaseline(alpha_irsa=alpha_irsa, budget=budget, feasible=False)

    theta = min(budget / ceiling, 1.0)
    weights = [1.0 - theta, theta * alpha_irsa, theta * (1.0 - alpha_irsa)]
    lam = load_from_budget(budget, pop)
    p = theta * (alpha_irsa * success_prob(table, IRSA_DEGREE_ONE, lam)
                 + (1.0 - alpha_irsa) * success_prob(table, IRSA_DEGREE_TWO, lam))
    return IrsaBaseline(
        alpha_irsa=alpha_irsa,
        budget=budget,
        feasible=True,
        theta=theta,
        actions=[IDLE, IRSA_DEGREE_ONE, IRSA_DEGREE_TWO],
        weights=weights,
        load=lam,
        p_success=p,
        avg_aoi=1.0 / p if p > 0 else math.inf,
    )


def baseline_aoi_simulation_check(mix: Mapping[Action, float], table: SuccessTable, pop: PopulationConfig,
                                  frames, seed, delta_max=200, batches=50) -> AoiSimulationCheck:
    """
    Simulates the single-device reset chain of an age-independent mix.

    The success probability is sum r_i*p(a_i; Lambda), with Lambda induced by the
    mix's average energy. The AoI starts at 1, resets to 1 after a delivery,
    otherwise grows by one, and is capped at delta_max.

    Args:
        mix (dict): Action mapped to probability
        table (SuccessTable): Calibrated success law
        pop (PopulationConfig): Population parameters
        frames (int): Frames to simulate, at least MIN_CHECK_FRAMES
        seed (int): Master seed
        delta_max (int): AoI cap
        batches (int): Batches for the batch-means standard error

    Returns:
        AoiSimulationCheck: Empirical and analytic means
    """
    weights = np.array(list(mix.values()), dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("mix weights must form a probability vector")
    if frames < max(MIN_CHECK_FRAMES, batches):
        raise ValueError(f"need at least {max(MIN_CHECK_FRAMES, batches)} frames, got {frames}")

    energy = sum(w * a.energy for a, w in mix.items())
    lam = load_from_budget(energy, pop)
    p = float(sum(w * success_prob(table, a, lam) for a, w in mix.items()))

    rng = spawn_rng(seed, 0)
    success = rng.random(frames) < p
    index = np.arange(frames)
    # a virtual delivery at frame -1 makes the starting AoI 1
    last = np.maximum.accumulate(np.where(success, index, -1))
    age = np.minimum(index - last + 1, delta_max)

    usable = (frames // batches) * batches
    batch_means = age[:usable].reshape(batches, -1).mean(axis=1)
    std_error = float(batch_means.std(ddof=1) / math.sqrt(batches))
    return AoiSimulationCheck(empirical_mean=float(age.mean()), analytic_mean=1.0 / p if p > 0 else math.inf,
                              std_error=std_error, p_success=p, frames=frames)


def baseline_rows(randomized: List[RandomizedBaseline], irsa: List[IrsaBaseline], delta_max) -> List[list]:
    """
    Export rows kind,parameter,budget,p,avg_aoi,feasible,reached.

    An unbounded AoI is written as delta_max with reached=false; infeasible IRSA
    points carry no metrics.
    """
    rows = []
    for base in randomized:
        aoi = base.avg_aoi if base.reached else delta_max
        rows.append(['randomized', '', format_float(base.energy), format_float(base.p_star),
                     format_float(aoi), 'true', str(base.reached).lower()])
    for base in irsa:
        if not base.feasible:
            rows.append(['irsa', format_float(base.alpha_irsa), format_float(base.budget), '', '', 'false', 'false'])
            continue
        reached = base.p_success > 0
        aoi = base.avg_aoi if reached else delta_max
        rows.append(['irsa', format_float(base.alpha_irsa), format_float(base.budget),
                     format_float(base.p_success), format_float(aoi), 'true', str(reached).lower()])
    return rows


def save_baselines(rows: List[list], path, comments=()):
    """Writes baseline rows with the given leading comment lines."""
    write_commented_csv(path, list(comments), BASELINE_HEADER, rows)
    logger.info("Saved %d baseline rows to %s", len(rows), path)
