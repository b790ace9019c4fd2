"""
Mean-field module for ASTRA AoI Tools.
Maps a policy and a population AoI distribution to the per-pool load, computes the
stationary AoI law of the reset chain, and runs the damped fixed-point iteration
that couples best responses to the load they induce.
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from astra_aoi_tools.calibration import SuccessTable, success_vector
from astra_aoi_tools.mdp_solver import MdpSolution, build_model, relative_value_iteration
from astra_aoi_tools.utils.helpers import format_float, write_commented_csv
from astra_aoi_tools.utils.models import Action, FixedPointConfig, PopulationConfig

logger = logging.getLogger(__name__)

EQUILIBRIUM_HEADER = ['delta', 'd', 'q', 'm']


class ResetChainLaw(NamedTuple):
    m: np.ndarray
    degenerate: bool


@dataclass
class Equilibrium:
    eta: float
    policy: List[Action]
    m: np.ndarray
    lambda_star: float
    rho: float
    avg_aoi: float
    avg_energy: float
    converged: bool
    outer_iters: int
    load_residual: float
    dist_residual: float
    v: Optional[np.ndarray] = None
    degenerate: bool = False
    residual_trace: List[tuple] = field(default_factory=list)

    @property
    def delta_max(self) -> int:
        return len(self.m)

    def switch_points(self) -> List[int]:
        return [delta for delta in range(2, len(self.policy) + 1) if self.policy[delta - 1] != self.policy[delta - 2]]


def _expected_energy(policy, actions=None) -> np.ndarray:
    """Per-state expected d*q of a deterministic policy (list of actions) or a randomized one (matrix)."""
    if isinstance(policy, np.ndarray) and policy.ndim == 2:
        if actions is None:
            raise ValueError("a randomized policy needs its action list")
        energies = np.array([a.energy for a in actions], dtype=float)
        return policy @ energies
    return np.array([a.energy for a in policy], dtype=float)


def induced_load(m, policy, pop: PopulationConfig, actions: Optional[Sequence[Action]] = None) -> float:
    """
    Per-pool replica start-time intensity Lambda(m, pi) = (N-1)/T_f * sum m(delta)*d*q/R.

    Args:
        m (array): Population AoI distribution over 1..delta_max
        policy (list or array): Actions per state, or a (states x actions) matrix of probabilities
        pop (PopulationConfig): Population parameters
        actions (list, optional): Column labels of a randomized policy matrix

    Returns:
        float: Per-pool load
    """
    m = np.asarray(m, dtype=float)
    energy = _expected_energy(policy, actions)
    if len(energy) != len(m):
        raise ValueError(f"policy covers {len(energy)} states, distribution covers {len(m)}")
    return float((pop.N - 1) / pop.T_f * np.dot(m, energy) / pop.R)


def occupation_load(x, actions: Sequence[Action], pop: PopulationConfig) -> float:
    """Load functional G(x) = (N-1)/(T_f*R) * sum x(delta, a)*E(a) of an occupation measure."""
    energies = np.array([a.energy for a in actions], dtype=float)
    return float((pop.N - 1) / (pop.T_f * pop.R) * np.sum(np.asarray(x, dtype=float) @ energies))


def reset_chain_distribution(p) -> ResetChainLaw:
    """
    Stationary law of the truncated reset chain with per-state success vector p.

    w(1) = 1, w(delta+1) = w(delta)*(1 - p(delta)) below the truncation state, and
    the truncation state holds the tail w(delta_max-1)*(1 - p(delta_max-1))/p(delta_max).
    When the tail is reachable but p(delta_max) = 0 the chain absorbs at
    delta_max and a point mass there is returned with the degenerate flag set.

    Args:
        p (array): Success probability in each state 1..delta_max

    Returns:
        ResetChainLaw: (m, degenerate)
    """
    p = np.asarray(p, dtype=float)
    size = len(p)
    if size < 2:
        raise ValueError("the reset chain needs at least two states")

    survive = np.cumprod(1.0 - p[:-1])
    w = np.concatenate([[1.0], survive])
    tail = survive[-1]
    if tail > 0:
        if p[-1] <= 0:
            m = np.zeros(size)
            m[-1] = 1.0
            return ResetChainLaw(m, True)
        w[-1] = tail / p[-1]
    else:
        w[-1] = 0.0
    return ResetChainLaw(w / w.sum(), False)


def stationary_distribution(policy: Sequence[Action], lam, table: SuccessTable, delta_max) -> ResetChainLaw:
    """
    Stationary AoI distribution of a device following a policy at a fixed load.

    Args:
        policy (list): Action in each state 1..delta_max
        lam (float): Per-pool load
        table (SuccessTable): Calibrated success law
        delta_max (int): AoI truncation

    Returns:
        ResetChainLaw: (m, degenerate)
    """
    if len(policy) != delta_max:
        raise ValueError(f"policy covers {len(policy)} states, expected {delta_max}")
    distinct = sorted(set(policy), key=Action.sort_key)
    lookup = dict(zip(distinct, success_vector(table, distinct, lam)))
    return reset_chain_distribution([lookup[a] for a in policy])


def _metrics(m, policy):
    deltas = np.arange(1, len(m) + 1, dtype=float)
    return float(np.dot(m, deltas)), float(np.dot(m, _expected_energy(policy)))


def equilibrium_metrics(eq: Equilibrium):
    """
    Average AoI sum m(delta)*delta and average energy sum m(delta)*E(pi(delta)).

    Returns:
        tuple: (avg_aoi, avg_energy)
    """
    return _metrics(eq.m, eq.policy)


def solve_equilibrium(eta, table: SuccessTable, pop: PopulationConfig, fp: FixedPointConfig, delta_max,
                      m_init=None) -> Equilibrium:
    """
    Damped nested fixed-point iteration for the stationary mean-field operating point.

    Each outer iteration computes the best response at the current load by
    relative value iteration, measures the load and distribution residuals of
    the current iterate against that response, and either returns (both
    residuals within tolerance) or applies
    Lambda <- (1-beta)*Lambda + beta*Lambda(m, pi) and
    m <- (1-alpha)*m + alpha*mu(pi, Lambda).
    If the iteration does not settle, the lowest-residual iterate is returned
    with converged=False.

    Args:
        eta (float): Energy multiplier
        table (SuccessTable): Calibrated success law
        pop (PopulationConfig): Population parameters
        fp (FixedPointConfig): Damping, tolerances and iteration caps
        delta_max (int): AoI truncation
        m_init (array, optional): Initial distribution; uniform by default

    Returns:
        Equilibrium: The operating point
    """
    if m_init is None:
        m = np.full(delta_max, 1.0 / delta_max)
    else:
        m = np.asarray(m_init, dtype=float)
        if len(m) != delta_max or np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution must be a probability vector over 1..delta_max")
    lam = fp.lambda_init
    v = None
    best = None
    trace = []

    for iteration in range(1, fp.max_outer_iters + 1):
        model = build_model(table, lam, eta, delta_max)
        solution = relative_value_iteration(model, tol=fp.rvi_tol, max_iters=fp.rvi_max_iters, v_init=v)
        v = solution.v
        target_load = induced_load(m, solution.policy, pop)
        law = stationary_distribution(solution.policy, lam, table, delta_max)
        load_res = abs(lam - target_load)
        dist_res = float(np.abs(m - law.m).sum())
        trace.append((load_res, dist_res))
        logger.debug("eta=%g iter %d: lambda=%.6f load_res=%.3e dist_res=%.3e rvi_iters=%d",
                     eta, iteration, lam, load_res, dist_res, solution.iterations)

        score = max(load_res / fp.tol_load, dist_res / fp.tol_dist)
        if load_res <= fp.tol_load and dist_res <= fp.tol_dist:
            return _finish(eta, solution, m, lam, True, iteration, load_res, dist_res, law.degenerate, trace)
        if best is None or score < best[0]:
            best = (score, solution, m.copy(), lam, load_res, dist_res, law.degenerate)

        lam = (1.0 - fp.damp_load) * lam + fp.damp_load * target_load
        m = (1.0 - fp.damp_dist) * m + fp.damp_dist * law.m

    _, solution, m, lam, load_res, dist_res, degenerate = best
    logger.warning("Equilibrium at eta=%g did not converge in %d iterations (load_res=%.3e, dist_res=%.3e)",
                   eta, fp.max_outer_iters, load_res, dist_res)
    return _finish(eta, solution, m, lam, False, fp.max_outer_iters, load_res, dist_res, degenerate, trace)


def _finish(eta, solution: MdpSolution, m, lam, converged, iterations, load_res, dist_res, degenerate, trace):
    avg_aoi, avg_energy = _metrics(m, solution.policy)
    if degenerate:
        logger.warning("Stationary law at eta=%g is a point mass at the truncation state", eta)
    return Equilibrium(
        eta=float(eta),
        policy=list(solution.policy),
        m=m,
        lambda_star=float(lam),
        rho=solution.rho,
        avg_aoi=avg_aoi,
        avg_energy=avg_energy,
        converged=converged,
        outer_iters=iterations,
        load_residual=load_res,
        dist_residual=dist_res,
        v=solution.v,
        degenerate=degenerate,
        residual_trace=trace,
    )


def save_equilibrium(eq: Equilibrium, path, comments=()):
    """
    Writes an equilibrium: summary values as comment lines, then one policy
    record per AoI state with its stationary mass.

    Args:
        eq (Equilibrium): Equilibrium to export
        path (str): Output path
        comments (list): (key, value) pairs written first
    """
    summary = [
        ('eta', format_float(eq.eta)),
        ('lambda_star', format_float(eq.lambda_star)),
        ('rho', format_float(eq.rho)),
        ('avg_aoi', format_float(eq.avg_aoi)),
        ('avg_energy', format_float(eq.avg_energy)),
        ('converged', str(eq.converged).lower()),
        ('outer_iters', str(eq.outer_iters)),
    ]
    rows = [[delta, a.d, a.q, format_float(mass)]
            for delta, (a, mass) in enumerate(zip(eq.policy, eq.m), start=1)]
    write_commented_csv(path, list(comments) + summary, EQUILIBRIUM_HEADER, rows)
