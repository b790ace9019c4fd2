"""
MDP solver module for ASTRA AoI Tools.
Solves the fixed-load representative average-cost MDP over AoI states by relative
value iteration, reports its structural properties, and provides the stationary
occupation-measure linear program as an independent small-scale oracle.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, Field

from astra_aoi_tools.calibration import SuccessTable, success_vector
from astra_aoi_tools.utils.errors import ConvergenceError, LinearProgramError, UndefinedThresholdError
from astra_aoi_tools.utils.helpers import format_float, write_commented_csv
from astra_aoi_tools.utils.models import Action

logger = logging.getLogger(__name__)

TIE_TOL = 1e-10
LP_SIZE_LIMIT = 5000
POLICY_HEADER = ['delta', 'd', 'q', 'V']


@dataclass
class MdpModel:
    """Representative-device MDP at a fixed load: AoI states 1..delta_max."""
    delta_max: int
    actions: List[Action]
    p: np.ndarray
    eta: float
    lam: float = 0.0
    cost_offset: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.delta_max < 2:
            raise ValueError("delta_max must be at least 2")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if len(self.actions) == 0 or len(self.actions) != len(self.p):
            raise ValueError("need one success probability per action")
        if np.any(self.p < 0) or np.any(self.p > 1):
            raise ValueError("success probabilities must lie in [0, 1]")
        for action, prob in zip(self.actions, self.p):
            if action.is_idle and prob != 0:
                raise ValueError("the idle action cannot succeed")
        order = sorted(range(len(self.actions)), key=lambda i: self.actions[i].sort_key())
        self.actions = [self.actions[i] for i in order]
        self.p = self.p[order]

    @property
    def energies(self) -> np.ndarray:
        return np.array([a.energy for a in self.actions], dtype=float)

    @property
    def degenerate(self) -> bool:
        return bool(np.all(self.p == 0))

    def stage_costs(self) -> np.ndarray:
        """c(delta, a) = delta + eta*E(a) (+ offset), shape (delta_max, |A|)."""
        deltas = np.arange(1, self.delta_max + 1, dtype=float)
        return deltas[:, None] + self.eta * self.energies[None, :] + self.cost_offset

    def fail_index(self) -> np.ndarray:
        """Zero-based next state after a failed frame: min(delta+1, delta_max)."""
        return np.minimum(np.arange(1, self.delta_max + 1), self.delta_max - 1)

    def q_values(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return (self.stage_costs() + self.p[None, :] * v[0]
                + (1.0 - self.p)[None, :] * v[self.fail_index()][:, None])


@dataclass
class MdpSolution:
    model: MdpModel
    rho: float
    v: np.ndarray
    policy: List[Action]
    policy_index: np.ndarray
    q_values: np.ndarray
    iterations: int
    residual: float
    degenerate: bool = False

    def h(self) -> np.ndarray:
        """h(delta) = V(min(delta+1, delta_max)) - V(1) for every state."""
        return self.v[self.model.fail_index()] - self.v[0]


class StructureReport(BaseModel):
    h_values: List[float] = Field(description="h(delta) for delta = 1..delta_max")
    h_nondecreasing: bool = Field(description="h is nondecreasing in delta")
    switch_points: List[int] = Field(description="States delta where pi(delta) differs from pi(delta-1)")
    energy_nondecreasing: bool = Field(description="E(pi(delta)) is nondecreasing in delta")
    effective_actions: List[Action] = Field(description="Dominance-filtered action chain, by energy")
    threshold_ordered: bool = Field(description="Chain index of pi(delta) is nondecreasing in delta")
    argmin_agreement: bool = Field(description="pi(delta) minimises eta*E(a) - p(a)*h(delta) at every state")
    disagreements: List[int] = Field(default_factory=list, description="States where the agreement fails")
    dominated_selected: List[Action] = Field(default_factory=list, description="Dominated actions used by the policy")


@dataclass
class OccupationResult:
    model: MdpModel
    rho: float
    x: np.ndarray
    m: np.ndarray
    policy_probs: np.ndarray
    policy: List[Action]
    pivots: int = 0


def build_model(table: SuccessTable, lam, eta, delta_max, actions=None, effective=False) -> MdpModel:
    """
    Builds the fixed-load MDP from a calibrated table.

    Args:
        table (SuccessTable): Calibrated success law
        lam (float): Per-pool load
        eta (float): Energy multiplier
        delta_max (int): AoI truncation
        actions (list, optional): Restrict to these actions; defaults to the table's
        effective (bool): Keep only the dominance-filtered actions

    Returns:
        MdpModel: The model
    """
    if lam < 0:
        raise ValueError("load must be non-negative")
    actions = list(actions or table.actions)
    p = success_vector(table, actions, lam)
    if effective:
        keep = filter_dominated(actions, p, eta)
        lookup = dict(zip(actions, p))
        actions, p = keep, np.array([lookup[a] for a in keep])
    return MdpModel(delta_max=delta_max, actions=actions, p=p, eta=eta, lam=lam)


def next_state_law(model: MdpModel, delta, action: Action) -> Dict[int, float]:
    """
    Transition law from AoI state delta under an action.

    Returns:
        dict: Next state mapped to its probability (zero-probability states omitted)
    """
    if not 1 <= delta <= model.delta_max:
        raise ValueError(f"state {delta} outside 1..{model.delta_max}")
    prob = float(model.p[model.actions.index(action)])
    law: Dict[int, float] = {}
    if prob > 0:
        law[1] = prob
    if prob < 1:
        nxt = min(delta + 1, model.delta_max)
        law[nxt] = law.get(nxt, 0.0) + 1.0 - prob
    return law


def _select(q):
    """Row-wise argmin, ties within TIE_TOL going to the first (lowest-energy) action."""
    q_min = q.min(axis=1, keepdims=True)
    return np.argmax(q <= q_min + TIE_TOL * np.maximum(1.0, np.abs(q_min)), axis=1)


def relative_value_iteration(model: MdpModel, tol=1e-9, max_iters=1_000_000, reference_state=1,
                             aperiodicity=0.9, v_init=None) -> MdpSolution:
    """
    Solves the average-cost Bellman equation by relative value iteration.

    The iteration runs on the aperiodic transform tau*P + (1-tau)*I of the
    kernel, which has the same relative values and minimisers, and normalises
    V at the reference state after every sweep. It stops when the span of
    successive differences is at most tol.

    Args:
        model (MdpModel): The MDP
        tol (float): Span tolerance
        max_iters (int): Iteration cap
        reference_state (int): AoI state pinned to V = 0
        aperiodicity (float): tau in (0, 1]
        v_init (array, optional): Warm-start relative values

    Returns:
        MdpSolution: Average cost, relative values, policy and Q-values
    """
    if not 0 < aperiodicity <= 1:
        raise ValueError("aperiodicity must lie in (0, 1]")
    if not 1 <= reference_state <= model.delta_max:
        raise ValueError("reference state outside the state space")

    ref = reference_state - 1
    tau = aperiodicity
    stage = model.stage_costs()
    p = model.p[None, :]
    fail = model.fail_index()

    v = np.zeros(model.delta_max) if v_init is None else np.array(v_init, dtype=float)
    v -= v[ref]
    span = np.inf
    for iteration in range(1, max_iters + 1):
        q = stage + p * v[0] + (1.0 - p) * v[fail][:, None]
        tv = (1.0 - tau) * v + tau * q.min(axis=1)
        diff = tv - v
        span = diff.max() - diff.min()
        v = tv - tv[ref]
        if span <= tol * tau:
            break
    else:
        raise ConvergenceError(f"relative value iteration did not converge in {max_iters} iterations "
                               f"(span {span / tau:.3e})", residual=span / tau, iterations=max_iters)

    rho = 0.5 * (diff.max() + diff.min()) / tau
    q = model.q_values(v)
    index = _select(q)
    residual = float(np.max(np.abs(rho + v - q.min(axis=1))))
    if model.degenerate:
        logger.warning("All actions have zero success probability at load %g; AoI absorbs at %d",
                       model.lam, model.delta_max)
    logger.debug("RVI converged in %d iterations: rho=%.9f residual=%.2e", iteration, rho, residual)
    return MdpSolution(model=model, rho=float(rho), v=v, policy=[model.actions[i] for i in index],
                       policy_index=index, q_values=q, iterations=iteration, residual=residual,
                       degenerate=model.degenerate)


def filter_dominated(actions: Sequence[Action], p, eta=0.0) -> List[Action]:
    """
    Removes dominated actions.

    An action is dominated when another has energy no larger and success no
    smaller, with one of the two strict. Among actions with equal energy and
    equal success the lexicographically smallest (d, q) is kept. Dominance does
    not depend on eta; the argument is validated and kept for call symmetry
    with pairwise_threshold.

    Args:
        actions (list): Candidate actions
        p (sequence): Success probability of each action
        eta (float): Energy multiplier (non-negative)

    Returns:
        list: Surviving actions sorted by energy
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    pairs = sorted(zip(actions, (float(x) for x in p)), key=lambda ap: ap[0].sort_key())
    survivors = []
    for a, pa in pairs:
        dominated = False
        for b, pb in pairs:
            if b == a:
                continue
            if b.energy <= a.energy and pb >= pa and (b.energy < a.energy or pb > pa):
                dominated = True
            elif b.energy == a.energy and pb == pa and (b.d, b.q) < (a.d, a.q):
                dominated = True
            if dominated:
                break
        if not dominated:
            survivors.append(a)
    return survivors


def pairwise_threshold(a_i: Action, a_j: Action, p: Mapping[Action, float], eta) -> float:
    """
    Value of h at which the costlier, more reliable action a_j starts to beat a_i.

    H_ij = eta*(E_j - E_i)/(p_j - p_i); a_j is at least as good as a_i exactly
    when h >= H_ij.

    Args:
        a_i (Action): Cheaper action
        a_j (Action): Costlier action
        p (dict): Success probability per action
        eta (float): Energy multiplier

    Returns:
        float: The switching value H_ij
    """
    p_i, p_j = float(p[a_i]), float(p[a_j])
    if a_j.energy <= a_i.energy or p_j <= p_i:
        raise UndefinedThresholdError(
            f"threshold between {a_i} and {a_j} needs E and p both strictly increasing "
            f"(E: {a_i.energy}->{a_j.energy}, p: {p_i:.6g}->{p_j:.6g})")
    return eta * (a_j.energy - a_i.energy) / (p_j - p_i)


def extract_structure(solution: MdpSolution, tol=1e-9) -> StructureReport:
    """
    Reports the structure of a converged policy: monotonicity of h, switch
    points, energy monotonicity, threshold ordering along the dominance-filtered
    chain and agreement with the argmin of eta*E(a) - p(a)*h(delta).

    Args:
        solution (MdpSolution): Converged solution
        tol (float): Relative tolerance for the monotonicity and argmin checks

    Returns:
        StructureReport: The structure summary
    """
    model = solution.model
    h = solution.h()
    scale = tol * max(1.0, float(np.max(np.abs(h))))
    h_monotone = bool(np.all(np.diff(h) >= -scale))

    policy = solution.policy
    switch_points = [delta for delta in range(2, model.delta_max + 1) if policy[delta - 1] != policy[delta - 2]]
    energies = [a.energy for a in policy]
    energy_monotone = all(b >= a for a, b in zip(energies, energies[1:]))

    chain = filter_dominated(model.actions, model.p, model.eta)
    chain_index = [chain.index(a) if a in chain else -1 for a in policy]
    threshold_ordered = -1 not in chain_index and all(b >= a for a, b in zip(chain_index, chain_index[1:]))
    dominated = sorted({a for a in policy if a not in chain}, key=Action.sort_key)

    g = model.eta * model.energies[None, :] - model.p[None, :] * h[:, None]
    chosen = g[np.arange(model.delta_max), solution.policy_index]
    g_min = g.min(axis=1)
    slack = tol * np.maximum(1.0, np.abs(g_min)) + scale
    disagreements = [int(i + 1) for i in np.flatnonzero(chosen > g_min + slack)]

    return StructureReport(
        h_values=[float(x) for x in h],
        h_nondecreasing=h_monotone,
        switch_points=switch_points,
        energy_nondecreasing=energy_monotone,
        effective_actions=chain,
        threshold_ordered=threshold_ordered,
        argmin_agreement=not disagreements,
        disagreements=disagreements,
        dominated_selected=dominated,
    )


def _bland(A, b, cost, basis, tol, max_pivots):
    """
    Revised primal simplex with Bland's rule.

    The basic solution and the simplex multipliers are re-solved from A[:, basis]
    at every pivot, so rounding error does not build up across pivots.
    """
    m = A.shape[0]
    cost_tol = tol * max(1.0, np.abs(cost).max(initial=0.0))
    pivots = 0
    while True:
        B = A[:, basis]
        x_b = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, cost[basis])
        reduced = cost - A.T @ y
        reduced[basis] = 0.0
        entering = np.flatnonzero(reduced < -cost_tol)
        if entering.size == 0:
            return np.clip(x_b, 0.0, None), pivots
        col = int(entering[0])
        direction = np.linalg.solve(B, A[:, col])
        positive = direction > tol * max(1.0, np.abs(direction).max())
        if not positive.any():
            raise LinearProgramError("linear program is unbounded")
        ratios = np.full(m, np.inf)
        ratios[positive] = np.clip(x_b[positive], 0.0, None) / direction[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, best))
        row = min(ties, key=lambda r: basis[r])
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise LinearProgramError(f"simplex exceeded {max_pivots} pivots")


def simplex_solve(A, b, c, tol=1e-10, max_pivots=100_000, feas_tol=1e-10):
    """
    Minimises c.x subject to A x = b, x >= 0 with a two-phase revised simplex
    and Bland's anti-cycling rule.

    Args:
        A (array): Equality constraint matrix (m x n)
        b (array): Right-hand side
        c (array): Cost vector
        tol (float): Relative pricing and pivot tolerance
        max_pivots (int): Pivot cap per phase
        feas_tol (float): Largest accepted |A x - b| at the returned point

    Returns:
        tuple: (x, objective value, pivots)
    """
    A_orig = np.array(A, dtype=float)
    b_orig = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    A, b = A_orig.copy(), b_orig.copy()
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    m, n = A.shape

    # phase 1 on [A | I] with the artificials as the starting basis
    A1 = np.hstack([A, np.eye(m)])
    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    x_b, pivots = _bland(A1, b, phase1_cost, basis, tol, max_pivots)
    infeasibility = float(sum(x_b[r] for r in range(m) if basis[r] >= n))
    if infeasibility > 1e-9:
        raise LinearProgramError(f"linear program is infeasible (phase-1 value {infeasibility:.3e})")

    # drive zero-level artificials out of the basis; rows where that fails are redundant
    keep_rows = list(range(m))
    for row in range(m):
        if basis[row] < n:
            continue
        tableau_row = np.linalg.solve(A1[:, basis].T, np.eye(m)[row]) @ A
        tableau_row[[j for j in basis if j < n]] = 0.0
        candidates = np.flatnonzero(np.abs(tableau_row) > tol * max(1.0, np.abs(tableau_row).max()))
        if candidates.size:
            basis[row] = int(candidates[0])
            pivots += 1
        else:
            keep_rows.remove(basis[row] - n)
    basis = [j for j in basis if j < n]
    A, b = A[keep_rows], b[keep_rows]

    x_b, phase2_pivots = _bland(A, b, c, basis, tol, max_pivots)
    pivots += phase2_pivots
    x = np.zeros(n)
    x[basis] = x_b

    residual = float(np.abs(A_orig @ x - b_orig).max(initial=0.0))
    if residual > feas_tol:
        raise LinearProgramError(f"simplex solution violates the constraints by {residual:.3e}")
    return x, float(c @ x), pivots


def occupation_lp_solve(model: MdpModel) -> OccupationResult:
    """
    Solves the average-cost MDP as a linear program over stationary
    state-action occupation measures.

    minimise sum x(delta,a)*(delta + eta*E(a)) subject to sum x = 1, the flow
    balance of every state, and x >= 0. The policy is recovered by normalising x
    within each visited state; unvisited states take the cheapest action.

    Args:
        model (MdpModel): A small MDP (delta_max * |A| <= 5000)

    Returns:
        OccupationResult: Optimal value, occupation measure, marginal and policy
    """
    S, K = model.delta_max, len(model.actions)
    if S * K > LP_SIZE_LIMIT:
        raise LinearProgramError(f"dense LP with {S * K} variables exceeds the limit of {LP_SIZE_LIMIT}")

    fail = model.fail_index()
    A = np.zeros((S + 1, S * K))
    A[0, :] = 1.0
    for s in range(S):
        for k in range(K):
            col = s * K + k
            A[1 + s, col] += 1.0
            A[1 + 0, col] -= model.p[k]
            A[1 + fail[s], col] -= 1.0 - model.p[k]
    b = np.zeros(S + 1)
    b[0] = 1.0
    cost = (model.stage_costs()).ravel()

    x, rho, pivots = simplex_solve(A, b, cost)
    x = x.reshape(S, K)
    m = x.sum(axis=1)
    probs = np.zeros_like(x)
    visited = m > 1e-12
    probs[visited] = x[visited] / m[visited, None]
    probs[~visited, 0] = 1.0
    policy = [model.actions[i] for i in probs.argmax(axis=1)]
    logger.debug("Occupation LP solved with %d pivots: rho=%.9f", pivots, rho)
    return OccupationResult(model=model, rho=rho, x=x, m=m, policy_probs=probs, policy=policy, pivots=pivots)


def save_solution(solution: MdpSolution, path, comments=()):
    """
    Writes one record per AoI state: delta, chosen d, chosen q, V(delta).

    Args:
        solution (MdpSolution): Solution to export
        path (str): Output path
        comments (list): (key, value) pairs written as leading comment lines
    """
    rows = [[delta, a.d, a.q, format_float(v)]
            for delta, (a, v) in enumerate(zip(solution.policy, solution.v), start=1)]
    header = list(comments) + [('rho', format_float(solution.rho)), ('eta', format_float(solution.model.eta)),
                               ('lambda', format_float(solution.model.lam))]
    write_commented_csv(path, header, POLICY_HEADER, rows)
