"""
Synthetic success tables shared by the tests.
"""

import math

from astra_aoi_tools.calibration import SuccessTable
from astra_aoi_tools.utils.helpers import action_set
from astra_aoi_tools.utils.models import Action, PopulationConfig

SYNTHETIC_GRID = [0.0, 5.0, 10.0, 20.0, 40.0]
SYNTHETIC_BASE = {
    Action(d=1, q=1): 0.90,
    Action(d=1, q=2): 0.97,
    Action(d=2, q=1): 0.93,
    Action(d=2, q=2): 0.99,
}


def synthetic_p(action, load):
    """p(a; lambda) = base(a) * exp(-lambda * E(a) / 30) on the grid nodes."""
    if action.is_idle:
        return 0.0
    return SYNTHETIC_BASE[action] * math.exp(-load * action.energy / 30.0)


def make_table(trials=1000, seed=7, cfg_digest='synthetic') -> SuccessTable:
    """Idle plus the four actions with d, q <= 2, congestion decreasing in load and energy."""
    actions = action_set(2, 2)
    return SuccessTable(
        load_grid=list(SYNTHETIC_GRID),
        actions=actions,
        p_hat=[[synthetic_p(a, x) for x in SYNTHETIC_GRID] for a in actions],
        trials=trials,
        seed=seed,
        cfg_digest=cfg_digest,
    )


def constant_table(values, grid=(0.0, 10.0, 40.0)) -> SuccessTable:
    """Table whose rows are constant in load; values maps non-idle actions to p."""
    actions = [Action(d=0, q=0)] + sorted(values, key=Action.sort_key)
    rows = [[0.0] * len(grid)] + [[values[a]] * len(grid) for a in actions[1:]]
    return SuccessTable(load_grid=list(grid), actions=actions, p_hat=rows, trials=1000, seed=1,
                        cfg_digest='constant')


SMALL_POPULATION = PopulationConfig(N=10, R=2, T_f=1.0)
