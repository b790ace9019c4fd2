"""
Calibration module for ASTRA AoI Tools.
Builds, queries and stores the Monte Carlo success table p_hat(a; lambda).
"""

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from astra_aoi_tools.phy_core import estimate_success
from astra_aoi_tools.utils.errors import CalibrationDigestWarning, TableSchemaError, UnknownActionError
from astra_aoi_tools.utils.helpers import (
    action_set,
    config_digest,
    file_header,
    format_float,
    read_commented_csv,
    spawn_rng,
    write_commented_csv,
)
from astra_aoi_tools.utils.models import Action, SystemConfig

logger = logging.getLogger(__name__)

TABLE_HEADER = ['lambda', 'd', 'q', 'p_hat', 'trials']


class SuccessTable(BaseModel):
    load_grid: List[float] = Field(description="Strictly increasing per-pool loads")
    actions: List[Action] = Field(description="Calibrated actions, idle included")
    p_hat: List[List[float]] = Field(description="Success probability per action (rows) and grid point (columns)")
    trials: int = Field(ge=1, description="Monte Carlo frames per cell")
    seed: int = Field(description="Master seed")
    cfg_digest: str = Field(description="Digest of the PHY configuration used")

    @model_validator(mode='after')
    def _check_shape(self):
        if not self.load_grid:
            raise ValueError("load grid is empty")
        if any(b <= a for a, b in zip(self.load_grid, self.load_grid[1:])):
            raise ValueError("load grid must be strictly increasing")
        if self.load_grid[0] < 0:
            raise ValueError("loads must be non-negative")
        if len(self.p_hat) != len(self.actions):
            raise ValueError("p_hat needs one row per action")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("duplicate actions in table")
        for action, row in zip(self.actions, self.p_hat):
            if len(row) != len(self.load_grid):
                raise ValueError(f"row for {action} has {len(row)} entries, expected {len(self.load_grid)}")
            if any(not 0.0 <= p <= 1.0 for p in row):
                raise ValueError(f"row for {action} has entries outside [0, 1]")
            if action.is_idle and any(p != 0.0 for p in row):
                raise ValueError("idle row must be exactly zero")
        return self

    def index(self, action: Action) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise UnknownActionError(f"Action {action} is not in the success table") from None

    def row(self, action: Action) -> np.ndarray:
        return np.asarray(self.p_hat[self.index(action)], dtype=float)

    @property
    def max_energy(self) -> int:
        return max(a.energy for a in self.actions)


def _calibrate_cell(args):
    cfg, action, load, trials, seed, key = args
    rng = spawn_rng(seed, *key)
    return estimate_success(action, load, cfg, trials, rng)


def calibrate_table(cfg: SystemConfig, load_grid, trials, seed, actions=None, workers=1) -> SuccessTable:
    """
    Estimates p_hat(a; lambda) by Monte Carlo simulation of the asynchronous PHY.

    Each (action, grid point) cell draws from its own stream derived from the
    master seed and the cell position, so the table does not depend on the
    number of workers.

    Args:
        cfg (SystemConfig): System parameters
        load_grid (list): Strictly increasing per-pool loads
        trials (int): Frames per cell
        seed (int): Master seed
        actions (list, optional): Actions to calibrate; defaults to the full action set
        workers (int): Worker processes; 1 runs serially

    Returns:
        SuccessTable: The calibrated table
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    grid = [float(x) for x in load_grid]
    if not grid:
        raise ValueError("load grid is empty")
    actions = sorted(actions or action_set(cfg.D, cfg.R), key=Action.sort_key)

    jobs, positions = [], []
    for ai, action in enumerate(actions):
        if action.is_idle:
            continue
        for gi, load in enumerate(grid):
            jobs.append((cfg, action, load, trials, seed, (ai, gi)))
            positions.append((ai, gi))

    logger.info("Calibrating %d cells (%d actions x %d loads, %d trials each, %d workers)",
                len(jobs), len(actions) - 1, len(grid), trials, workers)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_calibrate_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        counts = [_calibrate_cell(job) for job in jobs]

    p_hat = [[0.0] * len(grid) for _ in actions]
    for (ai, gi), count in zip(positions, counts):
        p_hat[ai][gi] = count / trials
        logger.debug("p_hat(%s; %g) = %.6f", actions[ai], grid[gi], p_hat[ai][gi])

    logger.info("Calibration finished")
    return SuccessTable(load_grid=grid, actions=actions, p_hat=p_hat, trials=trials,
                        seed=seed, cfg_digest=config_digest(cfg))


def success_prob(table: SuccessTable, action: Action, lam) -> float:
    """
    Looks up p_hat(a; lambda) with piecewise-linear interpolation.

    Loads outside the grid are clamped to the nearest endpoint.

    Args:
        table (SuccessTable): Calibrated table
        action (Action): Action to evaluate
        lam (float): Per-pool load

    Returns:
        float: Success probability
    """
    if action.is_idle:
        return 0.0
    return float(np.interp(lam, table.load_grid, table.row(action)))


def success_vector(table: SuccessTable, actions, lam) -> np.ndarray:
    """Success probabilities of several actions at one load."""
    return np.array([success_prob(table, a, lam) for a in actions])


def save_table(table: SuccessTable, path):
    """
    Writes a table as comma-separated text with seed and digest comment lines.

    Args:
        table (SuccessTable): Table to save
        path (str): Output path
    """
    rows = []
    for gi, load in enumerate(table.load_grid):
        for action, row in zip(table.actions, table.p_hat):
            rows.append([format_float(load), action.d, action.q, format_float(row[gi]),
                         0 if action.is_idle else table.trials])
    write_commented_csv(path, file_header(seed=table.seed, cfg_digest=table.cfg_digest), TABLE_HEADER, rows)
    logger.info("Saved success table to %s", path)


def load_table(path, expected_digest: Optional[str] = None) -> SuccessTable:
    """
    Reads a table written by save_table.

    Args:
        path (str): Table file
        expected_digest (str, optional): Digest of the current configuration; a
            mismatch raises CalibrationDigestWarning

    Returns:
        SuccessTable: The loaded table
    """
    comments, header, rows = read_commented_csv(path)
    if header != TABLE_HEADER:
        raise TableSchemaError(f"{path}: expected header {','.join(TABLE_HEADER)}, found {','.join(header)}")
    for key in ('seed', 'cfg_digest'):
        if key not in comments:
            raise TableSchemaError(f"{path}: missing '# {key}=' comment line")

    cells: Dict[tuple, float] = {}
    grid, actions, trials = [], [], set()
    try:
        seed = int(comments['seed'])
        for line_no, row in enumerate(rows, start=1):
            if len(row) != len(TABLE_HEADER):
                raise TableSchemaError(f"{path}: data row {line_no} has {len(row)} fields")
            load, d, q, p, n = float(row[0]), int(row[1]), int(row[2]), float(row[3]), int(row[4])
            action = Action(d=d, q=q)
            if load not in grid:
                grid.append(load)
            if action not in actions:
                actions.append(action)
            if (action, load) in cells:
                raise TableSchemaError(f"{path}: duplicate row for {action} at lambda={load}")
            cells[(action, load)] = p
            if not action.is_idle:
                trials.add(n)
    except TableSchemaError:
        raise
    except ValueError as exc:
        raise TableSchemaError(f"{path}: malformed data row: {exc}") from exc

    if not cells:
        raise TableSchemaError(f"{path}: no data rows")
    if len(cells) != len(grid) * len(actions):
        raise TableSchemaError(f"{path}: expected {len(grid) * len(actions)} rows, found {len(cells)}")
    if len(trials) != 1:
        raise TableSchemaError(f"{path}: inconsistent trial counts {sorted(trials)}")

    actions.sort(key=Action.sort_key)
    try:
        table = SuccessTable(
            load_grid=grid,
            actions=actions,
            p_hat=[[cells[(a, load)] for load in grid] for a in actions],
            trials=trials.pop(),
            seed=seed,
            cfg_digest=comments['cfg_digest'],
        )
    except ValueError as exc:
        raise TableSchemaError(f"{path}: {exc}") from exc

    if expected_digest is not None and expected_digest != table.cfg_digest:
        message = (f"{path} was calibrated with configuration {table.cfg_digest}, "
                   f"current configuration is {expected_digest}")
        logger.warning(message)
        warnings.warn(message, CalibrationDigestWarning, stacklevel=2)
    return table


def check_monotone_congestion(table: SuccessTable, slack=3.0) -> List[dict]:
    """
    Lists grid steps where p_hat increases by more than the Monte Carlo slack
    slack*sqrt(1/trials).

    Returns:
        list: One dict per violation with the action, loads and values
    """
    tolerance = slack * math.sqrt(1.0 / table.trials)
    violations = []
    for action, row in zip(table.actions, table.p_hat):
        for i in range(len(row) - 1):
            if row[i + 1] > row[i] + tolerance:
                violations.append({
                    'action': str(action),
                    'lambda_low': table.load_grid[i],
                    'lambda_high': table.load_grid[i + 1],
                    'p_low': row[i],
                    'p_high': row[i + 1],
                })
    return violations


def pool_diversity_report(table: SuccessTable) -> List[dict]:
    """
    Compares matched-energy pairs a_ij = (i, j) and a_ji = (j, i) with i < j at
    every grid point, recording whether spreading over more pools (a_ij) beats
    repeating inside fewer pools (a_ji).

    Returns:
        list: One dict per (pair, grid point)
    """
    present = set(table.actions)
    report = []
    for action in table.actions:
        i, j = action.d, action.q
        if action.is_idle or i >= j:
            continue
        mirror = Action(d=j, q=i)
        if mirror not in present:
            continue
        spread, repeat = table.row(action), table.row(mirror)
        for gi, load in enumerate(table.load_grid):
            report.append({
                'spread': str(action),
                'repeat': str(mirror),
                'lambda': load,
                'p_spread': float(spread[gi]),
                'p_repeat': float(repeat[gi]),
                'spread_wins': bool(spread[gi] > repeat[gi]),
            })
    return report
