"""
Convergence Module

Grid refinement studies: solve one case on several grids and report the sup
error per level with the observed order log(e_a / e_b) / log(n_b / n_a).
Errors are measured against the case's closed-form reference when it has one,
otherwise against the finest level (coarse nodes are a subset of fine nodes).
"""

import copy
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from .case_loader import build_case, build_reference
from .constants import EMOJI_CHART, MODE_ELLIPTIC
from .elliptic import solve_elliptic
from .exceptions import ConfigurationError
from .expr import evaluate
from .grid import Grid
from .parabolic import solve_parabolic
from .types import CaseConfig, ConvergenceRow

logger = logging.getLogger(__name__)


def solve_level(config: CaseConfig, n: int) -> tuple[int, np.ndarray]:
    """
    Solve a case with n cells per axis

    Returns:
        Tuple of (n, nodal values); the final state for parabolic cases
    """
    level = copy.deepcopy(config)
    level["grid"]["n"] = n
    case = build_case(level)
    if case.mode == MODE_ELLIPTIC:
        u, _ = solve_elliptic(case.problem, case.continuation, case.newton)
    else:
        trajectory, _ = solve_parabolic(case.problem, case.parabolic)
        u = trajectory.final
    logger.info("Level n=%d solved", n)
    return n, np.array(u.values)


def observed_order(coarse: ConvergenceRow, fine: ConvergenceRow) -> Optional[float]:
    """log(e_coarse / e_fine) / log(n_fine / n_coarse); None when undefined"""
    if coarse["error"] <= 0.0 or fine["error"] <= 0.0:
        return None
    return math.log(coarse["error"] / fine["error"]) / math.log(fine["n"] / coarse["n"])


def _reference_error(config: CaseConfig, n: int, values: np.ndarray) -> float:
    grid = Grid(config["grid"]["d"], n)
    env = {name: x for name, x in zip(("x", "y"), grid.nodes)}
    if config["mode"] != MODE_ELLIPTIC:
        env["t"] = config["parabolic"]["T"]
    exact = np.broadcast_to(evaluate(build_reference(config), env), grid.shape)
    return float(np.max(np.abs(values - exact)))


def _self_error(finest: tuple[int, np.ndarray], n: int, values: np.ndarray) -> float:
    n_fine, fine = finest
    if n_fine % n:
        raise ConfigurationError("levels", f"level {n} does not divide the finest level {n_fine}")
    ratio = n_fine // n
    restricted = fine[(slice(None, None, ratio),) * fine.ndim]
    return float(np.max(np.abs(values - restricted)))


def run_convergence(config: CaseConfig, levels: list[int], jobs: int = 1) -> list[ConvergenceRow]:
    """
    Refinement study over the given levels

    Args:
        config: Validated case config
        levels: Cells per axis, e.g. [32, 64, 128, 256]
        jobs: Worker processes for independent levels

    Returns:
        Rows ordered by n (the finest level is omitted under self-reference)

    Raises:
        ConfigurationError: On fewer than two distinct levels or levels that
            do not nest under self-reference
    """
    levels = sorted(set(int(n) for n in levels))
    if len(levels) < 2:
        raise ConfigurationError("levels", "a convergence study needs at least two levels")

    print(f"{EMOJI_CHART} Convergence study of '{config['name']}' over n = {', '.join(map(str, levels))}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            solved = list(pool.map(solve_level, [config] * len(levels), levels))
    else:
        solved = [solve_level(config, n) for n in levels]

    rows: list[ConvergenceRow] = []
    if "reference" in config:
        for n, values in solved:
            rows.append(ConvergenceRow(n=n, error=_reference_error(config, n, values), order=None))
    else:
        for n, values in solved[:-1]:
            rows.append(ConvergenceRow(n=n, error=_self_error(solved[-1], n, values), order=None))

    for coarse, fine in zip(rows, rows[1:]):
        fine["order"] = observed_order(coarse, fine)
    return rows
