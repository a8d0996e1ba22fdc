"""
Output Module

Writes solution fields and study tables as CSV (17 significant digits) and
reports as JSON with sorted keys, so identical runs produce identical bytes.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .constants import (
    CSV_AXIS_COLUMNS,
    CSV_VALUE_COLUMN,
    EMOJI_CHECK,
    JSON_INDENT,
    SNAPSHOT_CSV_TEMPLATE,
)
from .grid import GridFunction
from .types import ConvergenceRow
from .utils import format_float, to_builtin

logger = logging.getLogger(__name__)


def ensure_directory(path: str | Path) -> Path:
    output_path = Path(path)
    output_path.mkdir(parents=True, exist_ok=True)
    return output_path


def write_field_csv(u: GridFunction, path: str | Path) -> Path:
    """
    Write a grid function as rows x[,y],u in node order (C order)

    Args:
        u: Grid function
        path: Target file

    Returns:
        The written path
    """
    path = Path(path)
    coordinates = [x.ravel() for x in u.grid.nodes]
    values = u.values.ravel()
    header = list(CSV_AXIS_COLUMNS[: u.grid.d]) + [CSV_VALUE_COLUMN]

    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for j in range(values.size):
            writer.writerow([format_float(x[j]) for x in coordinates] + [format_float(values[j])])

    logger.debug("Wrote %d nodal values to %s", values.size, path)
    return path


def snapshot_filename(t: float) -> str:
    """
    File name of the snapshot at time t

    Example:
        >>> snapshot_filename(0.1)
        "solution_t0.1.csv"
    """
    return SNAPSHOT_CSV_TEMPLATE.format(time=f"{t:g}")


def write_json(data: Any, path: str | Path) -> Path:
    """Write JSON with sorted keys and a trailing newline"""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(to_builtin(data), handle, indent=JSON_INDENT, sort_keys=True)
        handle.write("\n")
    return path


def write_convergence_csv(rows: Iterable[ConvergenceRow], path: str | Path) -> Path:
    """Write n, error, order; the order column is empty on the first level"""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["n", "error", "order"])
        for row in rows:
            order = "" if row["order"] is None or not np.isfinite(row["order"]) else format_float(row["order"])
            writer.writerow([row["n"], format_float(row["error"]), order])
    print(f"{EMOJI_CHECK} Saved convergence table: {path}")
    return path
