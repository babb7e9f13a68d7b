"""Consumers of a completed matrix: pick a machine per program, or pack a
batch of programs onto machines with a simple list-scheduling heuristic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .matrix import PCMatrix


class Rationale(str, enum.Enum):
    MIN_PREDICTED = "min_predicted"
    COLD_ROW_RANKED_FASTEST = "cold_row_ranked_fastest"


@dataclass(frozen=True)
class PlacementDecision:
    program: str
    args: str
    machine: str
    predicted: float | None  # unknown for cold rows placed by ranking
    rationale: Rationale

    def to_json(self) -> dict:
        return {"program": self.program, "args": self.args,
                "machine": self.machine,
                "predicted_seconds": self.predicted,
                "rationale": self.rationale.value}


def greedy_place(
    completed: PCMatrix,
    row: int,
    ranking: list[str] | None = None,
) -> PlacementDecision:
    """Choose the machine with the smallest predicted time for one row.

    Ties go to the lexicographically smallest machine id. A row with no
    predictions at all (cold) falls back to the first machine of the
    supplied performance ranking; a partially filled row is rejected since
    the comparison would be incomplete.
    """
    times = completed.values[row]
    present = completed.present_mask[row]
    program, args = completed.row_keys[row]
    if not present.any():
        if not ranking:
            raise ValueError(
                f"cold row {completed.row_label(row)}: no predictions and "
                f"no machine ranking supplied")
        machine = ranking[0]
        if machine not in completed.col_keys:
            raise ValueError(f"ranked machine {machine!r} is not a column "
                             f"of the matrix")
        return PlacementDecision(program, args, machine, None,
                                 Rationale.COLD_ROW_RANKED_FASTEST)
    if not present.all():
        raise ValueError(f"row {completed.row_label(row)} is only partially "
                         f"predicted; complete the matrix first")
    best = min(range(completed.n_cols),
               key=lambda j: (times[j], completed.col_keys[j]))
    return PlacementDecision(program, args, completed.col_keys[best],
                             float(times[best]), Rationale.MIN_PREDICTED)


def schedule_batch(
    completed: PCMatrix,
    rows: list[int],
) -> tuple[dict[str, list[int]], float]:
    """Assign a batch of rows to machines, longest jobs first.

    Rows are processed in descending order of their best-case (minimum
    predicted) time; each goes to the machine where current load plus its
    predicted time is smallest, ties to the smaller machine id. Returns
    the per-machine row lists (in assignment order) and the makespan.
    Heuristic: the exact minimum-makespan problem is NP-hard.
    """
    for r in rows:
        if not completed.present_mask[r].all():
            raise ValueError(f"row {completed.row_label(r)} is not fully "
                             f"predicted")
    assignment: dict[str, list[int]] = {c: [] for c in completed.col_keys}
    if not rows:
        return assignment, 0.0

    times = completed.values
    order = sorted(rows, key=lambda r: -float(np.min(times[r])))
    loads = np.zeros(completed.n_cols)
    for r in order:
        j = min(range(completed.n_cols),
                key=lambda j: (loads[j] + times[r, j], completed.col_keys[j]))
        loads[j] += times[r, j]
        assignment[completed.col_keys[j]].append(r)
    return assignment, float(loads.max())
