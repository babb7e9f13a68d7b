"""Timing matrix data model and the masking utilities built on it.

The central object is a programs-by-machines matrix of observed execution
times: one row per (program, argument-set) pair, one column per machine,
NaN for cells that were never observed. Everything downstream (regression,
clique scaling, factorization, the evaluation harness) reads this matrix
and never mutates it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

ROW_KEY_SEP = "::"
MATRIX_CSV_HEADER = "program" + ROW_KEY_SEP + "args"
OBSERVATIONS_HEADER = ("program", "args", "machine", "seconds")


class MaskInfeasibleError(ValueError):
    """Requested mask cannot be drawn without emptying a row or column."""


@dataclass(frozen=True)
class Observation:
    """One log record: a program ran with some arguments on some machine."""

    program_id: str
    arg_label: str
    machine_id: str
    time: float

    def __post_init__(self):
        if not self.program_id or not self.arg_label or not self.machine_id:
            raise ValueError(
                f"observation has an empty id: "
                f"({self.program_id!r}, {self.arg_label!r}, {self.machine_id!r})"
            )
        if not (self.time > 0):
            raise ValueError(
                f"non-positive time {self.time!r} for program {self.program_id!r} "
                f"args {self.arg_label!r} on machine {self.machine_id!r}"
            )


class HeldOutCell(NamedTuple):
    row: int
    col: int
    true_time: float


@dataclass(frozen=True, eq=False)
class PCMatrix:
    """Immutable N x M timing matrix with NaN marking missing cells.

    ``row_keys`` are (program_id, arg_label) pairs, ``col_keys`` machine ids.
    The value array is float64 and write-protected; operations that "change"
    the matrix return a new instance.
    """

    row_keys: tuple[tuple[str, str], ...]
    col_keys: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "row_keys", tuple((p, a) for p, a in self.row_keys))
        object.__setattr__(self, "col_keys", tuple(self.col_keys))
        if len(self.row_keys) < 1 or len(self.col_keys) < 1:
            raise ValueError("matrix needs at least one row and one column")
        if len(set(self.row_keys)) != len(self.row_keys):
            raise ValueError("duplicate row keys")
        if len(set(self.col_keys)) != len(self.col_keys):
            raise ValueError("duplicate column keys")
        if vals.shape != (len(self.row_keys), len(self.col_keys)):
            raise ValueError(
                f"value shape {vals.shape} does not match "
                f"{len(self.row_keys)} rows x {len(self.col_keys)} columns"
            )
        present = np.isfinite(vals)
        if np.any(vals[present] <= 0):
            raise ValueError("execution times must be positive")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)

    @property
    def n_cols(self) -> int:
        return len(self.col_keys)

    @property
    def present_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def count_present(self) -> int:
        return int(np.isfinite(self.values).sum())

    def with_cell_missing(self, row: int, col: int) -> "PCMatrix":
        if not self.present_mask[row, col]:
            raise ValueError(f"cell ({row}, {col}) is already missing")
        vals = np.array(self.values)
        vals[row, col] = np.nan
        return PCMatrix(self.row_keys, self.col_keys, vals)

    def with_values(self, vals: np.ndarray) -> "PCMatrix":
        return PCMatrix(self.row_keys, self.col_keys, vals)

    def row_label(self, row: int) -> str:
        p, a = self.row_keys[row]
        return p + ROW_KEY_SEP + a


@dataclass(frozen=True)
class MaskSpec:
    """How much to hide and with which seed; draws are reproducible."""

    fraction: float
    seed: int

    def __post_init__(self):
        if not (0 <= self.fraction < 1):
            raise ValueError(f"mask fraction must be in [0, 1), got {self.fraction}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_matrix(observations: Iterable[Observation]) -> PCMatrix:
    """Assemble the timing matrix from raw observations.

    Rows are grouped by program (programs in order of first appearance,
    argument sets in order of first appearance within each program);
    columns follow machine first appearance. Repeated observations of the
    same cell are averaged.
    """
    obs = list(observations)
    if not obs:
        raise ValueError("no observations")

    prog_order: list[str] = []
    args_by_prog: dict[str, list[str]] = {}
    col_order: list[str] = []
    col_seen: dict[str, int] = {}
    sums: dict[tuple[str, str, str], float] = {}
    counts: dict[tuple[str, str, str], int] = {}

    for o in obs:
        if o.program_id not in args_by_prog:
            args_by_prog[o.program_id] = []
            prog_order.append(o.program_id)
        if o.arg_label not in args_by_prog[o.program_id]:
            args_by_prog[o.program_id].append(o.arg_label)
        if o.machine_id not in col_seen:
            col_seen[o.machine_id] = len(col_order)
            col_order.append(o.machine_id)
        key = (o.program_id, o.arg_label, o.machine_id)
        sums[key] = sums.get(key, 0.0) + o.time
        counts[key] = counts.get(key, 0) + 1

    row_keys = [(p, a) for p in prog_order for a in args_by_prog[p]]
    row_index = {rk: i for i, rk in enumerate(row_keys)}
    vals = np.full((len(row_keys), len(col_order)), np.nan)
    for (p, a, c), s in sums.items():
        vals[row_index[(p, a)], col_seen[c]] = s / counts[(p, a, c)]
    return PCMatrix(tuple(row_keys), tuple(col_order), vals)


def density(m: PCMatrix) -> float:
    """Fraction of cells that hold an observed time."""
    return m.count_present / (m.n_rows * m.n_cols)


def mask_random(m: PCMatrix, spec: MaskSpec) -> tuple[PCMatrix, list[HeldOutCell]]:
    """Hide round(fraction * present) cells uniformly at random.

    Picks that would empty a row or column are re-drawn; if the target
    count cannot be reached this way the mask is infeasible. The draw is a
    seeded PCG64 permutation of the present cells walked in order, which is
    equivalent to sampling without replacement with re-draws (a cell that
    becomes un-removable never becomes removable again).
    """
    present = np.argwhere(m.present_mask)
    k = _round_half_up(spec.fraction * len(present))
    if k == 0:
        return m, []

    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(present))
    row_counts = m.present_mask.sum(axis=1)
    col_counts = m.present_mask.sum(axis=0)

    vals = np.array(m.values)
    heldout: list[HeldOutCell] = []
    for idx in order:
        if len(heldout) == k:
            break
        r, c = present[idx]
        if row_counts[r] < 2 or col_counts[c] < 2:
            continue
        heldout.append(HeldOutCell(int(r), int(c), float(vals[r, c])))
        vals[r, c] = np.nan
        row_counts[r] -= 1
        col_counts[c] -= 1
    if len(heldout) < k:
        raise MaskInfeasibleError(
            f"mask infeasible: wanted {k} cells but only {len(heldout)} can be "
            f"removed without emptying a row or column"
        )
    return m.with_values(vals), heldout


def restore(masked: PCMatrix, heldout: Sequence[HeldOutCell]) -> PCMatrix:
    """Put held-out cells back; inverse of mask_random."""
    vals = np.array(masked.values)
    for r, c, t in heldout:
        vals[r, c] = t
    return masked.with_values(vals)


def inject_outliers(
    m: PCMatrix, fraction: float, lo: float, hi: float, seed: int
) -> PCMatrix:
    """Multiply a random subset of present cells by draws from (lo, hi).

    round(fraction * present) cells are chosen without replacement; each is
    scaled by an independent uniform draw from the open interval. Draws that
    land on the boundary or whose product underflows to zero are re-drawn,
    so the result stays a valid matrix with the same missingness pattern.
    """
    if not (0 <= fraction <= 1):
        raise ValueError(f"outlier fraction must be in [0, 1], got {fraction}")
    if not (0 <= lo < hi):
        raise ValueError(f"invalid interval ({lo}, {hi})")
    present = np.argwhere(m.present_mask)
    k = _round_half_up(fraction * len(present))
    if k == 0:
        return m

    rng = np.random.default_rng(seed)
    chosen = rng.permutation(len(present))[:k]
    vals = np.array(m.values)
    for idx in chosen:
        r, c = present[idx]
        while True:
            u = rng.uniform(lo, hi)
            if u > lo and vals[r, c] * u > 0:
                break
        vals[r, c] = vals[r, c] * u
    return m.with_values(vals)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def read_observations_csv(path) -> list[Observation]:
    """Read the observation log format: header program,args,machine,seconds.

    Extra columns (resource counters and the like) are ignored. Raises with
    the offending line number on malformed input.
    """
    observations = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, expected header "
                             f"{','.join(OBSERVATIONS_HEADER)}")
        missing = [c for c in OBSERVATIONS_HEADER if c not in reader.fieldnames]
        if missing:
            raise ValueError(
                f"{path}: missing required column(s) {missing}; expected header "
                f"{','.join(OBSERVATIONS_HEADER)}"
            )
        for rec in reader:
            line = reader.line_num
            try:
                seconds = float(rec["seconds"])
            except (TypeError, ValueError):
                raise ValueError(
                    f"{path}:{line}: cannot parse seconds value {rec['seconds']!r}"
                ) from None
            try:
                observations.append(
                    Observation(rec["program"] or "", rec["args"] or "",
                                rec["machine"] or "", seconds)
                )
            except ValueError as e:
                raise ValueError(f"{path}:{line}: {e}") from None
    return observations


def write_matrix_csv(m: PCMatrix, path) -> None:
    """Write the matrix: first column program::args, then one column per
    machine, empty string for missing cells."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([MATRIX_CSV_HEADER, *m.col_keys])
        for i in range(m.n_rows):
            row = [m.row_label(i)]
            for j in range(m.n_cols):
                v = m.values[i, j]
                row.append("" if not np.isfinite(v) else repr(float(v)))
            writer.writerow(row)


def read_matrix_csv(path) -> PCMatrix:
    """Read a matrix written by write_matrix_csv.

    Row keys are split on the first ``::``, so program ids must not
    contain that separator.
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != MATRIX_CSV_HEADER:
            raise ValueError(
                f"{path}: expected first header cell {MATRIX_CSV_HEADER!r}, "
                f"got {header[0]!r}" if header else f"{path}: empty header"
            )
        col_keys = tuple(header[1:])
        row_keys = []
        rows = []
        for rec in reader:
            if not rec:
                continue
            line = reader.line_num
            if len(rec) != len(col_keys) + 1:
                raise ValueError(
                    f"{path}:{line}: expected {len(col_keys) + 1} fields, got {len(rec)}"
                )
            if ROW_KEY_SEP not in rec[0]:
                raise ValueError(f"{path}:{line}: row key {rec[0]!r} lacks "
                                 f"{ROW_KEY_SEP!r} separator")
            program, args = rec[0].split(ROW_KEY_SEP, 1)
            row_keys.append((program, args))
            vals = []
            for cell in rec[1:]:
                if cell == "":
                    vals.append(np.nan)
                else:
                    try:
                        vals.append(float(cell))
                    except ValueError:
                        raise ValueError(
                            f"{path}:{line}: cannot parse cell value {cell!r}"
                        ) from None
            rows.append(vals)
    return PCMatrix(tuple(row_keys), col_keys, np.array(rows))
