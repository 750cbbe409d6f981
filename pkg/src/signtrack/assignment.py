"""Minimum-cost bipartite matching with deterministic tie-breaking.

The heavy lifting is delegated to scipy's linear_sum_assignment.  scipy
guarantees an optimal matching but not *which* optimal matching, and a
tracker that feeds on these results needs byte-identical output run to
run.  So after obtaining the optimal total we refine the answer to the
unique assignment whose (row, col) pair list, sorted by row, is
lexicographically smallest among all assignments within a floating-point
tolerance of that total: earlier rows are matched in preference to later
ones, and each row takes the lowest column index it can without giving
up optimality.

Rectangular inputs are padded to square with a constant dummy cost;
every complete matching on the padded matrix carries the same number of
dummy pairs, so padding never distorts which real pairs win.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

DEFAULT_CUTOFF = 0.7

_REL_TOL = 1e-9


def _validated(cost) -> np.ndarray:
    arr = np.asarray(cost, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("cost matrix entries must be finite")
    return arr


def _optimal_total(matrix: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(matrix)
    return float(matrix[rows, cols].sum())


def solve_assignment(cost) -> list[tuple[int, int]]:
    """Return the optimal matching as (row, col) pairs sorted by row.

    min(n_rows, n_cols) pairs are produced.  Among all matchings whose
    total cost ties the optimum (to within a relative tolerance of 1e-9)
    the lexicographically smallest pair list is returned, which makes
    the result a pure function of the matrix values.
    """
    arr = _validated(cost)
    n_rows, n_cols = arr.shape
    if n_rows == 0 or n_cols == 0:
        return []

    n = max(n_rows, n_cols)
    padded = np.zeros((n, n), dtype=float)
    padded[:n_rows, :n_cols] = arr

    best = _optimal_total(padded)
    tol = _REL_TOL * max(1.0, abs(best))

    free_rows = list(range(n))
    free_cols = list(range(n))
    fixed_cost = 0.0
    result: list[tuple[int, int]] = []

    for row in range(n_rows):
        free_rows.remove(row)
        # Real columns in ascending order; a dummy column (meaning this
        # row goes unmatched) is only on the menu when rows outnumber
        # columns, and is tried last.
        candidates = [c for c in free_cols if c < n_cols]
        candidates += [c for c in free_cols if c >= n_cols][:1]
        for col in candidates:
            remaining = padded[np.ix_(free_rows, [c for c in free_cols if c != col])]
            sub = _optimal_total(remaining) if remaining.size else 0.0
            total = fixed_cost + padded[row, col] + sub
            if total <= best + tol:
                fixed_cost += padded[row, col]
                free_cols.remove(col)
                if col < n_cols:
                    result.append((row, col))
                break
        else:
            raise RuntimeError("assignment refinement found no feasible column")

    return result


def match_with_cutoff(cost, threshold: float = DEFAULT_CUTOFF) -> list[tuple[int, int]]:
    """Solve the assignment, then drop pairs costing more than threshold.

    The cutoff is applied after the global solve rather than by masking
    the matrix first, so an expensive pair can still soak up a row and
    column during optimization before being discarded.
    """
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    arr = _validated(cost)
    return [(r, c) for r, c in solve_assignment(arr) if arr[r, c] <= threshold]
