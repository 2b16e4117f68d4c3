"""Point-to-point synchronization schedules with pruned waits.

Rows are dealt to workers round-robin in level order, with the deal counter
running across level boundaries. Each row gets the minimal list of rows it
must observe complete before starting: a dependency is dropped when it is
already implied by same-worker program order or by the transitive closure
of the retained waits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import (
    build_waits_kernel,
    levels_backward_kernel,
    levels_forward_kernel,
    reorder_waits_kernel,
)
from .csr import SparsityPattern
from .errors import ConfigurationError
from .ordering import StagePartition

__all__ = ["SyncSchedule", "build_sync_schedule", "build_triangle_schedule"]


@dataclass
class SyncSchedule:
    """Worker assignment, per-worker program order, and retained waits.

    Arrays are indexed by global row id; rows outside `order` have no
    program slot and empty waits. Completion flags are allocated fresh per
    execution (np.zeros(flag_size)).
    """

    nthreads: int
    owner: np.ndarray
    pos: np.ndarray
    prog_ptr: np.ndarray
    prog_rows: np.ndarray
    wait_ptr: np.ndarray
    wait_rows: np.ndarray
    order: np.ndarray

    @property
    def flag_size(self) -> int:
        return self.wait_ptr.size - 1

    @property
    def total_waits(self) -> int:
        return int(self.wait_rows.size)

    def waits_of(self, r: int) -> np.ndarray:
        return self.wait_rows[self.wait_ptr[r]:self.wait_ptr[r + 1]]


def _build_schedule(levels, dep_ptr, dep_col, n, nthreads, level_of) -> SyncSchedule:
    if nthreads < 1:
        raise ConfigurationError("worker count must be >= 1")
    order = (
        np.concatenate(levels).astype(np.int64)
        if levels
        else np.zeros(0, dtype=np.int64)
    )
    scheduled = np.zeros(n, dtype=bool)
    scheduled[order] = True
    if dep_col.size and not scheduled[dep_col].all():
        raise ConfigurationError("dependency target outside the scheduled rows")

    k = np.arange(order.size, dtype=np.int64)
    owner = np.zeros(n, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    owner[order] = k % nthreads
    pos[order] = k // nthreads
    counts = np.bincount(k % nthreads, minlength=nthreads)
    prog_ptr = np.zeros(nthreads + 1, dtype=np.int64)
    np.cumsum(counts, out=prog_ptr[1:])
    prog_rows = order[np.argsort(k % nthreads, kind="stable")]

    known = np.zeros((n, nthreads), dtype=np.int64)
    maxdeg = int(np.diff(dep_ptr).max()) if n else 0
    tmp = np.empty(max(maxdeg, 1), dtype=np.int64)
    wait_start = np.zeros(n, dtype=np.int64)
    wait_counts = np.zeros(n, dtype=np.int64)
    buf = np.empty(max(dep_col.size, 1), dtype=np.int64)
    total = build_waits_kernel(
        order, level_of, owner, pos, dep_ptr, dep_col, nthreads,
        known, tmp, wait_start, wait_counts, buf,
    )
    wait_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(wait_counts, out=wait_ptr[1:])
    wait_rows = np.empty(total, dtype=np.int64)
    reorder_waits_kernel(wait_start, wait_counts, buf, wait_ptr, wait_rows)
    return SyncSchedule(
        nthreads, owner, pos, prog_ptr, prog_rows, wait_ptr, wait_rows, order
    )


def _triangle_dep_csr(pattern: SparsityPattern, which: str, row_limit: int | None = None):
    rows = np.repeat(
        np.arange(pattern.n, dtype=np.int64), np.diff(pattern.row_start)
    )
    if which == "forward":
        mask = pattern.col < rows
    elif which == "backward":
        mask = pattern.col > rows
    else:
        raise ValueError(f"unknown triangle {which!r}")
    if row_limit is not None:
        mask &= rows < row_limit
    dep_counts = np.bincount(rows[mask], minlength=pattern.n)
    dep_ptr = np.zeros(pattern.n + 1, dtype=np.int64)
    np.cumsum(dep_counts, out=dep_ptr[1:])
    return dep_ptr, pattern.col[mask].astype(np.int64)


def build_sync_schedule(
    partition: StagePartition, pattern: SparsityPattern, nthreads: int
) -> SyncSchedule:
    """Schedule for the upper-stage rows of a level-partitioned factor.

    With rows excluded, the partition must be in level order (upper rows
    occupying [0, n_upper)); limiting dependencies by row prefix is only
    valid then.
    """
    if partition.n_upper < pattern.n:
        from .lower import _check_level_order

        _check_level_order(partition, pattern.n)
    dep_ptr, dep_col = _triangle_dep_csr(pattern, "forward", partition.n_upper)
    level_of = np.zeros(pattern.n, dtype=np.int64)
    for i, rows in enumerate(partition.upper_levels):
        level_of[rows] = i
    return _build_schedule(
        list(partition.upper_levels), dep_ptr, dep_col, pattern.n, nthreads, level_of
    )


def _levels_as_lists(level_of: np.ndarray) -> list:
    order = np.argsort(level_of, kind="stable")
    counts = np.bincount(level_of)
    out = []
    posn = 0
    for c in counts:
        out.append(order[posn:posn + c])
        posn += c
    return out


def build_triangle_schedule(
    pattern: SparsityPattern, nthreads: int, which: str
) -> SyncSchedule:
    """Schedule covering all rows for one triangular solve direction.

    Forward levels come from the strict lower pattern; backward levels from
    the reversed sweep over the strict upper pattern (the anti-transpose
    order, which is the correct one for unsymmetric patterns).
    """
    dep_ptr, dep_col = _triangle_dep_csr(pattern, which)
    if which == "forward":
        level_of = levels_forward_kernel(dep_ptr, dep_col)
    else:
        level_of = levels_backward_kernel(dep_ptr, dep_col)
    return _build_schedule(
        _levels_as_lists(level_of), dep_ptr, dep_col, pattern.n, nthreads, level_of
    )
