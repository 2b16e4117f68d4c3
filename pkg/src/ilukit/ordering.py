"""Dependency levels, two-stage partitioning, and fill-reducing RCM.

Levels are longest-path depths in the DAG induced by a strictly
lower-triangular pattern: every stored entry (r, c) with c < r means row r
must wait for row c. Rows sharing a depth can run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csr import Permutation, SparsityPattern, symmetrize_pattern
from .errors import ConfigurationError

__all__ = [
    "LOWER_A",
    "LOWER_A_PLUS_AT",
    "LevelSchedule",
    "PartitionConfig",
    "StagePartition",
    "compute_levels",
    "compute_levels_backward",
    "partition_stages",
    "build_level_permutation",
    "contiguous_partition",
    "rcm_order",
    "level_stats",
]

LOWER_A = "lower_A"
LOWER_A_PLUS_AT = "lower_AplusAT"
BACKWARD_UPPER = "backward_upper"


@dataclass
class LevelSchedule:
    """Row -> level assignment plus per-level row lists (level-ascending)."""

    level_of: np.ndarray
    levels: list
    source_pattern_kind: str

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def n(self) -> int:
        return self.level_of.size


@dataclass
class PartitionConfig:
    min_level_rows: int = 16
    density_factor: float = 4.0
    suffix_only: bool = True

    def validate(self) -> None:
        if self.min_level_rows < 1:
            raise ConfigurationError("min_level_rows must be >= 1")
        if not self.density_factor > 0:
            raise ConfigurationError("density_factor must be positive")


@dataclass
class StagePartition:
    """Levels kept for the scheduled stage plus the rows moved to the end."""

    upper_levels: list           # list of row-index arrays, level order kept
    lower_rows: np.ndarray       # rows excluded, original relative order
    cut_level: int               # first level index moved to the lower stage
    config: PartitionConfig = field(default_factory=PartitionConfig)
    levels_kind: str = LOWER_A_PLUS_AT   # source pattern of the level schedule

    @property
    def n_upper(self) -> int:
        return sum(len(l) for l in self.upper_levels)

    @property
    def n(self) -> int:
        return self.n_upper + len(self.lower_rows)


def _levels_from_depths(level_of: np.ndarray) -> list:
    order = np.argsort(level_of, kind="stable")
    counts = np.bincount(level_of, minlength=int(level_of.max()) + 1 if level_of.size else 0)
    levels = []
    pos = 0
    for c in counts:
        levels.append(order[pos:pos + c])
        pos += c
    return levels


def compute_levels(lower: SparsityPattern, kind: str = LOWER_A) -> LevelSchedule:
    """Longest-path levels of a strictly lower-triangular dependency pattern."""
    from ._kernels import levels_forward_kernel

    if lower.n == 0:
        return LevelSchedule(np.zeros(0, dtype=np.int64), [], kind)
    level_of = levels_forward_kernel(lower.row_start, lower.col)
    return LevelSchedule(level_of, _levels_from_depths(level_of), kind)


def compute_levels_backward(pattern: SparsityPattern) -> LevelSchedule:
    """Levels for the backward (upper-triangle) sweep: row i waits on j > i.

    Depths are longest paths in the reversed DAG, so level 0 holds rows with
    no successors and the sweep runs roughly back-to-front.
    """
    from ._kernels import levels_backward_kernel

    level_of = levels_backward_kernel(pattern.row_start, pattern.col)
    return LevelSchedule(level_of, _levels_from_depths(level_of), BACKWARD_UPPER)


def partition_stages(
    schedule: LevelSchedule,
    row_nnz: np.ndarray,
    config: PartitionConfig | None = None,
) -> StagePartition:
    """Split levels into a scheduled stage and a trailing excluded suffix.

    A level is acceptable when it has at least min_level_rows rows and its
    mean row density is at most density_factor times the matrix mean. Only a
    suffix of failing levels is excluded: a thin level sandwiched between
    large ones stays, since moving it would drag all its dependents along.
    With suffix_only disabled the cut instead happens at the first failing
    level.
    """
    config = config or PartitionConfig()
    config.validate()
    row_nnz = np.asarray(row_nnz)
    mean_nnz = row_nnz.mean() if row_nnz.size else 0.0
    levels = schedule.levels
    ok = [
        len(rows) >= config.min_level_rows
        and (row_nnz[rows].mean() if len(rows) else 0.0) <= config.density_factor * mean_nnz
        for rows in levels
    ]
    if config.suffix_only:
        cut = len(levels)
        while cut > 0 and not ok[cut - 1]:
            cut -= 1
    else:
        cut = len(levels)
        for i, good in enumerate(ok):
            if not good:
                cut = i
                break
    upper = [rows.copy() for rows in levels[:cut]]
    lower = (
        np.concatenate([levels[i] for i in range(cut, len(levels))])
        if cut < len(levels)
        else np.zeros(0, dtype=np.int64)
    )
    return StagePartition(upper, lower, cut, config, schedule.source_pattern_kind)


def build_level_permutation(partition: StagePartition) -> Permutation:
    """new -> old ordering: upper levels in order, then the excluded rows."""
    pieces = list(partition.upper_levels) + [partition.lower_rows]
    perm = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int64)
    return Permutation(perm.astype(np.int64))


def contiguous_partition(partition: StagePartition) -> StagePartition:
    """The same partition re-indexed after its own level permutation, which
    is the form the factorization stages and schedules expect."""
    sizes = [len(l) for l in partition.upper_levels]
    bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    upper = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(sizes))]
    lower = np.arange(partition.n_upper, partition.n, dtype=np.int64)
    return StagePartition(
        upper, lower, partition.cut_level, partition.config, partition.levels_kind
    )


def level_stats(schedule: LevelSchedule) -> dict:
    """Level count and row-count extremes, median = lower middle element."""
    sizes = sorted(len(l) for l in schedule.levels)
    if not sizes:
        return {"num_levels": 0, "min_rows": 0, "max_rows": 0, "median_rows": 0}
    return {
        "num_levels": len(sizes),
        "min_rows": sizes[0],
        "max_rows": sizes[-1],
        "median_rows": sizes[(len(sizes) - 1) // 2],
    }


def _adjacency(pattern: SparsityPattern):
    sym = symmetrize_pattern(pattern)
    return sym.row_start, sym.col


def rcm_order(pattern: SparsityPattern) -> Permutation:
    """Reverse Cuthill-McKee on the symmetrized pattern.

    Each component is visited from a pseudo-peripheral vertex (George-Liu
    refinement starting at a minimum-degree vertex); BFS neighbors are taken
    in ascending degree with index ties; the full visitation order is
    reversed at the end.
    """
    n = pattern.n
    row_start, col = _adjacency(pattern)
    degree = np.empty(n, dtype=np.int64)
    for i in range(n):
        seg = col[row_start[i]:row_start[i + 1]]
        degree[i] = seg.size - int(np.any(seg == i))  # self-loops don't count

    def neighbors(v):
        seg = col[row_start[v]:row_start[v + 1]]
        return seg[seg != v]

    def bfs_levels(start, seen_mask):
        frontier = [start]
        seen_mask[start] = True
        tiers = [frontier]
        while True:
            nxt = []
            for v in tiers[-1]:
                for w in neighbors(v):
                    if not seen_mask[w]:
                        seen_mask[w] = True
                        nxt.append(int(w))
            if not nxt:
                return tiers
            tiers.append(nxt)

    visited = np.zeros(n, dtype=bool)
    order = []
    # component roots chosen by minimum degree, ties by index
    by_mindeg = np.lexsort((np.arange(n), degree))
    for cand in by_mindeg:
        if visited[cand]:
            continue
        scratch = visited.copy()
        tiers = bfs_levels(int(cand), scratch)
        root, ecc = int(cand), len(tiers)
        while True:
            last = tiers[-1]
            pick = min(last, key=lambda v: (degree[v], v))
            scratch = visited.copy()
            tiers = bfs_levels(pick, scratch)
            if len(tiers) > ecc:
                root, ecc = pick, len(tiers)
            else:
                break
        # Cuthill-McKee traversal of this component
        visited[root] = True
        queue = [root]
        head = 0
        while head < len(queue):
            v = queue[head]
            head += 1
            order.append(v)
            fresh = [int(w) for w in neighbors(v) if not visited[w]]
            fresh.sort(key=lambda w: (degree[w], w))
            for w in fresh:
                visited[w] = True
                queue.append(w)
    order.reverse()
    return Permutation(np.array(order, dtype=np.int64))
