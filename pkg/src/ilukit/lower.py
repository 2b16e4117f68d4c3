"""Lower-stage factorization for the rows excluded from level scheduling.

Two methods over the trailing rows (the matrix must be in level order, so
excluded rows occupy the last index range):

- Segmented-Rows (SR): per upper level, divide that level's columns by
  their diagonals tile by tile, then apply their updates into later-level
  and corner tiles; finally eliminate the trailing square (corner)
  serially. Updates into a tile are keyed by source level and applied in
  ascending source-column order, which in level order is exactly the
  serial sequence, so the result is bitwise-identical to factor_serial.

- Even-Rows (ER): rows are dealt to workers in contiguous nnz-balanced
  chunks; each worker eliminates its rows against upper-stage columns only
  (all writes stay inside the worker's own rows, so no synchronization),
  then a single join and the corner is eliminated, serially by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import (
    factor_corner_kernel,
    factor_corner_levels_kernel,
    factor_er_kernel,
    factor_sr_kernel,
    levels_forward_kernel,
)
from ._pool import run_parallel
from .csr import SparsityPattern
from .errors import ConfigurationError, ZeroPivotError
from .factor import row_inf_norms
from .ordering import LOWER_A_PLUS_AT, StagePartition
from .symbolic import IluFactors

__all__ = [
    "SR",
    "ER",
    "AUTO",
    "NONE",
    "TileLayout",
    "select_lower_method",
    "build_tiles",
    "er_chunks",
    "factor_sr",
    "factor_er",
]

SR = "sr"
ER = "er"
AUTO = "auto"
NONE = "none"

DEFAULT_TILE_SIZE = 256


@dataclass
class TileLayout:
    """Tiles over the excluded rows' storage, grouped by upper level.

    Tiles partition each subblock's nonzeros into runs of at most tile_size,
    row-major, possibly spanning (or splitting) rows. Segment s covers
    val[seg_lo[s]:seg_hi[s]] of row seg_row[s]; tile t owns segments
    tile_ptr[t]:tile_ptr[t+1]. Tiles are grouped by level:
    level_tile_ptr[i]:level_tile_ptr[i+1] are the tiles whose columns lie in
    upper level i; the final group holds the corner tiles (columns >= n_upper).
    """

    n_upper: int
    tile_size: int
    lptr_cols: np.ndarray       # level -> first column index, plus n_upper
    tile_ptr: np.ndarray
    seg_row: np.ndarray
    seg_lo: np.ndarray
    seg_hi: np.ndarray
    tile_level: np.ndarray
    level_tile_ptr: np.ndarray

    @property
    def num_upper_levels(self) -> int:
        return self.lptr_cols.size - 1

    @property
    def ntiles(self) -> int:
        return self.tile_ptr.size - 1

    def tile_nnz(self, t: int) -> int:
        lo, hi = self.tile_ptr[t], self.tile_ptr[t + 1]
        return int((self.seg_hi[lo:hi] - self.seg_lo[lo:hi]).sum())


def select_lower_method(lower_row_count: int, nthreads: int,
                        imbalance: float) -> str:
    """ER wants enough rows to deal out and roughly even row weights;
    otherwise SR, which parallelizes inside rows. No rows, no stage."""
    if lower_row_count == 0:
        return NONE
    if lower_row_count >= 2 * nthreads and imbalance <= 8.0:
        return ER
    return SR


def _check_level_order(partition: StagePartition, n: int) -> np.ndarray:
    """The parallel lower stage requires level-ordered indexing; returns the
    column index starting each upper level."""
    sizes = np.array([len(l) for l in partition.upper_levels], dtype=np.int64)
    lptr = np.zeros(sizes.size + 1, dtype=np.int64)
    np.cumsum(sizes, out=lptr[1:])
    for i, rows in enumerate(partition.upper_levels):
        if not np.array_equal(np.asarray(rows), np.arange(lptr[i], lptr[i + 1])):
            raise ConfigurationError(
                "lower-stage methods require factors assembled in level order"
            )
    if not np.array_equal(
        np.asarray(partition.lower_rows), np.arange(partition.n_upper, n)
    ):
        raise ConfigurationError(
            "lower-stage methods require excluded rows at the end"
        )
    return lptr


def build_tiles(
    factors: IluFactors,
    partition: StagePartition,
    tile_size: int = DEFAULT_TILE_SIZE,
) -> TileLayout:
    """Greedy row-major packing of each subblock's nonzeros into tiles."""
    if partition.levels_kind != LOWER_A_PLUS_AT:
        raise ConfigurationError("sr_requires_symmetrized_levels")
    if tile_size < 1:
        raise ConfigurationError("tile_size must be >= 1")
    pat = factors.pattern
    n = pat.n
    n_upper = partition.n_upper
    lptr = _check_level_order(partition, n)
    nlev = lptr.size - 1
    _check_intra_level_independence(pat, lptr)

    lower = np.arange(n_upper, n, dtype=np.int64)
    rs = pat.row_start
    # absolute position of each level boundary within each lower row, via
    # one global search over (row, col) keys
    keys = np.repeat(lower, np.diff(rs)[lower]) * np.int64(n + 1)
    keys += pat.col[rs[n_upper]:rs[n]]
    qk = (lower[:, None] * np.int64(n + 1) + lptr[None, :]).ravel()
    bounds = rs[n_upper] + np.searchsorted(keys, qk).reshape(lower.size, nlev + 1)

    tile_ptr = [0]
    seg_row: list = []
    seg_lo: list = []
    seg_hi: list = []
    tile_level: list = []
    level_tile_ptr = np.zeros(nlev + 2, dtype=np.int64)
    for i in range(nlev + 1):
        if i < nlev:
            los, his = bounds[:, i], bounds[:, i + 1]
        else:
            los, his = bounds[:, nlev], rs[lower + 1]
        cap = tile_size
        open_tile = False
        for ri in np.flatnonzero(his > los):
            lo, hi = int(los[ri]), int(his[ri])
            r = n_upper + ri
            while lo < hi:
                take = min(cap, hi - lo)
                seg_row.append(r)
                seg_lo.append(lo)
                seg_hi.append(lo + take)
                open_tile = True
                lo += take
                cap -= take
                if cap == 0:
                    tile_ptr.append(len(seg_row))
                    tile_level.append(i)
                    cap = tile_size
                    open_tile = False
        if open_tile:
            tile_ptr.append(len(seg_row))
            tile_level.append(i)
        level_tile_ptr[i + 1] = len(tile_level)

    return TileLayout(
        n_upper,
        tile_size,
        lptr,
        np.array(tile_ptr, dtype=np.int64),
        np.array(seg_row, dtype=np.int64),
        np.array(seg_lo, dtype=np.int64),
        np.array(seg_hi, dtype=np.int64),
        np.array(tile_level, dtype=np.int64),
        level_tile_ptr,
    )


def _check_intra_level_independence(pat: SparsityPattern, lptr: np.ndarray) -> None:
    """With levels from lower(A+A^T) no two columns of one level may depend
    on each other; violated means the schedule came from the wrong pattern."""
    n_upper = int(lptr[-1])
    rows = np.repeat(np.arange(pat.n, dtype=np.int64), np.diff(pat.row_start))
    m = (rows < n_upper) & (pat.col < rows)
    level_of = np.zeros(n_upper + 1, dtype=np.int64)
    level_of[lptr[1:-1]] = 1
    level_of = np.cumsum(level_of)[:-1] if n_upper else level_of[:0]
    if m.any() and np.any(level_of[rows[m]] == level_of[pat.col[m]]):
        raise ConfigurationError(
            "intra-level dependency found; levels must come from lower(A+A^T)"
        )


def er_chunks(pattern: SparsityPattern, n_upper: int, nthreads: int) -> np.ndarray:
    """Contiguous chunk boundaries over the excluded rows, balancing the
    nonzero count of their upper-column segments."""
    n = pattern.n
    lower = np.arange(n_upper, n, dtype=np.int64)
    if lower.size == 0:
        return np.full(nthreads + 1, n_upper, dtype=np.int64)
    rs = pattern.row_start
    keys = np.repeat(lower, np.diff(rs)[lower]) * np.int64(n + 1)
    keys += pattern.col[rs[n_upper]:rs[n]]
    upper_end = rs[n_upper] + np.searchsorted(keys, lower * np.int64(n + 1) + n_upper)
    weight = (upper_end - rs[lower]) + 1  # +1 keeps empty rows distributable
    cum = np.zeros(lower.size + 1, dtype=np.int64)
    np.cumsum(weight, out=cum[1:])
    targets = cum[-1] * np.arange(1, nthreads) / nthreads
    cuts = np.searchsorted(cum, targets)
    return np.concatenate(
        ([n_upper], n_upper + cuts, [n])
    ).astype(np.int64)


def _finish_corner(factors: IluFactors, n_upper: int, norms: np.ndarray,
                   parallel_corner: bool, nthreads: int) -> None:
    pat = factors.pattern
    n = pat.n
    corner_rows = n - n_upper
    if parallel_corner and nthreads > 1 and corner_rows > 4 * nthreads:
        # level-synchronous sweep over the corner's own dependency DAG;
        # row updates are row-local so levels on lower(corner) suffice
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(pat.row_start))
        m = (rows >= n_upper) & (pat.col >= n_upper) & (pat.col < rows)
        dep_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows[m], minlength=n), out=dep_ptr[1:])
        level_of = levels_forward_kernel(dep_ptr, pat.col[m].astype(np.int64))
        level_of = level_of[n_upper:]
        corder = n_upper + np.argsort(level_of, kind="stable")
        counts = np.bincount(level_of)
        clevel_ptr = np.zeros(counts.size + 1, dtype=np.int64)
        np.cumsum(counts, out=clevel_ptr[1:])
        bar = np.zeros(2, dtype=np.int64)
        errflag = np.zeros(n, dtype=np.int64)
        run_parallel(
            nthreads, factor_corner_levels_kernel,
            corder, clevel_ptr, bar, errflag, n_upper,
            pat.row_start, pat.col, factors.val, factors.diag_pos,
            norms, factors.drop_tol, factors.milu,
        )
        bad = np.flatnonzero(errflag)
        if bad.size:
            raise ZeroPivotError(int(bad[0]))
        return
    bad = factor_corner_kernel(
        n_upper, pat.row_start, pat.col, factors.val, factors.diag_pos,
        norms, factors.drop_tol, factors.milu,
    )
    if bad >= 0:
        raise ZeroPivotError(int(bad))


def factor_sr(factors: IluFactors, tiles: TileLayout, nthreads: int = 1) -> None:
    """Segmented-rows lower stage; upper-stage rows must already be factored."""
    pat = factors.pattern
    if tiles.n_upper >= pat.n:
        return
    norms = row_inf_norms(factors)
    tau = factors.drop_tol
    if tau > 0.0:
        lval = np.zeros(pat.nnz, dtype=np.float64)
        dropflag = np.zeros(pat.nnz, dtype=np.int64)
    else:
        lval = np.zeros(0, dtype=np.float64)
        dropflag = np.zeros(0, dtype=np.int64)
    bar = np.zeros(2, dtype=np.int64)
    run_parallel(
        nthreads, factor_sr_kernel,
        bar, tiles.lptr_cols, tiles.num_upper_levels,
        tiles.tile_ptr, tiles.seg_row, tiles.seg_lo, tiles.seg_hi,
        tiles.level_tile_ptr,
        pat.row_start, pat.col, factors.val, factors.diag_pos,
        norms, tau, factors.milu, lval, dropflag,
    )
    _finish_corner(factors, tiles.n_upper, norms, False, nthreads)


def factor_er(
    factors: IluFactors,
    partition: StagePartition,
    parallel_corner: bool = False,
    nthreads: int = 1,
) -> None:
    """Even-rows lower stage; upper-stage rows must already be factored."""
    pat = factors.pattern
    n_upper = partition.n_upper
    if n_upper >= pat.n:
        return
    _check_level_order(partition, pat.n)
    norms = row_inf_norms(factors)
    chunk_ptr = er_chunks(pat, n_upper, nthreads)
    run_parallel(
        nthreads, factor_er_kernel,
        chunk_ptr, n_upper,
        pat.row_start, pat.col, factors.val, factors.diag_pos,
        norms, factors.drop_tol, factors.milu,
    )
    _finish_corner(factors, n_upper, norms, parallel_corner, nthreads)
