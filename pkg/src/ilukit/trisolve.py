"""Triangular solves over the combined L/U factor storage.

Four paths, all bitwise-identical for a given factor: serial sweeps, the
barrier-per-level baseline (CSR-LS), the pruned point-to-point solve, and
the two-stage solve that handles excluded rows with a tiled or chunked
gather. Forward solves use L's implicit unit diagonal; backward solves
divide by the stored diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import (
    gather_chunks_kernel,
    gather_tiles_kernel,
    solve_backward_csrls_kernel,
    solve_backward_p2p_kernel,
    solve_backward_serial_kernel,
    solve_corner_forward_kernel,
    solve_forward_csrls_kernel,
    solve_forward_p2p_kernel,
    solve_forward_serial_kernel,
)
from ._pool import run_parallel
from .csr import lower_pattern
from .errors import ConfigurationError, ZeroPivotError
from .lower import TileLayout, er_chunks
from .ordering import LevelSchedule, StagePartition, compute_levels, compute_levels_backward
from .symbolic import IluFactors
from .sync import SyncSchedule, build_sync_schedule, build_triangle_schedule

__all__ = [
    "solve_serial",
    "solve_baseline_csrls",
    "solve_ls",
    "solve_ls_lower",
    "apply_preconditioner",
    "SolveSetup",
    "build_solve_setup",
]

FORWARD = "forward"
BACKWARD = "backward"


def _check_which(which: str) -> None:
    if which not in (FORWARD, BACKWARD):
        raise ValueError(f"which must be 'forward' or 'backward', got {which!r}")


def _check_diagonals(factors: IluFactors) -> None:
    zero = np.flatnonzero(factors.val[factors.diag_pos] == 0.0)
    if zero.size:
        raise ZeroPivotError(int(zero[0]))


def solve_serial(factors: IluFactors, b: np.ndarray, which: str) -> np.ndarray:
    _check_which(which)
    pat = factors.pattern
    out = np.array(b, dtype=np.float64, copy=True)
    if which == FORWARD:
        solve_forward_serial_kernel(pat.row_start, pat.col, factors.val, out)
    else:
        _check_diagonals(factors)
        solve_backward_serial_kernel(
            pat.row_start, pat.col, factors.val, factors.diag_pos, out
        )
    return out


def solve_baseline_csrls(
    factors: IluFactors,
    b: np.ndarray,
    schedule: LevelSchedule,
    nthreads: int,
    which: str,
) -> np.ndarray:
    """Level-synchronous solve: all rows of a level in parallel, then a full
    barrier. The reference everything else is benchmarked against."""
    _check_which(which)
    if schedule.n != factors.n:
        raise ConfigurationError("level schedule does not match the factors")
    pat = factors.pattern
    out = np.array(b, dtype=np.float64, copy=True)
    order = (
        np.concatenate(schedule.levels).astype(np.int64)
        if schedule.levels
        else np.zeros(0, dtype=np.int64)
    )
    level_ptr = np.zeros(len(schedule.levels) + 1, dtype=np.int64)
    np.cumsum([len(l) for l in schedule.levels], out=level_ptr[1:])
    bar = np.zeros(2, dtype=np.int64)
    if which == FORWARD:
        run_parallel(
            nthreads, solve_forward_csrls_kernel,
            order, level_ptr, bar, pat.row_start, pat.col, factors.val, out,
        )
    else:
        _check_diagonals(factors)
        run_parallel(
            nthreads, solve_backward_csrls_kernel,
            order, level_ptr, bar, pat.row_start, pat.col, factors.val,
            factors.diag_pos, out,
        )
    return out


def solve_ls(
    factors: IluFactors,
    b: np.ndarray,
    schedule: SyncSchedule,
    which: str,
) -> np.ndarray:
    """Point-to-point solve with pruned waits, no barriers."""
    _check_which(which)
    pat = factors.pattern
    out = np.array(b, dtype=np.float64, copy=True)
    done = np.zeros(schedule.flag_size, dtype=np.int64)
    if which == FORWARD:
        run_parallel(
            schedule.nthreads, solve_forward_p2p_kernel,
            schedule.prog_ptr, schedule.prog_rows,
            schedule.wait_ptr, schedule.wait_rows, done,
            pat.row_start, pat.col, factors.val, out,
        )
    else:
        _check_diagonals(factors)
        run_parallel(
            schedule.nthreads, solve_backward_p2p_kernel,
            schedule.prog_ptr, schedule.prog_rows,
            schedule.wait_ptr, schedule.wait_rows, done,
            pat.row_start, pat.col, factors.val, factors.diag_pos, out,
        )
    return out


def solve_ls_lower(
    factors: IluFactors,
    b: np.ndarray,
    schedule: SyncSchedule,
    partition: StagePartition,
    lower_layout,
    which: str,
    nthreads: int | None = None,
) -> np.ndarray:
    """Two-stage solve. Forward: point-to-point over the scheduled rows,
    then each excluded row's upper-column contribution is gathered (by SR
    tile or ER chunk, one owner per row, ascending columns), then the corner
    finishes serially. Backward: the excluded rows lead the reversed sweep
    anyway, so `schedule` is simply the full backward schedule.
    """
    _check_which(which)
    if which == BACKWARD:
        return solve_ls(factors, b, schedule, BACKWARD)
    pat = factors.pattern
    n_upper = partition.n_upper
    nthreads = schedule.nthreads if nthreads is None else nthreads
    out = solve_ls(factors, b, schedule, FORWARD)
    if n_upper >= pat.n:
        return out
    if isinstance(lower_layout, TileLayout):
        run_parallel(
            nthreads, gather_tiles_kernel,
            lower_layout.tile_ptr, lower_layout.seg_row,
            lower_layout.seg_lo, lower_layout.seg_hi,
            n_upper, pat.row_start, pat.col, factors.val, out,
        )
    else:
        chunk_ptr = (
            lower_layout
            if isinstance(lower_layout, np.ndarray)
            else er_chunks(pat, n_upper, nthreads)
        )
        run_parallel(
            nthreads, gather_chunks_kernel,
            chunk_ptr, n_upper, pat.row_start, pat.col, factors.val, out,
        )
    solve_corner_forward_kernel(n_upper, pat.row_start, pat.col, factors.val, out)
    return out


@dataclass
class SolveSetup:
    """Prebuilt schedules for one solve path at a fixed worker count."""

    path: str                       # serial | csrls | ls | ls_lower
    nthreads: int = 1
    fwd_levels: LevelSchedule | None = None
    bwd_levels: LevelSchedule | None = None
    fwd_sync: SyncSchedule | None = None
    bwd_sync: SyncSchedule | None = None
    upper_sync: SyncSchedule | None = None
    partition: StagePartition | None = None
    lower_layout: object = None     # TileLayout or ER chunk boundaries
    extra: dict = field(default_factory=dict)


def build_solve_setup(
    factors: IluFactors,
    path: str,
    nthreads: int = 1,
    partition: StagePartition | None = None,
    lower_layout=None,
) -> SolveSetup:
    pat = factors.pattern
    setup = SolveSetup(path, nthreads, partition=partition, lower_layout=lower_layout)
    if path == "serial":
        return setup
    if path == "csrls":
        setup.fwd_levels = compute_levels(lower_pattern(pat))
        setup.bwd_levels = compute_levels_backward(pat)
        return setup
    if path == "ls":
        setup.fwd_sync = build_triangle_schedule(pat, nthreads, FORWARD)
        setup.bwd_sync = build_triangle_schedule(pat, nthreads, BACKWARD)
        return setup
    if path == "ls_lower":
        if partition is None:
            raise ConfigurationError("ls_lower needs the stage partition")
        setup.upper_sync = build_sync_schedule(partition, pat, nthreads)
        setup.bwd_sync = build_triangle_schedule(pat, nthreads, BACKWARD)
        if lower_layout is None:
            setup.lower_layout = er_chunks(pat, partition.n_upper, nthreads)
        return setup
    raise ConfigurationError(f"unknown solve path {path!r}")


def apply_preconditioner(
    factors: IluFactors, r: np.ndarray, setup: SolveSetup | None = None
) -> np.ndarray:
    """z = U^-1 (L^-1 r) along the configured solve path (serial default)."""
    if setup is None or setup.path == "serial":
        return solve_serial(factors, solve_serial(factors, r, FORWARD), BACKWARD)
    if setup.path == "csrls":
        y = solve_baseline_csrls(factors, r, setup.fwd_levels, setup.nthreads, FORWARD)
        return solve_baseline_csrls(factors, y, setup.bwd_levels, setup.nthreads, BACKWARD)
    if setup.path == "ls":
        y = solve_ls(factors, r, setup.fwd_sync, FORWARD)
        return solve_ls(factors, y, setup.bwd_sync, BACKWARD)
    if setup.path == "ls_lower":
        y = solve_ls_lower(
            factors, r, setup.upper_sync, setup.partition,
            setup.lower_layout, FORWARD, setup.nthreads,
        )
        return solve_ls(factors, y, setup.bwd_sync, BACKWARD)
    raise ConfigurationError(f"unknown solve path {setup.path!r}")
