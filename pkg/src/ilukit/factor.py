"""Numeric ILU(k,tau) factorization: serial reference and the parallel
upper stage.

Both paths run the identical per-row elimination in ascending column order,
so the parallel result is bitwise-equal to the serial one for any worker
count. A zero post-elimination diagonal is reported as the smallest such
row index; parallel workers keep going (IEEE inf/nan may flow downstream)
and the error is raised once everyone has quiesced, which keeps the
reported row deterministic.
"""

from __future__ import annotations

import numpy as np

from ._kernels import factor_p2p_kernel, factor_serial_kernel
from ._pool import run_parallel
from .errors import ZeroPivotError
from .symbolic import IluFactors
from .sync import SyncSchedule

__all__ = ["factor_serial", "factor_parallel_upper", "row_inf_norms"]


def row_inf_norms(factors: IluFactors) -> np.ndarray:
    """Inf-norm of each row's current values; the tau drop threshold is
    relative to these, captured before elimination starts."""
    norms = np.zeros(factors.n, dtype=np.float64)
    if factors.drop_tol > 0.0:
        rows = np.repeat(
            np.arange(factors.n), np.diff(factors.pattern.row_start)
        )
        np.maximum.at(norms, rows, np.abs(factors.val))
    return norms


def factor_serial(factors: IluFactors) -> None:
    """Up-looking ILU over all rows in ascending order, in place."""
    pat = factors.pattern
    bad = factor_serial_kernel(
        pat.row_start, pat.col, factors.val, factors.diag_pos,
        row_inf_norms(factors), factors.drop_tol, factors.milu,
    )
    if bad >= 0:
        raise ZeroPivotError(int(bad))


def factor_parallel_upper(factors: IluFactors, schedule: SyncSchedule) -> None:
    """Factor the scheduled (upper-stage) rows with point-to-point waits."""
    pat = factors.pattern
    done = np.zeros(schedule.flag_size, dtype=np.int64)
    errflag = np.zeros(factors.n, dtype=np.int64)
    run_parallel(
        schedule.nthreads, factor_p2p_kernel,
        schedule.prog_ptr, schedule.prog_rows,
        schedule.wait_ptr, schedule.wait_rows,
        done, errflag,
        pat.row_start, pat.col, factors.val, factors.diag_pos,
        row_inf_norms(factors), factors.drop_tol, factors.milu,
    )
    bad = np.flatnonzero(errflag)
    if bad.size:
        raise ZeroPivotError(int(bad[0]))
