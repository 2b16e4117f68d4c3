"""Compiled kernels for factorization, triangular solves, and scheduling.

Determinism contract shared by everything here: each value is written by
exactly one worker, per-position accumulation runs in ascending column
order, and serial/parallel paths execute the identical per-row operation
sequence. No fastmath; IEEE doubles throughout. error_model="numpy" keeps
division by a zero pivot from raising inside nogil regions (it produces
inf/nan, and the zero-diagonal protocol reports the first bad row after
workers quiesce).

Parallel kernels assume the matrix is in level order: upper-stage levels
occupy contiguous ascending index ranges, lower-stage rows come last. The
pipeline's level permutation guarantees this.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._atomics import cpu_yield, fetch_add, load_acquire, store_release

_JIT = dict(nogil=True, cache=True, error_model="numpy")


# ---------------------------------------------------------------- basics

@njit(**_JIT)
def spmv_kernel(row_start, col, val, x, out):
    for r in range(row_start.size - 1):
        s = 0.0
        for p in range(row_start[r], row_start[r + 1]):
            s += val[p] * x[col[p]]
        out[r] = s


@njit(cache=True)
def levels_forward_kernel(row_start, col):
    n = row_start.size - 1
    level_of = np.zeros(n, dtype=np.int64)
    for r in range(n):
        m = np.int64(-1)
        for p in range(row_start[r], row_start[r + 1]):
            lc = level_of[col[p]]
            if lc > m:
                m = lc
        level_of[r] = m + 1
    return level_of


@njit(cache=True)
def levels_backward_kernel(row_start, col):
    n = row_start.size - 1
    level_of = np.zeros(n, dtype=np.int64)
    for r in range(n - 1, -1, -1):
        m = np.int64(-1)
        for p in range(row_start[r], row_start[r + 1]):
            j = col[p]
            if j > r and level_of[j] > m:
                m = level_of[j]
        level_of[r] = m + 1
    return level_of


# ------------------------------------------------------- synchronization

@njit(inline="always", **_JIT)
def _await_flag(done, row):
    spins = 0
    while load_acquire(done, row) == 0:
        spins += 1
        if spins > 64:
            cpu_yield()
            spins = 0


@njit(inline="always", **_JIT)
def _barrier(bar, nthreads):
    # bar[0] = arrival count, bar[1] = generation
    gen = load_acquire(bar, 1)
    arrived = fetch_add(bar, 0, 1) + 1
    if arrived == nthreads:
        store_release(bar, 0, 0)
        store_release(bar, 1, gen + 1)
    else:
        spins = 0
        while load_acquire(bar, 1) == gen:
            spins += 1
            if spins > 64:
                cpu_yield()
                spins = 0


@njit(cache=True)
def build_waits_kernel(order, level_of, owner, pos, dep_ptr, dep_col,
                       nthreads, known, tmp, wait_start, wait_counts, buf):
    """Prune structural dependencies to the minimal point-to-point waits.

    known[r, t] counts worker t's program prefix known complete when row r
    finishes; it is the exact transitive closure of program order plus the
    retained waits, so a dependency is pruned iff it is implied. Deps are
    scanned deepest level first (ties: later program position first), which
    makes a retained wait never implied by a later-retained one.
    """
    cur = np.empty(nthreads, dtype=np.int64)
    lastrow = np.full(nthreads, -1, dtype=np.int64)
    total = 0
    for oi in range(order.size):
        r = order[oi]
        me = owner[r]
        prev = lastrow[me]
        if prev >= 0:
            for t in range(nthreads):
                cur[t] = known[prev, t]
        else:
            for t in range(nthreads):
                cur[t] = 0
        cur[me] = pos[r]
        nd = dep_ptr[r + 1] - dep_ptr[r]
        for a in range(nd):
            tmp[a] = dep_col[dep_ptr[r] + a]
        for a in range(1, nd):
            x = tmp[a]
            lx = level_of[x]
            px = pos[x]
            b = a - 1
            while b >= 0 and (level_of[tmp[b]] < lx
                              or (level_of[tmp[b]] == lx and pos[tmp[b]] < px)):
                tmp[b + 1] = tmp[b]
                b -= 1
            tmp[b + 1] = x
        wait_start[r] = total
        nw = 0
        for a in range(nd):
            c = tmp[a]
            if cur[owner[c]] > pos[c]:
                continue
            buf[total + nw] = c
            nw += 1
            for t in range(nthreads):
                if known[c, t] > cur[t]:
                    cur[t] = known[c, t]
            if pos[c] + 1 > cur[owner[c]]:
                cur[owner[c]] = pos[c] + 1
        wait_counts[r] = nw
        total += nw
        for t in range(nthreads):
            known[r, t] = cur[t]
        known[r, me] = pos[r] + 1
        lastrow[me] = r
    return total


@njit(cache=True)
def reorder_waits_kernel(wait_start, wait_counts, buf, wait_ptr, out):
    for r in range(wait_counts.size):
        base = wait_ptr[r]
        src = wait_start[r]
        for a in range(wait_counts[r]):
            out[base + a] = buf[src + a]


# ---------------------------------------------------------- factor cores

@njit(inline="always", **_JIT)
def _factor_row(row_start, col, val, diag_pos, row_norm, tau, milu, r, clo, chi):
    """Up-looking elimination of row r restricted to pivot columns
    clo <= c < chi. Updates touch only row r's own storage; out-of-pattern
    and tau-dropped update mass goes to the diagonal when milu is set."""
    re = row_start[r + 1]
    dpos = diag_pos[r]
    for p in range(row_start[r], re):
        c = col[p]
        if c >= chi or c >= r:
            break
        if c < clo:
            continue
        l = val[p] / val[diag_pos[c]]
        if tau > 0.0 and abs(l) < tau * row_norm:
            val[p] = 0.0
            if milu:
                for q in range(diag_pos[c] + 1, row_start[c + 1]):
                    val[dpos] -= l * val[q]
            continue
        val[p] = l
        w = p + 1
        for q in range(diag_pos[c] + 1, row_start[c + 1]):
            j = col[q]
            while w < re and col[w] < j:
                w += 1
            if w < re and col[w] == j:
                val[w] -= l * val[q]
            elif milu:
                val[dpos] -= l * val[q]


@njit(**_JIT)
def factor_serial_kernel(row_start, col, val, diag_pos, row_norms, tau, milu):
    n = row_start.size - 1
    for r in range(n):
        _factor_row(row_start, col, val, diag_pos, row_norms[r], tau, milu, r, 0, r)
        if val[diag_pos[r]] == 0.0:
            return r
    return -1


@njit(**_JIT)
def factor_p2p_kernel(wid, nthreads, prog_ptr, prog_rows, wait_ptr, wait_rows,
                      done, errflag, row_start, col, val, diag_pos,
                      row_norms, tau, milu):
    for k in range(prog_ptr[wid], prog_ptr[wid + 1]):
        r = prog_rows[k]
        for wpos in range(wait_ptr[r], wait_ptr[r + 1]):
            _await_flag(done, wait_rows[wpos])
        _factor_row(row_start, col, val, diag_pos, row_norms[r], tau, milu, r, 0, r)
        if val[diag_pos[r]] == 0.0:
            errflag[r] = 1
        store_release(done, r, 1)


@njit(**_JIT)
def factor_er_kernel(wid, nthreads, chunk_ptr, n_upper, row_start, col, val,
                     diag_pos, row_norms, tau, milu):
    # FACTOR_L: pivots are upper-stage columns only, so every write lands in
    # the worker's own rows and no synchronization is needed.
    for r in range(chunk_ptr[wid], chunk_ptr[wid + 1]):
        _factor_row(row_start, col, val, diag_pos, row_norms[r], tau, milu,
                    r, 0, n_upper)


@njit(**_JIT)
def factor_corner_kernel(n_upper, row_start, col, val, diag_pos, row_norms,
                         tau, milu):
    n = row_start.size - 1
    for r in range(n_upper, n):
        _factor_row(row_start, col, val, diag_pos, row_norms[r], tau, milu,
                    r, n_upper, r)
        if val[diag_pos[r]] == 0.0:
            return r
    return -1


@njit(**_JIT)
def factor_corner_levels_kernel(wid, nthreads, corder, clevel_ptr, bar,
                                errflag, n_upper, row_start, col, val,
                                diag_pos, row_norms, tau, milu):
    for li in range(clevel_ptr.size - 1):
        for k in range(clevel_ptr[li] + wid, clevel_ptr[li + 1], nthreads):
            r = corder[k]
            _factor_row(row_start, col, val, diag_pos, row_norms[r], tau,
                        milu, r, n_upper, r)
            if val[diag_pos[r]] == 0.0:
                errflag[r] = 1
        _barrier(bar, nthreads)


# --------------------------------------------------- segmented-rows (SR)

@njit(inline="always", **_JIT)
def _divide_tile(t, tile_ptr, seg_row, seg_lo, seg_hi, col, val, diag_pos,
                 row_norms, tau, lval, dropflag):
    for s in range(tile_ptr[t], tile_ptr[t + 1]):
        rn = row_norms[seg_row[s]]
        for p in range(seg_lo[s], seg_hi[s]):
            l = val[p] / val[diag_pos[col[p]]]
            if tau > 0.0:
                lval[p] = l
                if abs(l) < tau * rn:
                    val[p] = 0.0
                    dropflag[p] = 1
                else:
                    val[p] = l
            else:
                val[p] = l


@njit(inline="always", **_JIT)
def _update_task(lo_col, hi_col, t, tile_ptr, seg_row, seg_lo, seg_hi,
                 row_start, col, val, diag_pos, tau, milu, lval, dropflag):
    """Apply all updates from source columns in [lo_col, hi_col) into tile
    t's positions. The segment holding a row's diagonal additionally absorbs
    that row's out-of-pattern and dropped update mass (milu)."""
    for s in range(tile_ptr[t], tile_ptr[t + 1]):
        r = seg_row[s]
        slo = seg_lo[s]
        shi = seg_hi[s]
        rs = row_start[r]
        re = row_start[r + 1]
        dpos = diag_pos[r]
        owns_diag = slo <= dpos < shi
        seg = col[rs:re]
        a = rs + np.searchsorted(seg, lo_col)
        b = rs + np.searchsorted(seg, hi_col)
        for p in range(a, b):
            c = col[p]
            if tau > 0.0 and dropflag[p] == 1:
                if milu and owns_diag:
                    l = lval[p]
                    for q in range(diag_pos[c] + 1, row_start[c + 1]):
                        val[dpos] -= l * val[q]
                continue
            l = val[p]
            if owns_diag:
                w = p + 1
                for q in range(diag_pos[c] + 1, row_start[c + 1]):
                    j = col[q]
                    while w < re and col[w] < j:
                        w += 1
                    if w < re and col[w] == j:
                        if slo <= w < shi:
                            val[w] -= l * val[q]
                    elif milu:
                        val[dpos] -= l * val[q]
            else:
                w = slo
                for q in range(diag_pos[c] + 1, row_start[c + 1]):
                    j = col[q]
                    while w < shi and col[w] < j:
                        w += 1
                    if w >= shi:
                        break
                    if col[w] == j:
                        val[w] -= l * val[q]


@njit(**_JIT)
def factor_sr_kernel(wid, nthreads, bar, lptr_cols, num_upper_levels,
                     tile_ptr, seg_row, seg_lo, seg_hi, level_tile_ptr,
                     row_start, col, val, diag_pos, row_norms, tau, milu,
                     lval, dropflag):
    ntiles = tile_ptr.size - 1
    for i in range(num_upper_levels):
        for t in range(level_tile_ptr[i] + wid, level_tile_ptr[i + 1], nthreads):
            _divide_tile(t, tile_ptr, seg_row, seg_lo, seg_hi, col, val,
                         diag_pos, row_norms, tau, lval, dropflag)
        _barrier(bar, nthreads)
        lo_col = lptr_cols[i]
        hi_col = lptr_cols[i + 1]
        for t in range(level_tile_ptr[i + 1] + wid, ntiles, nthreads):
            _update_task(lo_col, hi_col, t, tile_ptr, seg_row, seg_lo,
                         seg_hi, row_start, col, val, diag_pos, tau, milu,
                         lval, dropflag)
        _barrier(bar, nthreads)


# ------------------------------------------------------------ trisolves

@njit(**_JIT)
def solve_forward_serial_kernel(row_start, col, val, y):
    for r in range(row_start.size - 1):
        s = y[r]
        for p in range(row_start[r], row_start[r + 1]):
            c = col[p]
            if c >= r:
                break
            s -= val[p] * y[c]
        y[r] = s


@njit(**_JIT)
def solve_backward_serial_kernel(row_start, col, val, diag_pos, x):
    for r in range(row_start.size - 2, -1, -1):
        s = x[r]
        for p in range(diag_pos[r] + 1, row_start[r + 1]):
            s -= val[p] * x[col[p]]
        x[r] = s / val[diag_pos[r]]


@njit(**_JIT)
def solve_forward_csrls_kernel(wid, nthreads, order, level_ptr, bar,
                               row_start, col, val, y):
    for li in range(level_ptr.size - 1):
        lo = level_ptr[li]
        cnt = level_ptr[li + 1] - lo
        for k in range(lo + (cnt * wid) // nthreads,
                       lo + (cnt * (wid + 1)) // nthreads):
            r = order[k]
            s = y[r]
            for p in range(row_start[r], row_start[r + 1]):
                c = col[p]
                if c >= r:
                    break
                s -= val[p] * y[c]
            y[r] = s
        _barrier(bar, nthreads)


@njit(**_JIT)
def solve_backward_csrls_kernel(wid, nthreads, order, level_ptr, bar,
                                row_start, col, val, diag_pos, x):
    for li in range(level_ptr.size - 1):
        lo = level_ptr[li]
        cnt = level_ptr[li + 1] - lo
        for k in range(lo + (cnt * wid) // nthreads,
                       lo + (cnt * (wid + 1)) // nthreads):
            r = order[k]
            s = x[r]
            for p in range(diag_pos[r] + 1, row_start[r + 1]):
                s -= val[p] * x[col[p]]
            x[r] = s / val[diag_pos[r]]
        _barrier(bar, nthreads)


@njit(**_JIT)
def solve_forward_p2p_kernel(wid, nthreads, prog_ptr, prog_rows, wait_ptr,
                             wait_rows, done, row_start, col, val, y):
    for k in range(prog_ptr[wid], prog_ptr[wid + 1]):
        r = prog_rows[k]
        for wpos in range(wait_ptr[r], wait_ptr[r + 1]):
            _await_flag(done, wait_rows[wpos])
        s = y[r]
        for p in range(row_start[r], row_start[r + 1]):
            c = col[p]
            if c >= r:
                break
            s -= val[p] * y[c]
        y[r] = s
        store_release(done, r, 1)


@njit(**_JIT)
def solve_backward_p2p_kernel(wid, nthreads, prog_ptr, prog_rows, wait_ptr,
                              wait_rows, done, row_start, col, val,
                              diag_pos, x):
    for k in range(prog_ptr[wid], prog_ptr[wid + 1]):
        r = prog_rows[k]
        for wpos in range(wait_ptr[r], wait_ptr[r + 1]):
            _await_flag(done, wait_rows[wpos])
        s = x[r]
        for p in range(diag_pos[r] + 1, row_start[r + 1]):
            s -= val[p] * x[col[p]]
        x[r] = s / val[diag_pos[r]]
        store_release(done, r, 1)


@njit(**_JIT)
def gather_tiles_kernel(wid, nthreads, tile_ptr, seg_row, seg_lo, seg_hi,
                        n_upper, row_start, col, val, y):
    # A lower row's whole upper-column contribution is gathered by the tile
    # holding its first stored position; upper y entries are already final,
    # so tiles run concurrently without ordering constraints.
    for t in range(wid, tile_ptr.size - 1, nthreads):
        for s in range(tile_ptr[t], tile_ptr[t + 1]):
            r = seg_row[s]
            rs = row_start[r]
            if seg_lo[s] != rs:
                continue
            acc = y[r]
            for p in range(rs, row_start[r + 1]):
                c = col[p]
                if c >= n_upper:
                    break
                acc -= val[p] * y[c]
            y[r] = acc


@njit(**_JIT)
def gather_chunks_kernel(wid, nthreads, chunk_ptr, n_upper, row_start, col,
                         val, y):
    for r in range(chunk_ptr[wid], chunk_ptr[wid + 1]):
        acc = y[r]
        for p in range(row_start[r], row_start[r + 1]):
            c = col[p]
            if c >= n_upper:
                break
            acc -= val[p] * y[c]
        y[r] = acc


@njit(**_JIT)
def solve_corner_forward_kernel(n_upper, row_start, col, val, y):
    for r in range(n_upper, row_start.size - 1):
        s = y[r]
        for p in range(row_start[r], row_start[r + 1]):
            c = col[p]
            if c >= r:
                break
            if c >= n_upper:
                s -= val[p] * y[c]
        y[r] = s
