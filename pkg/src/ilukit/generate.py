"""Deterministic test-matrix generators (stencils and seeded random)."""

from __future__ import annotations

import numpy as np

from .csr import CsrMatrix
from .errors import MatrixFormatError

__all__ = ["tridiag", "poisson2d", "poisson3d", "convdiff2d", "random_diag_dominant", "generate_test_matrix"]


def tridiag(n: int) -> CsrMatrix:
    """[-1, 2, -1] chain of length n."""
    rows, cols, vals = [], [], []
    for i in range(n):
        if i > 0:
            rows.append(i); cols.append(i - 1); vals.append(-1.0)
        rows.append(i); cols.append(i); vals.append(2.0)
        if i < n - 1:
            rows.append(i); cols.append(i + 1); vals.append(-1.0)
    return CsrMatrix.from_coo(n, rows, cols, vals, sum_duplicates=False)


def poisson2d(k: int) -> CsrMatrix:
    """5-point Laplacian on a k-by-k grid (n = k^2), Dirichlet boundary."""
    idx = np.arange(k * k, dtype=np.int64).reshape(k, k)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r); cols.append(c); vals.append(v)

    for i in range(k):
        for j in range(k):
            me = idx[i, j]
            add(me, me, 4.0)
            if i > 0:
                add(me, idx[i - 1, j], -1.0)
            if i < k - 1:
                add(me, idx[i + 1, j], -1.0)
            if j > 0:
                add(me, idx[i, j - 1], -1.0)
            if j < k - 1:
                add(me, idx[i, j + 1], -1.0)
    return CsrMatrix.from_coo(k * k, rows, cols, vals, sum_duplicates=False)


def poisson3d(k: int) -> CsrMatrix:
    """27-point stencil on a k^3 grid: diagonal 26, each neighbor -1."""
    n = k * k * k
    coords = np.arange(n, dtype=np.int64)
    zi = coords % k
    yi = (coords // k) % k
    xi = coords // (k * k)
    rows_parts = [coords]
    cols_parts = [coords]
    vals_parts = [np.full(n, 26.0)]
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                if dx == dy == dz == 0:
                    continue
                nx, ny, nz = xi + dx, yi + dy, zi + dz
                ok = (nx >= 0) & (nx < k) & (ny >= 0) & (ny < k) & (nz >= 0) & (nz < k)
                rows_parts.append(coords[ok])
                cols_parts.append((nx[ok] * k + ny[ok]) * k + nz[ok])
                vals_parts.append(np.full(int(ok.sum()), -1.0))
    return CsrMatrix.from_coo(
        n,
        np.concatenate(rows_parts),
        np.concatenate(cols_parts),
        np.concatenate(vals_parts),
        sum_duplicates=False,
    )


def convdiff2d(k: int, seed: int = 0) -> CsrMatrix:
    """Unsymmetric convection-diffusion, 5-point diffusion + first-order upwind.

    The (constant) wind direction and strength derive from the seed.
    """
    rng = np.random.default_rng(seed)
    h = 1.0 / (k + 1)
    vx, vy = rng.uniform(5.0, 25.0, 2) * rng.choice([-1.0, 1.0], 2)
    idx = np.arange(k * k, dtype=np.int64).reshape(k, k)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r); cols.append(c); vals.append(v)

    for i in range(k):
        for j in range(k):
            me = idx[i, j]
            diag = 4.0 + (abs(vx) + abs(vy)) * h
            add(me, me, diag)
            # x direction: upwind neighbor carries the convective flux
            if i > 0:
                add(me, idx[i - 1, j], -1.0 - (vx * h if vx > 0 else 0.0))
            if i < k - 1:
                add(me, idx[i + 1, j], -1.0 + (vx * h if vx < 0 else 0.0))
            if j > 0:
                add(me, idx[i, j - 1], -1.0 - (vy * h if vy > 0 else 0.0))
            if j < k - 1:
                add(me, idx[i, j + 1], -1.0 + (vy * h if vy < 0 else 0.0))
    return CsrMatrix.from_coo(k * k, rows, cols, vals, sum_duplicates=False)


def random_diag_dominant(
    n: int,
    row_nnz: int = 6,
    seed: int = 0,
    symmetric_pattern: bool = False,
) -> CsrMatrix:
    """Random strictly diagonally dominant matrix with a full diagonal."""
    rng = np.random.default_rng(seed)
    rows, cols = [np.arange(n, dtype=np.int64)], [np.arange(n, dtype=np.int64)]
    for i in range(n):
        m = int(rng.integers(0, max(1, row_nnz)))
        if m and n > 1:
            picks = rng.choice(n - 1, size=min(m, n - 1), replace=False)
            picks = picks + (picks >= i)  # skip the diagonal slot
            rows.append(np.full(picks.size, i, dtype=np.int64))
            cols.append(picks.astype(np.int64))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    if symmetric_pattern:
        off = rows != cols
        rows, cols = np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]])
    vals = rng.uniform(-1.0, 1.0, rows.size)
    a = CsrMatrix.from_coo(n, rows, cols, vals)
    # overwrite diagonals with strict dominance
    for i in range(n):
        seg = slice(a.row_start[i], a.row_start[i + 1])
        c = a.col[seg]
        v = a.val[seg]
        d = np.searchsorted(c, i)
        v[d] = np.sum(np.abs(v)) - abs(v[d]) + 1.0
    return a


def generate_test_matrix(kind: str, size: int, seed: int = 0) -> CsrMatrix:
    """Build one of the named stencil families at the given size."""
    if size < 2:
        raise MatrixFormatError("size must be at least 2")
    if kind == "tridiag":
        return tridiag(size)
    if kind == "poisson2d":
        return poisson2d(size)
    if kind == "poisson3d":
        return poisson3d(size)
    if kind == "convdiff2d":
        return convdiff2d(size, seed)
    raise MatrixFormatError(f"unknown generator kind {kind!r}")
