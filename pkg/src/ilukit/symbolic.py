"""Symbolic ILU patterns and assembly of the combined L/U storage.

The factor pattern for row i holds the strict lower part (L, implicit unit
diagonal not stored), then the diagonal, then the upper part (U), all in one
CSR row. ILU(0) keeps exactly the pattern of A; ILU(k) grows it by the
level-of-fill rule fill(i,j) = min over m of fill(i,m) + fill(m,j) + 1,
keeping positions with level <= k.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .csr import CsrMatrix, Permutation, SparsityPattern, permute_symmetric
from .errors import MatrixFormatError, MissingDiagonalError

__all__ = [
    "FillLevelTable",
    "IluFactors",
    "ilu0_pattern",
    "iluk_pattern",
    "assemble_factors",
]


@dataclass
class FillLevelTable:
    """Fill level per stored position, aligned to the pattern's entries."""

    level: np.ndarray


@dataclass
class IluFactors:
    """Combined L/U factor storage over one CSR pattern.

    Strict lower positions hold L (unit diagonal implicit), the diagonal and
    upper positions hold U. diag_pos[i] indexes row i's diagonal inside val.
    """

    n: int
    pattern: SparsityPattern
    val: np.ndarray
    diag_pos: np.ndarray
    perm: Permutation
    drop_tol: float = 0.0
    milu: bool = False

    def row_cols(self, i: int) -> np.ndarray:
        return self.pattern.row_cols(i)

    def row_vals(self, i: int) -> np.ndarray:
        return self.val[self.pattern.row_start[i]:self.pattern.row_start[i + 1]]

    def copy(self) -> "IluFactors":
        return IluFactors(
            self.n,
            self.pattern,
            self.val.copy(),
            self.diag_pos,
            self.perm,
            self.drop_tol,
            self.milu,
        )


def _first_missing_diagonal(pattern: SparsityPattern) -> int:
    rows = np.repeat(np.arange(pattern.n), np.diff(pattern.row_start))
    has_diag = np.zeros(pattern.n, dtype=bool)
    has_diag[rows[pattern.col == rows]] = True
    missing = np.flatnonzero(~has_diag)
    return int(missing[0]) if missing.size else -1


def ilu0_pattern(pattern: SparsityPattern) -> SparsityPattern:
    """ILU(0) keeps the pattern as-is; every row must have its diagonal."""
    row = _first_missing_diagonal(pattern)
    if row >= 0:
        raise MissingDiagonalError(row)
    return pattern


def iluk_pattern(pattern: SparsityPattern, k: int) -> tuple[SparsityPattern, FillLevelTable]:
    """Level-of-fill symbolic factorization, serial row merge."""
    if k < 0:
        raise ValueError("fill level k must be >= 0")
    row = _first_missing_diagonal(pattern)
    if row >= 0:
        raise MissingDiagonalError(row)
    if k == 0:
        return pattern, FillLevelTable(np.zeros(pattern.nnz, dtype=np.int64))

    n = pattern.n
    # upper parts of finalized rows: (cols > m, their levels)
    upper_cols: list = [None] * n
    upper_levs: list = [None] * n
    out_cols: list = []
    out_levs: list = []
    row_counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        levs = {int(j): 0 for j in pattern.row_cols(i)}
        heap = [j for j in levs if j < i]
        heapq.heapify(heap)
        done = set()
        while heap:
            m = heapq.heappop(heap)
            if m in done:
                continue
            done.add(m)
            lev_im = levs[m]
            if lev_im > k:
                continue  # position dropped, generates no fill
            for j, lev_mj in zip(upper_cols[m], upper_levs[m]):
                cand = lev_im + lev_mj + 1
                j = int(j)
                if j in levs:
                    if cand < levs[j]:
                        levs[j] = cand
                elif cand <= k:
                    levs[j] = cand
                    if j < i:
                        heapq.heappush(heap, j)
        cols = np.array(sorted(c for c, l in levs.items() if l <= k), dtype=np.int64)
        lv = np.array([levs[int(c)] for c in cols], dtype=np.int64)
        out_cols.append(cols)
        out_levs.append(lv)
        row_counts[i] = cols.size
        up = cols > i
        upper_cols[i] = cols[up]
        upper_levs[i] = lv[up]

    row_start = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(row_counts, out=row_start[1:])
    result = SparsityPattern(n, row_start, np.concatenate(out_cols))
    return result, FillLevelTable(np.concatenate(out_levs))


def _entry_keys(n: int, row_start: np.ndarray, col: np.ndarray) -> np.ndarray:
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(row_start))
    return rows * np.int64(n + 1) + col


def assemble_factors(
    a: CsrMatrix,
    pattern: SparsityPattern,
    perm: Permutation,
    drop_tol: float = 0.0,
    milu: bool = False,
) -> IluFactors:
    """Place the permuted matrix values into the factor pattern.

    pattern must contain every position of P A P^T; positions not present in
    the permuted matrix (symbolic fill) start at zero.
    """
    if pattern.n != a.n:
        raise MatrixFormatError(
            f"pattern size {pattern.n} does not match matrix size {a.n}"
        )
    permuted = permute_symmetric(a, perm)
    pat_keys = _entry_keys(pattern.n, pattern.row_start, pattern.col)
    src_keys = _entry_keys(permuted.n, permuted.row_start, permuted.col)
    idx = np.searchsorted(pat_keys, src_keys)
    if np.any(idx >= pat_keys.size) or np.any(pat_keys[np.minimum(idx, pat_keys.size - 1)] != src_keys):
        raise MatrixFormatError("pattern does not cover the permuted matrix")
    val = np.zeros(pattern.nnz, dtype=np.float64)
    val[idx] = permuted.val

    diag_keys = np.arange(pattern.n, dtype=np.int64) * np.int64(pattern.n + 1) + np.arange(
        pattern.n, dtype=np.int64
    )
    diag_pos = np.searchsorted(pat_keys, diag_keys)
    bad = (diag_pos >= pat_keys.size) | (pat_keys[np.minimum(diag_pos, pat_keys.size - 1)] != diag_keys)
    missing = np.flatnonzero(bad)
    if missing.size:
        raise MissingDiagonalError(int(missing[0]))
    return IluFactors(
        pattern.n, pattern, val, diag_pos.astype(np.int64), perm, drop_tol, milu
    )
