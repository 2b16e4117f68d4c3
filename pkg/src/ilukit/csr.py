"""Square sparse matrices in CSR form: types, permutations, and pattern ops.

Values are double precision throughout. Explicit zeros are legitimate stored
entries and are never dropped: the stored pattern is the symbolic contract
that the factorization operates on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MatrixFormatError

__all__ = [
    "CsrMatrix",
    "SparsityPattern",
    "Permutation",
    "transpose",
    "symmetrize_pattern",
    "lower_pattern",
    "permute_symmetric",
    "spmv",
]


def _as_index_array(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


@dataclass
class SparsityPattern:
    """Structure-only view of a square CSR matrix."""

    n: int
    row_start: np.ndarray  # int64, length n+1
    col: np.ndarray        # int64, length nnz

    def __post_init__(self):
        self.row_start = _as_index_array(self.row_start)
        self.col = _as_index_array(self.col)

    @property
    def nnz(self) -> int:
        return int(self.row_start[self.n])

    def row_cols(self, i: int) -> np.ndarray:
        return self.col[self.row_start[i]:self.row_start[i + 1]]

    def validate(self) -> None:
        _validate_structure(self.n, self.row_start, self.col)

    def copy(self) -> "SparsityPattern":
        return SparsityPattern(self.n, self.row_start.copy(), self.col.copy())


@dataclass
class CsrMatrix:
    """Square sparse matrix: row offsets, sorted column indices, values."""

    n: int
    row_start: np.ndarray  # int64, length n+1
    col: np.ndarray        # int64, length nnz
    val: np.ndarray        # float64, length nnz

    def __post_init__(self):
        self.row_start = _as_index_array(self.row_start)
        self.col = _as_index_array(self.col)
        self.val = np.ascontiguousarray(self.val, dtype=np.float64)

    @property
    def nnz(self) -> int:
        return int(self.row_start[self.n])

    @property
    def pattern(self) -> SparsityPattern:
        return SparsityPattern(self.n, self.row_start, self.col)

    def row_cols(self, i: int) -> np.ndarray:
        return self.col[self.row_start[i]:self.row_start[i + 1]]

    def row_vals(self, i: int) -> np.ndarray:
        return self.val[self.row_start[i]:self.row_start[i + 1]]

    def validate(self) -> None:
        _validate_structure(self.n, self.row_start, self.col)
        if self.val.shape != self.col.shape:
            raise MatrixFormatError("val and col lengths differ")

    def copy(self) -> "CsrMatrix":
        return CsrMatrix(self.n, self.row_start.copy(), self.col.copy(), self.val.copy())

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        for i in range(self.n):
            dense[i, self.row_cols(i)] = self.row_vals(i)
        return dense

    @staticmethod
    def from_coo(n: int, rows, cols, vals, sum_duplicates: bool = True) -> "CsrMatrix":
        """Build from coordinate triples; sorts rows and sums duplicates.

        Duplicate positions that sum to zero remain stored entries.
        """
        rows = _as_index_array(rows)
        cols = _as_index_array(cols)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise MatrixFormatError("coordinate index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if sum_duplicates and rows.size:
            keep = np.empty(rows.size, dtype=bool)
            keep[0] = True
            keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(keep) - 1
            summed = np.zeros(int(group[-1]) + 1)
            np.add.at(summed, group, vals)
            rows, cols, vals = rows[keep], cols[keep], summed
        row_start = np.zeros(n + 1, dtype=np.int64)
        np.add.at(row_start, rows + 1, 1)
        np.cumsum(row_start, out=row_start)
        return CsrMatrix(n, row_start, cols, vals)

    @staticmethod
    def from_dense(dense: np.ndarray, keep=None) -> "CsrMatrix":
        """Build from a dense array, storing positions where keep (default: nonzero)."""
        dense = np.asarray(dense, dtype=np.float64)
        n = dense.shape[0]
        if dense.shape != (n, n):
            raise MatrixFormatError("dense input must be square")
        mask = (dense != 0.0) if keep is None else np.asarray(keep, dtype=bool)
        rows, cols = np.nonzero(mask)
        return CsrMatrix.from_coo(n, rows, cols, dense[rows, cols], sum_duplicates=False)


def _validate_structure(n: int, row_start: np.ndarray, col: np.ndarray) -> None:
    if n < 0:
        raise MatrixFormatError("negative dimension")
    if row_start.shape != (n + 1,):
        raise MatrixFormatError("row_start must have length n+1")
    if row_start[0] != 0 or np.any(np.diff(row_start) < 0):
        raise MatrixFormatError("row_start must start at 0 and be nondecreasing")
    nnz = int(row_start[n])
    if col.shape != (nnz,):
        raise MatrixFormatError("col length does not match row_start[n]")
    if nnz and (col.min() < 0 or col.max() >= n):
        raise MatrixFormatError("column index out of range")
    if nnz > 1:
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(row_start))
        same_row = rows[1:] == rows[:-1]
        bad = same_row & (np.diff(col) <= 0)
        if np.any(bad):
            raise MatrixFormatError(
                f"row {rows[1:][bad][0]} columns not strictly increasing"
            )


@dataclass
class Permutation:
    """Row/column renumbering: perm maps new index -> old, inv maps old -> new."""

    perm: np.ndarray
    inv: np.ndarray = field(default=None)

    def __post_init__(self):
        self.perm = _as_index_array(self.perm)
        if self.inv is None:
            self.inv = np.empty_like(self.perm)
            self.inv[self.perm] = np.arange(self.perm.size, dtype=np.int64)
        else:
            self.inv = _as_index_array(self.inv)

    @property
    def n(self) -> int:
        return self.perm.size

    def validate(self) -> None:
        n = self.n
        if not np.array_equal(np.sort(self.perm), np.arange(n)):
            raise MatrixFormatError("perm is not a bijection on [0, n)")
        if not np.array_equal(self.inv[self.perm], np.arange(n)):
            raise MatrixFormatError("inv is not the inverse of perm")

    @staticmethod
    def identity(n: int) -> "Permutation":
        e = np.arange(n, dtype=np.int64)
        return Permutation(e, e.copy())

    def compose(self, inner: "Permutation") -> "Permutation":
        """Permutation equivalent to applying `inner` first, then self on top.

        self is expressed in the index space produced by inner; the result
        maps final new indices straight to original old indices.
        """
        return Permutation(inner.perm[self.perm])

    def inverse(self) -> "Permutation":
        return Permutation(self.inv.copy(), self.perm.copy())


def transpose(a: CsrMatrix) -> CsrMatrix:
    """Explicit transpose; row i of the result holds column i of the input."""
    rows = np.repeat(np.arange(a.n, dtype=np.int64), np.diff(a.row_start))
    return CsrMatrix.from_coo(a.n, a.col, rows, a.val, sum_duplicates=False)


def transpose_pattern(p: SparsityPattern) -> SparsityPattern:
    t = transpose(CsrMatrix(p.n, p.row_start, p.col, np.zeros(p.nnz)))
    return SparsityPattern(t.n, t.row_start, t.col)


def symmetrize_pattern(p: SparsityPattern) -> SparsityPattern:
    """Union of the pattern with its transpose (positions only)."""
    t = transpose_pattern(p)
    rows_a = np.repeat(np.arange(p.n, dtype=np.int64), np.diff(p.row_start))
    rows_b = np.repeat(np.arange(p.n, dtype=np.int64), np.diff(t.row_start))
    m = CsrMatrix.from_coo(
        p.n,
        np.concatenate([rows_a, rows_b]),
        np.concatenate([p.col, t.col]),
        np.zeros(p.nnz + t.nnz),
    )
    return SparsityPattern(m.n, m.row_start, m.col)


def lower_pattern(p: SparsityPattern) -> SparsityPattern:
    """Strictly lower-triangular positions (col < row)."""
    rows = np.repeat(np.arange(p.n, dtype=np.int64), np.diff(p.row_start))
    keep = p.col < rows
    row_start = np.zeros(p.n + 1, dtype=np.int64)
    np.add.at(row_start, rows[keep] + 1, 1)
    np.cumsum(row_start, out=row_start)
    return SparsityPattern(p.n, row_start, p.col[keep])


def permute_symmetric(a: CsrMatrix, p: Permutation) -> CsrMatrix:
    """Symmetric renumbering: result[inv[i], inv[j]] = a[i, j]."""
    if p.n != a.n:
        raise MatrixFormatError("permutation size does not match matrix")
    rows = np.repeat(np.arange(a.n, dtype=np.int64), np.diff(a.row_start))
    return CsrMatrix.from_coo(a.n, p.inv[rows], p.inv[a.col], a.val, sum_duplicates=False)


def permute_pattern(pat: SparsityPattern, p: Permutation) -> SparsityPattern:
    m = permute_symmetric(CsrMatrix(pat.n, pat.row_start, pat.col, np.zeros(pat.nnz)), p)
    return SparsityPattern(m.n, m.row_start, m.col)


def spmv(a: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Plain CSR matrix-vector product, row-wise in ascending column order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.n,):
        raise MatrixFormatError("vector length does not match matrix")
    from ._kernels import spmv_kernel

    y = np.empty(a.n)
    spmv_kernel(a.row_start, a.col, a.val, x, y)
    return y
