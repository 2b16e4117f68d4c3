"""Matrix Market coordinate I/O and plain-text permutation files.

Supported: coordinate format, real or integer fields, general / symmetric /
skew-symmetric storage, square matrices only. Pattern-only files are
rejected because numeric values are required downstream. Explicit zero
values are stored, duplicates are summed, symmetric storage is expanded to
both triangles.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .csr import CsrMatrix, Permutation
from .errors import MatrixFormatError

__all__ = [
    "parse_matrix_market",
    "write_matrix_market",
    "read_matrix_market_file",
    "write_matrix_market_file",
    "read_permutation_file",
    "write_permutation_file",
]

_FIELDS = {"real", "integer"}
_SYMMETRIES = {"general", "symmetric", "skew-symmetric"}


def parse_matrix_market(stream) -> CsrMatrix:
    """Parse a Matrix Market coordinate stream into a CsrMatrix."""
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream.decode() if isinstance(stream, bytes) else stream)

    header = stream.readline()
    parts = header.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
        raise MatrixFormatError(f"malformed MatrixMarket header: {header.strip()!r}")
    layout, field, symmetry = parts[2], parts[3], parts[4]
    if layout != "coordinate":
        raise MatrixFormatError(f"unsupported layout {layout!r} (coordinate required)")
    if field == "pattern":
        raise MatrixFormatError("pattern-only files are rejected: numeric values required")
    if field not in _FIELDS:
        raise MatrixFormatError(f"unsupported field {field!r}")
    if symmetry not in _SYMMETRIES:
        raise MatrixFormatError(f"unsupported symmetry {symmetry!r}")

    size_line = None
    for line in stream:
        s = line.strip()
        if s and not s.startswith("%"):
            size_line = s
            break
    if size_line is None:
        raise MatrixFormatError("missing size line")
    dims = size_line.split()
    if len(dims) != 3:
        raise MatrixFormatError(f"malformed size line: {size_line!r}")
    try:
        nrows, ncols, nent = (int(x) for x in dims)
    except ValueError as exc:
        raise MatrixFormatError(f"malformed size line: {size_line!r}") from exc
    if nrows != ncols:
        raise MatrixFormatError(f"matrix is not square ({nrows}x{ncols})")
    n = nrows

    rows = np.empty(nent, dtype=np.int64)
    cols = np.empty(nent, dtype=np.int64)
    vals = np.empty(nent, dtype=np.float64)
    k = 0
    for line in stream:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        toks = s.split()
        if len(toks) != 3:
            raise MatrixFormatError(f"malformed entry line: {s!r}")
        if k >= nent:
            raise MatrixFormatError("more entries than declared")
        try:
            i = int(toks[0])
            j = int(toks[1])
            v = float(toks[2])
        except ValueError as exc:
            raise MatrixFormatError(f"malformed entry line: {s!r}") from exc
        if not (1 <= i <= n and 1 <= j <= n):
            raise MatrixFormatError(f"entry index ({i},{j}) out of range for n={n}")
        rows[k] = i - 1
        cols[k] = j - 1
        vals[k] = v
        k += 1
    if k != nent:
        raise MatrixFormatError(f"declared {nent} entries, found {k}")

    if symmetry != "general":
        off = rows != cols
        sign = -1.0 if symmetry == "skew-symmetric" else 1.0
        mirrored_rows = cols[off]
        mirrored_cols = rows[off]
        mirrored_vals = sign * vals[off]
        rows = np.concatenate([rows, mirrored_rows])
        cols = np.concatenate([cols, mirrored_cols])
        vals = np.concatenate([vals, mirrored_vals])

    return CsrMatrix.from_coo(n, rows, cols, vals)


def write_matrix_market(a: CsrMatrix, sink) -> None:
    """Write coordinate/general output that round-trips exactly."""
    sink.write("%%MatrixMarket matrix coordinate real general\n")
    sink.write(f"{a.n} {a.n} {a.nnz}\n")
    for i in range(a.n):
        for k in range(a.row_start[i], a.row_start[i + 1]):
            # %.17g preserves every float64 bit across the round trip
            sink.write(f"{i + 1} {a.col[k] + 1} {a.val[k]:.17g}\n")


def read_matrix_market_file(path) -> CsrMatrix:
    with open(path, "r", encoding="ascii") as fh:
        return parse_matrix_market(fh)


def write_matrix_market_file(a: CsrMatrix, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        write_matrix_market(a, fh)


def read_permutation_file(path, n: int | None = None) -> Permutation:
    """Read one 0-based index per line; line k gives perm[k] (new -> old)."""
    text = Path(path).read_text(encoding="ascii")
    entries = [int(s) for s in text.split()]
    perm = np.array(entries, dtype=np.int64)
    if n is not None and perm.size != n:
        raise MatrixFormatError(f"permutation has {perm.size} entries, expected {n}")
    p = Permutation(perm)
    p.validate()
    return p


def write_permutation_file(p: Permutation, path) -> None:
    Path(path).write_text("\n".join(str(int(x)) for x in p.perm) + "\n", encoding="ascii")
