import numpy as np
import pytest

import ilukit as ik

from oracles import fill_levels_dense


def pattern_mask(pat):
    m = np.zeros((pat.n, pat.n), dtype=bool)
    for i in range(pat.n):
        m[i, pat.row_cols(i)] = True
    return m


def test_ilu0_keeps_pattern():
    tri = ik.tridiag(5).pattern
    out = ik.ilu0_pattern(tri)
    assert np.array_equal(out.row_start, tri.row_start)
    assert np.array_equal(out.col, tri.col)


def test_ilu0_missing_diagonal_reports_row():
    a = ik.CsrMatrix.from_coo(3, [0, 1, 2], [0, 1, 0], [1.0, 1.0, 1.0])
    with pytest.raises(ik.MissingDiagonalError) as exc:
        ik.ilu0_pattern(a.pattern)
    assert exc.value.row == 2


def test_iluk_k0_is_input_pattern():
    a = ik.poisson2d(4)
    pat, levels = ik.iluk_pattern(a.pattern, 0)
    assert np.array_equal(pat.col, a.pattern.col)
    assert np.array_equal(levels.level, np.zeros(a.nnz, dtype=levels.level.dtype))


def test_iluk_tridiagonal_never_fills():
    tri = ik.tridiag(8).pattern
    for k in range(4):
        pat, _ = ik.iluk_pattern(tri, k)
        assert pat.nnz == tri.nnz


def test_iluk_matches_dense_fill_oracle():
    grid = ik.poisson2d(4).pattern
    base = pattern_mask(grid)
    for k in (1, 2):
        pat, table = ik.iluk_pattern(grid, k)
        want_levels = fill_levels_dense(base, k)
        got = pattern_mask(pat)
        assert np.array_equal(got, want_levels <= k)
        for i in range(pat.n):
            for p in range(pat.row_start[i], pat.row_start[i + 1]):
                assert table.level[p] == want_levels[i, int(pat.col[p])]


def test_iluk_patterns_nest(rng):
    for _ in range(50):
        n = int(rng.integers(5, 40))
        mask = rng.random((n, n)) < 0.15
        np.fill_diagonal(mask, True)
        a = ik.CsrMatrix.from_dense(np.where(mask, 1.0, 0.0))
        prev = None
        for k in (0, 1, 2):
            pat, _ = ik.iluk_pattern(a.pattern, k)
            cur = {(i, int(c)) for i in range(n) for c in pat.row_cols(i)}
            if prev is not None:
                assert prev <= cur
            prev = cur


def test_assemble_identity_perm_copies_values():
    a = ik.poisson2d(3)
    f = ik.assemble_factors(a, a.pattern, ik.Permutation.identity(a.n))
    assert np.array_equal(f.val, a.val)
    assert all(int(a.pattern.col[f.diag_pos[i]]) == i for i in range(a.n))


def test_assemble_swap_perm_moves_values():
    a = ik.CsrMatrix.from_dense([[4.0, 2.0], [1.0, 3.0]])
    p = ik.Permutation([1, 0])
    pa = ik.permute_symmetric(a, p)
    f = ik.assemble_factors(a, pa.pattern, p)
    assert np.array_equal(f.val, pa.val)


def test_assemble_fill_positions_start_zero():
    a = ik.poisson2d(4)
    pat, _ = ik.iluk_pattern(a.pattern, 1)
    f = ik.assemble_factors(a, pat, ik.Permutation.identity(a.n))
    orig = {(i, int(c)) for i in range(a.n) for c in a.pattern.row_cols(i)}
    for i in range(a.n):
        for p in range(pat.row_start[i], pat.row_start[i + 1]):
            pos = (i, int(pat.col[p]))
            if pos not in orig:
                assert f.val[p] == 0.0


def test_assemble_rejects_uncovered_pattern():
    a = ik.tridiag(4)
    small = ik.CsrMatrix.from_dense(np.eye(4)).pattern
    with pytest.raises(ik.MatrixFormatError):
        ik.assemble_factors(a, small, ik.Permutation.identity(4))


def test_assemble_rejects_missing_diagonal():
    a = ik.CsrMatrix.from_coo(2, [0, 0, 1], [0, 1, 0], [1.0, 2.0, 3.0])
    with pytest.raises(ik.MissingDiagonalError) as exc:
        ik.assemble_factors(a, a.pattern, ik.Permutation.identity(2))
    assert exc.value.row == 1


def test_assemble_size_mismatch():
    a = ik.tridiag(4)
    with pytest.raises(ik.MatrixFormatError):
        ik.assemble_factors(a, ik.tridiag(5).pattern, ik.Permutation.identity(4))
