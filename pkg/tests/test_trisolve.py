import numpy as np
import pytest

import ilukit as ik
from ilukit.trisolve import BACKWARD, FORWARD
from ilukit.ordering import PartitionConfig

from conftest import level_ordered_factors, serial_factored
from oracles import split_factors_dense


def factored(a, k=0):
    pattern, _ = ik.iluk_pattern(a.pattern, k)
    f = ik.assemble_factors(a, pattern, ik.Permutation.identity(a.n))
    ik.factor_serial(f)
    return f


def test_identity_forward_and_backward():
    f = factored(ik.CsrMatrix.from_dense(np.eye(3)))
    b = np.array([3.0, -1.0, 7.0])
    assert np.array_equal(ik.solve_serial(f, b, FORWARD), b)
    assert np.array_equal(ik.solve_serial(f, b, BACKWARD), b)


def test_2x2_example():
    f = factored(ik.CsrMatrix.from_dense([[4.0, 2.0], [1.0, 3.0]]))
    y = ik.solve_serial(f, np.array([6.0, 4.0]), FORWARD)
    assert np.array_equal(y, [6.0, 2.5])
    x = ik.solve_serial(f, y, BACKWARD)
    assert np.array_equal(x, [1.0, 1.0])


def test_which_is_checked():
    f = factored(ik.tridiag(4))
    with pytest.raises(ValueError):
        ik.solve_serial(f, np.ones(4), "sideways")


def test_preconditioner_is_exact_inverse_without_fill():
    a = ik.tridiag(32)
    f = factored(a)
    b = np.linspace(1.0, 2.0, 32)
    z = ik.apply_preconditioner(f, b)
    x = np.linalg.solve(a.to_dense(), b)
    assert np.max(np.abs(z - x)) <= 1e-12 * np.max(np.abs(x))


def test_residual_identity_with_fill():
    a = ik.convdiff2d(12, seed=3)
    f = factored(a, k=1)
    low, up = split_factors_dense(f)
    r = ik.spmv(a, np.ones(a.n))
    z = ik.apply_preconditioner(f, r)
    resid = np.max(np.abs(low @ (up @ z) - r))
    assert resid <= 1e-12 * np.max(np.abs(r))


@pytest.mark.parametrize("nthreads", [1, 2, 4])
def test_csrls_matches_serial(nthreads):
    a = ik.poisson2d(32)
    f = factored(a)
    b = ik.spmv(a, np.ones(a.n))
    setup = ik.build_solve_setup(f, "csrls", nthreads)
    y_ref = ik.solve_serial(f, b, FORWARD)
    y = ik.solve_baseline_csrls(f, b, setup.fwd_levels, nthreads, FORWARD)
    assert np.array_equal(y, y_ref)
    x_ref = ik.solve_serial(f, y_ref, BACKWARD)
    x = ik.solve_baseline_csrls(f, y, setup.bwd_levels, nthreads, BACKWARD)
    assert np.array_equal(x, x_ref)


@pytest.mark.parametrize("nthreads", [1, 2, 4, 8])
def test_p2p_matches_serial(nthreads):
    a = ik.poisson3d(6)
    f = factored(a)
    b = ik.spmv(a, np.linspace(0.5, 1.5, a.n))
    setup = ik.build_solve_setup(f, "ls", nthreads)
    assert np.array_equal(
        ik.solve_ls(f, b, setup.fwd_sync, FORWARD),
        ik.solve_serial(f, b, FORWARD),
    )
    assert np.array_equal(
        ik.solve_ls(f, b, setup.bwd_sync, BACKWARD),
        ik.solve_serial(f, b, BACKWARD),
    )


@pytest.mark.parametrize("nthreads", [1, 2, 4])
def test_two_stage_with_tiles_matches_serial(nthreads):
    a = ik.random_diag_dominant(300, row_nnz=6, seed=40)
    f, partition, _ = level_ordered_factors(a, cut=3)
    ik.factor_serial(f)
    tiles = ik.build_tiles(f, partition, tile_size=32)
    setup = ik.build_solve_setup(f, "ls_lower", nthreads, partition, tiles)
    b = np.sin(np.arange(f.n, dtype=np.float64))
    y = ik.solve_ls_lower(f, b, setup.upper_sync, partition, tiles, FORWARD,
                          nthreads)
    assert np.array_equal(y, ik.solve_serial(f, b, FORWARD))
    x = ik.solve_ls_lower(f, y, setup.bwd_sync, partition, tiles, BACKWARD)
    assert np.array_equal(x, ik.solve_serial(f, y, BACKWARD))


@pytest.mark.parametrize("nthreads", [1, 2, 4])
def test_two_stage_with_chunks_matches_serial(nthreads):
    a = ik.random_diag_dominant(300, row_nnz=6, seed=41)
    f, partition, _ = level_ordered_factors(a, cut=3)
    ik.factor_serial(f)
    setup = ik.build_solve_setup(f, "ls_lower", nthreads, partition)
    b = np.linspace(-1.0, 1.0, f.n)
    y = ik.solve_ls_lower(f, b, setup.upper_sync, partition,
                          setup.lower_layout, FORWARD, nthreads)
    assert np.array_equal(y, ik.solve_serial(f, b, FORWARD))


def test_two_stage_empty_lower_matches_p2p():
    a = ik.poisson2d(8)
    f, partition, _ = level_ordered_factors(
        a, config=PartitionConfig(min_level_rows=1,
                                  density_factor=float("inf")),
    )
    ik.factor_serial(f)
    setup = ik.build_solve_setup(f, "ls_lower", 2, partition)
    b = np.arange(1.0, f.n + 1.0)
    y = ik.solve_ls_lower(f, b, setup.upper_sync, partition,
                          setup.lower_layout, FORWARD, 2)
    assert np.array_equal(y, ik.solve_serial(f, b, FORWARD))


def test_all_paths_agree_after_parallel_factorization():
    a = ik.poisson2d(16)
    f, partition, _ = level_ordered_factors(a, cut=2)
    ref = serial_factored(f)
    sched = ik.build_sync_schedule(partition, f.pattern, 4)
    ik.factor_parallel_upper(f, sched)
    ik.factor_er(f, partition, nthreads=4)
    assert np.array_equal(f.val, ref.val)
    b = ik.spmv(a, np.ones(a.n))
    serial = ik.apply_preconditioner(f, b)
    for path in ("csrls", "ls", "ls_lower"):
        setup = ik.build_solve_setup(f, path, 4, partition)
        assert np.array_equal(ik.apply_preconditioner(f, b, setup), serial)


def zeroed_diag_factors():
    f = factored(ik.tridiag(8))
    f.val[f.diag_pos[5]] = 0.0
    f.val[f.diag_pos[3]] = 0.0
    return f


def test_backward_zero_diagonal_raises_min_row_every_path():
    f = zeroed_diag_factors()
    b = np.ones(8)
    with pytest.raises(ik.ZeroPivotError) as e1:
        ik.solve_serial(f, b, BACKWARD)
    assert e1.value.row == 3
    setup = ik.build_solve_setup(f, "csrls", 2)
    with pytest.raises(ik.ZeroPivotError) as e2:
        ik.solve_baseline_csrls(f, b, setup.bwd_levels, 2, BACKWARD)
    assert e2.value.row == 3
    setup = ik.build_solve_setup(f, "ls", 2)
    with pytest.raises(ik.ZeroPivotError) as e3:
        ik.solve_ls(f, b, setup.bwd_sync, BACKWARD)
    assert e3.value.row == 3


def test_forward_ignores_stored_diagonal():
    # L has an implicit unit diagonal, so a zero stored diagonal only
    # matters on the backward sweep
    f = zeroed_diag_factors()
    y = ik.solve_serial(f, np.ones(8), FORWARD)
    assert np.all(np.isfinite(y))


def test_schedule_size_mismatch_rejected():
    f = factored(ik.tridiag(8))
    small = ik.compute_levels(ik.lower_pattern(ik.tridiag(4).pattern))
    with pytest.raises(ik.ConfigurationError):
        ik.solve_baseline_csrls(f, np.ones(8), small, 2, FORWARD)


def test_build_solve_setup_paths():
    f = factored(ik.poisson2d(4))
    assert ik.build_solve_setup(f, "serial").fwd_levels is None
    s = ik.build_solve_setup(f, "csrls", 2)
    assert s.fwd_levels is not None and s.bwd_levels is not None
    s = ik.build_solve_setup(f, "ls", 2)
    assert s.fwd_sync is not None and s.bwd_sync is not None
    with pytest.raises(ik.ConfigurationError):
        ik.build_solve_setup(f, "ls_lower", 2)
    with pytest.raises(ik.ConfigurationError):
        ik.build_solve_setup(f, "warp", 2)


def test_ls_lower_setup_defaults_to_chunks():
    a = ik.poisson2d(8)
    f, partition, _ = level_ordered_factors(a, cut=2)
    ik.factor_serial(f)
    s = ik.build_solve_setup(f, "ls_lower", 3, partition)
    assert isinstance(s.lower_layout, np.ndarray)
    assert s.upper_sync is not None and s.bwd_sync is not None
