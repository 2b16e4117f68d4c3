"""Shared-memory parallel incomplete-LU preconditioning toolkit.

Deterministic ILU(k)/ILU(tau) factorization and sparse triangular solves
with level scheduling, pruned point-to-point synchronization, and a
two-stage treatment of rows that level scheduling handles poorly. All
parallel paths are bitwise-identical to their serial counterparts.
"""

from .csr import (
    CsrMatrix,
    Permutation,
    SparsityPattern,
    lower_pattern,
    permute_symmetric,
    spmv,
    symmetrize_pattern,
    transpose,
)
from .errors import (
    BreakdownError,
    ConfigurationError,
    IlukitError,
    MatrixFormatError,
    MissingDiagonalError,
    ZeroPivotError,
)
from .factor import factor_parallel_upper, factor_serial
from .generate import (
    convdiff2d,
    generate_test_matrix,
    poisson2d,
    poisson3d,
    random_diag_dominant,
    tridiag,
)
from .krylov import KrylovResult, gmres, is_symmetric, iteration_experiment, pcg
from .lower import (
    TileLayout,
    build_tiles,
    er_chunks,
    factor_er,
    factor_sr,
    select_lower_method,
)
from .mmio import (
    parse_matrix_market,
    read_matrix_market_file,
    read_permutation_file,
    write_matrix_market,
    write_matrix_market_file,
    write_permutation_file,
)
from .ordering import (
    LevelSchedule,
    PartitionConfig,
    StagePartition,
    build_level_permutation,
    compute_levels,
    compute_levels_backward,
    contiguous_partition,
    level_stats,
    partition_stages,
    rcm_order,
)
from .pipeline import BenchConfig, run_pipeline
from .symbolic import IluFactors, assemble_factors, ilu0_pattern, iluk_pattern
from .sync import SyncSchedule, build_sync_schedule, build_triangle_schedule
from .trisolve import (
    apply_preconditioner,
    build_solve_setup,
    solve_baseline_csrls,
    solve_ls,
    solve_ls_lower,
    solve_serial,
)

__version__ = "0.1.0"

__all__ = [
    "BenchConfig",
    "BreakdownError",
    "ConfigurationError",
    "CsrMatrix",
    "IluFactors",
    "IlukitError",
    "KrylovResult",
    "LevelSchedule",
    "MatrixFormatError",
    "MissingDiagonalError",
    "PartitionConfig",
    "Permutation",
    "SparsityPattern",
    "StagePartition",
    "SyncSchedule",
    "TileLayout",
    "ZeroPivotError",
    "apply_preconditioner",
    "assemble_factors",
    "build_level_permutation",
    "build_solve_setup",
    "build_sync_schedule",
    "build_tiles",
    "build_triangle_schedule",
    "compute_levels",
    "compute_levels_backward",
    "contiguous_partition",
    "convdiff2d",
    "er_chunks",
    "factor_er",
    "factor_parallel_upper",
    "factor_serial",
    "factor_sr",
    "generate_test_matrix",
    "gmres",
    "ilu0_pattern",
    "iluk_pattern",
    "is_symmetric",
    "iteration_experiment",
    "level_stats",
    "lower_pattern",
    "parse_matrix_market",
    "partition_stages",
    "pcg",
    "permute_symmetric",
    "poisson2d",
    "poisson3d",
    "random_diag_dominant",
    "rcm_order",
    "read_matrix_market_file",
    "read_permutation_file",
    "run_pipeline",
    "select_lower_method",
    "solve_baseline_csrls",
    "solve_ls",
    "solve_ls_lower",
    "solve_serial",
    "spmv",
    "symmetrize_pattern",
    "transpose",
    "tridiag",
    "write_matrix_market",
    "write_matrix_market_file",
    "write_permutation_file",
]
