"""Benchmark pipeline: order, partition, factor, solve, and report.

Each worker count is a fresh run: schedules and tiles are rebuilt, the
factor values are reset from the pristine assembly before every timed
repeat, and sha256 digests of the factor and solve outputs are compared
across worker counts. The median of the repeats is reported per phase.
"""

from __future__ import annotations

import hashlib
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .csr import (
    CsrMatrix,
    Permutation,
    lower_pattern,
    permute_symmetric,
    spmv,
    symmetrize_pattern,
)
from .errors import ConfigurationError
from .factor import factor_parallel_upper, factor_serial
from .krylov import gmres, pcg
from .lower import (
    DEFAULT_TILE_SIZE,
    build_tiles,
    er_chunks,
    factor_er,
    factor_sr,
    select_lower_method,
)
from .ordering import (
    LOWER_A,
    LOWER_A_PLUS_AT,
    PartitionConfig,
    build_level_permutation,
    compute_levels,
    compute_levels_backward,
    contiguous_partition,
    level_stats,
    partition_stages,
    rcm_order,
)
from .symbolic import assemble_factors, iluk_pattern
from .sync import build_sync_schedule, build_triangle_schedule
from .trisolve import (
    apply_preconditioner,
    solve_baseline_csrls,
    solve_ls,
    solve_ls_lower,
)

__all__ = ["BenchConfig", "run_pipeline", "REPORT_SCHEMA_VERSION"]

REPORT_SCHEMA_VERSION = 1

SOLVE_PATHS = ("solve_csrls", "solve_ls", "solve_ls_lower")


@dataclass
class BenchConfig:
    matrix: CsrMatrix
    matrix_name: str = "matrix"
    order: str = "natural"                 # natural | rcm | file
    base_perm: Permutation | None = None   # required for order == "file"
    levels_on: str = "AplusAT"             # A | AplusAT
    k: int = 0
    tau: float = 0.0
    milu: bool = False
    lower: str = "auto"                    # auto | sr | er | none
    min_level_rows: int = 16
    density_factor: float = 4.0
    tile_size: int = DEFAULT_TILE_SIZE
    threads: list = field(default_factory=lambda: [1])
    solver: str = "none"                   # none | pcg | gmres
    restart: int = 50
    tol: float = 1e-6
    maxit: int = 1000
    repeats: int = 5
    require_convergence: bool = False

    def validate(self) -> None:
        if self.order not in ("natural", "rcm", "file"):
            raise ConfigurationError(f"unknown order {self.order!r}")
        if self.order == "file" and self.base_perm is None:
            raise ConfigurationError("order 'file' needs a permutation")
        if self.levels_on not in ("A", "AplusAT"):
            raise ConfigurationError(f"unknown levels-on {self.levels_on!r}")
        if self.lower not in ("auto", "sr", "er", "none"):
            raise ConfigurationError(f"unknown lower method {self.lower!r}")
        if self.lower == "sr" and self.levels_on == "A":
            raise ConfigurationError(
                "sr needs levels from A+A^T; use --levels-on AplusAT or --lower er"
            )
        if self.solver not in ("none", "pcg", "gmres"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if not self.threads or any(t < 1 for t in self.threads):
            raise ConfigurationError("worker counts must be positive")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if self.k < 0:
            raise ConfigurationError("fill level k must be >= 0")
        if self.tau < 0:
            raise ConfigurationError("drop tolerance must be >= 0")


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def _median(xs) -> float:
    return float(statistics.median(xs))


def _partition_config(cfg: BenchConfig) -> PartitionConfig:
    if cfg.lower == "none":
        # accept every level so nothing is excluded
        return PartitionConfig(min_level_rows=1, density_factor=float("inf"))
    return PartitionConfig(cfg.min_level_rows, cfg.density_factor)


def _level_source(pattern, levels_on: str):
    if levels_on == "A":
        return lower_pattern(pattern), LOWER_A
    return lower_pattern(symmetrize_pattern(pattern)), LOWER_A_PLUS_AT


def _choose_method(cfg: BenchConfig, factors, partition) -> str:
    count = partition.n - partition.n_upper
    if cfg.lower in ("sr", "er"):
        return cfg.lower if count else "none"
    if cfg.lower == "none" or count == 0:
        return "none"
    if cfg.levels_on == "A":
        return "er"
    pat = factors.pattern
    rows = np.arange(partition.n_upper, partition.n)
    seg = np.array(
        [np.searchsorted(pat.row_cols(int(r)), partition.n_upper) for r in rows],
        dtype=np.int64,
    )
    imbalance = float(seg.max() / seg.mean()) if seg.size and seg.mean() > 0 else 0.0
    return select_lower_method(count, max(cfg.threads), imbalance)


class _Build:
    """Everything one worker count needs, rebuilt (and timed) per run."""

    def __init__(self, cfg: BenchConfig, nthreads: int, method: str):
        a = cfg.matrix
        base = (
            cfg.base_perm if cfg.order == "file"
            else rcm_order(a.pattern) if cfg.order == "rcm"
            else Permutation.identity(a.n)
        )
        pa = permute_symmetric(a, base)
        src, kind = _level_source(pa.pattern, cfg.levels_on)
        self.schedule = compute_levels(src, kind)
        raw_partition = partition_stages(
            self.schedule, np.diff(pa.row_start), _partition_config(cfg)
        )
        lperm = build_level_permutation(raw_partition)
        self.total_perm = lperm.compose(base)
        self.permuted = permute_symmetric(a, self.total_perm)
        self.partition = contiguous_partition(raw_partition)
        pattern, _ = iluk_pattern(self.permuted.pattern, cfg.k)
        self.factors = assemble_factors(
            a, pattern, self.total_perm, cfg.tau, cfg.milu
        )
        self.upper_sync = build_sync_schedule(self.partition, pattern, nthreads)
        self.fwd_sync = build_triangle_schedule(pattern, nthreads, "forward")
        self.bwd_sync = build_triangle_schedule(pattern, nthreads, "backward")
        self.fwd_levels = compute_levels(lower_pattern(pattern))
        self.bwd_levels = compute_levels_backward(pattern)
        self.method = method
        if method == "sr":
            self.layout = build_tiles(self.factors, self.partition, cfg.tile_size)
        elif method == "er":
            self.layout = er_chunks(pattern, self.partition.n_upper, nthreads)
        else:
            self.layout = None


def _factor_lower_once(build: _Build, cfg: BenchConfig, nthreads: int) -> None:
    if build.method == "sr":
        factor_sr(build.factors, build.layout, nthreads)
    elif build.method == "er":
        factor_er(build.factors, build.partition, nthreads=nthreads)
    elif build.partition.n_upper < build.partition.n:
        # excluded rows but no lower method: finish them serially
        factor_er(build.factors, build.partition, nthreads=1)


def _time_phase(repeats, reset, body):
    times = []
    for _ in range(repeats):
        reset()
        t0 = time.perf_counter()
        body()
        times.append(time.perf_counter() - t0)
    return _median(times)


def run_pipeline(cfg: BenchConfig) -> dict:
    cfg.validate()
    a = cfg.matrix
    threads = list(dict.fromkeys(cfg.threads))  # dedupe, keep order

    # untimed pre-pass: fix the lower method so all runs agree
    probe = _Build(cfg, threads[0], "none")
    method = _choose_method(cfg, probe.factors, probe.partition)

    # serial reference digest
    ref_factors = assemble_factors(a, probe.factors.pattern, probe.total_perm,
                                   cfg.tau, cfg.milu)
    factor_serial(ref_factors)
    serial_digest = _digest(ref_factors.val)

    timings = {p: {} for p in
               ("setup", "factor_upper", "factor_lower") + SOLVE_PATHS}
    factor_digests = {}
    solve_digests = {p: {} for p in SOLVE_PATHS}
    krylov_report = None

    for t in threads:
        setup_times = []
        build = None
        for _ in range(cfg.repeats):
            t0 = time.perf_counter()
            build = _Build(cfg, t, method)
            setup_times.append(time.perf_counter() - t0)
        timings["setup"][t] = _median(setup_times)

        factors = build.factors
        pristine = factors.val.copy()
        n_upper = build.partition.n_upper

        def reset_pristine():
            factors.val[:] = pristine

        def upper_once():
            if n_upper:
                factor_parallel_upper(factors, build.upper_sync)

        timings["factor_upper"][t] = _time_phase(
            cfg.repeats, reset_pristine, upper_once
        )
        reset_pristine()
        upper_once()
        post_upper = factors.val.copy()

        def reset_post_upper():
            factors.val[:] = post_upper

        if n_upper < build.partition.n:
            timings["factor_lower"][t] = _time_phase(
                cfg.repeats, reset_post_upper, lambda: _factor_lower_once(build, cfg, t)
            )
        else:
            timings["factor_lower"][t] = None
        reset_post_upper()
        _factor_lower_once(build, cfg, t)
        factor_digests[t] = _digest(factors.val)

        b = spmv(build.permuted, np.ones(a.n))
        runners = {
            "solve_csrls": lambda: solve_baseline_csrls(
                factors,
                solve_baseline_csrls(factors, b, build.fwd_levels, t, "forward"),
                build.bwd_levels, t, "backward",
            ),
            "solve_ls": lambda: solve_ls(
                factors,
                solve_ls(factors, b, build.fwd_sync, "forward"),
                build.bwd_sync, "backward",
            ),
            "solve_ls_lower": lambda: solve_ls(
                factors,
                solve_ls_lower(factors, b, build.upper_sync, build.partition,
                               build.layout, "forward", t),
                build.bwd_sync, "backward",
            ),
        }
        for path, run in runners.items():
            z = run()
            solve_digests[path][t] = _digest(z)
            times = []
            for _ in range(cfg.repeats):
                t0 = time.perf_counter()
                run()
                times.append(time.perf_counter() - t0)
            timings[path][t] = _median(times)

        if krylov_report is None and cfg.solver != "none":
            precond = lambda r: apply_preconditioner(factors, r)
            if cfg.solver == "pcg":
                res = pcg(build.permuted, b, precond, cfg.tol, cfg.maxit)
            else:
                res = gmres(build.permuted, b, precond, cfg.restart,
                            cfg.tol, cfg.maxit)
            krylov_report = {
                "method": cfg.solver,
                "iterations": res.iterations,
                "converged": bool(res.converged),
                "final_relative_residual": float(res.residual_history[-1]),
                "stopping_rule": "relative_residual",
            }

    determinism_ok = len(set(factor_digests.values())) == 1 and all(
        len(set(d.values())) == 1 for d in solve_digests.values()
    ) and next(iter(factor_digests.values())) == serial_digest

    def speedup_row(row):
        base = row.get(1)
        if base is None or not base:
            return {t: None for t in row}
        return {t: (base / v if v else None) for t, v in row.items()}

    speedups = {
        phase: speedup_row({t: v for t, v in row.items() if v is not None})
        for phase, row in timings.items()
    }
    csrls_base = timings["solve_csrls"].get(1)
    vs_csrls = {
        path: {
            t: (csrls_base / v if csrls_base and v else None)
            for t, v in timings[path].items()
        }
        for path in SOLVE_PATHS
    }

    stats = level_stats(probe.schedule)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {
            "matrix": cfg.matrix_name,
            "order": cfg.order,
            "levels_on": cfg.levels_on,
            "k": cfg.k,
            "tau": cfg.tau,
            "milu": cfg.milu,
            "lower": cfg.lower,
            "min_level_rows": cfg.min_level_rows,
            "density_factor": cfg.density_factor,
            "tile_size": cfg.tile_size,
            "threads": threads,
            "solver": cfg.solver,
            "restart": cfg.restart,
            "tol": cfg.tol,
            "maxit": cfg.maxit,
            "repeats": cfg.repeats,
        },
        "matrix": {
            "name": cfg.matrix_name,
            "n": a.n,
            "nnz": a.nnz,
            "mean_row_nnz": a.nnz / a.n if a.n else 0.0,
        },
        "levels": stats,
        "partition": {
            "cut_level": probe.partition.cut_level,
            "num_upper_levels": len(probe.partition.upper_levels),
            "n_upper": probe.partition.n_upper,
            "rows_excluded": probe.partition.n - probe.partition.n_upper,
            "method": method,
        },
        "timings": timings,
        "speedups": speedups,
        "solve_speedups_vs_csrls": vs_csrls,
        "krylov": krylov_report,
        "digests": {
            "serial": serial_digest,
            "factor": factor_digests,
            "solve": solve_digests,
        },
        "determinism_ok": bool(determinism_ok),
    }
    return report
