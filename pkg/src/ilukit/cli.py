"""ilu-bench: run the factorization pipeline on a matrix and report timings.

Exit codes: 0 ok, 2 bad input or flags, 3 zero pivot, 4 determinism
violation across worker counts, 5 solver did not converge (only with
--require-convergence).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .errors import (
    ConfigurationError,
    MatrixFormatError,
    MissingDiagonalError,
    ZeroPivotError,
)
from .generate import generate_test_matrix
from .mmio import read_matrix_market_file, read_permutation_file
from .pipeline import BenchConfig, run_pipeline

__all__ = ["main", "build_parser", "report_to_csv"]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_ZERO_PIVOT = 3
EXIT_DETERMINISM = 4
EXIT_NO_CONVERGENCE = 5


def _threads_list(text: str) -> list:
    try:
        vals = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad worker list {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("worker list is empty")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ilu-bench",
        description="Benchmark parallel incomplete-LU factorization and "
                    "triangular solves on a sparse matrix.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", metavar="FILE",
                     help="Matrix Market file to factor")
    src.add_argument("--gen", metavar="KIND",
                     choices=["tridiag", "poisson2d", "poisson3d", "convdiff2d"],
                     help="generate a stencil matrix instead of reading one")
    p.add_argument("--size", type=int, metavar="N",
                   help="generator size parameter (grid edge or chain length)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--perm", metavar="FILE",
                   help="external permutation file (one 0-based index per line)")
    p.add_argument("--order", choices=["natural", "rcm", "file"], default=None,
                   help="row/column ordering (default: natural, or file when "
                        "--perm is given)")
    p.add_argument("--levels-on", choices=["A", "AplusAT"], default="AplusAT",
                   help="pattern the level schedule is computed on")
    p.add_argument("--k", type=int, default=0, help="fill level for ILU(k)")
    p.add_argument("--tau", type=float, default=0.0,
                   help="threshold drop tolerance")
    p.add_argument("--milu", action="store_true",
                   help="compensate dropped mass on the diagonal")
    p.add_argument("--lower", choices=["auto", "sr", "er", "none"],
                   default="auto", help="lower-stage method")
    p.add_argument("--min-level-rows", type=int, default=16,
                   help="levels smaller than this are excluded")
    p.add_argument("--density-factor", type=float, default=4.0,
                   help="levels denser than this multiple of the mean are excluded")
    p.add_argument("--tile-size", type=int, default=256,
                   help="nonzeros per tile in the segmented-rows stage")
    p.add_argument("--threads", type=_threads_list, default=[1],
                   metavar="LIST", help="comma-separated worker counts, e.g. 1,2,4")
    p.add_argument("--solver", choices=["none", "pcg", "gmres"], default="none",
                   help="run a preconditioned Krylov solve after factoring")
    p.add_argument("--restart", type=int, default=50, help="GMRES restart length")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="relative residual stopping tolerance")
    p.add_argument("--maxit", type=int, default=1000, help="iteration cap")
    p.add_argument("--repeats", type=int, default=5,
                   help="timing repetitions per phase (median reported)")
    p.add_argument("--report", choices=["json", "csv"], default="json")
    p.add_argument("--out", metavar="FILE", help="report file (default: stdout)")
    p.add_argument("--require-convergence", action="store_true",
                   help="exit 5 if the Krylov solve does not converge")
    return p


def _load_inputs(args):
    if args.gen is not None:
        if args.size is None:
            raise ConfigurationError("--gen needs --size")
        matrix = generate_test_matrix(args.gen, args.size, args.seed)
        name = f"{args.gen}-{args.size}"
    else:
        matrix = read_matrix_market_file(args.matrix)
        name = args.matrix
    perm = read_permutation_file(args.perm) if args.perm else None
    order = args.order
    if order is None:
        order = "file" if perm is not None else "natural"
    if order == "file" and perm is None:
        raise ConfigurationError("--order file needs --perm")
    return matrix, name, perm, order


def report_to_csv(report: dict) -> str:
    """Flat section,key,worker,value rows carrying the same numbers as JSON."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "key", "worker", "value"])

    def put(section, key, worker, value):
        w.writerow([section, key, worker, "" if value is None else value])

    put("report", "schema_version", "", report["schema_version"])
    for sec in ("config", "matrix", "levels", "partition"):
        for key, value in report[sec].items():
            if isinstance(value, list):
                value = " ".join(str(v) for v in value)
            put(sec, key, "", value)
    for sec in ("timings", "speedups", "solve_speedups_vs_csrls"):
        for phase, row in report[sec].items():
            for worker, value in row.items():
                put(sec, phase, worker, value)
    if report["krylov"] is not None:
        for key, value in report["krylov"].items():
            put("krylov", key, "", value)
    put("digests", "serial", "", report["digests"]["serial"])
    for worker, value in report["digests"]["factor"].items():
        put("digests", "factor", worker, value)
    for path, row in report["digests"]["solve"].items():
        for worker, value in row.items():
            put("digests", f"solve:{path}", worker, value)
    put("report", "determinism_ok", "", report["determinism_ok"])
    return buf.getvalue()


def _emit(report: dict, args) -> None:
    if args.report == "json":
        text = json.dumps(report, indent=2)
    else:
        text = report_to_csv(report)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        matrix, name, perm, order = _load_inputs(args)
        cfg = BenchConfig(
            matrix=matrix,
            matrix_name=name,
            order=order,
            base_perm=perm,
            levels_on=args.levels_on,
            k=args.k,
            tau=args.tau,
            milu=args.milu,
            lower=args.lower,
            min_level_rows=args.min_level_rows,
            density_factor=args.density_factor,
            tile_size=args.tile_size,
            threads=args.threads,
            solver=args.solver,
            restart=args.restart,
            tol=args.tol,
            maxit=args.maxit,
            repeats=args.repeats,
            require_convergence=args.require_convergence,
        )
        report = run_pipeline(cfg)
    except ZeroPivotError as exc:
        print(f"ilu-bench: {exc}", file=sys.stderr)
        return EXIT_ZERO_PIVOT
    except (ConfigurationError, MatrixFormatError, MissingDiagonalError,
            OSError) as exc:
        print(f"ilu-bench: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _emit(report, args)
    if not report["determinism_ok"]:
        print("ilu-bench: factor digests differ across worker counts",
              file=sys.stderr)
        return EXIT_DETERMINISM
    if (args.require_convergence and report["krylov"] is not None
            and not report["krylov"]["converged"]):
        print("ilu-bench: solver did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
