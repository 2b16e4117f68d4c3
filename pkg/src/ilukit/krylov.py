"""Preconditioned Krylov solvers and the ordering sensitivity experiment.

PCG for symmetric positive definite systems and restarted GMRES with right
preconditioning for the general case. Iteration counts are matrix-vector
products. Stopping rule is the relative residual ||b - A x||_2 / ||b||_2;
PCG tracks it through the recurrence residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csr import (
    CsrMatrix,
    Permutation,
    lower_pattern,
    permute_symmetric,
    spmv,
    symmetrize_pattern,
    transpose,
)
from .errors import BreakdownError, IlukitError
from .factor import factor_serial
from .ordering import (
    LOWER_A_PLUS_AT,
    build_level_permutation,
    compute_levels,
    partition_stages,
)
from .symbolic import assemble_factors, iluk_pattern
from .trisolve import apply_preconditioner

__all__ = ["KrylovResult", "pcg", "gmres", "iteration_experiment", "is_symmetric"]

DEFAULT_RESTART = 50


@dataclass
class KrylovResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)


def _norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


def pcg(a: CsrMatrix, b: np.ndarray, precond=None, tol: float = 1e-8,
        maxit: int = 1000) -> KrylovResult:
    """Preconditioned conjugate gradients. `precond` maps r -> M^-1 r.

    The caller asserts A is symmetric positive definite; a nonpositive
    curvature p'Ap is reported as a breakdown, not ignored.
    """
    b = np.asarray(b, dtype=np.float64)
    bnorm = _norm(b)
    if bnorm == 0.0:
        return KrylovResult(np.zeros(a.n), 0, True, [0.0])
    x = np.zeros(a.n)
    r = b.copy()
    history = [1.0]
    z = precond(r) if precond is not None else r.copy()
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxit + 1):
        ap = spmv(a, p)
        pap = float(p @ ap)
        if pap <= 0.0:
            raise BreakdownError(f"nonpositive curvature p'Ap = {pap:g}", it)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rel = _norm(r) / bnorm
        history.append(rel)
        if rel <= tol:
            return KrylovResult(x, it, True, history)
        z = precond(r) if precond is not None else r.copy()
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return KrylovResult(x, maxit, False, history)


def gmres(a: CsrMatrix, b: np.ndarray, precond=None, restart: int = DEFAULT_RESTART,
          tol: float = 1e-8, maxit: int = 1000) -> KrylovResult:
    """Restarted GMRES with right preconditioning: A M^-1 u = r0, x += M^-1 u.

    Modified Gram-Schmidt Arnoldi with Givens-rotation least squares. A zero
    subdiagonal (happy breakdown) means the Krylov space is invariant and the
    current correction is exact, so it counts as convergence.
    """
    b = np.asarray(b, dtype=np.float64)
    bnorm = _norm(b)
    if bnorm == 0.0:
        return KrylovResult(np.zeros(a.n), 0, True, [0.0])
    m = max(1, min(restart, a.n))
    x = np.zeros(a.n)
    r = b.copy()
    history = [1.0]
    total = 0
    converged = history[0] <= tol
    while not converged and total < maxit:
        beta = _norm(r)
        v = np.zeros((m + 1, a.n))
        h = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        v[0] = r / beta
        j = -1
        happy = False
        while j + 1 < m and total < maxit:
            j += 1
            total += 1
            w = spmv(a, precond(v[j]) if precond is not None else v[j])
            for i in range(j + 1):
                h[i, j] = float(v[i] @ w)
                w -= h[i, j] * v[i]
            h[j + 1, j] = _norm(w)
            happy = h[j + 1, j] <= 1e-14 * beta
            if not happy:
                v[j + 1] = w / h[j + 1, j]
            for i in range(j):
                t = cs[i] * h[i, j] + sn[i] * h[i + 1, j]
                h[i + 1, j] = -sn[i] * h[i, j] + cs[i] * h[i + 1, j]
                h[i, j] = t
            denom = float(np.hypot(h[j, j], h[j + 1, j]))
            cs[j] = h[j, j] / denom if denom else 1.0
            sn[j] = h[j + 1, j] / denom if denom else 0.0
            h[j, j] = denom
            h[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            rel = abs(g[j + 1]) / bnorm
            history.append(rel)
            if rel <= tol or happy:
                converged = True
                break
        y = np.linalg.solve(h[:j + 1, :j + 1], g[:j + 1])
        u = v[:j + 1].T @ y
        x += precond(u) if precond is not None else u
        r = b - spmv(a, x)
        if converged:
            # trust the true residual, not the Givens estimate
            converged = _norm(r) / bnorm <= tol or happy
    return KrylovResult(x, total, converged, history)


def is_symmetric(a: CsrMatrix) -> bool:
    """Exact structural and numeric symmetry."""
    t = transpose(a)
    return (
        np.array_equal(a.row_start, t.row_start)
        and np.array_equal(a.col, t.col)
        and np.array_equal(a.val, t.val)
    )


def iteration_experiment(a: CsrMatrix, b=None, orderings=(), k: int = 0,
                         tau: float = 0.0, tol: float = 1e-6,
                         maxit: int = 1000) -> list:
    """Iteration counts of ILU-preconditioned Krylov runs under reorderings.

    Each ordering is (name, Permutation, level_schedule) where the flag adds
    a level-set renumbering on top of the base permutation (the LS-X rows of
    the sensitivity table). PCG is used when the matrix is exactly symmetric,
    GMRES otherwise. b defaults to A times the all-ones vector so the true
    solution is known. Orderings whose factorization or solve fails are
    reported with the error message instead of a count.
    """
    if b is None:
        b = spmv(a, np.ones(a.n))
    b = np.asarray(b, dtype=np.float64)
    method = "pcg" if is_symmetric(a) else "gmres"
    rows = []
    for name, perm, with_levels in orderings:
        entry = {"ordering_name": name, "method": method}
        try:
            total = perm if perm is not None else Permutation.identity(a.n)
            pa = permute_symmetric(a, total)
            if with_levels:
                schedule = compute_levels(
                    lower_pattern(symmetrize_pattern(pa.pattern)),
                    kind=LOWER_A_PLUS_AT,
                )
                row_nnz = np.diff(pa.row_start)
                partition = partition_stages(schedule, row_nnz)
                lperm = build_level_permutation(partition)
                total = lperm.compose(total)
                pa = permute_symmetric(a, total)
            pattern, _ = iluk_pattern(pa.pattern, k)
            factors = assemble_factors(a, pattern, total, drop_tol=tau)
            factor_serial(factors)
            pb = b[total.perm]
            precond = lambda r: apply_preconditioner(factors, r)
            if method == "pcg":
                res = pcg(pa, pb, precond, tol=tol, maxit=maxit)
            else:
                res = gmres(pa, pb, precond, tol=tol, maxit=maxit)
            entry["iterations"] = res.iterations
            entry["converged"] = res.converged
        except IlukitError as exc:
            entry["iterations"] = None
            entry["converged"] = False
            entry["error"] = str(exc)
        rows.append(entry)
    return rows
