"""Sparse CSR storage and the linear solvers used by the time steppers.

Storage is compressed sparse row; solvers are conjugate gradients for
symmetric positive definite blocks, Jacobi-preconditioned BiCGStab for
nonsymmetric systems, and a SuperLU factorization as the direct path
and escalation target. The heavy lifting is delegated to scipy behind
this module's types so every solve can assert its residual contract.
"""

from __future__ import annotations

import inspect
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

# scipy renamed the Krylov tolerance keyword (tol -> rtol) in 1.12
_RTOL_KW = "rtol" if "rtol" in inspect.signature(spla.cg).parameters else "tol"


@dataclass
class SparseMatrix:
    """CSR matrix: row_offsets/col_indices/values triple plus shape."""

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def scipy(self) -> sp.csr_matrix:
        """View as a scipy CSR matrix (shares the underlying arrays)."""
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.nrows, self.ncols),
        )

    @staticmethod
    def from_scipy(A) -> "SparseMatrix":
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        return SparseMatrix(
            nrows=A.shape[0],
            ncols=A.shape[1],
            row_offsets=A.indptr,
            col_indices=A.indices,
            values=A.data,
        )


@dataclass
class SolveReport:
    iterations: int
    final_relative_residual: float
    converged: bool
    method: str


@dataclass
class SolverOptions:
    """Linear-solve policy. Defaults: direct factorization up to
    direct_threshold unknowns, otherwise preconditioned Krylov."""

    tol: float = 1e-10
    max_iter: int = 5000
    direct_threshold: int = 30_000


def coo_to_csr(triples, nrows: int | None = None, ncols: int | None = None) -> SparseMatrix:
    """Build CSR from (row, col, value) triples; duplicates are summed.

    ``triples`` is an iterable of 3-tuples or a (rows, cols, values)
    array triple. Shape defaults to the smallest fit.
    """
    if isinstance(triples, tuple) and len(triples) == 3 and not np.isscalar(triples[0]):
        rows, cols, vals = (np.asarray(a) for a in triples)
    else:
        triples = list(triples)
        if triples:
            rows = np.array([t[0] for t in triples], dtype=np.int64)
            cols = np.array([t[1] for t in triples], dtype=np.int64)
            vals = np.array([t[2] for t in triples], dtype=float)
        else:
            rows = np.empty(0, dtype=np.int64)
            cols = np.empty(0, dtype=np.int64)
            vals = np.empty(0)
    if rows.size:
        if rows.min() < 0 or cols.min() < 0:
            raise IndexError("negative index in triples")
    if nrows is None:
        nrows = int(rows.max()) + 1 if rows.size else 0
    if ncols is None:
        ncols = int(cols.max()) + 1 if cols.size else 0
    if rows.size and (rows.max() >= nrows or cols.max() >= ncols):
        raise IndexError("index out of range for the requested shape")
    A = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return SparseMatrix(nrows, ncols, A.indptr, A.indices, A.data)


def spmv(A: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product A @ x."""
    x = np.asarray(x)
    if x.shape[0] != A.ncols:
        raise ValueError(f"dimension mismatch: matrix is {A.nrows}x{A.ncols}, vector has {x.shape[0]}")
    return A.scipy() @ x


def _jacobi(A: sp.csr_matrix) -> spla.LinearOperator:
    d = A.diagonal().copy()
    d[d == 0.0] = 1.0
    inv = 1.0 / d
    return spla.LinearOperator(A.shape, matvec=lambda v: inv * v)


def _residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return 0.0
    return float(np.linalg.norm(b - A @ x) / nb)


def solve_spd(A: SparseMatrix, b: np.ndarray, tol: float = 1e-10,
              max_iter: int = 5000) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradients with Jacobi preconditioning for SPD systems."""
    As = A.scipy()
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(b) == 0.0:
        return np.zeros(A.ncols), SolveReport(0, 0.0, True, "cg")
    it = [0]

    def cb(_):
        it[0] += 1

    kw = {_RTOL_KW: tol, "atol": 0.0, "maxiter": max_iter, "M": _jacobi(As), "callback": cb}
    x, info = spla.cg(As, b, **kw)
    res = _residual(As, x, b)
    return x, SolveReport(it[0], res, info == 0 and res <= tol, "cg")


def solve_general(A: SparseMatrix, b: np.ndarray, tol: float = 1e-10,
                  max_iter: int = 5000) -> tuple[np.ndarray, SolveReport]:
    """Jacobi-preconditioned BiCGStab; escalates to the direct solver on
    breakdown or non-convergence. A singular system is reported as not
    converged rather than raised."""
    As = A.scipy()
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(b) == 0.0:
        return np.zeros(A.ncols), SolveReport(0, 0.0, True, "bicgstab")
    it = [0]

    def cb(_):
        it[0] += 1

    kw = {_RTOL_KW: tol, "atol": 0.0, "maxiter": max_iter, "M": _jacobi(As), "callback": cb}
    x, info = spla.bicgstab(As, b, **kw)
    res = _residual(As, x, b)
    if info == 0 and res <= tol:
        return x, SolveReport(it[0], res, True, "bicgstab")
    logger.warning("bicgstab did not converge (info=%s, residual=%.3e); escalating to direct solve", info, res)
    try:
        xd = solve_direct(A, b)
    except RuntimeError:
        return x, SolveReport(it[0], res, False, "bicgstab")
    resd = _residual(As, xd, b)
    return xd, SolveReport(it[0], resd, resd <= tol, "bicgstab+direct")


def solve_direct(A: SparseMatrix, b: np.ndarray) -> np.ndarray:
    """Sparse LU with partial pivoting. Raises on singular input with a
    report of the offending rows."""
    As = A.scipy().tocsc()
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(As)
    except RuntimeError as exc:
        row_nnz = np.diff(A.row_offsets)
        empty = np.flatnonzero(row_nnz == 0)[:10].tolist()
        raise RuntimeError(
            f"direct solve failed ({exc}); structurally empty rows: {empty or 'none'}"
        ) from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise RuntimeError("direct solve produced non-finite values (numerically singular matrix)")
    return x


def solve(A: SparseMatrix, b: np.ndarray, opts: SolverOptions | None = None,
          spd: bool = False) -> tuple[np.ndarray, SolveReport]:
    """Policy dispatcher: direct for small systems, Krylov above the
    threshold with one direct retry on failure."""
    opts = opts or SolverOptions()
    if A.nrows <= opts.direct_threshold:
        x = solve_direct(A, b)
        res = _residual(A.scipy(), x, b)
        return x, SolveReport(0, res, res <= max(opts.tol, 1e-9), "direct")
    if spd:
        x, rep = solve_spd(A, b, opts.tol, opts.max_iter)
        if rep.converged:
            return x, rep
        logger.warning("cg failed (residual=%.3e); retrying direct", rep.final_relative_residual)
        xd = solve_direct(A, b)
        res = _residual(A.scipy(), xd, b)
        return xd, SolveReport(rep.iterations, res, res <= opts.tol, "cg+direct")
    return solve_general(A, b, opts.tol, opts.max_iter)
