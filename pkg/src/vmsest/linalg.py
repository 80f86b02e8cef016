"""Sparse matrices and linear solvers.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted column
indices, duplicates summed). Krylov solvers and incomplete factorizations
come from ``scipy.sparse.linalg``.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

CsrMatrix = sp.csr_matrix


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, msg, x=None, iterations=0, residual=np.inf):
        super().__init__(msg)
        self.x = x
        self.iterations = iterations
        self.residual = residual


class BreakdownDetected(SolverError):
    pass


class SingularMatrix(SolverError):
    pass


BREAKDOWN_RESTARTS = 10


class Method(str, enum.Enum):
    BICGSTAB = "bicgstab"
    CG = "cg"
    DENSE_LU = "dense_lu"
    SPARSE_LU = "sparse_lu"


class Preconditioner(str, enum.Enum):
    JACOBI = "jacobi"
    ILU0 = "ilu0"
    NONE = "none"


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.BICGSTAB
    rel_tol: float = 1e-10
    max_iter: int | None = None  # None -> 10 * n
    preconditioner: Preconditioner = Preconditioner.ILU0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "preconditioner", Preconditioner(self.preconditioner))
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


MASS_SOLVER = SolverConfig(Method.CG, rel_tol=1e-12, preconditioner=Preconditioner.JACOBI)


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float


def to_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def coo_to_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    """Compress coordinate triplets, summing duplicates in a fixed order."""
    A = sp.coo_matrix(
        (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape
    ).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has shape {x.shape}")
    return np.asarray(A @ x).ravel()


def _relres(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / nb if nb > 0 else r


def _preconditioner(A, kind: Preconditioner):
    n = A.shape[0]
    if kind is Preconditioner.NONE:
        return None
    if kind is Preconditioner.JACOBI:
        d = A.diagonal()
        if np.any(d == 0):
            raise SingularMatrix("zero diagonal entry in Jacobi preconditioner")
        inv = 1.0 / d
        return spla.LinearOperator((n, n), matvec=lambda v: inv * v, dtype=float)
    try:
        ilu = spla.spilu(sp.csc_matrix(A), drop_tol=0.0, fill_factor=1.0)
    except RuntimeError as exc:
        raise SingularMatrix(f"incomplete factorization failed: {exc}") from exc
    return spla.LinearOperator((n, n), matvec=ilu.solve, dtype=float)


def solve(A, b, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Solve ``A x = b``.

    Raises ``NonConvergence`` (carrying the last iterate), ``BreakdownDetected``
    or ``SingularMatrix``.
    """
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.shape != (n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({n},)")
    if n == 0:
        return SolveResult(np.zeros(0), 0, 0.0)
    if not np.any(b):
        return SolveResult(np.zeros(n), 0, 0.0)

    if cfg.method is Method.DENSE_LU:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        try:
            with warnings.catch_warnings():
                # an exactly singular pivot is reported below as SingularMatrix
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(dense, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularMatrix(str(exc)) from exc
        if np.any(np.abs(np.diag(lu[0])) <= np.finfo(float).eps * np.abs(dense).max() * n):
            raise SingularMatrix("singular pivot in dense LU")
        x = scipy.linalg.lu_solve(lu, b)
        return SolveResult(x, 1, _relres(A, x, b))

    if cfg.method is Method.SPARSE_LU:
        try:
            x = spla.splu(sp.csc_matrix(A)).solve(b)
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from exc
        return SolveResult(x, 1, _relres(A, x, b))

    A = to_csr(A)
    return _krylov(A, b, cfg, _preconditioner(A, cfg.preconditioner))


def _krylov(A, b, cfg: SolverConfig, M) -> SolveResult:
    maxiter = cfg.max_iter or 10 * A.shape[0]
    count = [0]

    def cb(_):
        count[0] += 1

    krylov = spla.cg if cfg.method is Method.CG else spla.bicgstab
    x, info = krylov(A, b, rtol=cfg.rel_tol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
    restarts = 0
    # a BiCGStab breakdown (rho ~ 0) is usually cured by restarting from the
    # current iterate with a fresh shadow residual
    while info < 0 and restarts < BREAKDOWN_RESTARTS and count[0] < maxiter and np.all(np.isfinite(x)):
        restarts += 1
        log.debug("%s breakdown after %d iterations, restart %d", cfg.method.value, count[0], restarts)
        x, info = krylov(A, b, x0=x, rtol=cfg.rel_tol, atol=0.0, maxiter=maxiter - count[0], M=M, callback=cb)
    res = _relres(A, x, b)
    if info < 0 and not res <= cfg.rel_tol:
        raise BreakdownDetected(f"{cfg.method.value} breakdown (info={info}) after {restarts} restarts")
    # scipy tests the preconditioned residual; accept a true residual below tolerance
    if not np.isfinite(res) or (info > 0 and res > cfg.rel_tol):
        raise NonConvergence(
            f"{cfg.method.value} did not converge in {maxiter} iterations "
            f"(relative residual {res:.3e})",
            x=x,
            iterations=count[0],
            residual=res,
        )
    log.debug("%s converged in %d iterations, residual %.2e", cfg.method.value, count[0], res)
    return SolveResult(x, count[0], res)


class Factorized:
    """Reusable solver for one matrix (caches the preconditioner or LU)."""

    def __init__(self, A, cfg: SolverConfig = MASS_SOLVER):
        self.A = to_csr(A)
        self.cfg = cfg
        n = self.A.shape[0]
        self._lu = None
        self._M = None
        if n and cfg.method in (Method.DENSE_LU, Method.SPARSE_LU):
            self._lu = spla.splu(sp.csc_matrix(self.A))
        elif n:
            self._M = _preconditioner(self.A, cfg.preconditioner)

    def solve(self, b) -> SolveResult:
        b = np.asarray(b, dtype=float)
        n = self.A.shape[0]
        if b.shape != (n,):
            raise ValueError(f"rhs has shape {b.shape}, expected ({n},)")
        if n == 0 or not np.any(b):
            return SolveResult(np.zeros(n), 0, 0.0)
        if self._lu is not None:
            x = self._lu.solve(b)
            return SolveResult(x, 1, _relres(self.A, x, b))
        return _krylov(self.A, b, self.cfg, self._M)
