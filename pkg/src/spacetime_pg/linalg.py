"""Sparse/dense linear algebra substrate.

Sparse matrices are plain ``scipy.sparse`` CSC matrices (real or complex).
Direct solves go through SuperLU; :class:`Factorization` adds the pivot
checks and the dimension checks used everywhere else in the package.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PIVOT_TOL = 1e-14


class DimensionError(ValueError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a factorization meets a (numerically) zero pivot."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class DefinitenessError(np.linalg.LinAlgError):
    pass


def as_csc(A, dtype=None) -> sp.csc_matrix:
    """Return ``A`` as a canonical CSC matrix (sorted indices, no duplicates)."""
    A = sp.csc_matrix(A, dtype=dtype)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmm_dense(A, W: np.ndarray) -> np.ndarray:
    """Sparse times dense product ``A @ W``."""
    W = np.asarray(W)
    if A.shape[1] != W.shape[0]:
        raise DimensionError(f"cannot multiply {A.shape} by {W.shape}")
    return np.asarray(A @ W)


class Factorization:
    """Reusable sparse LU factorization of a square matrix.

    ``spd=True`` switches SuperLU to its symmetric mode (no partial pivoting,
    ordering on ``A + A^T``), which is the closest thing to a sparse Cholesky
    that scipy offers.
    """

    def __init__(self, A, spd: bool = False):
        A = as_csc(A)
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"factorize needs a square matrix, got {A.shape}")
        if A.shape[0] == 0:
            raise DimensionError("factorize needs a nonempty matrix")
        self.matrix = A
        self.shape = A.shape
        self.dtype = A.dtype
        scale = abs(A).max() if A.nnz else 0.0
        if scale == 0.0:
            raise SingularMatrixError("zero matrix", pivot=0)
        options = {}
        if spd:
            options = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        try:
            self._lu = spla.splu(A, **options)
        except RuntimeError as exc:
            raise SingularMatrixError(f"matrix is singular: {exc}",
                                      pivot=_dense_zero_pivot(A, scale)) from exc
        udiag = np.abs(self._lu.U.diagonal())
        small = np.flatnonzero(udiag <= PIVOT_TOL * scale)
        if small.size:
            # report the pivot in the original column numbering
            pivot = int(self._lu.perm_c[small[0]])
            raise SingularMatrixError(
                f"pivot {pivot} is {udiag[small[0]]:.3e}, below "
                f"{PIVOT_TOL:g} * max|A| = {PIVOT_TOL * scale:.3e}", pivot=pivot)
        self.perm_r = self._lu.perm_r
        self.perm_c = self._lu.perm_c

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b)
        if b.shape[0] != self.shape[0]:
            raise DimensionError(f"rhs has {b.shape[0]} rows, matrix has {self.shape[0]}")
        if np.iscomplexobj(b) and not np.iscomplexobj(self.matrix):
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(
                np.ascontiguousarray(b.imag))
        return self._lu.solve(np.ascontiguousarray(b, dtype=np.result_type(b, self.dtype)))


def _dense_zero_pivot(A, scale: float, max_size: int = 4000) -> int | None:
    """First small pivot of a dense partial-pivoting LU (SuperLU does not report it)."""
    if A.shape[0] > max_size:
        return None
    _, _, U = scipy.linalg.lu(A.toarray())
    small = np.flatnonzero(np.abs(np.diag(U)) <= PIVOT_TOL * scale)
    return int(small[0]) if small.size else None


def factorize(A, spd: bool = False) -> Factorization:
    return Factorization(A, spd=spd)


def generalized_sym_eig(A: np.ndarray, M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``A v = d M v`` for symmetric ``A`` and SPD ``M``.

    Uses the Cholesky reduction ``M = L L^T``, a symmetric QR eigensolve of
    ``L^{-1} A L^{-T}`` and back-substitution ``V = L^{-T} Q``, so that
    ``V^T M V = I`` and ``A V = M V diag(d)`` with ``d`` ascending.
    """
    A = np.asarray(A, dtype=float)
    M = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != M.shape:
        raise DimensionError(f"incompatible pencil shapes {A.shape}, {M.shape}")
    try:
        L = np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("mass matrix of the pencil is not positive definite") from exc
    X = scipy.linalg.solve_triangular(L, 0.5 * (A + A.T), lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    d, Q = np.linalg.eigh(0.5 * (C + C.T))
    V = scipy.linalg.solve_triangular(L.T, Q, lower=False)
    return V, d
