"""Dense matrix kernels: least squares, complex Schur form, whitening, PCA."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ContractError, NumericalFailure

LSTSQ_RCOND = 1e-12


class SchurResult(NamedTuple):
    """Complex Schur form ``M = Q T Q*`` with ``Q`` unitary, ``T`` upper triangular."""

    Q: np.ndarray
    T: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.T).copy()


def least_squares_solve(A, B, rcond: float = LSTSQ_RCOND) -> np.ndarray:
    """Minimum-norm minimizer of ``||A X - B||_F``.

    Singular values below ``rcond * sigma_max`` are treated as zero, so
    rank-deficient and all-zero ``A`` fall through to the min-norm branch.
    ``B`` may be a vector, in which case a vector is returned.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.shape[0] != A.shape[0]:
        raise ContractError(
            f"incompatible least squares system {A.shape} x ? = {B.shape}"
        )
    if not np.any(A):
        return np.zeros((A.shape[1],) + B.shape[1:])
    X, *_ = np.linalg.lstsq(A, B, rcond=rcond)
    return X


def schur_decompose(M) -> SchurResult:
    """Complex Schur decomposition of a square matrix.

    Delegates to LAPACK (``zgees`` via SciPy) on the matrix promoted to
    complex, so no 2x2 real blocks appear and ``diag(T)`` carries all
    eigenvalues.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError(f"schur_decompose needs a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalFailure("matrix has non-finite entries", iterations=0)
    r = M.shape[0]
    try:
        T, Q = scipy.linalg.schur(M.astype(np.complex128), output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(
            f"Schur iteration did not converge within {100 * r} sweeps: {exc}",
            iterations=100 * r,
        ) from exc
    return SchurResult(Q=Q, T=np.triu(T))


def sym_inv_sqrt(C, eps: float = 0.0) -> np.ndarray:
    """``V diag(1 / sqrt(max(d, eps))) V^T`` for ``C = V diag(d) V^T``."""
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ContractError(f"expected a square matrix, got {C.shape}")
    if eps < 0:
        raise ContractError("eps must be nonnegative")
    scale = np.linalg.norm(C)
    if np.linalg.norm(C - C.T) > 1e-10 * scale:
        raise ContractError("matrix is not symmetric")
    d, V = np.linalg.eigh(0.5 * (C + C.T))
    d = np.maximum(d, eps)
    if np.any(d <= 0):
        raise NumericalFailure(
            "matrix is singular and no eigenvalue floor was given", iterations=0
        )
    S = (V / np.sqrt(d)) @ V.T
    return 0.5 * (S + S.T)


def pca_basis(Y, d: int) -> np.ndarray:
    """Top-``d`` principal directions of the column-centered data ``Y``.

    Returns an ``n x d`` matrix with orthonormal columns ordered by
    decreasing variance. Each column is flipped so that its entry of
    largest magnitude is positive.
    """
    Y = np.asarray(Y, dtype=np.float64)
    N, n = Y.shape
    if not 1 <= d <= min(N, n):
        raise ContractError(f"pca dimension {d} outside [1, {min(N, n)}]")
    Yc = Y - Y.mean(axis=0)
    evals, evecs = np.linalg.eigh(Yc.T @ Yc / N)
    basis = evecs[:, ::-1][:, :d]
    pivot = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivot, np.arange(d)])
    signs[signs == 0] = 1.0
    return basis * signs
