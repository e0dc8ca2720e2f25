"""Low-rank CP approximation through generating polynomials.

For a tensor ``F`` of shape ``(n_1, ..., n_m)`` with ``n_1`` largest and a
target rank ``r <= n_1``, each pair ``(j, k)`` (mode ``j >= 1``, index
``k >= 1``, 0-based) yields an ``r x r`` generating matrix ``M[j, k]``
solving ``A[F, j] M[j, k]^T = B[F, j, k]`` in the least-squares sense.
When ``F`` has rank ``r`` the matrices commute and share the eigenvectors
``U1[:r, s]`` with eigenvalues ``U_j[k, s] / U_j[0, s]``. A random
combination of the matrices is brought to Schur form, the Rayleigh
quotients of its Schur vectors give the factors of modes ``1..m-1``
(normalized to a leading 1) and a final linear least-squares fit
recovers mode 0.

All mode and index labels in this module are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractError, RankError, ShapeError
from .numerics import LSTSQ_RCOND, SchurResult, least_squares_solve, schur_decompose
from .tensor import CPDecomposition, as_array, khatri_rao_chain, unfold


@dataclass(frozen=True)
class GPOptions:
    """Knobs for :func:`gp_decompose`.

    ``seed`` fixes the Gaussian weights of the random combination.
    ``mode_permutation`` is ``"auto"`` (sort modes by decreasing size) or
    ``"fixed"`` (use the tensor as given).
    """

    seed: int = 0
    mode_permutation: str = "auto"
    rcond: float = LSTSQ_RCOND

    def __post_init__(self):
        if self.mode_permutation not in ("auto", "fixed"):
            raise ContractError(
                f"mode_permutation must be 'auto' or 'fixed', got {self.mode_permutation!r}"
            )
        if self.seed < 0:
            raise ContractError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class GeneratingMatrixSet:
    """The generating matrices ``M[j, k]`` of a tensor for a fixed rank."""

    rank: int
    shape: tuple
    matrices: dict = field(repr=False)
    residuals: dict = field(repr=False)

    def keys(self) -> list:
        """Pairs ``(j, k)`` in combination order: ``j`` then ``k`` ascending."""
        return sorted(self.matrices)

    def __len__(self):
        return len(self.matrices)

    def __getitem__(self, key) -> np.ndarray:
        return self.matrices[key]

    def max_commutator(self) -> float:
        """Largest ``||[M_a, M_b]|| / (||M_a|| ||M_b||)`` over all pairs."""
        mats = [self.matrices[key] for key in self.keys()]
        worst = 0.0
        for a in range(len(mats)):
            for b in range(a + 1, len(mats)):
                A, B = mats[a], mats[b]
                denom = np.linalg.norm(A) * np.linalg.norm(B)
                if denom == 0:
                    continue
                worst = max(worst, np.linalg.norm(A @ B - B @ A) / denom)
        return worst


class GPSteps(NamedTuple):
    """Intermediate products of one :func:`gp_decompose_detailed` run.

    ``generating``, ``combination`` and ``schur`` live in the permuted
    frame; ``permutation[i]`` is the original mode placed at position ``i``.
    """

    cp: CPDecomposition
    generating: GeneratingMatrixSet
    combination: np.ndarray
    schur: SchurResult
    permutation: tuple


def build_coefficient_matrices(F, j: int, k: int, r: int):
    """The coefficient matrices ``A[F, j]`` and ``B[F, j, k]``.

    Rows run over the indices of every mode except 0 and ``j`` in
    row-major order; column ``l`` takes mode-0 index ``l``. ``A`` fixes
    mode ``j`` at index 0, ``B`` at index ``k``.
    """
    X = as_array(F)
    m = X.ndim
    if m < 2:
        raise ShapeError("generating matrices need a tensor of order >= 2")
    if not 1 <= j < m:
        raise ContractError(f"mode j={j} must lie in [1, {m - 1}]")
    if not 1 <= k < X.shape[j]:
        raise ContractError(f"index k={k} must lie in [1, {X.shape[j] - 1}]")
    _check_rank(r, X.shape[0])
    return _slab(X, j, 0, r), _slab(X, j, k, r)


def _slab(X: np.ndarray, j: int, index: int, r: int) -> np.ndarray:
    S = np.take(X, index, axis=j)[:r]
    return np.moveaxis(S, 0, -1).reshape(-1, r)


def _check_rank(r: int, n1: int) -> None:
    if r < 1:
        raise RankError(f"rank must be >= 1, got {r}")
    if r > n1:
        raise RankError(f"rank {r} exceeds the leading dimension {n1}")


def solve_generating_matrices(F, r: int, rcond: float = LSTSQ_RCOND) -> GeneratingMatrixSet:
    """Least-squares generating matrices for every pair ``(j, k)``.

    The summed objective separates over pairs, so each block is solved on
    its own; all ``k`` for one ``j`` share ``A[F, j]`` and go through a
    single factorization.
    """
    X = as_array(F)
    if X.ndim < 2:
        raise ShapeError("generating matrices need a tensor of order >= 2")
    _check_rank(r, X.shape[0])
    matrices, residuals = {}, {}
    for j in range(1, X.ndim):
        nj = X.shape[j]
        if nj < 2:
            continue
        A = _slab(X, j, 0, r)
        Bs = [_slab(X, j, k, r) for k in range(1, nj)]
        Mt = least_squares_solve(A, np.hstack(Bs), rcond=rcond)
        for k, B in enumerate(Bs, start=1):
            block = Mt[:, (k - 1) * r:k * r]
            matrices[(j, k)] = np.ascontiguousarray(block.T)
            residuals[(j, k)] = float(np.linalg.norm(A @ block - B))
    return GeneratingMatrixSet(rank=r, shape=X.shape, matrices=matrices, residuals=residuals)


def random_combination(G: GeneratingMatrixSet, seed: int = 0, xi=None) -> np.ndarray:
    """``sum xi[j, k] M[j, k]`` with standard normal ``xi`` drawn from ``seed``.

    The draws are consumed in :meth:`GeneratingMatrixSet.keys` order.
    Passing ``xi`` explicitly bypasses the generator.
    """
    keys = G.keys()
    if not keys:
        raise ContractError("generating matrix set is empty")
    if xi is None:
        xi = np.random.default_rng(seed).standard_normal(len(keys))
    xi = np.asarray(xi, dtype=np.float64).ravel()
    if xi.size != len(keys):
        raise ContractError(f"need {len(keys)} combination weights, got {xi.size}")
    out = np.zeros((G.rank, G.rank))
    for w, key in zip(xi, keys):
        out += w * G.matrices[key]
    return out


def extract_factor_candidates(G: GeneratingMatrixSet, Q) -> list:
    """Factor matrices for modes ``1..m-1`` from the Schur vectors ``Q``.

    Column ``s`` of the matrix for mode ``j`` is
    ``(1, q_s* M[j, 1] q_s, ..., q_s* M[j, n_j - 1] q_s)``; the quotients
    are formed in complex arithmetic and only their real parts are kept.
    """
    Q = np.asarray(Q, dtype=np.complex128)
    r = G.rank
    if Q.shape != (r, r):
        raise ShapeError(f"Schur basis must be {r}x{r}, got {Q.shape}")
    Qh = Q.conj()
    factors = []
    for j in range(1, len(G.shape)):
        V = np.ones((G.shape[j], r))
        for k in range(1, G.shape[j]):
            quotients = np.einsum("is,ij,js->s", Qh, G.matrices[(j, k)], Q)
            V[k] = quotients.real
        factors.append(V)
    return factors


def solve_mode1_factors(F, factors: Sequence, rcond: float = LSTSQ_RCOND) -> np.ndarray:
    """Best mode-0 factor given fixed factors for modes ``1..m-1``.

    Minimizes ``||sum_s z_s ⊗ v^{s,1} ⊗ ... - F||`` over the whole tensor;
    returns the ``n_0 x r`` matrix ``[z_1 ... z_r]``.
    """
    X = as_array(F)
    if len(factors) != X.ndim - 1:
        raise ShapeError(f"need {X.ndim - 1} factor matrices, got {len(factors)}")
    for j, V in enumerate(factors, start=1):
        if np.shape(V)[0] != X.shape[j]:
            raise ShapeError(
                f"factor for mode {j} has {np.shape(V)[0]} rows, tensor has {X.shape[j]}"
            )
    K = khatri_rao_chain(factors)
    return least_squares_solve(K, unfold(X, 0).T, rcond=rcond).T


def is_generating_polynomial(coeffs, F, J: Sequence[int], rtol: float = 1e-10):
    """Check whether a polynomial in the variables of modes ``J`` generates ``F``.

    ``coeffs`` lists the coefficient of every monomial ``prod_{j in J}
    x_{j, i_j}``, either as an array of shape ``(n_j for j in J)`` or
    flattened in row-major order. Returns ``(ok, violation)`` where
    ``violation`` is the largest ``|<p q, F>|`` over the complementary
    monomials ``q``.
    """
    X = as_array(F)
    J = sorted(set(int(j) for j in J))
    if not J or J[0] < 0 or J[-1] >= X.ndim:
        raise ContractError(f"mode subset {J} invalid for order {X.ndim}")
    dims = tuple(X.shape[j] for j in J)
    c = np.asarray(coeffs, dtype=np.float64)
    if c.size != int(np.prod(dims)):
        raise ContractError(
            f"expected {int(np.prod(dims))} coefficients for modes {J}, got {c.size}"
        )
    c = c.reshape(dims)
    moved = np.moveaxis(X, J, list(range(len(J))))
    inner = np.tensordot(c, moved, axes=len(J))
    violation = float(np.max(np.abs(inner)))
    return violation <= rtol * np.linalg.norm(X.ravel()), violation


def gp_decompose_detailed(F, r: int, opts: GPOptions | None = None) -> GPSteps:
    opts = opts or GPOptions()
    X = as_array(F)
    if X.ndim < 2:
        raise ShapeError("gp_decompose needs a tensor of order >= 2")
    if r < 1:
        raise RankError(f"rank must be >= 1, got {r}")
    if opts.mode_permutation == "auto":
        perm = tuple(sorted(range(X.ndim), key=lambda t: -X.shape[t]))
    else:
        perm = tuple(range(X.ndim))
    if r > X.shape[perm[0]]:
        raise RankError(
            f"rank {r} exceeds the largest usable dimension {X.shape[perm[0]]}"
        )
    Xp = np.transpose(X, perm)
    G = solve_generating_matrices(Xp, r, rcond=opts.rcond)
    if len(G) == 0:
        raise ShapeError("every non-leading mode has size 1; nothing to combine")
    Mxi = random_combination(G, opts.seed)
    schur = schur_decompose(Mxi)
    tail = extract_factor_candidates(G, schur.Q)
    head = solve_mode1_factors(Xp, tail, rcond=opts.rcond)
    permuted = [head] + tail
    factors = [None] * X.ndim
    for pos, mode in enumerate(perm):
        factors[mode] = permuted[pos]
    return GPSteps(CPDecomposition(factors), G, Mxi, schur, perm)


def gp_decompose(F, r: int, opts: GPOptions | None = None) -> CPDecomposition:
    """Rank-``r`` CP approximation of ``F`` by the generating polynomial method.

    Deterministic given ``opts.seed``. The returned weights are all ones;
    see :func:`gptcca.solvers.normalize_cp` for unit-norm factors.
    """
    return gp_decompose_detailed(F, r, opts).cp
