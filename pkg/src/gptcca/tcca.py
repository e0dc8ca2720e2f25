"""Tensor canonical correlation analysis on multi-view data.

Each view ``j`` is whitened by ``W_j = C_j^{-1/2}``, the whitened
third- (or higher-) order data tensor ``M`` is approximated by a rank-``r``
CP decomposition (generating polynomials, then ALS refinement), and the
unit-norm factor columns ``U_j`` give the projections ``P_j = W_j U_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, RankError, ShapeError
from .gp import GPOptions, gp_decompose
from .numerics import sym_inv_sqrt
from .solvers import SolveOptions, SolveReport, normalize_cp, refine_from_init
from .tensor import CPDecomposition, DenseTensor, mode_product, relative_residual

EPS_SCALE = 1e-8
_CHUNK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class MultiViewDataset:
    """``m >= 2`` aligned views; view ``j`` is an ``N x n_j`` matrix (rows are samples)."""

    views: tuple

    def __init__(self, views: Sequence):
        mats = tuple(np.array(Y, dtype=np.float64, ndmin=2) for Y in views)
        if len(mats) < 2:
            raise ContractError("a multi-view dataset needs at least two views")
        for j, Y in enumerate(mats):
            if Y.ndim != 2:
                raise ShapeError(f"view {j} is not a matrix")
        counts = {Y.shape[0] for Y in mats}
        if len(counts) != 1:
            raise ShapeError(
                f"views have different sample counts: {[Y.shape[0] for Y in mats]}"
            )
        object.__setattr__(self, "views", mats)

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> tuple:
        return tuple(Y.shape[1] for Y in self.views)

    def subset(self, rows) -> "MultiViewDataset":
        return MultiViewDataset([Y[rows] for Y in self.views])


@dataclass(frozen=True)
class TCCAOptions:
    """``eps=None`` picks ``1e-8 * trace(C_j) / n_j`` per view."""

    eps: float | None = None
    center: bool = False
    seed: int = 0
    solver: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.eps is not None and self.eps < 0:
            raise ContractError("eps must be nonnegative")


@dataclass(frozen=True)
class TCCAModel:
    rank: int
    whiteners: tuple
    projections: tuple
    cp: CPDecomposition
    report: SolveReport
    options: TCCAOptions
    eps_used: tuple
    means: tuple | None = None
    gp_residual: float = float("nan")
    refined_residual: float = float("nan")

    @property
    def dims(self) -> tuple:
        return tuple(P.shape[0] for P in self.projections)


def view_covariance(Y, center: bool = False) -> np.ndarray:
    """``(1/N) sum_i y_i y_i^T``, on mean-subtracted rows when ``center``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape[0] < 1:
        raise ContractError("need at least one sample")
    if center:
        Y = Y - Y.mean(axis=0)
    C = Y.T @ Y / Y.shape[0]
    return 0.5 * (C + C.T)


def _prepared_views(D: MultiViewDataset, center: bool, means=None) -> list:
    if not center:
        return list(D.views)
    if means is None:
        means = [Y.mean(axis=0) for Y in D.views]
    return [Y - mu for Y, mu in zip(D.views, means)]


def data_tensor(D: MultiViewDataset, center: bool = False) -> DenseTensor:
    """``sum_i y_{i,1} ⊗ ... ⊗ y_{i,m}`` (no ``1/N`` factor).

    Samples are accumulated in chunks so the row-wise Kronecker products
    stay bounded in memory.
    """
    views = _prepared_views(D, center)
    rest = int(np.prod(D.dims[1:]))
    chunk = max(1, _CHUNK_ENTRIES // max(rest, 1))
    C1 = np.zeros((D.dims[0], rest))
    for start in range(0, D.n_samples, chunk):
        block = slice(start, start + chunk)
        R = views[1][block]
        for Y in views[2:]:
            Yb = Y[block]
            R = (R[:, :, None] * Yb[:, None, :]).reshape(R.shape[0], -1)
        C1 += views[0][block].T @ R
    return DenseTensor(C1.reshape(D.dims))


def default_eps(C) -> float:
    C = np.asarray(C)
    return EPS_SCALE * float(np.trace(C)) / C.shape[0]


def correlation_tensor(D: MultiViewDataset, opts: TCCAOptions | None = None):
    """Whitened data tensor ``M = C ×_1 W_1 ... ×_m W_m``.

    Returns ``(M, whiteners, eps_used)``.
    """
    opts = opts or TCCAOptions()
    whiteners, eps_used = [], []
    for Y in D.views:
        Cj = view_covariance(Y, opts.center)
        eps = default_eps(Cj) if opts.eps is None else opts.eps
        whiteners.append(sym_inv_sqrt(Cj, eps))
        eps_used.append(eps)
    M = data_tensor(D, opts.center)
    for j, W in enumerate(whiteners):
        M = mode_product(M, W, j)
    return M, tuple(whiteners), tuple(eps_used)


def tcca_fit(D: MultiViewDataset, r: int, opts: TCCAOptions | None = None) -> TCCAModel:
    """Fit rank-``r`` TCCA projections.

    The refined CP factors are normalized to unit columns; each component
    is oriented so that its weight is nonnegative (the sign is flipped on
    the view-0 column), which makes every component contribute positively
    to the higher-order correlation.
    """
    opts = opts or TCCAOptions()
    if r < 1:
        raise RankError(f"rank must be >= 1, got {r}")
    if r > max(D.dims):
        raise RankError(f"rank {r} exceeds every view dimension {D.dims}")
    M, whiteners, eps_used = correlation_tensor(D, opts)
    init = gp_decompose(M, r, GPOptions(seed=opts.seed))
    refined, report = refine_from_init(M, init, opts.solver)
    cp = normalize_cp(refined)
    signs = np.where(cp.weights < 0, -1.0, 1.0)
    factors = list(cp.factors)
    factors[0] = factors[0] * signs
    cp = CPDecomposition(factors, cp.weights * signs)
    projections = tuple(W @ U for W, U in zip(whiteners, cp.factors))
    means = tuple(Y.mean(axis=0) for Y in D.views) if opts.center else None
    return TCCAModel(
        rank=r,
        whiteners=whiteners,
        projections=projections,
        cp=cp,
        report=report,
        options=opts,
        eps_used=eps_used,
        means=means,
        gp_residual=report.initial_residual,
        refined_residual=relative_residual(M, cp),
    )


def tcca_project(model: TCCAModel, D: MultiViewDataset) -> list:
    """Latent coordinates ``z_{i,j} = P_j^T y_{i,j}``, one ``N x r`` matrix per view."""
    if D.dims != model.dims:
        raise ContractError(f"view dimensions {D.dims} do not match the model {model.dims}")
    views = _prepared_views(D, model.options.center, model.means)
    return [Y @ P for Y, P in zip(views, model.projections)]


def higher_order_correlation(Z: Sequence) -> float:
    """``sum_i sum_s prod_j Z_j[i, s]``."""
    mats = [np.asarray(Zj, dtype=np.float64) for Zj in Z]
    if not mats:
        raise ContractError("need at least one view")
    if len({Zj.shape for Zj in mats}) != 1:
        raise ContractError(f"projected views differ in shape: {[Zj.shape for Zj in mats]}")
    return float(np.sum(np.prod(np.stack(mats), axis=0)))


def synth_multiview_with_truth(N: int, m: int, dims: Sequence[int], r_true: int,
                               noise_sigma: float, seed: int):
    """Planted multi-view data and the ground truth behind it.

    Every sample belongs to one of ``r_true`` latent groups: its code is
    ``h_i = a_i e_{g_i}`` with ``g_i`` uniform and ``a_i ~ U(0.5, 1.5)``.
    View ``j`` is ``y_{i,j} = L_j h_i + noise_sigma * g`` with Gaussian
    loadings ``L_j`` and standard normal noise ``g``. With one active
    group per sample the noiseless data tensor has CP rank ``r_true``.

    Returns ``(dataset, loadings, codes)``.
    """
    dims = tuple(int(n) for n in dims)
    if len(dims) != m:
        raise ContractError(f"need {m} view dimensions, got {len(dims)}")
    if not 1 <= r_true <= min(dims):
        raise ContractError(f"r_true={r_true} must lie in [1, {min(dims)}]")
    if N < 1 or noise_sigma < 0:
        raise ContractError("need N >= 1 and noise_sigma >= 0")
    rng = np.random.default_rng(seed)
    loadings = [rng.standard_normal((n, r_true)) for n in dims]
    groups = rng.integers(0, r_true, size=N)
    amplitude = rng.uniform(0.5, 1.5, size=N)
    codes = np.zeros((N, r_true))
    codes[np.arange(N), groups] = amplitude
    views = []
    for L in loadings:
        Y = codes @ L.T
        noise = rng.standard_normal(Y.shape)
        views.append(Y + noise_sigma * noise)
    return MultiViewDataset(views), loadings, codes


def synth_multiview(N: int, m: int, dims: Sequence[int], r_true: int,
                    noise_sigma: float, seed: int) -> MultiViewDataset:
    return synth_multiview_with_truth(N, m, dims, r_true, noise_sigma, seed)[0]
