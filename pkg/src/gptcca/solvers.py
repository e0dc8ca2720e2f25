"""Alternating least squares for CP fitting, and CP normalization."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateComponentError, RankError, ShapeError
from .numerics import least_squares_solve
from .tensor import CPDecomposition, as_array, cp_to_tensor, khatri_rao_chain, unfold

_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class SolveOptions:
    max_sweeps: int = 500
    rel_change_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ContractError("max_sweeps must be >= 1")
        if not self.rel_change_tol > 0:
            raise ContractError("rel_change_tol must be positive")
        if self.seed < 0:
            raise ContractError("seed must be a nonnegative integer")


@dataclass
class SolveReport:
    """Outcome of an ALS run.

    ``residual_history[0]`` is the relative residual of the starting point,
    followed by one entry per accepted sweep; it never increases.
    """

    sweeps_used: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    @property
    def initial_residual(self) -> float:
        return self.residual_history[0]

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "sweeps_used": self.sweeps_used,
            "converged": self.converged,
            "initial_residual": self.initial_residual,
            "final_residual": self.final_residual,
        }
        if timings:
            out["wall_time"] = self.wall_time
        return out


def _residual(X, factors, normX):
    return np.linalg.norm((X - cp_to_tensor(CPDecomposition(factors)).data).ravel()) / normX


def _sweep(X, factors):
    m = X.ndim
    factors = list(factors)
    for t in range(m):
        others = [factors[i] for i in range(m) if i != t]
        K = khatri_rao_chain(others)
        factors[t] = least_squares_solve(K, unfold(X, t).T).T
    # push the scale of modes 1..m-1 into mode 0
    for t in range(1, m):
        norms = np.linalg.norm(factors[t], axis=0)
        safe = np.where(norms > 0, norms, 1.0)
        factors[t] = factors[t] / safe
        factors[0] = factors[0] * safe
    return factors


def _run_als(X, factors, opts: SolveOptions):
    start = time.perf_counter()
    normX = max(np.linalg.norm(X.ravel()), _TINY)
    history = [_residual(X, factors, normX)]
    converged = False
    sweeps = 0
    while sweeps < opts.max_sweeps:
        sweeps += 1
        trial = _sweep(X, factors)
        res = _residual(X, trial, normX)
        if res > history[-1]:
            # only round-off can raise the residual of an exact LS sweep
            converged = True
            break
        factors = trial
        history.append(res)
        if (history[-2] - res) / max(history[-2], _TINY) <= opts.rel_change_tol:
            converged = True
            break
    report = SolveReport(
        sweeps_used=sweeps,
        residual_history=[float(h) for h in history],
        converged=converged,
        wall_time=time.perf_counter() - start,
    )
    return CPDecomposition(factors), report


def als_decompose(F, r: int, init: CPDecomposition | None = None,
                  opts: SolveOptions | None = None):
    """Rank-``r`` CP fit of ``F`` by cyclic alternating least squares.

    Each sweep updates modes ``0..m-1`` in turn with the exact linear
    least-squares solution, then rescales the columns of modes ``1..m-1``
    to unit norm (scale goes to mode 0). Without ``init`` every factor
    entry is drawn from a standard normal generator seeded by
    ``opts.seed``. Stops when the relative change of the relative residual
    drops to ``opts.rel_change_tol`` or after ``opts.max_sweeps`` sweeps.

    Returns
    -------
    cp : CPDecomposition
        Fitted factors, unit weights.
    report : SolveReport
    """
    opts = opts or SolveOptions()
    X = as_array(F)
    if r < 1:
        raise RankError(f"rank must be >= 1, got {r}")
    if init is None:
        rng = np.random.default_rng(opts.seed)
        factors = [rng.standard_normal((n, r)) for n in X.shape]
    else:
        if init.shape != X.shape or init.rank != r:
            raise ContractError(
                f"init has shape {init.shape} and rank {init.rank}, "
                f"expected {X.shape} and {r}"
            )
        factors = _absorb_weights(init)
    return _run_als(X, factors, opts)


def refine_from_init(F, init: CPDecomposition, opts: SolveOptions | None = None):
    """Improve a starting CP approximation with ALS sweeps.

    The final residual never exceeds the residual of ``init``.
    """
    X = as_array(F)
    if init.shape != X.shape:
        raise ShapeError(f"init shape {init.shape} does not match tensor {X.shape}")
    return als_decompose(X, init.rank, init=init, opts=opts)


def _absorb_weights(cp: CPDecomposition) -> list:
    factors = [U.copy() for U in cp.factors]
    factors[0] = factors[0] * cp.weights
    return factors


def normalize_cp(cp: CPDecomposition) -> CPDecomposition:
    """Rescale every factor column to unit length, moving scale into the weights.

    Each column is also flipped so that its largest-magnitude entry is
    positive; the sign goes into the weight. Raises
    :class:`DegenerateComponentError` for a zero column.
    """
    weights = cp.weights.copy()
    factors = []
    for j, U in enumerate(cp.factors):
        norms = np.linalg.norm(U, axis=0)
        for s in np.flatnonzero(norms == 0):
            raise DegenerateComponentError(int(s), j)
        V = U / norms
        pivot = np.argmax(np.abs(V), axis=0)
        signs = np.sign(V[pivot, np.arange(cp.rank)])
        factors.append(V * signs)
        weights *= norms * signs
    return CPDecomposition(factors, weights)
