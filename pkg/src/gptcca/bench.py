"""Planted low-rank tensors and the GP / GP+refine / ALS comparison harness."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError
from .gp import GPOptions, gp_decompose
from .solvers import SolveOptions, als_decompose, refine_from_init
from .tensor import CPDecomposition, DenseTensor, cp_to_tensor, relative_residual


def planted_tensor(shape: Sequence[int], rank: int, noise_sigma: float, seed: int):
    """Random rank-``rank`` tensor plus Gaussian noise of relative norm ``noise_sigma``.

    Factor entries are standard normal. Returns ``(F, truth)`` where
    ``truth`` is the noiseless CP decomposition.
    """
    if rank < 1 or noise_sigma < 0:
        raise ContractError("need rank >= 1 and noise_sigma >= 0")
    rng = np.random.default_rng(seed)
    truth = CPDecomposition([rng.standard_normal((int(n), rank)) for n in shape])
    X = cp_to_tensor(truth).data
    if noise_sigma > 0:
        E = rng.standard_normal(X.shape)
        X = X + noise_sigma * np.linalg.norm(X) * E / np.linalg.norm(E)
    return DenseTensor(X), truth


def derive_seeds(seed: int, count: int) -> list:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


@dataclass
class TrialResult:
    trial: int
    seed: int
    als_seeds: list
    gp_residual: float
    refined_residual: float
    als_residuals: list
    refine_sweeps: int
    refine_converged: bool
    als_sweeps: list
    als_converged: list
    monotone: bool
    timings: dict

    @property
    def als_best(self) -> float:
        return min(self.als_residuals)

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "trial": self.trial,
            "seed": self.seed,
            "als_seeds": self.als_seeds,
            "gp_residual": self.gp_residual,
            "gp_refine_residual": self.refined_residual,
            "als_residuals": self.als_residuals,
            "als_best_residual": self.als_best,
            "refine_sweeps": self.refine_sweeps,
            "refine_converged": self.refine_converged,
            "als_sweeps": self.als_sweeps,
            "als_converged": self.als_converged,
            "residual_history_monotone": self.monotone,
            "gp_refine_wins": self.refined_residual <= self.als_best,
        }
        if timings:
            out["timings"] = self.timings
        return out


def _non_increasing(history) -> bool:
    return all(b <= a for a, b in zip(history, history[1:]))


def run_trial(trial: int, seed: int, shape, rank: int, noise_sigma: float,
              restarts: int = 5, solver: SolveOptions | None = None) -> TrialResult:
    solver = solver or SolveOptions()
    F, _ = planted_tensor(shape, rank, noise_sigma, seed)

    t0 = time.perf_counter()
    init = gp_decompose(F, rank, GPOptions(seed=seed))
    t_gp = time.perf_counter() - t0
    _, rep = refine_from_init(F, init, solver)
    t_refine = time.perf_counter() - t0

    als_seeds = derive_seeds(seed, restarts)
    reports = []
    t1 = time.perf_counter()
    for s in als_seeds:
        opts = SolveOptions(solver.max_sweeps, solver.rel_change_tol, s)
        reports.append(als_decompose(F, rank, opts=opts)[1])
    t_als = time.perf_counter() - t1

    histories = [rep.residual_history] + [r.residual_history for r in reports]
    return TrialResult(
        trial=trial,
        seed=seed,
        als_seeds=als_seeds,
        gp_residual=relative_residual(F, init),
        refined_residual=rep.final_residual,
        als_residuals=[r.final_residual for r in reports],
        refine_sweeps=rep.sweeps_used,
        refine_converged=rep.converged,
        als_sweeps=[r.sweeps_used for r in reports],
        als_converged=[r.converged for r in reports],
        monotone=all(_non_increasing(h) for h in histories),
        timings={"gp": t_gp, "gp_refine": t_refine, "als_total": t_als},
    )


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "min": float(arr.min()), "max": float(arr.max())}


def run_bench(shape, rank: int, noise_sigma: float, trials: int, seed: int,
              restarts: int = 5, solver: SolveOptions | None = None,
              exact_tol: float = 1e-8) -> tuple:
    """Run ``trials`` independent comparisons; per-trial seeds derive from ``seed``.

    Returns ``(results, summary)``.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    seeds = derive_seeds(seed, trials)
    results = [run_trial(t, s, shape, rank, noise_sigma, restarts, solver)
               for t, s in enumerate(seeds)]
    gp = [r.gp_residual for r in results]
    summary = {
        "gp_residual": _stats(gp),
        "gp_refine_residual": _stats([r.refined_residual for r in results]),
        "als_best_residual": _stats([r.als_best for r in results]),
        "gp_exact_rate": float(np.mean([g <= exact_tol for g in gp])),
        "gp_refine_win_rate": float(np.mean(
            [r.refined_residual <= r.als_best for r in results])),
        "all_histories_monotone": all(r.monotone for r in results),
    }
    return results, summary
