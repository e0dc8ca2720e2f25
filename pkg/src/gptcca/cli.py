"""Command-line interface.

Exit codes: 0 success, 2 input/validation error, 3 rank or shape contract
violation, 4 numerical failure. Every command prints a JSON report to
stdout (and to ``--report`` when given). Wall-clock timings are left out
unless ``--timings`` is passed, so identical invocations produce
byte-identical outputs.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .bench import planted_tensor, run_bench
from .errors import (ContractError, InputError, NumericalFailure, RankError,
                     ShapeError)
from .gp import GPOptions, gp_decompose
from .numerics import pca_basis
from .solvers import SolveOptions, als_decompose, normalize_cp, refine_from_init
from .tcca import (MultiViewDataset, TCCAOptions, higher_order_correlation,
                   synth_multiview_with_truth, tcca_fit, tcca_project)
from .tensor import read_tensor, relative_residual, write_tensor

EXIT_OK, EXIT_INPUT, EXIT_CONTRACT, EXIT_NUMERIC = 0, 2, 3, 4


def _int_list(text: str) -> list:
    try:
        values = [int(v) for v in text.replace("x", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"dimensions must be positive integers, got {text!r}")
    return values


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be a nonnegative integer")
    return value


def _solver_args(p):
    p.add_argument("--max-sweeps", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-10,
                   help="relative change of the residual that stops ALS")


def _common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--report", help="also write the JSON report to this file")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock times (makes reports non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gptcca",
        description="Generating-polynomial CP approximation and tensor CCA.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="rank-r CP approximation of a tensor file")
    p.add_argument("tensor_file")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--method", choices=["gp", "als", "gp+refine"], default="gp+refine")
    p.add_argument("--out", required=True, help="prefix for <out>.mode<j>.csv and <out>.weights.csv")
    _solver_args(p)
    _common(p)

    p = sub.add_parser("tcca-fit", help="fit TCCA projections on CSV views")
    p.add_argument("views", nargs="+", help="headerless CSV per view, rows are samples")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--pca-dim", type=int, default=None)
    p.add_argument("--eps", type=float, default=None,
                   help="covariance eigenvalue floor (default 1e-8 * trace / n per view)")
    p.add_argument("--center", action="store_true")
    p.add_argument("--out", required=True, help="model file (JSON)")
    _solver_args(p)
    _common(p)

    p = sub.add_parser("tcca-transform", help="project CSV views with a fitted model")
    p.add_argument("model")
    p.add_argument("views", nargs="+")
    p.add_argument("--out", required=True, help="CSV of concatenated projections (N x m*r)")
    _common(p, seed=False)

    p = sub.add_parser("bench", help="GP vs GP+refine vs best-of-k ALS on planted tensors")
    p.add_argument("--shape", type=_int_list, default=[8, 6, 5])
    p.add_argument("--rank", type=int, default=4)
    p.add_argument("--noise-sigma", type=float, default=1e-3,
                   help="noise norm relative to the planted tensor")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--out", help="report file")
    _solver_args(p)
    _common(p)

    p = sub.add_parser("synth", help="write planted synthetic data")
    p.add_argument("kind", choices=["tensor", "multiview"])
    p.add_argument("--shape", type=_int_list, default=[5, 4, 3], help="tensor shape")
    p.add_argument("--dims", type=_int_list, default=[12, 10, 8], help="view dimensions")
    p.add_argument("--n-samples", type=int, default=200)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="tensor: relative noise norm; multiview: per-entry noise std")
    p.add_argument("--out", required=True, help="output prefix")
    _common(p)
    return parser


def _options_echo(args) -> dict:
    skip = {"report", "func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _solver(args, seed=None) -> SolveOptions:
    return SolveOptions(max_sweeps=args.max_sweeps, rel_change_tol=args.tol,
                        seed=args.seed if seed is None else seed)


def _check_rank(rank: int) -> None:
    if rank < 1:
        raise RankError(f"rank must be >= 1, got {rank}")


def cmd_decompose(args) -> dict:
    _check_rank(args.rank)
    F = read_tensor(args.tensor_file)
    solver = _solver(args)
    results = {"shape": list(F.shape)}
    t0 = time.perf_counter()
    if args.method == "als":
        cp, rep = als_decompose(F, args.rank, opts=solver)
        results.update(als=rep.to_dict(args.timings), residual=rep.final_residual)
    else:
        cp = gp_decompose(F, args.rank, GPOptions(seed=args.seed))
        results["gp_residual"] = relative_residual(F, cp)
        if args.method == "gp+refine":
            cp, rep = refine_from_init(F, cp, solver)
            results.update(refine=rep.to_dict(args.timings),
                           refined_residual=rep.final_residual)
        results["residual"] = relative_residual(F, cp)
    elapsed = time.perf_counter() - t0
    cp = normalize_cp(cp)
    results["files"] = io.write_factors(args.out, cp)
    if args.timings:
        results["wall_time"] = elapsed
    return results


def _read_views(paths) -> list:
    views = [io.read_matrix(p) for p in paths]
    counts = [Y.shape[0] for Y in views]
    if len(set(counts)) != 1:
        listing = ", ".join(f"{p} ({c} rows)" for p, c in zip(paths, counts))
        raise InputError(f"views have different row counts: {listing}", "views")
    if len(views) < 2:
        raise InputError("need at least two view files", "views")
    return views


def _apply_pca(views, pca) -> list:
    return [(Y - t["mean"]) @ t["basis"] for Y, t in zip(views, pca)]


def cmd_tcca_fit(args) -> dict:
    _check_rank(args.rank)
    if args.eps is not None and args.eps < 0:
        raise InputError("eps must be nonnegative", "eps")
    views = _read_views(args.views)
    pca = None
    if args.pca_dim is not None:
        for path, Y in zip(args.views, views):
            if not 1 <= args.pca_dim <= min(Y.shape):
                raise InputError(
                    f"pca_dim={args.pca_dim} invalid for {path} with shape {Y.shape}",
                    "pca_dim",
                )
        pca = [{"mean": Y.mean(axis=0), "basis": pca_basis(Y, args.pca_dim)} for Y in views]
        views = _apply_pca(views, pca)
    D = MultiViewDataset(views)
    opts = TCCAOptions(eps=args.eps, center=args.center, seed=args.seed, solver=_solver(args))
    t0 = time.perf_counter()
    model = tcca_fit(D, args.rank, opts)
    elapsed = time.perf_counter() - t0
    rho = higher_order_correlation(tcca_project(model, D))
    io.write_json(args.out, io.model_to_dict(model, pca, extra={"training_rho": rho}))
    results = {
        "n_samples": D.n_samples,
        "dims": list(D.dims),
        "rho": rho,
        "weights": model.cp.weights.tolist(),
        "gp_residual": model.gp_residual,
        "refined_residual": model.refined_residual,
        "refine": model.report.to_dict(args.timings),
        "model_file": args.out,
    }
    if args.timings:
        results["wall_time"] = elapsed
    return results


def cmd_tcca_transform(args) -> dict:
    model, pca = io.model_from_dict(io.read_json(args.model))
    views = _read_views(args.views)
    if len(views) != len(model.dims):
        raise InputError(
            f"model has {len(model.dims)} views, got {len(views)} files", "views")
    if pca is not None:
        for path, Y, t in zip(args.views, views, pca):
            if Y.shape[1] != t["basis"].shape[0]:
                raise InputError(
                    f"{path} has {Y.shape[1]} columns, model expects {t['basis'].shape[0]}",
                    "views")
        views = _apply_pca(views, pca)
    for path, Y, n in zip(args.views, views, model.dims):
        if Y.shape[1] != n:
            raise InputError(f"{path} has {Y.shape[1]} columns, model expects {n}", "views")
    Z = tcca_project(model, MultiViewDataset(views))
    io.write_matrix(args.out, np.hstack(Z))
    return {"n_samples": Z[0].shape[0], "columns": sum(z.shape[1] for z in Z),
            "rho": higher_order_correlation(Z), "out": args.out}


def cmd_bench(args) -> dict:
    _check_rank(args.rank)
    if args.trials < 1:
        raise InputError("trials must be >= 1", "trials")
    if args.restarts < 1:
        raise InputError("restarts must be >= 1", "restarts")
    if args.noise_sigma < 0:
        raise InputError("noise_sigma must be nonnegative", "noise_sigma")
    if args.rank > max(args.shape):
        raise RankError(f"rank {args.rank} exceeds every dimension of {args.shape}")
    results, summary = run_bench(args.shape, args.rank, args.noise_sigma, args.trials,
                                 args.seed, args.restarts, _solver(args))
    return {"trials": [r.to_dict(args.timings) for r in results], "summary": summary}


def cmd_synth(args) -> dict:
    _check_rank(args.rank)
    if args.noise_sigma < 0:
        raise InputError("noise_sigma must be nonnegative", "noise_sigma")
    if args.kind == "tensor":
        F, truth = planted_tensor(args.shape, args.rank, args.noise_sigma, args.seed)
        tensor_path = f"{args.out}.tnsr"
        write_tensor(tensor_path, F)
        truth_prefix = f"{args.out}.truth"
        files = [tensor_path] + io.write_factors(truth_prefix, truth)
        return {"files": files, "shape": list(F.shape)}
    if args.n_samples < 1:
        raise InputError("n_samples must be >= 1", "n_samples")
    if args.rank > min(args.dims):
        raise InputError(f"rank {args.rank} exceeds the smallest view dimension", "rank")
    D, loadings, codes = synth_multiview_with_truth(
        args.n_samples, len(args.dims), args.dims, args.rank, args.noise_sigma, args.seed)
    files = []
    for j, Y in enumerate(D.views, start=1):
        path = f"{args.out}.view{j}.csv"
        io.write_matrix(path, Y)
        files.append(path)
    for j, L in enumerate(loadings, start=1):
        path = f"{args.out}.loadings{j}.csv"
        io.write_matrix(path, L)
        files.append(path)
    path = f"{args.out}.codes.csv"
    io.write_matrix(path, codes)
    files.append(path)
    return {"files": files, "dims": list(D.dims), "n_samples": D.n_samples}


COMMANDS = {
    "decompose": cmd_decompose,
    "tcca-fit": cmd_tcca_fit,
    "tcca-transform": cmd_tcca_transform,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (RankError, ShapeError)):
        return EXIT_CONTRACT
    if isinstance(exc, NumericalFailure):
        return EXIT_NUMERIC
    if isinstance(exc, (InputError, ContractError)):
        return EXIT_INPUT
    raise exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        results = COMMANDS[args.command](args)
    except (InputError, ContractError, ShapeError, RankError, NumericalFailure) as exc:
        field = getattr(exc, "field", None)
        prefix = f"error [{field}]" if field else "error"
        print(f"{prefix}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    report = {"command": args.command, "options": _options_echo(args), "results": results}
    text = io.dumps(report)
    sys.stdout.write(text)
    targets = [args.report]
    if args.command == "bench":
        targets.append(args.out)
    for target in filter(None, targets):
        Path(target).write_text(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
