"""Headerless CSV matrices, factor files and the JSON model document."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .solvers import SolveOptions, SolveReport
from .tcca import TCCAModel, TCCAOptions
from .tensor import CPDecomposition

MODEL_FORMAT = "gptcca-tcca-model"
MODEL_VERSION = 1
FLOAT_FMT = "%.17g"


def read_matrix(path) -> np.ndarray:
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot parse CSV {path}: {exc}", str(path)) from exc
    if M.size == 0:
        raise InputError(f"CSV {path} is empty", str(path))
    if not np.all(np.isfinite(M)):
        raise InputError(f"CSV {path} contains non-finite values", str(path))
    return M


def write_matrix(path, M) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(M, dtype=np.float64)),
               fmt=FLOAT_FMT, delimiter=",")


def write_factors(prefix, cp: CPDecomposition) -> list:
    """Write ``<prefix>.mode<j>.csv`` (1-based ``j``) and ``<prefix>.weights.csv``."""
    paths = []
    for j, U in enumerate(cp.factors, start=1):
        path = f"{prefix}.mode{j}.csv"
        write_matrix(path, U)
        paths.append(path)
    path = f"{prefix}.weights.csv"
    write_matrix(path, cp.weights.reshape(1, -1))
    paths.append(path)
    return paths


def read_factors(prefix, order: int) -> CPDecomposition:
    factors = [read_matrix(f"{prefix}.mode{j}.csv") for j in range(1, order + 1)]
    weights = read_matrix(f"{prefix}.weights.csv").ravel()
    return CPDecomposition(factors, weights)


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, fixed indentation, round-trip floats."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read JSON document {path}: {exc}", str(path)) from exc


def _mat(M) -> list:
    return np.asarray(M, dtype=np.float64).tolist()


def model_to_dict(model: TCCAModel, pca=None, extra=None) -> dict:
    """Serializable form of a fitted model.

    ``pca`` optionally carries a per-view ``{"mean": ..., "basis": ...}``
    applied before the model's own projections.
    """
    opts = model.options
    views = []
    for j, (W, P) in enumerate(zip(model.whiteners, model.projections)):
        view = {
            "dim": int(P.shape[0]),
            "eps": model.eps_used[j],
            "whitener": _mat(W),
            "projection": _mat(P),
        }
        if model.means is not None:
            view["mean"] = _mat(model.means[j])
        if pca is not None:
            view["pca"] = {"mean": _mat(pca[j]["mean"]), "basis": _mat(pca[j]["basis"])}
        views.append(view)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "rank": model.rank,
        "options": {
            "eps": opts.eps,
            "center": opts.center,
            "seed": opts.seed,
            "solver": {
                "max_sweeps": opts.solver.max_sweeps,
                "rel_change_tol": opts.solver.rel_change_tol,
                "seed": opts.solver.seed,
            },
        },
        "views": views,
        "cp": {"weights": _mat(model.cp.weights),
               "factors": [_mat(U) for U in model.cp.factors]},
        "fit": {
            "gp_residual": model.gp_residual,
            "refined_residual": model.refined_residual,
            "sweeps_used": model.report.sweeps_used,
            "converged": model.report.converged,
            "residual_history": model.report.residual_history,
        },
    }
    if extra:
        doc.update(extra)
    return doc


def model_from_dict(doc: dict):
    """Inverse of :func:`model_to_dict`; returns ``(model, pca or None)``."""
    if doc.get("format") != MODEL_FORMAT:
        raise InputError("not a TCCA model document", "format")
    if doc.get("version") != MODEL_VERSION:
        raise InputError(f"unsupported model version {doc.get('version')}", "version")
    try:
        o = doc["options"]
        solver = SolveOptions(**o["solver"])
        opts = TCCAOptions(eps=o["eps"], center=o["center"], seed=o["seed"], solver=solver)
        views = doc["views"]
        fit = doc["fit"]
        means = tuple(np.array(v["mean"]) for v in views) if opts.center else None
        model = TCCAModel(
            rank=int(doc["rank"]),
            whiteners=tuple(np.array(v["whitener"]) for v in views),
            projections=tuple(np.array(v["projection"], ndmin=2) for v in views),
            cp=CPDecomposition(doc["cp"]["factors"], doc["cp"]["weights"]),
            report=SolveReport(
                sweeps_used=fit["sweeps_used"],
                residual_history=fit["residual_history"],
                converged=fit["converged"],
            ),
            options=opts,
            eps_used=tuple(v["eps"] for v in views),
            means=means,
            gp_residual=fit["gp_residual"],
            refined_residual=fit["refined_residual"],
        )
        pca = None
        if all("pca" in v for v in views):
            pca = [{"mean": np.array(v["pca"]["mean"]),
                    "basis": np.array(v["pca"]["basis"], ndmin=2)} for v in views]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed model document: {exc}", "model") from exc
    return model, pca
