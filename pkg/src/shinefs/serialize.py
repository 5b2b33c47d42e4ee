"""On-disk formats: ModelState bundles, graph exports, fit results and report tables.

Matrix files are written with 17 significant digits so they reload
bit-exactly; report tables and traces use 12 significant digits.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import EXACT_FMT, read_matrix_csv, write_matrix_csv
from .model import HyperParams, KSparseRowGraph, ModelState, ValidationError

REPORT_FMT = "%.12g"
REPORT_COLUMNS = ("ratio", "method", "acc_mean", "acc_std", "nmi_mean", "nmi_std")
FORMAT_VERSION = 1


def r12(x: float) -> float:
    return float(REPORT_FMT % x)


def write_graph_coo(graph: KSparseRowGraph, path) -> None:
    rows, cols, w = graph.coo()
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["row", "col", "weight"])
        for i, j, x in zip(rows, cols, w):
            out.writerow([int(i), int(j), EXACT_FMT % x])


def read_graph_coo(path, n: int, k: int) -> KSparseRowGraph:
    M, _ = read_matrix_csv(path)
    if M.shape != (n * k, 3):
        raise ValidationError(f"{path}: expected {n * k} edges, found {M.shape[0]}")
    rows = M[:, 0].astype(np.intp)
    if not np.array_equal(rows, np.repeat(np.arange(n), k)):
        raise ValidationError(f"{path}: edges must be grouped by row with k per row")
    return KSparseRowGraph(M[:, 1].astype(np.intp).reshape(n, k), M[:, 2].reshape(n, k))


def write_dense(M: np.ndarray, path, fmt: str = EXACT_FMT) -> None:
    write_matrix_csv(path, M, fmt=fmt)


def save_state(state: ModelState, directory, params: Optional[HyperParams] = None) -> Path:
    """Write one CSV per matrix plus ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}

    def put(name, M):
        fname = f"{name}.csv"
        write_matrix_csv(directory / fname, np.atleast_2d(M))
        files[name] = fname

    for v, W in enumerate(state.W):
        put(f"W{v}", W)
        put(f"D{v}", state.D[v][None, :])
    put("A", state.A)
    put("C", state.C)
    put("F", state.F)
    put("alpha", state.alpha[None, :])
    put("lambda_G", state.lambda_G[None, :])
    put("lambda_S", state.lambda_S[None, :])
    write_graph_coo(state.G, directory / "G.csv")
    files["G"] = "G.csv"
    if state.S is not None:
        write_graph_coo(state.S, directory / "S.csv")
        files["S"] = "S.csv"
    manifest = {
        "format_version": FORMAT_VERSION,
        "n": int(state.A.shape[1]),
        "m": int(state.A.shape[0]),
        "c": int(state.C.shape[0]),
        "k": int(state.G.k),
        "dims": [int(W.shape[0]) for W in state.W],
        "has_S": state.S is not None,
        "files": files,
        "hyperparameters": params.to_dict() if params is not None else None,
        "objective_trace": list(state.objective_trace),
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_state(directory):
    """Inverse of :func:`save_state`; returns ``(state, params_or_None)``."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"missing state manifest: {manifest_path}")
    man = json.loads(manifest_path.read_text())
    files = man["files"]

    def get(name):
        return read_matrix_csv(directory / files[name])[0]

    l = len(man["dims"])
    W = [get(f"W{v}") for v in range(l)]
    D = [get(f"D{v}")[0] for v in range(l)]
    n, k = man["n"], man["k"]
    S = read_graph_coo(directory / files["S"], n, k) if man["has_S"] else None
    state = ModelState(
        W=W,
        A=get("A"),
        C=get("C"),
        S=S,
        G=read_graph_coo(directory / files["G"], n, k),
        F=get("F"),
        alpha=get("alpha")[0],
        D=D,
        lambda_S=get("lambda_S")[0],
        lambda_G=get("lambda_G")[0],
        objective_trace=man.get("objective_trace", []),
    )
    params = HyperParams.from_dict(man["hyperparameters"]) if man.get("hyperparameters") else None
    return state, params


def write_trace_csv(trace: Sequence[float], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["iteration", "objective"])
        for i, v in enumerate(trace):
            out.writerow([i, REPORT_FMT % v])


def write_step_log_csv(step_log, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["iteration", "step", "objective", "retuned_before"])
        for rec in step_log:
            rb = "" if rec.retuned_before is None else REPORT_FMT % rec.retuned_before
            out.writerow([rec.iteration, rec.step, REPORT_FMT % rec.value, rb])


def fit_result_dict(result) -> dict:
    d = result.to_dict()
    d["objective_trace"] = [r12(x) for x in d["objective_trace"]]
    return d


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def report_rows(reports) -> list:
    return [
        {
            "ratio": r12(r.ratio),
            "method": r.method,
            "acc_mean": r12(r.acc_mean),
            "acc_std": r12(r.acc_std),
            "nmi_mean": r12(r.nmi_mean),
            "nmi_std": r12(r.nmi_std),
        }
        for r in reports
    ]


def write_reports(reports, out_dir, stem: str = "sweep", extra_columns: Optional[dict] = None) -> None:
    """``<stem>.csv`` (one row per ratio x method), ``<stem>.json`` and a long-format plot table.

    ``extra_columns`` maps column name -> list of per-report values appended
    after the standard columns.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = report_rows(reports)
    extra_columns = extra_columns or {}
    for name, vals in extra_columns.items():
        for row, v in zip(rows, vals):
            row[name] = v
    columns = list(REPORT_COLUMNS) + list(extra_columns)
    with open(out_dir / f"{stem}.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([_cell(row[c]) for c in columns])
    full = []
    for row, rep in zip(rows, reports):
        entry = dict(row)
        entry["n_selected"] = len(rep.selected)
        entry["selected"] = [list(p) for p in rep.selected] if rep.method != "random" else None
        full.append(entry)
    write_json(full, out_dir / f"{stem}.json")
    with open(out_dir / f"{stem}_long.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["ratio", "method", "metric", "mean", "std"] + list(extra_columns))
        for row in rows:
            for metric in ("acc", "nmi"):
                out.writerow(
                    [_cell(row["ratio"]), row["method"], metric, _cell(row[f"{metric}_mean"]),
                     _cell(row[f"{metric}_std"])] + [_cell(row[c]) for c in extra_columns]
                )


def _cell(x):
    if isinstance(x, float):
        return REPORT_FMT % x
    return x


def read_report_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
