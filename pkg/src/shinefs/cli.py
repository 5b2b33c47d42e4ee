"""Command-line entry point: ``shinefs {fit,select,evaluate,sweep,synth,ablate}``.

Every command reads a flat JSON config. Data comes from exactly one of
``"manifest"`` (path to a dataset manifest, relative to the config file)
or ``"synth"`` (generator settings). Hyperparameter keys sit at the top
level next to run keys such as ``ratios`` and ``restarts``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 labels missing.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import json
import logging
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import serialize as ser
from ._backend import BACKEND
from .data import SecondOrderSpec, SynthSpec, load_multiview, save_multiview, synth_generate, synth_second_order
from .evaluation import DEFAULT_RATIOS, evaluate_selection, sweep
from .model import FitError, HyperParams, MultiViewDataset, ValidationError
from .optimizer import fit, hybrid_graph, select_features

log = logging.getLogger("shinefs")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_LABELS = 0, 2, 3, 4
EMIT_CHOICES = ("trace", "graphs", "state")
SYNTH_KINDS = {"planted": (SynthSpec, synth_generate), "second_order": (SecondOrderSpec, synth_second_order)}
RUN_KEYS = {"manifest", "synth", "ratios", "restarts", "baseline", "baseline_draws", "out", "emit",
            "seeds", "n_seeds", "selection", "fit_result"}


class LabelsMissing(Exception):
    pass


@dataclass
class RunConfig:
    params: HyperParams
    manifest: Optional[Path] = None
    synth: Optional[dict] = None
    ratios: tuple = DEFAULT_RATIOS
    restarts: int = 30
    baseline: str = "none"
    baseline_draws: int = 10
    out: Path = Path("shinefs-out")
    emit: tuple = ()
    seeds: tuple = ()
    selection: Optional[Path] = None
    fit_result: Optional[Path] = None

    def __post_init__(self):
        if (self.manifest is None) == (self.synth is None):
            raise ValidationError("config needs exactly one data source: 'manifest' or 'synth'")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if not self.ratios:
            raise ValidationError("ratios must be non-empty")
        for r in self.ratios:
            if not 0 < r <= 1:
                raise ValidationError(f"ratio {r} outside (0, 1]")
        if self.baseline not in ("random", "none"):
            raise ValidationError(f"baseline must be 'random' or 'none', got {self.baseline!r}")
        bad = set(self.emit) - set(EMIT_CHOICES)
        if bad:
            raise ValidationError(f"unknown emit option(s): {sorted(bad)}")

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "manifest": str(self.manifest) if self.manifest else None,
            "synth": self.synth,
            "ratios": list(self.ratios),
            "restarts": self.restarts,
            "baseline": self.baseline,
            "baseline_draws": self.baseline_draws,
            "emit": list(self.emit),
            "seeds": list(self.seeds),
        }

    def dataset(self, seed: Optional[int] = None) -> MultiViewDataset:
        """Load the manifest, or generate synthetic data (``seed`` overrides the generator seed)."""
        if self.manifest is not None:
            return load_multiview(self.manifest)
        spec = self.synth_spec(seed)
        return SYNTH_KINDS[self.synth.get("kind", "planted")][1](spec)

    def synth_spec(self, seed: Optional[int] = None):
        opts = dict(self.synth)
        kind = opts.pop("kind", "planted")
        if kind not in SYNTH_KINDS:
            raise ValidationError(f"unknown synth kind {kind!r}; choose from {sorted(SYNTH_KINDS)}")
        cls = SYNTH_KINDS[kind][0]
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(opts) - names
        if unknown:
            raise ValidationError(f"unknown synth option(s): {sorted(unknown)}")
        if seed is not None:
            opts["seed"] = seed
        opts.setdefault("seed", self.params.seed)
        return cls(**opts)


def _parse_ratios(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ValidationError(f"--ratios: {exc}") from exc
    return vals


def build_config(args) -> RunConfig:
    raw: dict = {}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ValidationError(f"missing config file: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        base = path.parent
    raw = dict(raw)
    synth = raw.get("synth")
    if synth is not None and not isinstance(synth, dict):
        raise ValidationError("'synth' must be an object of generator settings")
    if "c" not in raw and synth is not None:
        planted = synth.get("kind", "planted") == "planted"
        raw["c"] = int(synth.get("c_true", SynthSpec.c_true if planted else SecondOrderSpec.c_true))
    if getattr(args, "manifest", None):
        raw["manifest"] = str(Path(args.manifest).resolve())
        raw.pop("synth", None)
    if args.seed is not None:
        raw["seed"] = args.seed
    synth = raw.get("synth")
    hp = {k: v for k, v in raw.items() if k not in RUN_KEYS}
    if "c" not in hp:
        raise ValidationError("config must set 'c' (number of clusters)")
    try:
        params = HyperParams.from_dict(hp)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc
    ratios = tuple(raw.get("ratios", DEFAULT_RATIOS))
    if args.ratios:
        ratios = _parse_ratios(args.ratios)
    emit = raw.get("emit", [])
    if isinstance(emit, str):
        emit = [emit]
    if args.emit:
        emit = [e for group in args.emit for e in group.split(",") if e]
    out = Path(args.out) if args.out else Path(raw.get("out", "shinefs-out"))
    if not out.is_absolute() and not args.out:
        out = base / out
    seeds = raw.get("seeds")
    if seeds is None:
        seeds = [params.seed + i for i in range(int(raw.get("n_seeds", 10)))]

    def rel(key):
        val = raw.get(key)
        if val is None:
            return None
        p = Path(val)
        return p if p.is_absolute() else base / p

    return RunConfig(
        params=params,
        manifest=rel("manifest"),
        synth=synth,
        ratios=ratios,
        restarts=int(raw.get("restarts", 30)),
        baseline=args.baseline or raw.get("baseline", "none"),
        baseline_draws=int(raw.get("baseline_draws", 10)),
        out=out,
        emit=tuple(dict.fromkeys(emit)),
        seeds=tuple(int(s) for s in seeds),
        selection=rel("selection"),
        fit_result=rel("fit_result"),
    )


def write_metadata(out: Path, command: str, cfg: RunConfig, extra: Optional[dict] = None) -> None:
    """Run metadata. Holds the only non-reproducible values (timestamp, timings)."""
    meta = {
        "command": command,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "backend": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.to_dict(),
    }
    meta.update(extra or {})
    ser.write_json(meta, out / "metadata.json")


def _require_labels(ds: MultiViewDataset) -> None:
    if ds.labels is None:
        raise LabelsMissing(f"dataset {ds.name!r} has no labels; this command needs them")


def _export_graphs(result, out: Path) -> None:
    state, params = result.state, result.params
    gdir = out / "graphs"
    gdir.mkdir(parents=True, exist_ok=True)
    ser.write_graph_coo(state.G, gdir / "G_coo.csv")
    ser.write_dense(state.G.to_dense(), gdir / "G_dense.csv", fmt=ser.REPORT_FMT)
    if state.S is not None:
        ser.write_graph_coo(state.S, gdir / "S_coo.csv")
        ser.write_dense(state.S.to_dense(), gdir / "S_dense.csv", fmt=ser.REPORT_FMT)
    ser.write_dense(hybrid_graph(state, params), gdir / "hybrid_dense.csv", fmt=ser.REPORT_FMT)


def _write_fit(result, cfg: RunConfig, out: Path) -> None:
    ser.write_json(ser.fit_result_dict(result), out / "fit_result.json")
    ser.write_trace_csv(result.objective_trace, out / "trace.csv")
    if "trace" in cfg.emit:
        ser.write_step_log_csv(result.step_log, out / "steps.csv")
    if "graphs" in cfg.emit:
        _export_graphs(result, out)
    if "state" in cfg.emit:
        ser.save_state(result.state, out / "state", result.params)


def cmd_fit(cfg: RunConfig) -> int:
    ds = cfg.dataset()
    result = fit(ds, cfg.params)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_fit(result, cfg, cfg.out)
    write_metadata(cfg.out, "fit", cfg, {"wallclock_seconds": result.wallclock})
    log.info("fit: %d iterations, converged=%s, objective %.6g -> %.6g", result.iterations,
             result.converged, result.objective_trace[0], result.objective_trace[-1])
    return EXIT_OK


def _ranking(cfg: RunConfig, ds: MultiViewDataset):
    """Ranking from a previous fit_result.json when configured, else a fresh fit."""
    if cfg.fit_result is not None:
        if not cfg.fit_result.exists():
            raise ValidationError(f"missing file: {cfg.fit_result}")
        ranking = [tuple(p) for p in json.loads(cfg.fit_result.read_text())["ranking"]]
        if len(ranking) != ds.total_features:
            raise ValidationError("fit_result ranking does not match the dataset's feature count")
        return ranking, None
    result = fit(ds, cfg.params)
    return list(result.ranking), result


def cmd_select(cfg: RunConfig) -> int:
    ds = cfg.dataset()
    ranking, result = _ranking(cfg, ds)
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "selection.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ratio", "rank", "view", "index", "name"])
        for r in sorted(cfg.ratios):
            for rank, (v, j) in enumerate(select_features(ranking, ratio=r)):
                name = ds.feature_names[v][j] if ds.feature_names else f"v{v}_f{j}"
                w.writerow([ser.REPORT_FMT % r, rank, v, j, name])
    if result is not None:
        _write_fit(result, cfg, cfg.out)
    write_metadata(cfg.out, "select", cfg)
    return EXIT_OK


def _read_selection(path: Path) -> dict:
    if not path.exists():
        raise ValidationError(f"missing file: {path}")
    groups: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            groups.setdefault(float(row["ratio"]), []).append((int(row["view"]), int(row["index"])))
    if not groups:
        raise ValidationError(f"{path}: empty selection")
    return groups


def cmd_evaluate(cfg: RunConfig) -> int:
    ds = cfg.dataset()
    _require_labels(ds)
    if cfg.selection is not None:
        groups = _read_selection(cfg.selection)
        method = "selection"
    else:
        ranking, result = _ranking(cfg, ds)
        groups = {r: select_features(ranking, ratio=r) for r in sorted(cfg.ratios)}
        method = "shinefs"
    reports = [
        evaluate_selection(ds, sel, cfg.params.c, restarts=cfg.restarts, seed=cfg.params.seed,
                           ratio=r, method=method)
        for r, sel in sorted(groups.items())
    ]
    ser.write_reports(reports, cfg.out, stem="evaluation")
    write_metadata(cfg.out, "evaluate", cfg)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    ds = cfg.dataset()
    _require_labels(ds)
    result, reports = sweep(ds, cfg.params, ratios=cfg.ratios, restarts=cfg.restarts,
                            baseline=cfg.baseline, baseline_draws=cfg.baseline_draws)
    ser.write_reports(reports, cfg.out, stem="sweep")
    _write_fit(result, cfg, cfg.out)
    write_metadata(cfg.out, "sweep", cfg, {"wallclock_seconds": result.wallclock})
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth is None:
        raise ValidationError("synth command needs a 'synth' section in the config")
    ds = cfg.dataset(seed=cfg.params.seed)
    save_multiview(ds, cfg.out / "data")
    write_metadata(cfg.out, "synth", cfg, {"spec": dataclasses.asdict(cfg.synth_spec(cfg.params.seed))})
    return EXIT_OK


VARIANTS = (("full", False), ("no-second-order", True))


def cmd_ablate(cfg: RunConfig) -> int:
    """Full model vs. the variant without second-order similarity, on identical seeds.

    With synthetic data each seed also regenerates the dataset.
    """
    if not cfg.seeds:
        raise ValidationError("ablate needs at least one seed")
    rows, per_method = [], {name: {} for name, _ in VARIANTS}
    for s in cfg.seeds:
        ds = cfg.dataset(seed=s if cfg.synth is not None else None)
        _require_labels(ds)
        for name, flag in VARIANTS:
            params = dataclasses.replace(cfg.params, seed=s, disable_second_order=flag)
            _, reports = sweep(ds, params, ratios=cfg.ratios, restarts=cfg.restarts, method=name)
            for rep in reports:
                rows.append((s, rep))
                per_method[name].setdefault(rep.ratio, []).append(rep.acc_mean)
    ser.write_reports([r for _, r in rows], cfg.out, stem="ablation",
                      extra_columns={"seed": [s for s, _ in rows]})
    with open(cfg.out / "ablation_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ratio", "method", "acc_mean_over_seeds", "n_seeds"])
        for name, _ in VARIANTS:
            for r, accs in sorted(per_method[name].items()):
                w.writerow([ser.REPORT_FMT % r, name, ser.REPORT_FMT % float(np.mean(accs)), len(accs)])
    overall = {name: float(np.mean([a for accs in per_method[name].values() for a in accs]))
               for name, _ in VARIANTS}
    ser.write_json({"seeds": list(cfg.seeds), "variants": [n for n, _ in VARIANTS],
                    "mean_acc": {k: ser.r12(v) for k, v in overall.items()}},
                   cfg.out / "ablation_seeds.json")
    write_metadata(cfg.out, "ablate", cfg)
    log.info("ablate: mean ACC full=%.4f no-second-order=%.4f", overall["full"], overall["no-second-order"])
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shinefs", description="Multi-view unsupervised feature selection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or "").strip().split("\n")[0] or None)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--manifest", metavar="PATH", help="dataset manifest (replaces the config's data source)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--ratios", metavar="CSV", help="comma-separated selection ratios")
        p.add_argument("--baseline", choices=("random", "none"))
        p.add_argument("--emit", action="append", metavar="{trace,graphs,state}",
                       help="extra outputs; repeat or comma-separate")
        p.add_argument("--out", metavar="DIR", help="output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except LabelsMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LABELS
    except FitError as exc:
        print(f"error: numerical failure at iteration {exc.iteration} ({exc.step} step): {exc.cause}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
