"""Dataset loading, standardization and synthetic multi-view generators."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .model import MultiViewDataset, ValidationError

log = logging.getLogger(__name__)

# repr-exact float formatting for matrix files
EXACT_FMT = "%.17g"


@dataclass(frozen=True)
class SynthSpec:
    """Planted multi-view clustering problem.

    Each view has ``d_info`` features whose per-cluster means are spread so
    that the expected distance between two cluster centers is
    ``separation`` within-cluster standard deviations, followed by
    ``d_noise`` standard Gaussian features; feature order within each view
    is shuffled. ``imbalance`` is the largest/smallest cluster size ratio.
    """

    n: int = 300
    c_true: int = 4
    l: int = 3
    d_info: int = 5
    d_noise: int = 45
    separation: float = 6.0
    seed: int = 0
    imbalance: float = 1.0

    def __post_init__(self):
        if self.c_true < 2:
            raise ValidationError("c_true must be >= 2")
        if self.n < 2 * self.c_true:
            raise ValidationError(f"n={self.n} must be at least 2 * c_true = {2 * self.c_true}")
        if not self.separation > 0:
            raise ValidationError("separation must be > 0")
        if self.l < 1 or self.d_info < 0 or self.d_noise < 0 or self.d_info + self.d_noise < 1:
            raise ValidationError("need l >= 1 and at least one feature per view")
        if self.imbalance < 1:
            raise ValidationError("imbalance must be >= 1")


def cluster_sizes(n: int, c: int, imbalance: float = 1.0) -> np.ndarray:
    w = np.linspace(1.0, imbalance, c)
    raw = n * w / w.sum()
    sizes = np.floor(raw).astype(int)
    # largest remainder, earlier clusters first on ties
    for i in np.argsort(-(raw - sizes), kind="stable")[: n - sizes.sum()]:
        sizes[i] += 1
    return sizes


def synth_generate(spec: SynthSpec) -> MultiViewDataset:
    rng = np.random.default_rng(spec.seed)
    sizes = cluster_sizes(spec.n, spec.c_true, spec.imbalance)
    labels = rng.permutation(np.repeat(np.arange(spec.c_true), sizes))
    spread = spec.separation / np.sqrt(2.0 * max(spec.d_info, 1))
    views, informative = [], []
    for v in range(spec.l):
        centers = spread * rng.standard_normal((spec.d_info, spec.c_true))
        info = centers[:, labels] + rng.standard_normal((spec.d_info, spec.n))
        noise = rng.standard_normal((spec.d_noise, spec.n))
        X = np.vstack([info, noise])
        perm = rng.permutation(X.shape[0])
        views.append(X[perm])
        # perm[new] = old; informative rows are old < d_info
        informative.extend((v, int(j)) for j in np.flatnonzero(perm < spec.d_info))
    return MultiViewDataset(
        views=views,
        labels=labels,
        informative_features=sorted(informative),
        name=f"synth-n{spec.n}-c{spec.c_true}-l{spec.l}-s{spec.seed}",
    )


@dataclass(frozen=True)
class SecondOrderSpec:
    """Clusters that are unions of well-separated sub-blobs.

    Each of ``c_true`` classes is split into ``blobs_per_class`` compact
    blobs. Blobs of one class share a class signature on the informative
    features (a common offset of size ``separation``) but each blob also
    gets its own ``blob_jitter``-sized offset, so nearest neighbours stay
    inside a blob while the class structure only shows up through shared
    anchors.
    """

    n: int = 240
    c_true: int = 3
    blobs_per_class: int = 3
    l: int = 2
    d_info: int = 6
    d_noise: int = 24
    separation: float = 4.0
    blob_jitter: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 * self.c_true * self.blobs_per_class:
            raise ValidationError("n too small for the requested blobs")
        if not self.separation > 0 or self.blob_jitter < 0:
            raise ValidationError("separation must be > 0 and blob_jitter >= 0")


def synth_second_order(spec: SecondOrderSpec) -> MultiViewDataset:
    rng = np.random.default_rng(spec.seed)
    n_blobs = spec.c_true * spec.blobs_per_class
    blob = rng.permutation(np.repeat(np.arange(n_blobs), cluster_sizes(spec.n, n_blobs)))
    labels = blob // spec.blobs_per_class
    views, informative = [], []
    for v in range(spec.l):
        cls = spec.separation / np.sqrt(2.0 * spec.d_info) * rng.standard_normal((spec.d_info, spec.c_true))
        jit = spec.blob_jitter / np.sqrt(2.0 * spec.d_info) * rng.standard_normal((spec.d_info, n_blobs))
        info = cls[:, labels] + jit[:, blob] + 0.5 * rng.standard_normal((spec.d_info, spec.n))
        noise = rng.standard_normal((spec.d_noise, spec.n))
        X = np.vstack([info, noise])
        perm = rng.permutation(X.shape[0])
        views.append(X[perm])
        informative.extend((v, int(j)) for j in np.flatnonzero(perm < spec.d_info))
    return MultiViewDataset(
        views=views,
        labels=labels,
        informative_features=sorted(informative),
        name=f"second-order-n{spec.n}-c{spec.c_true}-s{spec.seed}",
    )


def zscore(dataset: MultiViewDataset):
    """Standardize every feature to zero mean and unit (population) variance.

    Features with std < 1e-12 become all-zero. Returns
    ``(dataset, zero_variance)`` where ``zero_variance`` lists ``(view, index)``.
    """
    views, report = [], []
    for v, X in enumerate(dataset.views):
        mu = X.mean(axis=1, keepdims=True)
        sd = X.std(axis=1, keepdims=True)
        flat = sd[:, 0] < 1e-12
        Z = np.where(flat[:, None], 0.0, (X - mu) / np.where(flat[:, None], 1.0, sd))
        views.append(Z)
        report.extend((v, int(j)) for j in np.flatnonzero(flat))
    if report:
        log.info("zscore: %d constant feature(s) zeroed: %s", len(report), report[:10])
    out = MultiViewDataset(
        views=views,
        labels=dataset.labels,
        informative_features=dataset.informative_features,
        feature_names=dataset.feature_names,
        name=dataset.name,
    )
    return out, tuple(report)


# ---------------------------------------------------------------------------
# CSV + JSON manifest


def _read_csv(path: Path) -> list:
    if not path.exists():
        raise ValidationError(f"missing file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    return rows


def _is_numeric(row) -> bool:
    try:
        [float(x) for x in row]
    except ValueError:
        return False
    return True


def read_matrix_csv(path) -> tuple:
    """Numeric CSV -> (array, header or None). A non-numeric first row is a header."""
    path = Path(path)
    rows = _read_csv(path)
    header = None
    if rows and not _is_numeric(rows[0]):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValidationError(f"{path}: row {i} has {len(r)} columns, expected {width}")
        try:
            rows[i] = [float(x) for x in r]
        except ValueError as exc:
            raise ValidationError(f"{path}: unparsable number in row {i}: {exc}") from exc
    return np.array(rows, dtype=np.float64), header


def write_matrix_csv(path, M, header=None, fmt=EXACT_FMT) -> None:
    M = np.atleast_2d(np.asarray(M))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in M:
            w.writerow([fmt % x for x in row])


def _read_labels(path: Path) -> np.ndarray:
    rows = _read_csv(path)
    if rows and not _is_numeric(rows[0][:1]):
        # header, or string class names
        if len(rows) > 1 and _is_numeric(rows[1][:1]):
            rows = rows[1:]
    vals = [r[0].strip() for r in rows]
    try:
        f = np.array([float(x) for x in vals])
        if np.all(f == np.round(f)):
            return f.astype(np.int64)
    except ValueError:
        pass
    _, codes = np.unique(np.array(vals), return_inverse=True)
    return codes.astype(np.int64)


def load_multiview(manifest_path) -> MultiViewDataset:
    """Load views (rows = samples) listed in a JSON manifest; returns features x samples."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ValidationError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if not isinstance(manifest.get("views"), list) or not manifest["views"]:
        raise ValidationError(f"{manifest_path}: 'views' must be a non-empty list")
    base = manifest_path.parent
    views, names = [], []
    for i, p in enumerate(manifest["views"]):
        M, header = read_matrix_csv(base / p)
        if views and M.shape[0] != views[0].shape[1]:
            raise ValidationError(
                f"shape mismatch: view {i} has {M.shape[0]} rows, view 0 has {views[0].shape[1]}"
            )
        views.append(M.T)
        names.append(header if header else [f"v{i}_f{j}" for j in range(M.shape[1])])
    labels = None
    if manifest.get("labels"):
        labels = _read_labels(base / manifest["labels"])
    informative = manifest.get("informative_features")
    return MultiViewDataset(
        views=views,
        labels=labels,
        informative_features=informative,
        feature_names=names,
        name=manifest.get("name", manifest_path.stem),
    )


def save_multiview(dataset: MultiViewDataset, directory, name: Optional[str] = None) -> Path:
    """Write views, labels and a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or dataset.name or "dataset"
    entries = []
    for v, X in enumerate(dataset.views):
        fname = f"view{v}.csv"
        header = list(dataset.feature_names[v]) if dataset.feature_names else None
        write_matrix_csv(directory / fname, X.T, header=header)
        entries.append(fname)
    manifest = {"name": name, "views": entries}
    if dataset.labels is not None:
        write_matrix_csv(directory / "labels.csv", dataset.labels[:, None], fmt="%d")
        manifest["labels"] = "labels.csv"
    if dataset.informative_features is not None:
        manifest["informative_features"] = [list(p) for p in dataset.informative_features]
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
