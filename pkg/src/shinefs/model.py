"""Domain types shared by every part of the package.

Data are stored features x samples: view ``v`` is a ``(d_v, n)`` array.
All types are frozen dataclasses holding read-only arrays; updates produce
new values through :func:`dataclasses.replace`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised when a dataset, parameter set or state violates an invariant."""


class NumericalError(RuntimeError):
    """Raised when a numerical sub-solver cannot produce a reliable result."""


class FitError(RuntimeError):
    """A failure inside the alternating optimizer, tagged with where it happened."""

    def __init__(self, iteration: int, step: str, cause: Exception):
        self.iteration = iteration
        self.step = step
        self.cause = cause
        super().__init__(f"iteration {iteration}, step {step}: {cause}")


def _frozen(a, dtype=np.float64) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    views: tuple
    labels: Optional[np.ndarray] = None
    informative_features: Optional[tuple] = None
    feature_names: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        views = tuple(_frozen(np.atleast_2d(v)) for v in self.views)
        object.__setattr__(self, "views", views)
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(self.labels, dtype=np.int64).ravel())
        if self.informative_features is not None:
            pairs = tuple((int(v), int(j)) for v, j in self.informative_features)
            object.__setattr__(self, "informative_features", pairs)
        if self.feature_names is not None:
            names = tuple(tuple(str(s) for s in nv) for nv in self.feature_names)
            object.__setattr__(self, "feature_names", names)
        check_dataset(self)

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[1]

    @property
    def dims(self) -> tuple:
        return tuple(v.shape[0] for v in self.views)

    @property
    def total_features(self) -> int:
        return sum(self.dims)

    def concatenated(self) -> np.ndarray:
        return np.vstack(self.views)

    def feature_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    def subset(self, selected: Sequence) -> np.ndarray:
        """Rows of the concatenated matrix for ``(view, index)`` pairs."""
        return np.vstack([self.views[v][j] for v, j in selected])


def check_dataset(ds: MultiViewDataset) -> None:
    if len(ds.views) < 1:
        raise ValidationError("dataset needs at least one view")
    n = ds.views[0].shape[1]
    for v, X in enumerate(ds.views):
        if X.ndim != 2:
            raise ValidationError(f"view {v}: expected a 2-D matrix, got shape {X.shape}")
        if X.shape[1] != n:
            raise ValidationError(
                f"sample count mismatch: view {v} has {X.shape[1]} samples, view 0 has {n}"
            )
        if X.shape[0] < 1:
            raise ValidationError(f"view {v} has no features")
        bad = np.argwhere(~np.isfinite(X))
        if bad.size:
            f, s = bad[0]
            raise ValidationError(f"non-finite entry in view {v} at feature {f}, sample {s}")
    if n < 2:
        raise ValidationError(f"need at least 2 samples, got {n}")
    if ds.labels is not None and ds.labels.shape[0] != n:
        raise ValidationError(f"labels have length {ds.labels.shape[0]}, expected {n}")
    if ds.informative_features is not None:
        for v, j in ds.informative_features:
            if not (0 <= v < len(ds.views) and 0 <= j < ds.views[v].shape[0]):
                raise ValidationError(f"informative feature ({v}, {j}) out of bounds")


@dataclass(frozen=True)
class HyperParams:
    """Model and solver settings.

    ``c`` is both the latent/anchor dimension and the number of clusters.
    ``m`` (anchor count) may not exceed ``c`` because ``C`` (c x m) must have
    orthonormal columns.
    """

    c: int
    gamma: float = 1.0
    beta: float = 1.0
    eta: float = 1.0
    k: int = 5
    m: Optional[int] = None
    epsilon: float = 1e-8
    max_outer_iters: int = 50
    rel_tol: float = 1e-6
    gpi_max_iters: int = 100
    gpi_tol: float = 1e-8
    seed: int = 0
    disable_second_order: bool = False
    standardize: bool = True

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", self.c)
        if int(self.c) != self.c or self.c < 2:
            raise ValidationError(f"c must be an integer >= 2, got {self.c}")
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"m must be an integer >= 1, got {self.m}")
        if self.m > self.c:
            raise ValidationError(f"m must not exceed c (m={self.m}, c={self.c})")
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be an integer >= 1, got {self.k}")
        for name in ("gamma", "beta", "epsilon"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValidationError(f"{name} must be > 0, got {val}")
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValidationError(f"eta must be >= 0, got {self.eta}")
        if self.max_outer_iters < 1 or self.gpi_max_iters < 1:
            raise ValidationError("iteration limits must be >= 1")
        if self.rel_tol < 0 or self.gpi_tol < 0:
            raise ValidationError("tolerances must be >= 0")

    @property
    def effective_eta(self) -> float:
        return 0.0 if self.disable_second_order else float(self.eta)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown hyperparameter(s): {sorted(unknown)}")
        return cls(**d)


def validate(dataset: MultiViewDataset, params: HyperParams):
    """Check a dataset/parameter pair and return it unchanged."""
    check_dataset(dataset)
    n = dataset.n_samples
    if params.k > n - 2:
        raise ValidationError(f"k too large: k={params.k} but n={n} allows at most {n - 2}")
    if params.c > n:
        raise ValidationError(f"c={params.c} exceeds the sample count {n}")
    for v, d in enumerate(dataset.dims):
        if d < params.c:
            raise ValidationError(
                f"view {v} has {d} features, fewer than c={params.c} (W needs orthonormal columns)"
            )
    return dataset, params


@dataclass(frozen=True, eq=False)
class KSparseRowGraph:
    """n x n graph where each row keeps ``k`` entries that sum to one.

    ``indices`` and ``weights`` are ``(n, k)`` arrays; each row's column
    indices are sorted ascending and never include the row itself.
    """

    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        idx = _frozen(self.indices, dtype=np.intp)
        w = _frozen(self.weights)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)
        if idx.ndim != 2 or idx.shape != w.shape:
            raise ValidationError("indices and weights must be matching (n, k) arrays")
        n = idx.shape[0]
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValidationError("column index out of range")
        if np.any(idx == np.arange(n)[:, None]):
            row = int(np.argwhere(idx == np.arange(n)[:, None])[0, 0])
            raise ValidationError(f"self-loop in row {row}")
        if idx.shape[1] > 1 and np.any(np.diff(idx, axis=1) <= 0):
            raise ValidationError("row indices must be strictly increasing")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite and nonnegative")
        if np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-9):
            row = int(np.argmax(np.abs(w.sum(axis=1) - 1.0)))
            raise ValidationError(f"row {row} does not sum to 1")

    @classmethod
    def from_neighbors(cls, neighbor_ids, weights) -> "KSparseRowGraph":
        """Build from rows in arbitrary column order (sorts each row)."""
        neighbor_ids = np.asarray(neighbor_ids)
        order = np.argsort(neighbor_ids, axis=1, kind="stable")
        return cls(
            np.take_along_axis(neighbor_ids, order, axis=1),
            np.take_along_axis(np.asarray(weights, dtype=np.float64), order, axis=1),
        )

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.k)

    def coo(self):
        return self.rows(), self.indices.ravel(), self.weights.ravel()

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[np.arange(self.n)[:, None], self.indices] = self.weights
        return out

    def nonzeros_per_row(self) -> np.ndarray:
        return (self.weights > 0).sum(axis=1)

    def row_sq_norms(self) -> np.ndarray:
        return (self.weights**2).sum(axis=1)

    def edge_sum(self, M: np.ndarray) -> float:
        """sum_ij w_ij * ||M[:, i] - M[:, j]||^2 over the stored edges."""
        r, col, w = self.coo()
        diff = M[:, r] - M[:, col]
        return float(np.dot((diff * diff).sum(axis=0), w))


@dataclass(frozen=True, eq=False)
class ModelState:
    """Every optimization variable of the model.

    ``S`` is ``None`` when the second-order graph is disabled (treated as the
    zero matrix). ``D`` holds the diagonals of the reweighting matrices.
    ``lambda_S`` / ``lambda_G`` are per-row regularizers chosen by the last
    S / G update.
    """

    W: tuple
    A: np.ndarray
    C: np.ndarray
    S: Optional[KSparseRowGraph]
    G: KSparseRowGraph
    F: np.ndarray
    alpha: np.ndarray
    D: tuple
    lambda_S: np.ndarray
    lambda_G: np.ndarray
    objective_trace: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "W", tuple(_frozen(w) for w in self.W))
        object.__setattr__(self, "D", tuple(_frozen(d) for d in self.D))
        for name in ("A", "C", "F", "alpha", "lambda_S", "lambda_G"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "objective_trace", tuple(float(x) for x in self.objective_trace))

    def replace(self, **changes) -> "ModelState":
        return dataclasses.replace(self, **changes)

    @property
    def n_views(self) -> int:
        return len(self.W)

    def check_invariants(self, k: Optional[int] = None, orth_tol=1e-8, simplex_tol=1e-9,
                         alpha_tol=1e-12) -> None:
        """Raise :class:`ValidationError` if any constraint of the model is violated."""
        A = self.A
        if np.any(A < 0) or np.any(np.abs(A.sum(axis=0) - 1.0) > simplex_tol):
            raise ValidationError("A has a column off the probability simplex")
        for v, W in enumerate(self.W):
            _check_orthonormal(W, orth_tol, f"W[{v}]")
        _check_orthonormal(self.C, orth_tol, "C")
        _check_orthonormal(self.F, orth_tol, "F")
        a = self.alpha
        if np.any(a < 0) or np.any(a > 1) or abs(a.sum() - 1.0) > alpha_tol:
            raise ValidationError(f"alpha is off the simplex: {a}")
        for name, g in (("S", self.S), ("G", self.G)):
            if g is None:
                continue
            if k is not None and g.k != k:
                raise ValidationError(f"{name} keeps {g.k} entries per row, expected {k}")
            nz = g.nonzeros_per_row()
            if np.any(nz != g.k):
                row = int(np.argmax(nz != g.k))
                raise ValidationError(f"{name} row {row} has {nz[row]} nonzeros, expected {g.k}")


def _check_orthonormal(M: np.ndarray, tol: float, what: str) -> None:
    err = np.abs(M.T @ M - np.eye(M.shape[1])).max()
    if err > tol:
        raise ValidationError(f"{what} columns are not orthonormal (max error {err:.3g})")


@dataclass(frozen=True)
class EvalReport:
    selected: tuple
    ratio: float
    acc_mean: float
    acc_std: float
    nmi_mean: float
    nmi_std: float
    objective_trace: tuple = ()
    wallclock: float = 0.0
    method: str = "shinefs"
    accs: tuple = ()
    nmis: tuple = ()

    def to_dict(self, include_selected=True) -> dict:
        d = dataclasses.asdict(self)
        d["selected"] = [list(p) for p in self.selected] if include_selected else len(self.selected)
        return d
