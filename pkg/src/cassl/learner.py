"""
Per-dimension, per-bin success-probability models and action selection.

Both learners expose ``predict(features) -> list of arrays`` where entry
``i`` holds an independent success probability for every bin of control
dimension ``i``.  Training only touches the bin actually executed in each
dimension of each record.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels

MODEL_SCHEMA_VERSION = 1
TIE_TOL = 1e-12


class ShapeError(ValueError):
    pass


class NotTrainedError(RuntimeError):
    pass


def _check_weights(n, weights):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ShapeError(f"need one weight per record ({n}), got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    return w


def _dataset_arrays(dataset):
    if len(dataset) == 0:
        raise ValueError("cannot fit on an empty dataset")
    return dataset.arrays()


@dataclass(frozen=True)
class TabularModel:
    """Beta-Bernoulli counts per (context cluster, dimension, bin).

    Contexts are clustered by quantizing each feature (assumed in [0, 1])
    into ``context_levels[f]`` equal cells; a level of 1 ignores the feature.
    """

    bin_counts: tuple[int, ...]
    n_features: int
    context_levels: tuple[int, ...] = ()
    smoothing: tuple[float, float] = (1.0, 1.0)
    succ: np.ndarray | None = field(default=None, repr=False)
    fail: np.ndarray | None = field(default=None, repr=False)
    trained: bool = False

    kind = "tabular"

    def __post_init__(self):
        levels = tuple(self.context_levels or ()) or (1,) * self.n_features
        if len(levels) != self.n_features or any(int(v) < 1 for v in levels):
            raise ValueError("context_levels needs one positive level per feature")
        object.__setattr__(self, "context_levels", tuple(int(v) for v in levels))
        object.__setattr__(self, "bin_counts", tuple(int(b) for b in self.bin_counts))
        shape = (self.n_clusters, len(self.bin_counts), max(self.bin_counts))
        for name in ("succ", "fail"):
            arr = getattr(self, name)
            arr = np.zeros(shape) if arr is None else np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ShapeError(f"{name} must have shape {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_clusters(self) -> int:
        return int(np.prod(self.context_levels)) if self.context_levels else 1

    def clusters(self, feats: np.ndarray) -> np.ndarray:
        feats = np.atleast_2d(np.asarray(feats, dtype=float))
        if feats.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} context features, got {feats.shape[1]}")
        idx = np.zeros(feats.shape[0], dtype=np.int64)
        for f, lv in enumerate(self.context_levels):
            cell = np.clip(np.floor(feats[:, f] * lv), 0, lv - 1).astype(np.int64)
            idx = idx * lv + cell
        return idx

    def predict(self, features) -> list[np.ndarray]:
        c = int(self.clusters(features)[0])
        a, b = self.smoothing
        s, f = self.succ[c], self.fail[c]
        p = (s + a) / (s + f + a + b)
        return [p[i, :d].copy() for i, d in enumerate(self.bin_counts)]

    def fit(self, dataset, weights=None, seed: int = 0) -> "TabularModel":
        feats, bins, y = _dataset_arrays(dataset)
        w = _check_weights(len(y), weights)
        if bins.shape[1] != len(self.bin_counts):
            raise ShapeError("record dimensionality does not match the model")
        succ, fail = kernels.tabular_counts(self.clusters(feats), bins, y, w,
                                            self.n_clusters, max(self.bin_counts))
        return replace(self, succ=succ, fail=fail, trained=True)

    def to_dict(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "kind": self.kind,
            "bin_counts": list(self.bin_counts),
            "n_features": self.n_features,
            "context_levels": list(self.context_levels),
            "smoothing": list(self.smoothing),
            "trained": self.trained,
            "succ": self.succ.tolist(),
            "fail": self.fail.tolist(),
        }


@dataclass(frozen=True)
class LogisticModel:
    """One logistic unit per (dimension, bin) over the context features, trained with Adam."""

    bin_counts: tuple[int, ...]
    n_features: int
    learning_rate: float = 1e-4
    epochs: int = 15
    batch_size: int = 64
    init_scale: float = 0.0
    weights: np.ndarray | None = field(default=None, repr=False)
    bias: np.ndarray | None = field(default=None, repr=False)
    trained: bool = False
    seed: int = 0

    kind = "logistic"

    def __post_init__(self):
        object.__setattr__(self, "bin_counts", tuple(int(b) for b in self.bin_counts))
        k, bmax = len(self.bin_counts), max(self.bin_counts)
        w = self.weights
        if w is None:
            rng = np.random.default_rng(self.seed)
            w = self.init_scale * rng.standard_normal((k, bmax, self.n_features))
        b = np.zeros((k, bmax)) if self.bias is None else self.bias
        w, b = np.array(w, dtype=float), np.array(b, dtype=float)
        if w.shape != (k, bmax, self.n_features) or b.shape != (k, bmax):
            raise ShapeError("parameter arrays have the wrong shape")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    def predict(self, features) -> list[np.ndarray]:
        x = np.asarray(features, dtype=float).reshape(-1)
        if x.shape[0] != self.n_features:
            raise ShapeError(f"expected {self.n_features} context features, got {x.shape[0]}")
        z = self.weights @ x + self.bias
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        return [p[i, :d].copy() for i, d in enumerate(self.bin_counts)]

    def loss_and_grad(self, dataset, weights=None):
        feats, bins, y = _dataset_arrays(dataset)
        w = _check_weights(len(y), weights)
        return kernels.logistic_loss_grad(np.array(self.weights), np.array(self.bias), feats, bins, y, w)

    def fit(self, dataset, weights=None, seed: int = 0) -> "LogisticModel":
        """Continue training from the current parameters (warm start)."""
        feats, bins, y = _dataset_arrays(dataset)
        w = _check_weights(len(y), weights)
        if bins.shape[1] != len(self.bin_counts):
            raise ShapeError("record dimensionality does not match the model")
        if feats.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} context features, got {feats.shape[1]}")
        rng = np.random.default_rng(seed)
        orders = np.stack([rng.permutation(len(y)) for _ in range(self.epochs)]) if self.epochs else \
            np.zeros((0, len(y)), dtype=np.int64)
        W, b = np.array(self.weights), np.array(self.bias)
        m_w, v_w = np.zeros_like(W), np.zeros_like(W)
        m_b, v_b = np.zeros_like(b), np.zeros_like(b)
        kernels.adam_epochs(W, b, feats, bins, y, w, orders, int(self.batch_size), float(self.learning_rate),
                            0.9, 0.999, 1e-8, m_w, v_w, m_b, v_b, 0)
        return replace(self, weights=W, bias=b, trained=True)

    def to_dict(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "kind": self.kind,
            "bin_counts": list(self.bin_counts),
            "n_features": self.n_features,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "trained": self.trained,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }


PolicyModel = TabularModel | LogisticModel


def make_model(kind: str, bin_counts: Sequence[int], n_features: int, **options) -> PolicyModel:
    if kind == "tabular":
        return TabularModel(tuple(bin_counts), n_features, **options)
    if kind == "logistic":
        return LogisticModel(tuple(bin_counts), n_features, **options)
    raise ValueError(f"unknown learner kind {kind!r}")


def model_from_dict(d: dict) -> PolicyModel:
    if d.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema {d.get('schema_version')}")
    if d["kind"] == "tabular":
        return TabularModel(tuple(d["bin_counts"]), d["n_features"], tuple(d["context_levels"]),
                            tuple(d["smoothing"]), np.array(d["succ"]), np.array(d["fail"]), d["trained"])
    if d["kind"] == "logistic":
        return LogisticModel(tuple(d["bin_counts"]), d["n_features"], d["learning_rate"], d["epochs"],
                             d["batch_size"], weights=np.array(d["weights"]), bias=np.array(d["bias"]),
                             trained=d["trained"])
    raise ValueError(f"unknown model kind {d['kind']!r}")


def save_model(model: PolicyModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> PolicyModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# action selection
# ---------------------------------------------------------------------------

def _pick_tied(scores: np.ndarray, rng) -> int:
    best = np.flatnonzero(scores >= scores.max() - TIE_TOL)
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def select_uncertain(p: Sequence[np.ndarray], i: int, rng) -> int:
    """Bin of dimension ``i`` with the largest Bernoulli variance p(1 - p)."""
    pi = np.asarray(p[i], dtype=float)
    # p(1-p) = 1/4 - (p - 1/2)^2; scoring on the distance keeps symmetric ties exact
    return _pick_tied(-np.abs(pi - 0.5), rng)


def select_greedy(p: Sequence[np.ndarray], i: int, rng) -> int:
    return _pick_tied(np.asarray(p[i], dtype=float), rng)


def eps_greedy_choice(p: Sequence[np.ndarray], i: int, eps: float, rng) -> tuple[int, bool]:
    """Like :func:`select_eps_greedy` but also reports whether the random branch fired."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
    if rng.random() < eps:
        return int(rng.integers(len(p[i]))), True
    return select_greedy(p, i, rng), False


def select_eps_greedy(p: Sequence[np.ndarray], i: int, eps: float, rng) -> int:
    return eps_greedy_choice(p, i, eps, rng)[0]
