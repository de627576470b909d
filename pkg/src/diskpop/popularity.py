"""Popularity classification: gradient-boosted trees plus rank calibration.

The classifier is a gradient boosting machine for binary log-loss built here
from first principles: regression trees fit to the residual ``y - p`` with
exact greedy squared-error splits, Newton leaf values ``sum(g) / sum(h)``
where ``h = p (1 - p)``, a constant learning rate, and a log-odds base score
at the class prior.  Training is fully deterministic: ties between splits
resolve to the lowest feature index and smallest threshold.

Scores become popularity values through empirical-rank calibration: the score
of a dataset is mapped to its midpoint rank among a reference sample of
unpopular-dataset scores, giving values in [0, 1] that are uniform when the
dataset is exchangeable with the reference sample.  Reference scores come
from two-fold cross prediction so no model scores its own training half.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import DatasetRecord, SplitConfig
from .features import FEATURE_NAMES, FeatureVector, extract_corpus_features, feature_matrix, labels_array

_LEAF_VALUE_CAP = 10.0
_PROBABILITY_EPS = 1e-12


@dataclass(frozen=True)
class GbdtConfig:
    """Training hyperparameters; ``seed`` only drives the half split."""

    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 0:
            raise ValueError(f"n_trees must be non-negative, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be at least 1, got {self.max_depth}")
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}")


class _Tree:
    """Regression tree stored as parallel node arrays; feature -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=float)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            active = np.flatnonzero(self.feature[node] >= 0)
            if active.size == 0:
                break
            current = node[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
        return self.value[node]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, _PROBABILITY_EPS, 1.0 - _PROBABILITY_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _leaf_value(grad_sum: float, hess_sum: float) -> float:
    # denominator guard mirrors the usual library behavior for empty hessians
    if hess_sum < 1e-150:
        return 0.0
    value = grad_sum / hess_sum
    return float(min(max(value, -_LEAF_VALUE_CAP), _LEAF_VALUE_CAP))


def _best_split(X: np.ndarray, grad: np.ndarray, indices: np.ndarray, min_leaf: int):
    n = indices.size
    g = grad[indices]
    total = g.sum()
    base = total * total / n
    best_gain = 1e-12
    best = None
    for f in range(X.shape[1]):
        v = X[indices, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        left_sum = np.cumsum(g[order])
        left_n = np.arange(min_leaf, n - min_leaf + 1)
        valid = vs[left_n - 1] < vs[left_n]
        if not valid.any():
            continue
        gl = left_sum[left_n - 1]
        gr = total - gl
        gain = gl * gl / left_n + gr * gr / (n - left_n) - base
        gain[~valid] = -np.inf
        j = int(np.argmax(gain))
        if gain[j] > best_gain:
            best_gain = float(gain[j])
            best = (f, float(vs[left_n[j] - 1]))
    if best is None:
        return None
    f, threshold = best
    mask = X[indices, f] <= threshold
    return f, threshold, indices[mask], indices[~mask]


def _fit_tree(X: np.ndarray, grad: np.ndarray, hess: np.ndarray, config: GbdtConfig) -> _Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def grow(indices: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        split = None
        if depth < config.max_depth and indices.size >= 2 * config.min_samples_leaf:
            split = _best_split(X, grad, indices, config.min_samples_leaf)
        if split is None:
            value[node] = _leaf_value(float(grad[indices].sum()), float(hess[indices].sum()))
            return node
        f, thr, left_idx, right_idx = split
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(left_idx, depth + 1)
        right[node] = grow(right_idx, depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return _Tree(feature, threshold, left, right, value)


@dataclass(frozen=True)
class GbdtModel:
    """Trained boosted-tree classifier.

    ``training_log`` holds the training log-loss after each boosting round.
    """

    trees: tuple[_Tree, ...]
    learning_rate: float
    base_score: float
    feature_names: tuple[str, ...]
    training_log: tuple[float, ...] = ()

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        score = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            score += self.learning_rate * tree.predict(X)
        return score

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        p = _sigmoid(self.decision_function(X))
        return np.clip(p, _PROBABILITY_EPS, 1.0 - _PROBABILITY_EPS)


def train_gbdt_xy(
    X, y, config: GbdtConfig | None = None, feature_names: Sequence[str] | None = None
) -> GbdtModel:
    """Train on a raw feature matrix and 0/1 label vector."""
    config = config if config is not None else GbdtConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) and y must be its n labels")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be 0 or 1")
    prior = float(y.mean()) if y.size else 0.0
    if not 0.0 < prior < 1.0:
        raise ValueError("degenerate training set: both classes are required")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(X.shape[1]))
    elif len(feature_names) != X.shape[1]:
        raise ValueError(
            f"got {len(feature_names)} feature names for {X.shape[1]} columns"
        )

    base = math.log(prior / (1.0 - prior))
    score = np.full(y.size, base)
    trees: list[_Tree] = []
    losses: list[float] = []
    for _ in range(config.n_trees):
        p = _sigmoid(score)
        tree = _fit_tree(X, y - p, p * (1.0 - p), config)
        score += config.learning_rate * tree.predict(X)
        trees.append(tree)
        losses.append(_log_loss(y, _sigmoid(score)))
    return GbdtModel(
        trees=tuple(trees),
        learning_rate=config.learning_rate,
        base_score=base,
        feature_names=tuple(feature_names),
        training_log=tuple(losses),
    )


def train_gbdt(features: Sequence[FeatureVector], config: GbdtConfig | None = None) -> GbdtModel:
    """Train on feature vectors using the canonical feature ordering."""
    return train_gbdt_xy(feature_matrix(features), labels_array(features), config, FEATURE_NAMES)


def predict_probability(model: GbdtModel, fv: FeatureVector) -> float:
    """Probability that one dataset is unpopular."""
    x = fv.to_array()
    if x.size != len(model.feature_names):
        raise ValueError(
            f"feature arity mismatch: vector has {x.size}, model expects {len(model.feature_names)}"
        )
    return float(model.predict_proba(x[None, :])[0])


_SPLIT_KEY = b"diskpop-split-v1"


def _split_hash(seed: int, dataset_id: str) -> int:
    digest = hashlib.blake2b(
        f"{seed}:{dataset_id}".encode("utf-8"), key=_SPLIT_KEY, digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def split_halves(items: Sequence, seed: int) -> tuple[list, list]:
    """Deterministic disjoint halves keyed by a seeded hash of dataset_id.

    Works on anything with a ``dataset_id`` attribute.  The first half gets
    the extra element when the count is odd.
    """
    if len(items) < 2:
        raise ValueError("need at least 2 items to split")
    ordered = sorted(items, key=lambda it: (_split_hash(seed, it.dataset_id), it.dataset_id))
    half = (len(items) + 1) // 2
    return ordered[:half], ordered[half:]


def cross_predict_features(
    features: Sequence[FeatureVector], config: GbdtConfig | None = None
) -> dict[str, float]:
    """Out-of-fold probability per dataset via a two-fold split.

    Each half is scored by the model trained on the other half, so no score
    leaks its own label.
    """
    config = config if config is not None else GbdtConfig()
    half_a, half_b = split_halves(features, config.seed)
    scored: dict[str, float] = {}
    for train_part, score_part in ((half_a, half_b), (half_b, half_a)):
        y = labels_array(train_part)
        if y.min() == y.max():
            raise ValueError("degenerate half: a training fold has a single class")
        model = train_gbdt_xy(feature_matrix(train_part), y, config, FEATURE_NAMES)
        probs = model.predict_proba(feature_matrix(score_part))
        for fv, prob in zip(score_part, probs):
            scored[fv.dataset_id] = float(prob)
    return {fv.dataset_id: scored[fv.dataset_id] for fv in features}


def cross_predict(
    records: Sequence[DatasetRecord], split: SplitConfig, config: GbdtConfig | None = None
) -> dict[str, float]:
    """Out-of-fold probabilities computed straight from catalogue records."""
    return cross_predict_features(extract_corpus_features(records, split), config)


@dataclass(frozen=True)
class CalibrationMap:
    """Sorted reference scores used for empirical-rank calibration."""

    references: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.references:
            raise ValueError("calibration needs at least one reference score")
        object.__setattr__(self, "references", tuple(float(r) for r in self.references))
        if any(r1 > r2 for r1, r2 in zip(self.references, self.references[1:])):
            raise ValueError("reference scores must be sorted ascending")


@dataclass(frozen=True)
class PopularityScore:
    """Raw classifier probability and its calibrated popularity."""

    dataset_id: str
    probability: float
    popularity: float


def fit_calibration(probabilities) -> CalibrationMap:
    """Build a calibration map from reference probabilities."""
    refs = sorted(float(p) for p in probabilities)
    if not refs:
        raise ValueError("calibration needs at least one reference score")
    return CalibrationMap(tuple(refs))


def popularity(calibration: CalibrationMap, probability: float) -> float:
    """Midpoint empirical rank of ``probability`` among the reference scores.

    Returns ``(#below + 0.5 * #equal) / n``, which lies in [0, 1] and is
    monotone non-decreasing in the probability.
    """
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability must be within [0, 1], got {probability!r}")
    refs = np.asarray(calibration.references)
    below = int(np.searchsorted(refs, probability, side="left"))
    upto = int(np.searchsorted(refs, probability, side="right"))
    return (below + 0.5 * (upto - below)) / refs.size


def popularity_array(calibration: CalibrationMap, probabilities) -> np.ndarray:
    """Vectorized :func:`popularity`."""
    p = np.asarray(probabilities, dtype=float)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("probabilities must be within [0, 1]")
    refs = np.asarray(calibration.references)
    below = np.searchsorted(refs, p, side="left")
    upto = np.searchsorted(refs, p, side="right")
    return (below + 0.5 * (upto - below)) / refs.size


def _node_payload(tree: _Tree, node: int) -> dict:
    if tree.feature[node] < 0:
        return {"leaf_value": float(tree.value[node])}
    return {
        "feature_index": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "left": _node_payload(tree, int(tree.left[node])),
        "right": _node_payload(tree, int(tree.right[node])),
    }


def _node_from_payload(payload: dict, feature, threshold, left, right, value) -> int:
    node = len(feature)
    feature.append(-1)
    threshold.append(0.0)
    left.append(-1)
    right.append(-1)
    value.append(0.0)
    if "leaf_value" in payload:
        value[node] = float(payload["leaf_value"])
        return node
    feature[node] = int(payload["feature_index"])
    threshold[node] = float(payload["threshold"])
    left[node] = _node_from_payload(payload["left"], feature, threshold, left, right, value)
    right[node] = _node_from_payload(payload["right"], feature, threshold, left, right, value)
    return node


def save_model(model: GbdtModel, path) -> None:
    """Serialize a model to JSON; :func:`load_model` restores it exactly."""
    payload = {
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_names": list(model.feature_names),
        "trees": [_node_payload(tree, 0) for tree in model.trees],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> GbdtModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    trees = []
    for tree_payload in payload["trees"]:
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []
        _node_from_payload(tree_payload, feature, threshold, left, right, value)
        trees.append(_Tree(feature, threshold, left, right, value))
    return GbdtModel(
        trees=tuple(trees),
        learning_rate=float(payload["learning_rate"]),
        base_score=float(payload["base_score"]),
        feature_names=tuple(payload["feature_names"]),
    )
