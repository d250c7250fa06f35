"""Random forest of Gini decision trees with majority-vote prediction."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data import CLASSES
from ..errors import InsufficientDataError, SchemaError, ValidationError
from . import _tree

FORMAT_VERSION = 1
_NO_CHANGE = CLASSES.index(0)


@dataclass(frozen=True)
class RfHyperparams:
    n_trees: int = 100
    max_depth: int = 10
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    split_criterion: str = "gini"
    seed: int = 0
    bootstrap: bool = True  # only switched off by tests

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if not 1 <= self.max_depth <= 64:
            raise ValidationError("max_depth must lie in [1, 64]")
        if self.min_samples_split < 2:
            raise ValidationError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if self.split_criterion.lower() != "gini":
            raise ValidationError("only the Gini split criterion is supported")


@dataclass(frozen=True, eq=False)
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray  # class index into CLASSES

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def leaf_sizes(self, X: np.ndarray) -> np.ndarray:
        """Number of rows of `X` reaching each leaf (0 for internal nodes)."""
        sizes = np.zeros(self.n_nodes, dtype=np.int64)
        for row in X:
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            sizes[node] += 1
        return sizes

    @classmethod
    def constant(cls, label: int) -> "DecisionTree":
        return cls(np.array([-1], np.int32), np.zeros(1), np.array([-1], np.int32),
                   np.array([-1], np.int32), np.array([CLASSES.index(label)], np.int8))


def class_priority(y_idx: np.ndarray) -> np.ndarray:
    """Class indices ordered by training frequency, then NoChange, then class order."""
    counts = np.bincount(y_idx, minlength=3)
    return np.array(sorted(range(3), key=lambda c: (-counts[c], c != _NO_CHANGE, c)), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FittedForest:
    feature_names: tuple[str, ...]
    hyperparams: RfHyperparams
    priority: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray
    offsets: np.ndarray
    classes: tuple[int, ...] = field(default=CLASSES)

    @classmethod
    def from_trees(cls, trees: Sequence[DecisionTree], feature_names, hyperparams=None,
                   priority=None) -> "FittedForest":
        offsets = np.zeros(len(trees) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([t.n_nodes for t in trees])
        if priority is None:
            priority = class_priority(np.array([], dtype=np.int64))
        return cls(
            feature_names=tuple(feature_names),
            hyperparams=hyperparams or RfHyperparams(n_trees=len(trees)),
            priority=np.asarray(priority, dtype=np.int64),
            feature=np.concatenate([t.feature for t in trees]).astype(np.int32),
            threshold=np.concatenate([t.threshold for t in trees]).astype(np.float64),
            left=np.concatenate([t.left for t in trees]).astype(np.int32),
            right=np.concatenate([t.right for t in trees]).astype(np.int32),
            leaf=np.concatenate([t.leaf for t in trees]).astype(np.int8),
            offsets=offsets,
        )

    @property
    def n_trees(self) -> int:
        return len(self.offsets) - 1

    @property
    def trees(self) -> list[DecisionTree]:
        out = []
        for t in range(self.n_trees):
            s = slice(self.offsets[t], self.offsets[t + 1])
            out.append(DecisionTree(self.feature[s], self.threshold[s], self.left[s],
                                    self.right[s], self.leaf[s]))
        return out

    def votes(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise SchemaError(
                f"expected {len(self.feature_names)} feature columns {self.feature_names}"
            )
        return _tree.forest_votes(X, self.feature, self.threshold, self.left, self.right,
                                  self.leaf, self.offsets)

    def predict(self, X) -> np.ndarray:
        """Majority vote as preference values (-1, 0, +1)."""
        X = np.asarray(X, dtype=np.float64)
        if len(X) == 0:
            return np.empty(0, dtype=np.int64)
        idx = _tree.resolve_votes(self.votes(X), self.priority)
        return np.asarray(CLASSES, dtype=np.int64)[idx]


def _to_index(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if not np.all(np.isin(y, CLASSES)):
        raise ValidationError("labels must be in {-1, 0, 1}")
    return y + 1


def fit_forest(X, y, feature_names: Sequence[str], params: RfHyperparams) -> FittedForest:
    """Fit `params.n_trees` Gini trees on bootstrap resamples of (X, y).

    Each split considers ceil(sqrt(p)) non-constant features drawn at random.
    Per-tree seeds come from ``SeedSequence(params.seed)`` so tree ``t`` is
    the same regardless of how many trees are grown after it.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y_idx = _to_index(y)
    if X.ndim != 2 or len(X) == 0:
        raise InsufficientDataError("cannot fit a forest on zero rows")
    if X.shape[1] != len(feature_names):
        raise SchemaError("feature_names does not match the number of columns")
    if len(y_idx) != len(X):
        raise ValidationError("X and y lengths differ")
    n, p = X.shape
    n_sub = max(1, math.ceil(math.sqrt(p)))
    priority = class_priority(y_idx)
    seeds = np.random.SeedSequence(params.seed).generate_state(params.n_trees, dtype=np.uint64)
    all_rows = np.arange(n, dtype=np.int64)
    trees = []
    for t in range(params.n_trees):
        if params.bootstrap:
            sample = np.random.default_rng(int(seeds[t])).integers(0, n, size=n, dtype=np.int64)
        else:
            sample = all_rows
        parts = _tree.fit_tree(X, y_idx, sample, params.max_depth, params.min_samples_split,
                               params.min_samples_leaf, n_sub, seeds[t], priority)
        trees.append(DecisionTree(*parts))
    return FittedForest.from_trees(trees, feature_names, params, priority)


def predict(forest: FittedForest, X) -> np.ndarray:
    return forest.predict(X)


def save_forest(forest: FittedForest, path) -> Path:
    """Serialize to a single ``.npz`` archive; metadata travels as JSON."""
    path = Path(path)
    meta = {
        "format_version": FORMAT_VERSION,
        "feature_names": list(forest.feature_names),
        "classes": list(forest.classes),
        "hyperparams": asdict(forest.hyperparams),
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), priority=forest.priority,
                 feature=forest.feature, threshold=forest.threshold, left=forest.left,
                 right=forest.right, leaf=forest.leaf, offsets=forest.offsets)
    return path


def load_forest(path) -> FittedForest:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValidationError(f"unsupported model format version {meta.get('format_version')}")
        if tuple(meta["classes"]) != CLASSES:
            raise ValidationError("model class order does not match (-1, 0, 1)")
        return FittedForest(
            feature_names=tuple(meta["feature_names"]),
            hyperparams=RfHyperparams(**meta["hyperparams"]),
            priority=z["priority"],
            feature=z["feature"],
            threshold=z["threshold"],
            left=z["left"],
            right=z["right"],
            leaf=z["leaf"],
            offsets=z["offsets"],
        )
