"""Random forest regression over logit vectors, built on CART trees.

Trees grow greedily on variance-reduction splits; each tree sees a
bootstrap resample and each split considers a random feature subset. The
forest prediction is the exact arithmetic mean of the tree predictions.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import split_scan
from .errors import InputError, ParameterError


@dataclass
class ForestConfig:
    n_trees: int = 800
    max_features: int | None = None  # None -> floor(sqrt(n_features))
    min_samples_leaf: int = 2
    max_depth: int | None = None
    bootstrap: bool = True
    clamp_unit: bool = False  # clamp predictions into [0,1] for normalised labels


@dataclass
class RegressionTree:
    """Flat-array CART tree: feature < 0 marks a leaf holding the target mean."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, rows = stack.pop()
            f = self.feature[node]
            if f < 0:
                out[rows] = self.value[node]
                continue
            go_left = X[rows, f] <= self.threshold[node]
            if go_left.any():
                stack.append((self.left[node], rows[go_left]))
            if (~go_left).any():
                stack.append((self.right[node], rows[~go_left]))
        return out


class _TreeBuilder:
    def __init__(self, X, y, config: ForestConfig, rng):
        self.X = X
        self.y = y
        self.config = config
        self.rng = rng
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _new_node(self, mean):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(mean)
        return len(self.feature) - 1

    def grow(self, idx, depth) -> int:
        y = self.y[idx]
        node = self._new_node(float(y.mean()))
        cfg = self.config
        if len(idx) < 2 * cfg.min_samples_leaf:
            return node
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            return node
        if y.max() == y.min():
            return node

        d = self.X.shape[1]
        n_feats = cfg.max_features if cfg.max_features is not None else max(1, int(math.isqrt(d)))
        n_feats = min(n_feats, d)
        if n_feats < d:
            feats = self.rng.choice(d, size=n_feats, replace=False)
        else:
            feats = range(d)

        best_sse = math.inf
        best_feat = -1
        best_thr = 0.0
        for f in feats:
            col = self.X[idx, f]
            order = np.argsort(col, kind="stable")
            sse, thr, pos = split_scan(col[order], y[order], cfg.min_samples_leaf)
            if pos >= 0 and sse < best_sse:
                best_sse = sse
                best_feat = int(f)
                best_thr = thr
        if best_feat < 0:
            return node

        go_left = self.X[idx, best_feat] <= best_thr
        self.feature[node] = best_feat
        self.threshold[node] = best_thr
        self.left[node] = self.grow(idx[go_left], depth + 1)
        self.right[node] = self.grow(idx[~go_left], depth + 1)
        return node

    def finish(self) -> RegressionTree:
        return RegressionTree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
        )


@dataclass
class Forest:
    trees: list
    n_features: int
    config: ForestConfig = field(default_factory=ForestConfig)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise InputError(
                f"feature width mismatch: forest trained on {self.n_features}, got {X.shape[1]}"
            )
        acc = np.zeros(len(X))
        for tree in self.trees:
            acc += tree.predict(X)
        out = acc / len(self.trees)
        if self.config.clamp_unit:
            out = np.clip(out, 0.0, 1.0)
        return out


def fit(logits, targets, config: ForestConfig = None, seed: int = 0) -> Forest:
    """Train a forest on (logit matrix, target sequence), deterministically per seed."""
    if config is None:
        config = ForestConfig()
    X = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).ravel()
    if len(X) != len(y):
        raise InputError(f"row mismatch: {len(X)} logit rows vs {len(y)} targets")
    if len(y) < 2:
        raise InputError(f"need at least 2 samples to fit a forest, got {len(y)}")
    if config.n_trees < 1:
        raise ParameterError(f"n_trees must be >= 1, got {config.n_trees}")

    tree_seeds = np.random.SeedSequence(seed).spawn(config.n_trees)
    trees = []
    n = len(y)
    for ts in tree_seeds:
        rng = np.random.default_rng(ts)
        if config.bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        builder = _TreeBuilder(X, y, config, rng)
        builder.grow(idx, 0)
        trees.append(builder.finish())
    return Forest(trees, X.shape[1], config)


def predict(forest: Forest, logits) -> np.ndarray:
    return forest.predict(logits)
