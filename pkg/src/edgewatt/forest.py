"""Random forest regression, built from scratch on numpy.

Trees are binary CART regressors: internal nodes split on (feature, threshold)
chosen to minimize the summed squared error of the two children, searched over
a random subset of ceil(p/3) features; leaves predict the mean target of the
rows that reach them. Each tree trains on a bootstrap resample (with
replacement, same size as the input) drawn from its own RNG, seeded from
(master_seed, tree_index), so training is reproducible independent of any
parallel scheduling. Forest prediction is the mean over trees in index order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_N_TREES = 100
DEFAULT_MAX_DEPTH = 16
DEFAULT_MIN_SAMPLES_LEAF = 2


class ForestError(ValueError):
    pass


def derived_seed(*parts) -> int:
    """Stable cross-platform seed from structured parts."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class Hyperparams:
    n_trees: int = DEFAULT_N_TREES
    max_depth: int = DEFAULT_MAX_DEPTH
    min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF

    def validate(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ForestError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ForestError("min_samples_leaf must be >= 1")


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @staticmethod
    def from_dict(obj: dict) -> "TreeNode":
        if "value" in obj:
            return TreeNode(value=float(obj["value"]))
        return TreeNode(feature=int(obj["feature"]),
                        threshold=float(obj["threshold"]),
                        left=TreeNode.from_dict(obj["left"]),
                        right=TreeNode.from_dict(obj["right"]))


@dataclass
class RegressionTree:
    root: TreeNode
    n_features: int

    def predict_one(self, x) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in X])


@dataclass
class RegressionForest:
    trees: list[RegressionTree] = field(default_factory=list)
    n_features: int = 0
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    seed: int = 0

    def predict_one(self, x) -> float:
        total = math.fsum(t.predict_one(x) for t in self.trees)
        return total / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in X])


def _best_split(X, y, feat_indices, min_leaf):
    """Best (feature, threshold, sse) over the candidate features, or None."""
    n = len(y)
    best = None
    for f in feat_indices:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total_sum = csum[-1]
        total_sq = csq[-1]
        idx = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        if min_leaf > 1:
            valid &= (idx >= min_leaf) & (idx <= n - min_leaf)
        else:
            valid &= (idx >= 1) & (idx <= n - 1)
        if not valid.any():
            continue
        k = idx[valid]
        left_sum = csum[k - 1]
        left_sq = csq[k - 1]
        sse = (left_sq - left_sum * left_sum / k) + \
              ((total_sq - left_sq) - (total_sum - left_sum) ** 2 / (n - k))
        j = int(np.argmin(sse))
        if best is None or sse[j] < best[2]:
            split_at = int(k[j])
            thr = (xs[split_at - 1] + xs[split_at]) / 2.0
            best = (int(f), float(thr), float(sse[j]))
    return best


def _build(X, y, depth, hp, rng) -> TreeNode:
    n, p = X.shape
    mean = float(np.mean(y))
    if depth >= hp.max_depth or n < 2 * hp.min_samples_leaf or np.all(y == y[0]):
        return TreeNode(value=mean)
    k = math.ceil(p / 3)
    feats = np.sort(rng.choice(p, size=k, replace=False))
    best = _best_split(X, y, feats, hp.min_samples_leaf)
    if best is None:
        return TreeNode(value=mean)
    f, thr, _ = best
    mask = X[:, f] <= thr
    return TreeNode(feature=f, threshold=thr,
                    left=_build(X[mask], y[mask], depth + 1, hp, rng),
                    right=_build(X[~mask], y[~mask], depth + 1, hp, rng))


def train_tree(X: np.ndarray, y: np.ndarray, hp: Hyperparams, seed: int) -> RegressionTree:
    rng = np.random.default_rng(seed)
    n = len(y)
    boot = rng.integers(0, n, size=n)
    root = _build(X[boot], y[boot], 0, hp, rng)
    return RegressionTree(root=root, n_features=X.shape[1])


def train_forest(rows, targets, hp: Hyperparams | None = None,
                 seed: int = 0, threads: int = 1) -> RegressionForest:
    """Fit a forest on feature rows and positive targets.

    rows: sequence of equal-length numeric feature vectors. Each tree's seed
    is derived from the master seed and the tree index, and results are
    collected in index order, so the thread count never changes the model.
    """
    hp = hp or Hyperparams()
    hp.validate()
    if threads < 1:
        raise ForestError("threads must be >= 1")
    X = np.asarray(rows, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ForestError("training set is empty")
    if len(X) != len(y):
        raise ForestError(f"{len(X)} feature rows but {len(y)} targets")
    if len(X) < 2:
        raise ForestError("need at least 2 training rows")
    if np.any(y <= 0):
        raise ForestError("targets must be strictly positive")
    seeds = [derived_seed(seed, "tree", i) for i in range(hp.n_trees)]
    if threads == 1:
        trees = [train_tree(X, y, hp, s) for s in seeds]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda s: train_tree(X, y, hp, s), seeds))
    return RegressionForest(trees=trees, n_features=X.shape[1],
                            hyperparams=hp, seed=seed)
