"""Random forest of CART regression trees on bootstrap samples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .tree import PackedTrees, RegressionTree, empty_arrays


@dataclass(frozen=True)
class RfParams:
    n_trees: int = 100
    mtry: int | None = None  # None -> ceil(p / 3)
    min_node: int = 5
    max_depth: int | None = None

    def __post_init__(self):
        if self.n_trees < 1 or self.min_node < 1:
            raise ValueError("n_trees and min_node must be >= 1")


@dataclass(frozen=True, eq=False)
class RandomForest:
    trees: tuple
    inbag: tuple  # per tree: training row indices of its bootstrap sample
    mtry: int
    min_node: int
    n_features: int

    @cached_property
    def packed(self) -> PackedTrees:
        return PackedTrees.from_trees(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        return self.packed.predict_sum(X) / len(self.trees)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self.packed.apply(X)

    def oob_predictions(self, X: np.ndarray) -> np.ndarray:
        """Mean over trees not trained on each row; NaN where a row is in every bag."""
        n = X.shape[0]
        leaves = self.apply(X)
        total = np.zeros(n)
        count = np.zeros(n)
        for t, tree in enumerate(self.trees):
            oob = np.ones(n, bool)
            oob[self.inbag[t]] = False
            total[oob] += tree.value[leaves[t, oob]]
            count[oob] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            return total / count


def fit_rf(X: np.ndarray, y: np.ndarray, params: RfParams = RfParams(),
           rng: np.random.Generator | None = None) -> RandomForest:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if n < params.min_node:
        raise ValueError(f"need at least min_node={params.min_node} rows")
    rng = np.random.default_rng() if rng is None else rng
    mtry = min(p, params.mtry if params.mtry else math.ceil(p / 3))
    max_depth = -1 if params.max_depth is None else params.max_depth
    size = 2 * n + 1
    trees, inbag = [], []
    for _ in range(params.n_trees):
        rows = np.sort(rng.integers(0, n, size=n))
        keys = rng.random((size, p))
        feature, threshold, left, right, value, cover = empty_arrays(size)
        k = _kernels.grow_cart_tree(X, y, rows, mtry, params.min_node, max_depth, keys,
                                    feature, threshold, left, right, value, cover)
        trees.append(RegressionTree(feature[:k].copy(), threshold[:k].copy(),
                                    left[:k].copy(), right[:k].copy(), value[:k].copy(),
                                    cover[:k].copy()))
        inbag.append(rows)
    return RandomForest(tuple(trees), tuple(inbag), mtry, params.min_node, p)
