"""Flat-array regression trees and packed ensembles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

LEAF = _kernels.LEAF


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """A binary tree stored as parallel node arrays (node 0 is the root).

    ``cover`` is the number of training rows reaching each node.  Boosting
    trees additionally carry per-node gradient sums and split gains.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray | None = None
    grad_sum: np.ndarray | None = None
    hess_sum: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] == LEAF:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)

    def expectation(self, node: int = 0) -> float:
        """Cover-weighted mean of the leaves under ``node``."""
        if self.feature[node] == LEAF:
            return float(self.value[node])
        l, r = self.left[node], self.right[node]
        wl, wr = self.cover[l], self.cover[r]
        return float((wl * self.expectation(l) + wr * self.expectation(r)) / (wl + wr))


@dataclass(frozen=True, eq=False)
class PackedTrees:
    """Trees padded to a common node count, for the numba kernels."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    n_nodes: np.ndarray = field(default=None)

    @classmethod
    def from_trees(cls, trees) -> "PackedTrees":
        T = len(trees)
        M = max([t.n_nodes for t in trees], default=1)
        feature = np.full((T, M), LEAF, np.int64)
        threshold = np.zeros((T, M))
        left = np.zeros((T, M), np.int64)
        right = np.zeros((T, M), np.int64)
        value = np.zeros((T, M))
        cover = np.zeros((T, M))
        for i, t in enumerate(trees):
            k = t.n_nodes
            feature[i, :k] = t.feature
            threshold[i, :k] = t.threshold
            left[i, :k] = t.left
            right[i, :k] = t.right
            value[i, :k] = t.value
            cover[i, :k] = t.cover
        return cls(feature, threshold, left, right, value, cover,
                   np.array([t.n_nodes for t in trees], np.int64))

    @property
    def n_trees(self) -> int:
        return self.feature.shape[0]

    def predict_sum(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if self.n_trees == 0:
            return np.zeros(X.shape[0])
        return _kernels.predict_ensemble(self.feature, self.threshold, self.left, self.right,
                                         self.value, X)

    def pd_sum(self, X: np.ndarray, feature: int, grid: np.ndarray) -> np.ndarray:
        """Per grid point, the sum over rows and trees of the leaf values."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        grid = np.ascontiguousarray(grid, dtype=np.float64)
        if self.n_trees == 0:
            return np.zeros(grid.size)
        return _kernels.pd_ensemble(self.feature, self.threshold, self.left, self.right,
                                    self.value, X, feature, grid)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _kernels.apply_ensemble(self.feature, self.threshold, self.left, self.right, X)


def empty_arrays(size: int):
    return (np.full(size, LEAF, np.int64), np.zeros(size), np.zeros(size, np.int64),
            np.zeros(size, np.int64), np.zeros(size), np.zeros(size))
