"""Depth-limited gradient-boosted regression trees (squared loss)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .tree import LEAF, PackedTrees, RegressionTree


@dataclass(frozen=True)
class GbtParams:
    max_rounds: int = 20
    max_depth: int = 2
    learning_rate: float = 0.3
    reg_lambda: float = 1.0

    def __post_init__(self):
        if self.max_rounds < 0 or self.max_depth < 1:
            raise ValueError("max_rounds must be >= 0 and max_depth >= 1")
        if self.learning_rate <= 0 or self.reg_lambda < 0:
            raise ValueError("learning_rate must be > 0 and reg_lambda >= 0")


@dataclass(frozen=True, eq=False)
class GbtModel:
    base_score: float
    learning_rate: float
    reg_lambda: float
    trees: tuple
    n_features: int

    @cached_property
    def packed(self) -> PackedTrees:
        return PackedTrees.from_trees(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        if not self.trees:
            return np.full(X.shape[0], self.base_score)
        return self.base_score + self.learning_rate * self.packed.predict_sum(X)

    def staged_mse(self, X, y) -> np.ndarray:
        """Training-style MSE after 0, 1, ..., len(trees) rounds."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        pred = np.full(X.shape[0], self.base_score)
        out = [np.mean((y - pred) ** 2)]
        for t in self.trees:
            pred = pred + self.learning_rate * PackedTrees.from_trees([t]).predict_sum(X)
            out.append(np.mean((y - pred) ** 2))
        return np.array(out)


def fit_gbt(X: np.ndarray, y: np.ndarray, params: GbtParams = GbtParams()) -> GbtModel:
    """Boost ``params.max_rounds`` trees on squared loss, starting from mean(y).

    Splits maximise the second-order gain with hessian 1 per row; leaf
    weights are ``-G / (H + lambda)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise ValueError("need at least two rows")
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    R = params.max_rounds
    size = 2 ** (params.max_depth + 1) - 1
    feature = np.full((R, size), LEAF, np.int64)
    threshold, value, cover = np.zeros((R, size)), np.zeros((R, size)), np.zeros((R, size))
    left, right = np.zeros((R, size), np.int64), np.zeros((R, size), np.int64)
    gain, gsum, hsum = np.zeros((R, size)), np.zeros((R, size)), np.zeros((R, size))
    n_nodes = np.zeros(R, np.int64)
    base = _kernels.boost(X, order, y, R, params.max_depth, params.reg_lambda,
                          params.learning_rate, feature, threshold, left, right, value, cover,
                          gain, gsum, hsum, n_nodes)
    trees = tuple(
        RegressionTree(feature[r, :k], threshold[r, :k], left[r, :k], right[r, :k],
                       value[r, :k], cover[r, :k], gain[r, :k], gsum[r, :k], hsum[r, :k])
        for r, k in enumerate(n_nodes)
    )
    model = GbtModel(float(base), params.learning_rate, params.reg_lambda, trees, p)
    if R:
        # nodes past n_nodes stay leaves and are never reached
        model.__dict__["packed"] = PackedTrees(feature, threshold, left, right, value, cover,
                                               n_nodes)
    return model
