"""Partial dependence, permutation feature importance and SHAP importance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _treeshap
from .models import GbtModel, LinearModel, RandomForest

__all__ = [
    "Grid", "PdCurve", "ImportanceVector", "ShapRow",
    "make_grid", "partial_dependence", "partial_dependence_all",
    "pfi", "pfi_all", "shap_linear", "treeshap", "tree_value_function",
    "shap_bruteforce", "shap_values", "shap_global",
]

MAX_BRUTEFORCE_P = 12


@dataclass(frozen=True, eq=False)
class Grid:
    feature: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size < 2 or np.any(np.diff(pts) <= 0):
            raise ValueError("grid needs >= 2 strictly increasing points")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True, eq=False)
class PdCurve:
    grid: Grid
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    scores: np.ndarray
    kind: str  # "PFI" or "SHAP_GLOBAL"


@dataclass(frozen=True, eq=False)
class ShapRow:
    phi: np.ndarray
    expected_value: float


def make_grid(train_values, G: int = 20, feature: int = 0) -> Grid:
    """``G`` equidistant points from min to max of ``train_values``."""
    v = np.asarray(train_values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if not hi > lo:
        raise ValueError("cannot build a grid on a constant column")
    pts = np.linspace(lo, hi, G)
    pts[0], pts[-1] = lo, hi
    return Grid(feature, pts)


def partial_dependence_all(model, X: np.ndarray, grids) -> np.ndarray:
    """PD values for several grids at once, shape (len(grids), G).

    All grids must share the same length.  Predictions are made in a single
    batch of ``len(grids) * G * n`` rows.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    G = grids[0].points.size
    if isinstance(model, (GbtModel, RandomForest)) and model.trees:
        packed, scale, base = _ensemble(model)
        return np.array([base + scale * packed.pd_sum(X, g.feature, g.points) / n
                         for g in grids])
    batch = np.tile(X, (len(grids) * G, 1))
    for a, grid in enumerate(grids):
        block = batch[a * G * n:(a + 1) * G * n]
        block[:, grid.feature] = np.repeat(grid.points, n)
    pred = model.predict(batch)
    return pred.reshape(len(grids), G, n).mean(axis=2)


def partial_dependence(model, X: np.ndarray, grid: Grid) -> PdCurve:
    return PdCurve(grid, partial_dependence_all(model, X, [grid])[0])


def _mse(y, pred):
    r = y - pred
    return float(r @ r) / r.size


def pfi_all(model, X: np.ndarray, y: np.ndarray, n_perm: int = 5,
            rng: np.random.Generator | None = None, features=None) -> np.ndarray:
    """Mean increase in MSE when each feature column is permuted.

    Permutations are drawn feature by feature, ``n_perm`` per feature.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    features = list(range(p)) if features is None else list(features)
    rng = np.random.default_rng() if rng is None else rng
    base = _mse(y, model.predict(X))
    batch = np.tile(X, (len(features) * n_perm, 1))
    for a, j in enumerate(features):
        for k in range(n_perm):
            s = (a * n_perm + k) * n
            batch[s:s + n, j] = X[rng.permutation(n), j]
    pred = model.predict(batch).reshape(len(features), n_perm, n)
    err = ((pred - y) ** 2).mean(axis=2)
    return err.mean(axis=1) - base


def pfi(model, X, y, feature: int, n_perm: int = 5, rng=None, permutations=None) -> float:
    """PFI score of one feature; ``permutations`` overrides the random draws."""
    if permutations is None:
        return float(pfi_all(model, X, y, n_perm, rng, features=[feature])[0])
    X = np.asarray(X, dtype=np.float64)
    base = _mse(y, model.predict(X))
    scores = []
    for perm in permutations:
        Xp = X.copy()
        Xp[:, feature] = X[np.asarray(perm), feature]
        scores.append(_mse(y, model.predict(Xp)) - base)
    return float(np.mean(scores))


def shap_linear(model: LinearModel, x: np.ndarray, background: np.ndarray) -> ShapRow:
    """Exact SHAP values of a linear model under feature independence."""
    means = np.asarray(background, dtype=np.float64).mean(axis=0)
    phi = model.coefficients * (np.asarray(x, dtype=np.float64) - means)
    return ShapRow(phi, float(model.intercept + means @ model.coefficients))


def _ensemble(model):
    if isinstance(model, GbtModel):
        return model.packed, model.learning_rate, model.base_score
    if isinstance(model, RandomForest):
        return model.packed, 1.0 / len(model.trees), 0.0
    raise TypeError(f"tree SHAP needs a tree ensemble, got {type(model).__name__}")


def _tree_shap_matrix(model, X: np.ndarray):
    packed, scale, base = _ensemble(model)
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    trees = getattr(model, "trees")
    expected = base + scale * sum(t.expectation() for t in trees)
    if not trees:
        return np.zeros(X.shape), expected
    depth = max(t.depth() for t in trees)
    phi = _treeshap.tree_shap(X, packed.feature, packed.threshold, packed.left, packed.right,
                              packed.value, packed.cover, depth)
    return scale * phi, expected


def treeshap(model, x: np.ndarray) -> ShapRow:
    """Path-dependent TreeSHAP values of one instance."""
    phi, expected = _tree_shap_matrix(model, np.asarray(x)[None, :])
    return ShapRow(phi[0], float(expected))


def tree_value_function(model, x: np.ndarray):
    """Cover-weighted conditional expectation ``v(S)`` of a tree ensemble at ``x``.

    Features in the coalition follow ``x``; the others average the two
    children by cover.  This is the game whose Shapley values TreeSHAP returns.
    """
    _, scale, base = _ensemble(model)
    x = np.asarray(x, dtype=np.float64)

    def tree_value(tree, node, S):
        f = tree.feature[node]
        if f < 0:
            return tree.value[node]
        l, r = tree.left[node], tree.right[node]
        if f in S:
            return tree_value(tree, l if x[f] < tree.threshold[node] else r, S)
        wl, wr = tree.cover[l], tree.cover[r]
        return (wl * tree_value(tree, l, S) + wr * tree_value(tree, r, S)) / (wl + wr)

    def v(S):
        S = frozenset(S)
        return base + scale * sum(tree_value(t, 0, S) for t in model.trees)

    return v


def shap_bruteforce(value_fn, p: int) -> np.ndarray:
    """Shapley values by enumerating all ``2**p`` coalitions."""
    if p > MAX_BRUTEFORCE_P:
        raise ValueError(f"p={p} is too large for exhaustive enumeration")
    cache = {}

    def v(S):
        if S not in cache:
            cache[S] = float(value_fn(S))
        return cache[S]

    fact = [math.factorial(k) for k in range(p + 1)]
    phi = np.zeros(p)
    for j in range(p):
        others = [i for i in range(p) if i != j]
        for size in range(p):
            w = fact[size] * fact[p - size - 1] / fact[p]
            for S in itertools.combinations(others, size):
                S = frozenset(S)
                phi[j] += w * (v(S | {j}) - v(S))
    return phi


def shap_values(model, X: np.ndarray, background: np.ndarray | None = None):
    """SHAP matrix (n, p) and expected value for a linear or tree model."""
    X = np.asarray(X, dtype=np.float64)
    if isinstance(model, LinearModel):
        bg = X if background is None else np.asarray(background, dtype=np.float64)
        means = bg.mean(axis=0)
        return (X - means) * model.coefficients, float(model.intercept + means @ model.coefficients)
    return _tree_shap_matrix(model, X)


def shap_global(model, X: np.ndarray, background: np.ndarray | None = None) -> ImportanceVector:
    """Mean absolute SHAP value per feature; the linear background defaults to ``X``."""
    phi, _ = shap_values(model, X, background)
    return ImportanceVector(np.abs(phi).mean(axis=0), "SHAP_GLOBAL")
