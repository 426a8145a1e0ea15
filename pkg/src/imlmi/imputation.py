"""Single imputation (mean, MissForest) and multiple imputation (MICE PMM / RF).

Every model-based imputer regresses a column on all other columns,
including the target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .models import RfParams, fit_ols, fit_rf
from .rng import Seed

__all__ = [
    "ImputerSpec", "MultipleImputation", "impute_mean", "impute_missforest",
    "impute_mice", "impute", "default_m", "KINDS",
]

log = logging.getLogger(__name__)

KINDS = ("none", "mean", "missforest", "mice_pmm", "mice_rf")


def default_m(proportion: float) -> int:
    """Number of imputations scaled with missingness: 0.1 -> 10, 0.2 -> 20, 0.4 -> 40."""
    return max(2, int(round(100 * proportion)))


@dataclass(frozen=True)
class ImputerSpec:
    kind: str = "mean"
    m: int | None = None  # MICE only; None scales with the missingness proportion
    n_iter: int = 5
    donors: int = 5
    n_trees: int | None = None  # None -> 100 for MissForest, 10 for MICE RF
    max_iter: int = 10
    min_node: int = 5
    mtry: int | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"unknown imputer {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.m is not None and self.m < 2:
            raise ValueError("MICE needs m >= 2")
        if self.donors < 1 or self.n_iter < 1 or self.max_iter < 1:
            raise ValueError("donors, n_iter and max_iter must be >= 1")

    @property
    def multiple(self) -> bool:
        return self.kind.startswith("mice")

    def rf_params(self) -> RfParams:
        default = 10 if self.kind == "mice_rf" else 100
        return RfParams(n_trees=self.n_trees or default, mtry=self.mtry, min_node=self.min_node)


@dataclass(frozen=True, eq=False)
class MultipleImputation:
    completed: tuple
    predictors: dict = field(default_factory=dict)
    warnings: tuple = ()

    @property
    def m(self) -> int:
        return len(self.completed)


def _visit_order(mask: np.ndarray) -> list[int]:
    counts = (~mask).sum(axis=0)
    cols = [j for j in range(mask.shape[1]) if counts[j] > 0]
    return sorted(cols, key=lambda j: (counts[j], j))


def _others(p: int, j: int) -> np.ndarray:
    return np.array([i for i in range(p) if i != j])


def impute_mean(d: Dataset) -> Dataset:
    """Fill each masked cell with its column's observed mean."""
    if d.complete:
        return d
    values = d.values.copy()
    for j in range(d.p):
        miss = ~d.mask[:, j]
        if miss.any():
            values[miss, j] = d.values[~miss, j].mean()
    out = d.with_values(values)
    out.meta["imputer"] = "mean"
    return out


def impute_missforest(d: Dataset, spec: ImputerSpec = ImputerSpec("missforest"),
                      seed: Seed = Seed(0)) -> Dataset:
    """Iterative random-forest imputation, started from the mean fill.

    Stops at the first sweep whose normalised change over the imputed
    cells exceeds the previous one and returns the previous iterate, or
    after ``spec.max_iter`` sweeps.
    """
    if d.complete:
        return d
    order = _visit_order(d.mask)
    missing = ~d.mask
    current = impute_mean(d).values.copy()
    params = spec.rf_params()
    prev_diff = np.inf
    iterations = 0
    for it in range(spec.max_iter):
        old = current.copy()
        for j in order:
            obs = d.mask[:, j]
            cols = _others(d.p, j)
            rf = fit_rf(current[obs][:, cols], current[obs, j], params,
                        seed.child("iter", it, "col", j).rng())
            current[~obs, j] = rf.predict(current[~obs][:, cols])
        iterations += 1
        diff = np.sum((current[missing] - old[missing]) ** 2) / np.sum(current[missing] ** 2)
        if diff > prev_diff:
            current = old
            break
        prev_diff = diff
    out = d.with_values(current)
    out.meta["imputer"] = "missforest"
    out.meta["iterations"] = iterations
    out.meta["predictors"] = {j: tuple(_others(d.p, j)) for j in order}
    return out


def _pmm_draw(A_obs, y_obs, A_mis, donors, rng):
    beta_hat = fit_ols(A_obs, y_obs)
    boot = rng.integers(0, y_obs.size, size=y_obs.size)
    beta_star = fit_ols(A_obs[boot], y_obs[boot])
    yhat_obs = beta_hat.predict(A_obs)
    yhat_mis = beta_star.predict(A_mis)
    dist = np.abs(yhat_mis[:, None] - yhat_obs[None, :])
    if donors < y_obs.size:
        pool = np.argpartition(dist, donors - 1, axis=1)[:, :donors]
    else:
        pool = np.broadcast_to(np.arange(y_obs.size), (yhat_mis.size, y_obs.size))
    pick = pool[np.arange(yhat_mis.size), rng.integers(0, pool.shape[1], size=yhat_mis.size)]
    return y_obs[pick]


def _rf_draw(A_obs, y_obs, A_mis, params, rng):
    rf = fit_rf(A_obs, y_obs, params, rng)
    leaves_mis = rf.apply(A_mis)
    tree_pick = rng.integers(0, len(rf.trees), size=A_mis.shape[0])
    out = np.empty(A_mis.shape[0])
    for t in np.unique(tree_pick):
        rows = np.flatnonzero(tree_pick == t)
        inbag = rf.inbag[t]
        inbag_leaf = rf.packed.apply(A_obs[inbag])[t]
        srt = np.argsort(inbag_leaf, kind="stable")
        leaf_sorted = inbag_leaf[srt]
        targets = leaves_mis[t, rows]
        start = np.searchsorted(leaf_sorted, targets, side="left")
        stop = np.searchsorted(leaf_sorted, targets, side="right")
        pos = start + (rng.random(rows.size) * (stop - start)).astype(np.int64)
        out[rows] = y_obs[inbag[srt[pos]]]
    return out


def impute_mice(d: Dataset, spec: ImputerSpec, seed: Seed, m: int | None = None) -> MultipleImputation:
    """``m`` independent chained-equation imputations (PMM or RF draws)."""
    if not spec.multiple:
        raise ValueError(f"{spec.kind!r} is not a MICE imputer")
    m = m or spec.m
    if m is None:
        raise ValueError("number of imputations m is not set")
    order = _visit_order(d.mask)
    predictors = {j: tuple(_others(d.p, j)) for j in order}
    warnings = []
    for j in order:
        n_obs = int(d.mask[:, j].sum())
        if spec.kind == "mice_pmm" and n_obs < spec.donors:
            warnings.append(f"column {d.col_names[j]!r}: donor pool reduced to {n_obs}")
    for w in warnings:
        log.warning(w)
    completed = []
    for c in range(m):
        rng = seed.child("chain", c).rng()
        X = d.values.copy()
        for j in order:
            miss = ~d.mask[:, j]
            X[miss, j] = rng.choice(d.values[~miss, j], size=int(miss.sum()))
        for _ in range(spec.n_iter):
            for j in order:
                obs = d.mask[:, j]
                cols = np.array(predictors[j])
                A_obs, y_obs, A_mis = X[obs][:, cols], X[obs, j], X[~obs][:, cols]
                if spec.kind == "mice_pmm":
                    X[~obs, j] = _pmm_draw(A_obs, y_obs, A_mis, spec.donors, rng)
                else:
                    X[~obs, j] = _rf_draw(A_obs, y_obs, A_mis, spec.rf_params(), rng)
        out = d.with_values(X)
        out.meta["imputer"] = spec.kind
        out.meta["chain"] = c
        completed.append(out)
    return MultipleImputation(tuple(completed), predictors, tuple(warnings))


def impute(d: Dataset, spec: ImputerSpec, seed: Seed, m: int | None = None) -> list[Dataset]:
    """Completed copies of ``d``: one for single imputation, ``m`` for MICE."""
    if spec.kind == "none":
        if not d.complete:
            raise ValueError("imputer 'none' requires complete data")
        return [d]
    if spec.kind == "mean":
        return [impute_mean(d)]
    if spec.kind == "missforest":
        return [impute_missforest(d, spec, seed)]
    return list(impute_mice(d, spec, seed, m).completed)
