"""Resampling plans, corrected learner variance, t intervals and Rubin's rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .rng import Seed

__all__ = [
    "ResampleSpec", "LearnerEstimate", "PooledEstimate", "resample_indices",
    "learner_mean", "learner_variance", "learner_estimate", "correction_c", "ci_t",
    "rubin_pool", "mi_learner_estimate", "DF_CAP",
]

DF_CAP = 1e6
STRATEGIES = ("bootstrap", "subsample")
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class ResampleSpec:
    strategy: str = "bootstrap"
    k: int = 20
    refits_used: int | None = None  # None -> k
    train_fraction: float = 0.632

    def __post_init__(self):
        strategy = str(self.strategy).lower()
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        object.__setattr__(self, "strategy", strategy)
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.refits_used is not None and not 2 <= self.refits_used <= self.k:
            raise ValueError("refits_used must lie in [2, k]")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")

    @property
    def k_used(self) -> int:
        return self.k if self.refits_used is None else self.refits_used


@dataclass(frozen=True)
class LearnerEstimate:
    mean: float
    variance: float
    k_used: int
    c: float


@dataclass(frozen=True)
class PooledEstimate:
    point: float
    variance: float
    df: float
    ci: tuple
    alpha: float
    within: float | None = None  # W; None for single imputation
    between: float | None = None  # B

    @property
    def width(self) -> float:
        return self.ci[1] - self.ci[0]


def resample_indices(n: int, spec: ResampleSpec, seed: Seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """``spec.k`` (train, test) index pairs; each pair has its own child stream.

    Bootstrap tests on the out-of-bag rows, subsampling on the complement.
    """
    if n < 10:
        raise ValueError("resampling needs n >= 10")
    pairs = []
    for j in range(spec.k):
        rng = seed.child("resample", j).rng()
        for _ in range(MAX_REDRAWS):
            if spec.strategy == "bootstrap":
                train = rng.integers(0, n, size=n)
                inbag = np.zeros(n, bool)
                inbag[train] = True
                test = np.flatnonzero(~inbag)
            else:
                n_train = int(math.floor(spec.train_fraction * n))
                perm = rng.permutation(n)
                train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
            if test.size:
                break
        else:
            raise RuntimeError("could not draw a resample with a non-empty test set")
        pairs.append((train, test))
    return pairs


def learner_mean(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 1:
        raise ValueError("need at least one value")
    return float(values.mean())


def learner_variance(values, c: float = 0.0) -> float:
    """(1/k + c) * sample variance of the k refit explanations."""
    values = np.asarray(values, dtype=np.float64)
    k = values.size
    if k < 2:
        raise ValueError("learner variance needs k >= 2")
    if c < 0:
        raise ValueError("correction term must be non-negative")
    dev = values - values.mean()
    return float((1.0 / k + c) * (dev @ dev) / (k - 1))


def learner_estimate(values, c: float = 0.0) -> LearnerEstimate:
    values = np.asarray(values, dtype=np.float64)
    return LearnerEstimate(learner_mean(values), learner_variance(values, c), values.size, c)


def correction_c(spec: ResampleSpec, n: int, adjusted: bool = True, pairs=None) -> float:
    """Correction term n_test / n_train; 0 when unadjusted.

    For the bootstrap the realised mean out-of-bag size over the first
    ``spec.k_used`` ``pairs`` is used.
    """
    if not adjusted:
        return 0.0
    if spec.strategy == "subsample":
        n_train = int(math.floor(spec.train_fraction * n))
        return (n - n_train) / n_train
    if pairs is None:
        raise ValueError("bootstrap correction needs the realised resamples")
    return float(np.mean([test.size / train.size for train, test in pairs[:spec.k_used]]))


def t_quantile(q: float, df: float) -> float:
    return float(stats.t.ppf(q, df))


def ci_t(mean: float, variance: float, df: float, alpha: float = 0.05) -> tuple[float, float]:
    if variance < 0 or df <= 0 or not 0 < alpha < 1:
        raise ValueError("need variance >= 0, df > 0 and 0 < alpha < 1")
    half = t_quantile(1 - alpha / 2, df) * math.sqrt(variance)
    return (mean - half, mean + half)


def rubin_pool(points, variances, alpha: float = 0.05) -> PooledEstimate:
    """Combine ``m`` estimates with Rubin's rules (classical degrees of freedom)."""
    points = np.asarray(points, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    m = points.size
    if m < 2 or variances.size != m:
        raise ValueError("need m >= 2 points with matching variances")
    q = float(points.mean())
    W = float(variances.mean())
    B = float(points.var(ddof=1))
    inflated = (1 + 1 / m) * B
    T = W + inflated
    # W / inflated >= sqrt(DF_CAP) already implies the cap; avoids overflow for tiny B
    if inflated <= 0 or W >= math.sqrt(DF_CAP) * inflated:
        df = DF_CAP
    else:
        df = min(DF_CAP, (m - 1) * (1 + W / inflated) ** 2)
    return PooledEstimate(q, T, df, ci_t(q, T, df, alpha), alpha, W, B)


def mi_learner_estimate(values, c: float = 0.0, alpha: float = 0.05) -> PooledEstimate:
    """Pool an (m imputations x k refits) matrix of explanations.

    With a single row the estimate is the learner mean with a ``k - 1`` df
    t interval.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("expected an m x k matrix")
    m, k = values.shape
    if m == 1:
        est = learner_estimate(values[0], c)
        return PooledEstimate(est.mean, est.variance, k - 1,
                              ci_t(est.mean, est.variance, k - 1, alpha), alpha)
    points = values.mean(axis=1)
    dev = values - points[:, None]
    var = (1.0 / k + c) * (dev ** 2).sum(axis=1) / (k - 1)
    return rubin_pool(points, var, alpha)
