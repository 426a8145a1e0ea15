"""Exact-count MCAR / MAR / MNAR amputation with rank weighting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import Dataset
from .rng import Seed

__all__ = ["MissSpec", "MarAssignment", "mar_assignment", "ampute", "n_missing"]

MECHANISMS = ("MCAR", "MAR", "MNAR")


@dataclass(frozen=True)
class MissSpec:
    mechanism: str = "MCAR"
    proportion: float = 0.1

    def __post_init__(self):
        mech = str(self.mechanism).upper()
        if mech not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        object.__setattr__(self, "mechanism", mech)
        if not 0 <= self.proportion < 1:
            raise ValueError("proportion must lie in [0, 1)")


@dataclass(frozen=True)
class MarAssignment:
    control: tuple
    target: tuple
    pairing: dict  # target column -> control column


def n_missing(n: int, proportion: float) -> int:
    """round(n * proportion), halves rounded up."""
    return int(math.floor(n * proportion + 0.5))


def mar_assignment(p: int, seed: Seed) -> MarAssignment:
    """Split ``p`` feature positions into a control half (ceil(p/2)) and a target half.

    Positions are 0..p-1 within the feature columns, not Dataset column indices.
    """
    if p < 2:
        raise ValueError("MAR assignment needs at least two features")
    rng = seed.rng()
    perm = rng.permutation(p)
    n_control = math.ceil(p / 2)
    control = tuple(sorted(int(j) for j in perm[:n_control]))
    target = tuple(sorted(int(j) for j in perm[n_control:]))
    pairing = {t: int(control[rng.integers(len(control))]) for t in target}
    return MarAssignment(control, target, pairing)


def _rank_weighted_rows(control: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # larger control value -> larger rank -> more likely to be deleted
    ranks = rankdata(control, method="average")
    return rng.choice(control.size, size=k, replace=False, p=ranks / ranks.sum())


def ampute(d: Dataset, spec: MissSpec, seed: Seed) -> Dataset:
    """Mask exactly ``round(n * proportion)`` cells in each amputed feature column.

    The target column is never amputed.  Only the mask changes; a
    proportion that rounds to zero cells returns an unchanged copy.
    """
    if not d.complete:
        raise ValueError("ampute expects a fully observed Dataset")
    k = n_missing(d.n, spec.proportion)
    if k > d.n - 1:
        raise ValueError("proportion too large; every column needs an observed value")
    feats = d.feature_idx
    mask = np.ones_like(d.mask)
    rng = seed.child("rows").rng()
    info = {"mechanism": spec.mechanism, "proportion": spec.proportion, "n_missing": k}
    if k == 0:
        pass
    elif spec.mechanism == "MCAR":
        for j in feats:
            mask[rng.choice(d.n, size=k, replace=False), j] = False
    elif spec.mechanism == "MNAR":
        for j in feats:
            mask[_rank_weighted_rows(d.values[:, j], k, rng), j] = False
    else:
        assign = mar_assignment(len(feats), seed.child("mar"))
        for t in assign.target:
            ctrl = feats[assign.pairing[t]]
            mask[_rank_weighted_rows(d.values[:, ctrl], k, rng), feats[t]] = False
        # Dataset column indices
        info["control"] = [int(feats[c]) for c in assign.control]
        info["target"] = [int(feats[t]) for t in assign.target]
        info["pairing"] = [int(feats[assign.pairing[t]]) for t in assign.target]
    out = d.with_mask(mask)
    out.meta["amputation"] = info
    return out
