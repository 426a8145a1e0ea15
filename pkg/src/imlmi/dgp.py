"""Synthetic data-generating processes with Toeplitz-correlated Gaussian features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .rng import Seed

__all__ = ["DgpSpec", "toeplitz_sigma", "sample", "response"]

KINDS = ("linear", "nonlinear")


@dataclass(frozen=True)
class DgpSpec:
    kind: str = "linear"
    p: int = 4
    rho: float = 0.5
    noise_sd: float = 1.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"unknown DGP kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        min_p = 2 if kind == "linear" else 4
        if self.p < min_p:
            raise ValueError(f"{kind} DGP needs p >= {min_p}")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


def toeplitz_sigma(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return np.power(float(rho), np.abs(idx[:, None] - idx[None, :]))


def response(kind: str, X: np.ndarray) -> np.ndarray:
    """Noise-free response for feature matrix ``X``."""
    if kind == "linear":
        return X[:, 0] - X[:, 1]
    # sqrt(1 - x2) is clamped at 0 for x2 > 1
    return (X[:, 0] - np.sqrt(np.maximum(1.0 - X[:, 1], 0.0))
            + X[:, 2] * X[:, 3] + (X[:, 3] / 10.0) ** 2)


def sample(spec: DgpSpec, n: int, seed: Seed) -> Dataset:
    """Draw ``n`` complete rows; columns are X1..Xp followed by the target Y."""
    rng = seed.rng()
    L = np.linalg.cholesky(toeplitz_sigma(spec.p, spec.rho))
    X = rng.standard_normal((n, spec.p)) @ L.T
    y = response(spec.kind, X) + spec.noise_sd * rng.standard_normal(n)
    values = np.column_stack([X, y])
    names = tuple(f"X{j + 1}" for j in range(spec.p)) + ("Y",)
    return Dataset(values, np.ones(values.shape, bool), names, spec.p)
