"""Ordinary least squares with a QR solve and ridge fallback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

RANK_TOL = 1e-10
RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    rank_deficient: bool = False

    @property
    def n_features(self) -> int:
        return self.coefficients.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        return self.intercept + X @ self.coefficients


def fit_ols(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """Least squares fit with intercept.

    Columns are centred before the QR factorisation.  If the centred design
    is numerically rank deficient a tiny ridge penalty is added and the
    result is flagged ``rank_deficient``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more rows than features, got n={n}, p={p}")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    Q, R = np.linalg.qr(Xc)
    diag = np.abs(np.diag(R))
    scale = max(diag.max(initial=0.0), np.sqrt(n))
    deficient = bool((diag <= RANK_TOL * scale).any())
    if deficient:
        A = Xc.T @ Xc
        lam = RIDGE * max(np.trace(A) / p, 1.0)
        beta = np.linalg.solve(A + lam * np.eye(p), Xc.T @ yc)
    else:
        beta = solve_triangular(R, Q.T @ yc)
    return LinearModel(float(y_mean - x_mean @ beta), beta, deficient)
