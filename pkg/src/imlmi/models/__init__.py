"""Trainable predictors: OLS, boosted trees and random forests."""

from .forest import RandomForest, RfParams, fit_rf
from .gbt import GbtModel, GbtParams, fit_gbt
from .linear import LinearModel, fit_ols
from .tree import PackedTrees, RegressionTree

__all__ = [
    "LinearModel", "fit_ols",
    "GbtModel", "GbtParams", "fit_gbt",
    "RandomForest", "RfParams", "fit_rf",
    "RegressionTree", "PackedTrees",
    "predict",
]


def predict(model, X):
    """Predictions of any fitted model on a fully observed matrix ``X``."""
    return model.predict(X)
