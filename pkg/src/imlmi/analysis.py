"""Explanation confidence intervals on a real dataset, optionally after amputation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, ExplainSpec, LearnerSpec
from .data import Dataset
from .experiment import component_labels, explain_fits, pool_components
from .explain import make_grid
from .imputation import ImputerSpec, default_m, impute
from .missingness import MissSpec, ampute
from .rng import Seed
from .uncertainty import ResampleSpec

__all__ = ["ExplainReport", "explain_dataset"]


@dataclass
class ExplainReport:
    feature_names: tuple
    labels: list
    point: np.ndarray
    variance: np.ndarray
    df: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    grids: list
    mse: np.ndarray  # (m, k) test MSE per imputation and refit
    m: int
    c: float
    settings: dict = field(default_factory=dict)

    @property
    def mean_mse(self) -> float:
        return float(self.mse.mean())

    def table(self, explainer: str) -> list[dict]:
        rows = []
        for i, (e, comp) in enumerate(self.labels):
            if e != explainer:
                continue
            row = {"explainer": e, "component": comp}
            if e == "PD":
                name, g = comp.split("@")
                j = self.feature_names.index(name)
                row.update(feature=name, grid_index=int(g),
                           grid_value=float(self.grids[j].points[int(g)]))
            else:
                row["feature"] = comp
            row.update(point=float(self.point[i]), lo=float(self.lo[i]), hi=float(self.hi[i]),
                       variance=float(self.variance[i]), df=float(self.df[i]))
            rows.append(row)
        return rows

    def get(self, explainer: str, component: str) -> dict:
        for row in self.table(explainer):
            if row["component"] == component:
                return row
        raise KeyError((explainer, component))


def explain_dataset(d: Dataset, imputer: ImputerSpec = ImputerSpec("none"),
                    learner: LearnerSpec = LearnerSpec(),
                    resample: ResampleSpec = ResampleSpec("bootstrap", 15),
                    explain: ExplainSpec = ExplainSpec(), explainers=("PD", "PFI", "SHAP"),
                    adjusted: bool = True, alpha: float = 0.05, seed: Seed = Seed(0),
                    amputation: MissSpec | None = None, m: int | None = None) -> ExplainReport:
    """Learner-level PD / PFI / SHAP estimates with confidence intervals.

    PD grids span each feature's observed range before amputation.  With a
    MICE imputer the ``m`` completed datasets are pooled by Rubin's rules.
    """
    feats = d.feature_idx
    grids = [make_grid(d.values[d.mask[:, j], j], explain.grid_size, a)
             for a, j in enumerate(feats)]
    data = d
    if amputation is not None:
        data = ampute(d, amputation, seed.child("ampute"))
    if not data.complete and imputer.kind == "none":
        raise ValueError("data has missing values; choose an imputer")
    if imputer.multiple and m is None:
        m = imputer.m
        if m is None:
            rate = float((~data.mask[:, feats]).mean()) if amputation is None \
                else amputation.proportion
            m = default_m(rate)
    completed = impute(data, imputer, seed.child("impute"), m=m)
    # carries only the learner and explainer settings used by explain_fits
    cfg = ExperimentConfig(n=d.n, learner=learner, explainers=tuple(explainers),
                           explain=explain, resample=resample, alpha=alpha)
    vals, ratios, mses = [], [], []
    for i, ds in enumerate(completed):
        v, q, e = explain_fits(ds, cfg, seed.child("fit", i), grids, resample)
        vals.append(v)
        ratios.append(q)
        mses.append(e)
    vals = np.array(vals)
    c = 0.0
    if adjusted:
        if resample.strategy == "subsample":
            n_train = int(np.floor(resample.train_fraction * d.n))
            c = (d.n - n_train) / n_train
        else:
            c = float(np.mean(ratios))
    point, var, df, lo, hi = pool_components(vals, c, alpha)
    names = tuple(d.col_names[j] for j in feats)
    labels = component_labels(names, cfg.explainers, explain.grid_size)
    return ExplainReport(names, labels, point, var, df, lo, hi, grids, np.array(mses),
                         len(completed), c,
                         {"imputer": imputer.kind, "amputation": None if amputation is None
                          else [amputation.mechanism, amputation.proportion]})
