"""Simulation harness: replications, ground truth, coverage / width / bias."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import dgp as dgp_mod
from .config import ExperimentConfig, config_hash
from .data import Dataset
from .explain import Grid, partial_dependence_all, pfi_all, shap_global
from .imputation import impute
from .missingness import ampute
from .models import fit_gbt, fit_ols
from .rng import Seed
from .uncertainty import DF_CAP, resample_indices

__all__ = [
    "GroundTruth", "Replication", "MetricsRow", "component_labels", "simulation_grids",
    "fit_learner", "explain_fits", "run_replication", "compute_ground_truth",
    "pool_components", "evaluate", "run_study", "StudyResult", "RESULT_COLUMNS",
    "save_ground_truth", "load_ground_truth", "GroundTruthMismatch",
]

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("setting_id", "dgp", "mechanism", "proportion", "imputer", "learner",
                  "explainer", "strategy", "adjusted", "refits_used", "component",
                  "coverage", "avg_width", "bias", "n_completed")
AGGREGATE = "mean"


class GroundTruthMismatch(ValueError):
    """A cached ground truth was computed for a different configuration."""


def simulation_grids(config: ExperimentConfig) -> list[Grid]:
    """Common PD grids for every replication: equidistant between N(0,1) quantiles."""
    lo, hi = stats.norm.ppf(config.explain.grid_quantiles)
    pts = np.linspace(lo, hi, config.explain.grid_size)
    return [Grid(j, pts) for j in range(config.dgp.p)]


def component_labels(feature_names, explainers, grid_size: int) -> list[tuple[str, str]]:
    """(explainer, component) labels in the order of the explanation vector."""
    out = []
    for e in explainers:
        if e == "PD":
            out += [("PD", f"{f}@{g:02d}") for f in feature_names for g in range(grid_size)]
        else:
            out += [(e, f) for f in feature_names]
    return out


def fit_learner(learner, X, y):
    if learner.kind == "ols":
        return fit_ols(X, y)
    return fit_gbt(X, y, learner.gbt_params())


def explain_fits(d: Dataset, config: ExperimentConfig, seed: Seed, grids, resample=None):
    """Fit on every resample of a completed Dataset and explain on its test rows.

    Returns (values k x C, test/train size ratios k, test MSE k).
    """
    resample = resample or config.resample
    X, y = d.X(), d.y()
    pairs = resample_indices(d.n, resample, seed.child("plan"))
    rows, ratios, mses = [], [], []
    for j, (train, test) in enumerate(pairs):
        model = fit_learner(config.learner, X[train], y[train])
        Xt, yt = X[test], y[test]
        parts = []
        for e in config.explainers:
            if e == "PD":
                parts.append(partial_dependence_all(model, Xt, grids).ravel())
            elif e == "PFI":
                parts.append(pfi_all(model, Xt, yt, config.explain.n_perm,
                                     seed.child("pfi", j).rng()))
            else:
                parts.append(shap_global(model, Xt).scores)
        rows.append(np.concatenate(parts))
        ratios.append(test.size / train.size)
        mses.append(float(np.mean((model.predict(Xt) - yt) ** 2)))
    return np.array(rows), np.array(ratios), np.array(mses)


@dataclass
class Replication:
    index: int
    values: np.ndarray  # (m, k, C)
    ratios: np.ndarray  # (m, k)
    mse: np.ndarray  # (m, k)

    @property
    def m(self) -> int:
        return self.values.shape[0]


def run_replication(config: ExperimentConfig, r: int, grids=None) -> Replication:
    """Sample, ampute, impute, resample, fit and explain one replication."""
    grids = grids or simulation_grids(config)
    base = Seed(config.seed).child("rep", r)
    data = dgp_mod.sample(config.dgp, config.n, base.child("dgp"))
    if config.miss is not None:
        data = ampute(data, config.miss, base.child("ampute"))
    completed = impute(data, config.imputer, base.child("impute"), m=config.m)
    vals, ratios, mses = [], [], []
    for d, ds in enumerate(completed):
        v, q, e = explain_fits(ds, config, base.child("fit", d), grids)
        vals.append(v)
        ratios.append(q)
        mses.append(e)
    return Replication(r, np.array(vals), np.array(ratios), np.array(mses))


@dataclass
class GroundTruth:
    labels: list
    values: np.ndarray
    key: dict
    replications: int

    @property
    def key_hash(self) -> str:
        return config_hash(self.key)


def compute_ground_truth(config: ExperimentConfig, R0: int | None = None,
                         threads: int = 1) -> GroundTruth:
    """Expected learner explanation on complete data, averaged over ``R0`` datasets."""
    R0 = R0 or config.ground_truth_replications
    grids = simulation_grids(config)
    total = None
    for means in _map(_gt_worker, [(config, r, grids) for r in range(R0)], threads):
        total = means if total is None else total + means
    labels = component_labels(_feature_names(config), config.explainers,
                              config.explain.grid_size)
    key = config.ground_truth_key()
    key["ground_truth_replications"] = R0
    return GroundTruth(labels, total / R0, key, R0)


def _gt_worker(args):
    config, r, grids = args
    seed = Seed(config.seed).child("gt", r)
    data = dgp_mod.sample(config.dgp, config.n, seed.child("dgp"))
    values, _, _ = explain_fits(data, config, seed.child("fit", 0), grids)
    return values.mean(axis=0)


def _feature_names(config):
    return [f"X{j + 1}" for j in range(config.dgp.p)]


def _map(fn, items, threads):
    if threads <= 1:
        return map(fn, items)
    with ProcessPoolExecutor(threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def pool_components(values: np.ndarray, c: float, alpha: float):
    """Vectorised pooling of an (m, k, C) block.

    Single imputation (m = 1) gives a t interval with k - 1 df; otherwise
    Rubin's rules with classical df.  Returns point, variance, df, lo, hi.
    """
    m, k, _ = values.shape
    means = values.mean(axis=1)
    dev = values - means[:, None, :]
    var = (1.0 / k + c) * (dev ** 2).sum(axis=1) / (k - 1)
    if m == 1:
        point, total = means[0], var[0]
        df = np.full(point.shape, k - 1.0)
    else:
        point = means.mean(axis=0)
        W = var.mean(axis=0)
        inflated = (1 + 1 / m) * means.var(axis=0, ddof=1)
        total = W + inflated
        capped = W >= np.sqrt(DF_CAP) * inflated  # includes inflated == 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            df = np.where(capped, DF_CAP, (m - 1) * (1 + W / inflated) ** 2)
        df = np.minimum(df, DF_CAP)
    half = stats.t.ppf(1 - alpha / 2, df) * np.sqrt(total)
    return point, total, df, point - half, point + half


def variant_estimates(rep: Replication, config: ExperimentConfig, adjusted: bool,
                      refits: int, alpha: float):
    """Pooled point / variance / CI for one (adjusted, refits_used) variant."""
    block = rep.values[:, :refits, :]
    c = 0.0
    if adjusted:
        if config.resample.strategy == "subsample":
            n_train = int(np.floor(config.resample.train_fraction * config.n))
            c = (config.n - n_train) / n_train
        else:
            c = float(rep.ratios[:, :refits].mean())
    point, var, df, lo, hi = pool_components(block, c, alpha)
    return np.stack([point, var, lo, hi])


@dataclass
class MetricsRow:
    explainer: str
    component: str
    coverage: float
    avg_width: float
    bias: float
    n_completed: int


def evaluate(points, lo, hi, gt, labels) -> list[MetricsRow]:
    """Coverage, average width and bias per component, plus aggregates.

    ``points``, ``lo``, ``hi`` are (R, C).  Bias is ground truth minus the
    mean estimate, so under-estimated importance gives a positive bias.
    PD components are first averaged over the grid of each feature; every
    explainer also gets a ``mean`` row over its features.
    """
    points, lo, hi = (np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in (points, lo, hi))
    gt = np.asarray(gt, dtype=np.float64)
    R = points.shape[0]
    covered = (lo <= gt) & (gt <= hi)
    cov = covered.mean(axis=0)
    width = (hi - lo).mean(axis=0)
    bias = gt - points.mean(axis=0)
    rows = []
    explainers = list(dict.fromkeys(e for e, _ in labels))
    for e in explainers:
        idx = [i for i, (ee, _) in enumerate(labels) if ee == e]
        for i in idx:
            rows.append(MetricsRow(e, labels[i][1], cov[i], width[i], bias[i], R))
        if e == "PD":
            features = list(dict.fromkeys(labels[i][1].split("@")[0] for i in idx))
            groups = [[i for i in idx if labels[i][1].split("@")[0] == f] for f in features]
        else:
            features = [labels[i][1] for i in idx]
            groups = [[i] for i in idx]
        if e == "PD":
            for f, g in zip(features, groups):
                rows.append(MetricsRow(e, f, cov[g].mean(), width[g].mean(), bias[g].mean(), R))
        rows.append(MetricsRow(e, AGGREGATE, cov[idx].mean(), width[idx].mean(),
                               bias[idx].mean(), R))
    return rows


@dataclass
class SettingResult:
    setting_id: str
    config: ExperimentConfig
    variants: list  # (adjusted, refits_used, alpha)
    estimates: np.ndarray  # (R_completed, V, 4, C)
    mse: np.ndarray  # (R_completed,)
    n_failed: int
    rows: list = field(default_factory=list)  # (variant index, MetricsRow)


@dataclass
class StudyResult:
    settings: list
    ground_truth: dict  # gt hash -> GroundTruth

    def table(self) -> list[dict]:
        out = []
        for s in self.settings:
            if isinstance(s, _CachedSetting):
                out += s.table()
            else:
                out += [_row_dict(s, v, row) for v, row in s.rows]
        return out

    def find(self, **kw) -> list[dict]:
        out = []
        for row in self.table():
            if all(row[k] == v for k, v in kw.items()):
                out.append(row)
        return out


def _row_dict(s: SettingResult, v: int, row: MetricsRow) -> dict:
    c = s.config
    adjusted, refits, _ = s.variants[v]
    return {
        "setting_id": s.setting_id, "dgp": c.dgp.kind, "mechanism": c.mechanism,
        "proportion": c.proportion, "imputer": c.imputer.kind, "learner": c.learner.kind,
        "explainer": row.explainer, "strategy": c.resample.strategy, "adjusted": adjusted,
        "refits_used": refits, "component": row.component, "coverage": row.coverage,
        "avg_width": row.avg_width, "bias": row.bias, "n_completed": row.n_completed,
    }


def _format_row(d: dict) -> list[str]:
    out = []
    for k in RESULT_COLUMNS:
        v = d[k]
        if isinstance(v, bool):
            out.append("true" if v else "false")
        elif isinstance(v, float):
            out.append(repr(float(v)))
        else:
            out.append(str(v))
    return out


def _group_settings(configs):
    groups = {}
    for cfg in configs:
        sid = config_hash(cfg.compute_key())
        g = groups.setdefault(sid, {"config": cfg, "variants": []})
        variant = (cfg.variance.adjusted, cfg.resample.k_used, cfg.alpha)
        if variant not in g["variants"]:
            g["variants"].append(variant)
    return groups


def _replication_worker(args):
    config, r, grids, variants = args
    try:
        rep = run_replication(config, r, grids)
    except Exception as exc:  # noqa: BLE001 - failed replications are counted, not fatal
        log.warning("replication %d failed: %s", r, exc)
        return r, None, None
    est = np.stack([variant_estimates(rep, config, a, k, al) for a, k, al in variants])
    return r, est, float(rep.mse.mean())


def run_setting(setting_id, config, variants, gt: GroundTruth, threads=1) -> SettingResult:
    grids = simulation_grids(config)
    items = [(config, r, grids, variants) for r in range(config.replications)]
    results = sorted(_map(_replication_worker, items, threads), key=lambda t: t[0])
    ok = [(e, q) for _, e, q in results if e is not None]
    n_failed = len(results) - len(ok)
    if n_failed:
        log.warning("setting %s: %d of %d replications failed", setting_id, n_failed,
                    len(results))
    if not ok:
        raise RuntimeError(f"setting {setting_id}: every replication failed")
    est = np.stack([e for e, _ in ok])
    result = SettingResult(setting_id, config, list(variants), est,
                           np.array([q for _, q in ok]), n_failed)
    for v in range(len(variants)):
        for row in evaluate(est[:, v, 0], est[:, v, 2], est[:, v, 3], gt.values, gt.labels):
            result.rows.append((v, row))
    return result


def save_ground_truth(gt: GroundTruth, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gt_hash", "explainer", "component", "value", "replications"])
        for (e, comp), v in zip(gt.labels, gt.values):
            w.writerow([gt.key_hash, e, comp, repr(float(v)), gt.replications])
    sidecar = Path(path).with_suffix(".json")
    sidecar.write_text(json.dumps({gt.key_hash: gt.key}, indent=2, sort_keys=True, default=list))


def load_ground_truth(path) -> dict:
    """All ground truths stored in a file, keyed by configuration hash."""
    path = Path(path)
    keys = {}
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        keys = json.loads(sidecar.read_text())
    out = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            g = out.setdefault(row["gt_hash"], {"labels": [], "values": [], "R": 0})
            g["labels"].append((row["explainer"], row["component"]))
            g["values"].append(float(row["value"]))
            g["R"] = int(row["replications"])
    return {h: GroundTruth(g["labels"], np.array(g["values"]), keys.get(h, {}), g["R"])
            for h, g in out.items()}


def _expected_rows(config, variants) -> int:
    p, G = config.dgp.p, config.explain.grid_size
    per = {"PD": p * G + p + 1, "PFI": p + 1, "SHAP": p + 1}
    return len(variants) * sum(per[e] for e in config.explainers)


def run_study(configs, out_dir=None, threads: int = 1, ground_truth: dict | None = None,
              master_seed=None) -> StudyResult:
    """Run every distinct setting of a config grid and tabulate metrics.

    Configs differing only in ``variance.adjusted``, ``resample.refits_used``
    or ``alpha`` share one set of replications.  With ``out_dir`` the
    results CSV is appended one setting at a time; a rerun keeps the leading
    settings that are already complete and recomputes the rest.
    """
    configs = list(configs)
    groups = _group_settings(configs)
    gts = dict(ground_truth or {})
    for sid, g in groups.items():
        key_hash = config_hash(g["config"].ground_truth_key())
        if key_hash not in gts:
            log.info("computing ground truth %s", key_hash)
            gts[key_hash] = compute_ground_truth(g["config"], threads=threads)
        gt = gts[key_hash]
        expected = component_labels(_feature_names(g["config"]), g["config"].explainers,
                                    g["config"].explain.grid_size)
        if [tuple(x) for x in gt.labels] != expected:
            raise GroundTruthMismatch(f"ground truth {key_hash} has different components")
    writer = _ResultWriter(out_dir, groups) if out_dir else None
    settings = []
    for sid, g in groups.items():
        cfg = g["config"]
        gt = gts[config_hash(cfg.ground_truth_key())]
        cached = writer.cached(sid) if writer else None
        log.info("setting %s (%s %s %.2f %s)", sid, cfg.dgp.kind, cfg.mechanism,
                 cfg.proportion, cfg.imputer.kind)
        res = run_setting(sid, cfg, g["variants"], gt, threads) if cached is None else cached
        if writer:
            writer.write(res)
        settings.append(res)
    if out_dir:
        meta = {
            "master_seed": master_seed if master_seed is not None else configs[0].seed,
            "settings": {sid: g["config"].to_dict() for sid, g in groups.items()},
            "variants": {sid: g["variants"] for sid, g in groups.items()},
            "ground_truth": {h: gt.key for h, gt in gts.items()},
        }
        Path(out_dir, "results.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True, default=list))
        path = Path(out_dir, "ground_truth.csv")
        save_ground_truths(gts, path)
    return StudyResult(settings, gts)


def save_ground_truths(gts, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gt_hash", "explainer", "component", "value", "replications"])
        for h in sorted(gts):
            gt = gts[h]
            for (e, comp), v in zip(gt.labels, gt.values):
                w.writerow([h, e, comp, repr(float(v)), gt.replications])
    Path(path).with_suffix(".json").write_text(
        json.dumps({h: gts[h].key for h in sorted(gts)}, indent=2, sort_keys=True, default=list))


class _CachedSetting:
    """Rows of a setting read back from an earlier, complete run."""

    def __init__(self, lines):
        self.lines = lines

    def table(self) -> list[dict]:
        out = []
        for rec in csv.DictReader(io.StringIO("".join(self.lines)), fieldnames=RESULT_COLUMNS):
            rec["adjusted"] = rec["adjusted"] == "true"
            for k in ("proportion", "coverage", "avg_width", "bias"):
                rec[k] = float(rec[k])
            rec["refits_used"] = int(rec["refits_used"])
            rec["n_completed"] = int(rec["n_completed"])
            out.append(rec)
        return out


class _ResultWriter:
    def __init__(self, out_dir, groups):
        self.path = Path(out_dir, "results.csv")
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        header = ",".join(RESULT_COLUMNS) + "\n"
        keep = []
        self._cached = {}
        if self.path.exists():
            lines = self.path.read_text().splitlines(keepends=True)
            if lines and lines[0] == header:
                blocks = {}
                for line in lines[1:]:
                    if line.endswith("\n"):
                        blocks.setdefault(line.split(",", 1)[0], []).append(line)
                for sid, g in groups.items():
                    block = blocks.get(sid, [])
                    if len(block) != _expected_rows(g["config"], g["variants"]):
                        break
                    keep.append(sid)
                    self._cached[sid] = _CachedSetting(block)
        with self.path.open("w") as fh:
            fh.write(header)
            for sid in keep:
                fh.writelines(self._cached[sid].lines)
        self._done = set(keep)

    def cached(self, sid):
        return self._cached.get(sid)

    def write(self, res):
        if isinstance(res, _CachedSetting):
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in [_row_dict(res, v, r) for v, r in res.rows]:
            w.writerow(_format_row(row))
        with self.path.open("a") as fh:
            fh.write(buf.getvalue())
            fh.flush()
            os.fsync(fh.fileno())
