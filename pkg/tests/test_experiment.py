import numpy as np
import pytest

from imlmi.config import ExperimentConfig, LearnerSpec, VarianceMode, config_hash
from imlmi.experiment import (RESULT_COLUMNS, GroundTruth, GroundTruthMismatch,
                              component_labels, compute_ground_truth, evaluate,
                              load_ground_truth, pool_components, run_replication, run_study,
                              save_ground_truth)
from imlmi.imputation import ImputerSpec
from imlmi.missingness import MissSpec
from imlmi.uncertainty import ResampleSpec, mi_learner_estimate

SMALL = dict(n=100, replications=3, ground_truth_replications=3, seed=5,
             resample=ResampleSpec("bootstrap", 4))


def small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def test_component_labels():
    labels = component_labels(["X1", "X2", "X3", "X4"], ("PD", "PFI", "SHAP"), 20)
    assert len(labels) == 88
    assert sum(e == "PD" for e, _ in labels) == 80
    assert labels[0] == ("PD", "X1@00") and labels[-1] == ("SHAP", "X4")


def test_pool_components_matches_scalar_pooling():
    rng = np.random.default_rng(0)
    for m in (1, 3):
        vals = rng.normal(size=(m, 6, 4))
        point, var, df, lo, hi = pool_components(vals, 0.4, 0.05)
        for c in range(4):
            est = mi_learner_estimate(vals[:, :, c], 0.4, 0.05)
            assert point[c] == pytest.approx(est.point, abs=1e-12)
            assert var[c] == pytest.approx(est.variance, rel=1e-12)
            assert df[c] == pytest.approx(est.df, rel=1e-12)
            assert (lo[c], hi[c]) == pytest.approx(est.ci, rel=1e-12)


def test_pool_components_tiny_between_variance():
    vals = np.ones((2, 4, 1))
    vals[0, :, 0] += np.array([1e-125, 0.0, 0.0, 0.0])
    vals[:, :2, 0] += 1.0
    point, var, df, lo, hi = pool_components(vals, 0.0, 0.05)
    est = mi_learner_estimate(vals[:, :, 0], 0.0, 0.05)
    assert df[0] == est.df and np.isfinite(lo).all()


def test_evaluate_trivial_cases():
    labels = [("PFI", "X1"), ("PFI", "X2")]
    gt = np.array([1.0, 2.0])
    pts = np.tile(gt + 0.5, (10, 1))
    rows = evaluate(pts, pts * 0 + gt - 1, pts * 0 + gt + 1, gt, labels)
    assert [r.component for r in rows] == ["X1", "X2", "mean"]
    assert all(r.coverage == 1 and r.avg_width == 2 and r.bias == -0.5 for r in rows)
    exact = np.tile(gt, (4, 1))
    rows = evaluate(exact, exact, exact, gt, labels)
    assert all(r.coverage == 1 and r.avg_width == 0 and r.bias == 0 for r in rows)


def test_evaluate_binomial_coverage():
    rng = np.random.default_rng(1)
    R = 2000
    pts = rng.normal(size=(R, 1))
    rows = evaluate(pts, pts - 1.96, pts + 1.96, np.zeros(1), [("SHAP", "X1")])
    sd = np.sqrt(0.95 * 0.05 / R)
    assert abs(rows[0].coverage - 0.95) < 4 * sd


def test_evaluate_pd_feature_rows():
    labels = [("PD", "X1@00"), ("PD", "X1@01"), ("PD", "X2@00"), ("PD", "X2@01")]
    pts = np.array([[0.0, 1.0, 2.0, 3.0]])
    rows = evaluate(pts, pts - 1, pts + 1, np.array([0.0, 0.0, 0.0, 0.0]), labels)
    by = {r.component: r for r in rows}
    assert by["X1"].bias == -0.5 and by["X2"].bias == -2.5 and by["mean"].bias == -1.5


def test_ground_truth_deterministic_and_sized():
    cfg = small()
    a = compute_ground_truth(cfg)
    b = compute_ground_truth(cfg)
    assert len(a.labels) == 88
    assert np.array_equal(a.values, b.values)


def test_ols_ground_truth_pd_slope():
    cfg = ExperimentConfig(n=1000, learner=LearnerSpec("ols"), explainers=("PD",),
                           ground_truth_replications=500, seed=1)
    gt = compute_ground_truth(cfg)
    pts = np.linspace(-1.6448536269514722, 1.6448536269514722, 20)
    slope = np.diff(gt.values[:20]) / np.diff(pts)
    assert np.all(np.abs(slope - 1) < 0.05)


def test_ground_truth_round_trip(tmp_path):
    gt = compute_ground_truth(small(explainers=("PFI",)))
    save_ground_truth(gt, tmp_path / "gt.csv")
    back = load_ground_truth(tmp_path / "gt.csv")[gt.key_hash]
    assert back.labels == list(gt.labels) and np.array_equal(back.values, gt.values)
    assert config_hash(back.key) == gt.key_hash


def test_replication_shapes_and_df():
    cfg = small(miss=MissSpec("MCAR", 0.1), imputer=ImputerSpec("mean"))
    rep = run_replication(cfg, 0)
    assert rep.values.shape == (1, 4, 88)
    cfg = small(miss=MissSpec("MAR", 0.4), imputer=ImputerSpec("mice_pmm"),
                explainers=("SHAP",))
    rep = run_replication(cfg, 0)
    assert rep.values.shape == (40, 4, 4)
    _, _, df, _, _ = pool_components(rep.values[:1], 0.0, 0.05)
    assert np.all(df == 3)


def test_zero_missingness_mice_matches_complete_pipeline():
    complete = run_replication(small(), 2)
    mice = run_replication(small(miss=MissSpec("MCAR", 0.0),
                                 imputer=ImputerSpec("mice_pmm", m=3)), 2)
    assert mice.values.shape[0] == 3
    assert np.array_equal(mice.values[0], complete.values[0])


def test_run_study_rows_and_variants():
    cfgs = [small(miss=MissSpec("MCAR", 0.1), imputer=ImputerSpec(k), explainers=e,
                  learner=LearnerSpec("ols"))
            for k in ("mean", "missforest") for e in (("PFI",), ("SHAP",))]
    res = run_study(cfgs)
    means = res.find(component="mean")
    assert len(means) == 4
    assert all(0 <= r["coverage"] <= 1 and r["n_completed"] == 3 for r in res.table())
    refits = [small(resample=ResampleSpec("bootstrap", 4, k), explainers=("PFI",))
              for k in (2, 3, 4)]
    res = run_study(refits + [small(variance=VarianceMode(False), explainers=("PFI",))])
    assert len(res.settings) == 1
    got = sorted({(r["refits_used"], r["adjusted"]) for r in res.find(component="mean")})
    assert got == [(2, True), (3, True), (4, False), (4, True)]


def test_results_file_is_deterministic_and_resumable(tmp_path):
    cfgs = [small(explainers=("PFI", "SHAP")),
            small(explainers=("PFI", "SHAP"), imputer=ImputerSpec("mean"),
                  miss=MissSpec("MAR", 0.2))]
    run_study(cfgs, tmp_path / "a")
    run_study(cfgs, tmp_path / "b")
    full = (tmp_path / "a" / "results.csv").read_bytes()
    assert full == (tmp_path / "b" / "results.csv").read_bytes()
    assert full.splitlines()[0].decode() == ",".join(RESULT_COLUMNS)
    # interrupt: keep the first setting plus a torn line of the second
    lines = full.decode().splitlines(keepends=True)
    first = lines[1].split(",")[0]
    n_first = 1 + sum(l.startswith(first + ",") for l in lines[1:])
    (tmp_path / "b" / "results.csv").write_text("".join(lines[:n_first]) + lines[n_first][:20])
    run_study(cfgs, tmp_path / "b")
    assert (tmp_path / "b" / "results.csv").read_bytes() == full
    assert (tmp_path / "b" / "results.json").exists()


def test_threads_do_not_change_results():
    cfg = small(explainers=("SHAP",))
    a = run_study([cfg], threads=1).table()
    b = run_study([cfg], threads=2).table()
    assert a == b


def test_mismatched_ground_truth_is_refused():
    cfg = small(explainers=("PFI",))
    other = compute_ground_truth(small(explainers=("SHAP",)))
    fake = GroundTruth(other.labels, other.values, other.key, other.replications)
    with pytest.raises(GroundTruthMismatch):
        run_study([cfg], ground_truth={config_hash(cfg.ground_truth_key()): fake})


def test_supplied_ground_truth_is_used():
    cfg = small(explainers=("PFI",))
    gt = compute_ground_truth(cfg)
    shifted = GroundTruth(gt.labels, gt.values + 100.0, gt.key, gt.replications)
    res = run_study([cfg], ground_truth={gt.key_hash: shifted})
    assert all(r["coverage"] == 0 for r in res.table())
