import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from imlmi.rng import Seed
from imlmi.uncertainty import (DF_CAP, ResampleSpec, ci_t, correction_c, learner_estimate,
                               learner_mean, learner_variance, mi_learner_estimate,
                               resample_indices, rubin_pool, t_quantile)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vectors = hnp.arrays(np.float64, st.integers(2, 30), elements=finite)


def mp_t_quantile(q, df):
    """Student t quantile by root-finding on the regularised incomplete beta CDF."""
    df = mpmath.mpf(df)

    def cdf(t):
        x = df / (df + t * t)
        tail = mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, x, regularized=True) / 2
        return 1 - tail if t > 0 else tail

    return float(mpmath.findroot(lambda t: cdf(t) - q, 2.0))


def test_resample_subsample_sizes():
    pairs = resample_indices(1000, ResampleSpec("subsample", 20), Seed(0))
    for train, test in pairs:
        assert train.size == 632 and test.size == 368
        assert not set(train) & set(test)
        assert set(train) | set(test) == set(range(1000))


def test_resample_bootstrap_oob_size():
    pairs = resample_indices(1000, ResampleSpec("bootstrap", 200), Seed(1))
    expected = 1000 * (1 - 1 / 1000) ** 1000
    assert abs(np.mean([t.size for _, t in pairs]) - expected) < 15
    for train, test in pairs:
        assert train.size == 1000 and not set(train) & set(test)


def test_resample_streams_are_per_draw():
    a = resample_indices(100, ResampleSpec("bootstrap", 5), Seed(2))
    b = resample_indices(100, ResampleSpec("bootstrap", 8), Seed(2))
    assert all(np.array_equal(x[0], y[0]) for x, y in zip(a, b))


def test_learner_mean_examples():
    assert learner_mean([1, 2, 3]) == 2
    assert learner_mean([4.5]) == 4.5


@given(vectors)
def test_learner_mean_permutation_invariant(v):
    assert learner_mean(v) == pytest.approx(learner_mean(v[::-1]), abs=1e-12)


def test_learner_variance_examples():
    assert learner_variance([0, 2], 0.0) == 1.0
    assert learner_variance([0, 2], 0.5) == 2.0


@given(vectors, st.floats(0, 5))
def test_learner_variance_direct_formula(v, c):
    k = v.size
    m = sum(v) / k
    direct = (1 / k + c) * sum((x - m) ** 2 for x in v) / (k - 1)
    assert abs(learner_variance(v, c) - direct) <= 1e-12 * max(1.0, direct)
    if c == 0:
        assert abs(learner_variance(v, 0) - np.var(v, ddof=1) / k) <= 1e-12 * max(1.0, direct)


@given(vectors, st.floats(0.01, 5))
def test_adjusted_interval_contains_unadjusted(v, c):
    est0, est1 = learner_estimate(v, 0.0), learner_estimate(v, c)
    assert est1.variance >= est0.variance
    # strict containment needs a half-width resolvable next to the mean
    if math.sqrt(est0.variance) > 1e-9 * max(1.0, abs(est0.mean)):
        lo0, hi0 = ci_t(est0.mean, est0.variance, v.size - 1)
        lo1, hi1 = ci_t(est1.mean, est1.variance, v.size - 1)
        assert lo1 < lo0 and hi0 < hi1


def test_correction_c():
    spec = ResampleSpec("subsample", 10)
    assert correction_c(spec, 1000) == pytest.approx(368 / 632)
    assert correction_c(spec, 1000, adjusted=False) == 0.0
    boot = ResampleSpec("bootstrap", 10)
    assert correction_c(boot, 1000, adjusted=False) == 0.0
    cs = [correction_c(boot, 1000, pairs=resample_indices(1000, boot, Seed(s)))
          for s in range(20)]
    assert all(abs(c - 0.368) < 0.03 for c in cs)


def test_t_quantile_against_independent_routine():
    assert abs(t_quantile(0.975, 19) - 2.0930) < 1e-3
    for q, df in [(0.975, 19), (0.95, 3), (0.995, 2.5), (0.9, 120)]:
        assert abs(t_quantile(q, df) - mp_t_quantile(q, df)) < 1e-8


def test_ci_t_examples():
    assert ci_t(1.5, 0.0, 10) == (1.5, 1.5)
    lo, hi = ci_t(0.0, 1.0, 19, 0.05)
    assert abs(hi - 2.0930) < 1e-3 and lo == -hi
    widths = [np.diff(ci_t(0.0, 1.0, 9, a))[0] for a in (0.01, 0.05, 0.2, 0.5, 0.9)]
    assert np.all(np.diff(widths) < 0)
    with pytest.raises(ValueError):
        ci_t(0.0, -1.0, 5)


def test_rubin_hand_example():
    est = rubin_pool([1.0, 2.0], [0.5, 0.5])
    assert est.point == 1.5 and est.within == 0.5 and est.between == 0.5
    assert est.variance == 1.25
    assert est.df == pytest.approx(25 / 9, rel=1e-14)
    assert est.ci == pytest.approx(ci_t(1.5, 1.25, 25 / 9, 0.05), rel=1e-14)


def test_rubin_tiny_between_variance_hits_cap():
    est = rubin_pool([5.35525495e-125, 0.0], [1.0, 1.0])
    assert est.df == DF_CAP and est.variance == pytest.approx(1.0)


def test_rubin_zero_between_variance():
    est = rubin_pool([2.0, 2.0, 2.0], [0.1, 0.3, 0.2])
    assert est.variance == pytest.approx(0.2) and est.df == DF_CAP
    assert est.ci == ci_t(2.0, est.variance, DF_CAP, 0.05)


@given(hnp.arrays(np.float64, st.integers(2, 20), elements=finite), st.data())
def test_rubin_total_dominates_parts(points, data):
    var = data.draw(hnp.arrays(np.float64, points.size, elements=st.floats(0, 1e3)))
    est = rubin_pool(points, var)
    W, B = var.mean(), points.var(ddof=1)
    tol = 1e-9 * max(1.0, est.variance)
    assert est.variance >= W - tol and est.variance >= B - tol
    assert 0 < est.df <= DF_CAP


def test_mi_learner_examples():
    est = mi_learner_estimate(np.array([[0.0, 2.0], [2.0, 4.0]]), 0.0)
    assert est.point == 2.0 and est.within == 1.0 and est.between == 2.0
    assert est.variance == 4.0
    dup = mi_learner_estimate(np.array([[1.0, 2.0, 4.0]] * 2), 0.3)
    assert dup.point == learner_mean([1, 2, 4]) and dup.df == DF_CAP
    single = mi_learner_estimate(np.array([[1.0, 2.0, 4.0]]), 0.3)
    assert single.df == 2 and single.variance == learner_variance([1, 2, 4], 0.3)


@settings(max_examples=50)
@given(st.integers(2, 6), st.integers(2, 10), st.integers(0, 2**31), st.floats(0, 2))
def test_mi_pooled_variance_at_least_within(m, k, seed, c):
    vals = np.random.default_rng(seed).normal(size=(m, k))
    est = mi_learner_estimate(vals, c)
    within = np.mean([learner_variance(r, c) for r in vals])
    assert est.variance >= within * (1 - 1e-12)


def test_ci_calibration_ideal_setting():
    # independent N(0, 1) "refits" estimate a mean of 0; c = 0 is exact here
    rng = np.random.default_rng(2025)
    k, reps = 20, 5000
    hits = 0
    for _ in range(reps):
        v = rng.standard_normal(k)
        est = learner_estimate(v, 0.0)
        lo, hi = ci_t(est.mean, est.variance, k - 1, 0.05)
        hits += lo <= 0.0 <= hi
    assert abs(hits / reps - 0.95) < 0.02


def test_resample_spec_validation():
    with pytest.raises(ValueError):
        ResampleSpec("jackknife", 10)
    with pytest.raises(ValueError):
        ResampleSpec("bootstrap", 10, refits_used=11)
    assert ResampleSpec("bootstrap", 20, 15).k_used == 15
    assert math.isclose(ResampleSpec("subsample", 3).train_fraction, 0.632)
