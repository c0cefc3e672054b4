import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.tools.distributions import RngStream, TargetDistribution, kernel_survival
from app.tools.errors import DomainError
from app.tools.estimators import (
    EstimatorKind,
    FittedEstimator,
    epanechnikov_cdf,
    epanechnikov_sums,
    evaluate,
    evaluate_bk,
)
from app.tools.sample import Sample

KERNEL_KINDS = [k for k in EstimatorKind if k != EstimatorKind.EDF]


@pytest.fixture
def sample():
    return TargetDistribution.gamma(2.0, 1.0).sample(RngStream(42, (1,)), 60)


def test_parse_accepts_indices_and_labels():
    assert EstimatorKind.parse("1") == EstimatorKind.GAM
    assert EstimatorKind.parse("igau") == EstimatorKind.IGAU
    assert EstimatorKind.parse(EstimatorKind.BK) == EstimatorKind.BK
    assert EstimatorKind.EDF.label == "EDF"
    assert EstimatorKind.RIG.kernel.value == "RIG"
    assert EstimatorKind.OK.kernel is None
    with pytest.raises(DomainError):
        EstimatorKind.parse("11")
    with pytest.raises(DomainError):
        EstimatorKind.parse("Parzen")


def test_epanechnikov_cdf_shape():
    assert epanechnikov_cdf(-1.0) == 0.0
    assert epanechnikov_cdf(0.0) == 0.5
    assert epanechnikov_cdf(1.0) == 1.0
    assert epanechnikov_cdf(3.0) == 1.0
    u = np.linspace(-0.9, 0.9, 7)
    assert np.allclose(epanechnikov_cdf(u) + epanechnikov_cdf(-u), 1.0)


def test_edf_values():
    s = Sample.from_values([3.0, 1.0, 2.0, 2.0])
    edf = FittedEstimator(EstimatorKind.EDF, s)
    assert edf.bandwidth is None
    assert list(edf.evaluate(np.array([0.0, 1.0, 1.5, 2.0, 10.0]))) == [0.0, 0.25, 0.25, 0.75, 1.0]


@pytest.mark.parametrize("kind", KERNEL_KINDS)
def test_estimate_is_a_cdf(kind, sample):
    est = FittedEstimator(kind, sample, 0.1)
    x = np.linspace(0.0, 30.0, 300)
    values = est.evaluate(x)
    assert np.all((values >= 0) & (values <= 1))
    assert np.all(np.diff(values) >= -1e-12)
    assert values[-1] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("kind", [k for k in KERNEL_KINDS if k.is_asymmetric])
def test_asymmetric_estimate_is_mean_of_survivals(kind, sample):
    b, x = 0.07, 1.7
    expected = np.mean(kernel_survival(kind.kernel, sample.values, x, b))
    assert evaluate(FittedEstimator(kind, sample, b), x) == pytest.approx(expected, rel=1e-13)


def test_gam_value_at_zero_is_its_right_limit(sample):
    pair = FittedEstimator(EstimatorKind.GAM, Sample.from_values([0.2, 0.4]), 0.2)
    assert pair.evaluate(0.0) == pytest.approx((math.exp(-1.0) + math.exp(-2.0)) / 2, rel=1e-14)
    gam = FittedEstimator(EstimatorKind.GAM, sample, 0.2)
    assert gam.evaluate(0.0) == pytest.approx(np.mean(np.exp(-sample.values / 0.2)))
    assert gam.evaluate(1e-9) == pytest.approx(gam.evaluate(0.0), abs=1e-6)
    assert gam.evaluate(0.0) > 0
    for kind in (EstimatorKind.IGAM, EstimatorKind.LN, EstimatorKind.IGAU, EstimatorKind.RIG,
                 EstimatorKind.BS, EstimatorKind.W, EstimatorKind.BK):
        assert FittedEstimator(kind, sample, 0.2).evaluate(0.0) == 0.0


def test_bandwidth_validation(sample):
    with pytest.raises(DomainError):
        FittedEstimator(EstimatorKind.GAM, sample, 0.0)
    with pytest.raises(DomainError):
        FittedEstimator(EstimatorKind.OK, sample, None)
    with pytest.raises(DomainError):
        FittedEstimator(EstimatorKind.RIG, sample, 1.0)
    with pytest.raises(DomainError):
        FittedEstimator(EstimatorKind.LN, sample, 0.1).evaluate(-1.0)


def test_ok_direct_formula(sample):
    b = 0.3
    x = np.array([0.2, 1.0, 2.5, 4.0])
    direct = [np.mean(epanechnikov_cdf((xi - sample.values) / b)) for xi in x]
    assert np.allclose(FittedEstimator(EstimatorKind.OK, sample, b).evaluate(x), direct, rtol=1e-13, atol=1e-15)


def test_bk_shrinks_bandwidth_near_zero(sample):
    b = 0.5
    x = np.array([0.1, 0.3, 0.5, 2.0])
    scale = np.where(x >= b, b, x)
    direct = [np.mean(epanechnikov_cdf((xi - sample.values) / h)) for xi, h in zip(x, scale)]
    assert np.allclose(evaluate_bk(sample, b, x), direct, rtol=1e-13, atol=1e-15)
    with pytest.raises(DomainError):
        evaluate_bk(sample, b, 0.0)


def test_epanechnikov_sums_against_direct(sample):
    x = np.array([0.5, 1.0, 2.0, 3.3])
    scale = np.full_like(x, 0.4)
    sums = epanechnikov_sums(sample.values, x, scale)
    for i, xi in enumerate(x):
        k = epanechnikov_cdf((xi - sample.values) / scale[i])
        below = sample.values <= xi
        assert sums.total[i] == pytest.approx(k.sum(), rel=1e-13)
        assert sums.squares[i] == pytest.approx((k * k).sum(), rel=1e-13)
        assert sums.below[i] == pytest.approx(k[below].sum(), rel=1e-13)
        assert sums.count[i] == below.sum()


def test_kinks_and_saturation(sample):
    edf = FittedEstimator(EstimatorKind.EDF, sample)
    assert edf.saturation() == sample.values[-1]
    ok = FittedEstimator(EstimatorKind.OK, sample, 0.2)
    assert ok.saturation() == pytest.approx(sample.values[-1] + 0.2)
    assert np.all(ok.kinks() > 0)
    assert FittedEstimator(EstimatorKind.GAM, sample, 0.2).kinks() is None


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 50.0), min_size=1, max_size=30), st.floats(0.01, 1.0), st.floats(0.0, 60.0))
def test_union_is_size_weighted_average(left, b, x):
    # F_hat on a union of samples is the size-weighted mean of the parts
    a, c = Sample.from_values(left), Sample.from_values([1.0, 2.0, 3.0])
    for kind in (EstimatorKind.GAM, EstimatorKind.LN, EstimatorKind.OK, EstimatorKind.EDF):
        bw = None if kind == EstimatorKind.EDF else b
        whole = FittedEstimator(kind, a.union(c), bw).evaluate(x)
        parts = (a.n * FittedEstimator(kind, a, bw).evaluate(x) + c.n * FittedEstimator(kind, c, bw).evaluate(x))
        assert whole == pytest.approx(parts / (a.n + c.n), abs=1e-12)


def test_gam_estimate_converges_on_exponential():
    truth = TargetDistribution.exponential(1.0)
    s = truth.sample(RngStream(1, (2,)), 20000)
    est = FittedEstimator(EstimatorKind.GAM, s, 20000 ** (-2 / 3))
    x = np.array([0.5, 1.0, 2.0])
    assert np.max(np.abs(est.evaluate(x) - truth.cdf(x))) < 0.02
    assert math.isclose(est.evaluate(1.0), truth.cdf(1.0), abs_tol=0.02)


@pytest.mark.parametrize("kind", [EstimatorKind.IGAM, EstimatorKind.LN, EstimatorKind.IGAU, EstimatorKind.RIG,
                                  EstimatorKind.BS, EstimatorKind.W, EstimatorKind.BK, EstimatorKind.EDF])
def test_estimate_limits_at_the_ends(kind, sample):
    est = FittedEstimator(kind, sample, None if kind == EstimatorKind.EDF else 0.2)
    assert est.evaluate(1e-8) == pytest.approx(0.0, abs=1e-12)
    assert est.evaluate(1e6) == pytest.approx(1.0, abs=1e-9)


def test_ordinary_kernel_keeps_mass_below_zero(sample):
    # no boundary correction: the limit at 0+ is the kernel mass on the negative axis
    b = 0.8
    spill = np.mean(epanechnikov_cdf(-sample.values / b))
    assert spill > 0
    assert FittedEstimator(EstimatorKind.OK, sample, b).evaluate(1e-8) == pytest.approx(spill, abs=1e-7)


def test_edf_matches_rank_counts():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        values = np.round(rng.gamma(2.0, 1.0, n), 1) + 0.1  # rounding makes ties
        edf = FittedEstimator(EstimatorKind.EDF, Sample.from_values(values))
        x = float(values[rng.integers(n)]) if rng.random() < 0.5 else float(rng.uniform(0.0, 10.0))
        assert evaluate(edf, x) == np.count_nonzero(values <= x) / n
