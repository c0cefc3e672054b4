import math
import warnings

import numpy as np
import pytest
from scipy import integrate, special, stats

from app.tools.bandwidth import (
    BandwidthGrid,
    BandwidthRule,
    GammaReference,
    LimitConstant,
    LimitCurve,
    SCAN_GRID,
    RuleVariant,
    analytic_limit,
    b_opt_closed_form,
    b_opt_numeric,
    b_opt_with_limit,
    c_limit,
    cv_criterion,
    default_rule,
    fit_gamma_mle,
    lno_criterion,
    select_bandwidth,
    select_cv,
    select_lno,
    weibull_kernel_mean_cdf,
)
from app.tools.distributions import KernelKind, RngStream, TargetDistribution
from app.tools.errors import (
    DomainError,
    EstimationError,
    NonUnimodalObjectiveWarning,
    SelectionError,
    UnsupportedKindError,
)
from app.tools.estimators import EstimatorKind, FittedEstimator, epanechnikov_cdf
from app.tools.sample import Sample

EXP1 = GammaReference(1.0, 1.0)


@pytest.fixture
def small_sample():
    return TargetDistribution.gamma(2.0, 1.5).sample(RngStream(8, (1,)), 9)


def test_gamma_mle_solves_the_likelihood_equation():
    s = TargetDistribution.gamma(3.0, 0.7).sample(RngStream(1, (1,)), 2000)
    ref = fit_gamma_mle(s)
    target = math.log(s.values.mean()) - np.log(s.values).mean()
    assert math.log(ref.alpha_hat) - special.digamma(ref.alpha_hat) == pytest.approx(target, abs=1e-9)
    assert ref.theta_hat == pytest.approx(s.values.mean() / ref.alpha_hat, rel=1e-12)
    alpha, _, theta = stats.gamma.fit(s.values, floc=0)
    assert ref.alpha_hat == pytest.approx(alpha, rel=1e-3)
    assert ref.theta_hat == pytest.approx(theta, rel=1e-3)


def test_gamma_mle_degenerate_samples():
    with pytest.raises(EstimationError):
        fit_gamma_mle(Sample.from_values([2.0, 2.0, 2.0]))
    with pytest.raises(EstimationError):
        fit_gamma_mle(Sample.from_values([2.0]))


def test_grid_points():
    points = BandwidthGrid().points()
    assert points[0] == pytest.approx(1e-4)
    assert points[-1] == pytest.approx(0.9)
    assert points.size == 160
    assert np.all(np.diff(np.log(points)) > 0)
    with pytest.raises(DomainError):
        BandwidthGrid(0.5, 0.1)


@pytest.mark.parametrize("n", [256, 1000, 10 ** 6])
def test_closed_form_gam_exponential_reference(n):
    assert b_opt_closed_form(KernelKind.GAM, EXP1, n) == pytest.approx(n ** (-2 / 3) * 2.5 ** (-2 / 3), abs=1e-10)


def test_closed_form_ln_and_igam_exponential_reference():
    n = 1000
    assert b_opt_closed_form("LN", EXP1, n) == pytest.approx(n ** (-2 / 3) * (math.sqrt(math.pi) / 4) ** (-2 / 3),
                                                             rel=1e-8)
    assert b_opt_closed_form("IGam", EXP1, n) == pytest.approx(
        n ** (-2 / 3) * (3 * math.sqrt(math.pi) / 4) ** (-2 / 3), rel=1e-8)


def test_closed_form_scales_as_n_to_minus_two_thirds():
    ref = GammaReference(2.5, 0.8)
    ratio = b_opt_closed_form(KernelKind.LN, ref, 8000) / b_opt_closed_form(KernelKind.LN, ref, 1000)
    assert ratio == pytest.approx(0.25, rel=1e-10)


def test_closed_form_errors():
    with pytest.raises(SelectionError):
        b_opt_closed_form(KernelKind.GAM, GammaReference(0.4, 1.0), 100)
    with pytest.raises(UnsupportedKindError):
        b_opt_closed_form(KernelKind.BS, EXP1, 100)
    with pytest.raises(DomainError):
        b_opt_closed_form(KernelKind.GAM, EXP1, 0)


def test_c_limit_matches_normal_difference():
    limit = c_limit(KernelKind.IGAU, 1.0, reps=200_000, b_probe=1e-4, rng=RngStream(3, (1,)))
    assert limit.c_value == pytest.approx(analytic_limit(1.0), rel=0.02)
    assert abs(limit.c_value - analytic_limit(1.0)) < 5 * limit.std_error + 0.005
    rig = c_limit(KernelKind.RIG, 2.0, reps=200_000, b_probe=1e-4, rng=RngStream(3, (2,)))
    assert rig.c_value == pytest.approx(analytic_limit(2.0), rel=0.02)


def test_c_limit_does_not_depend_on_threads():
    kwargs = dict(reps=40_000, b_probe=1e-3, rng=RngStream(5), chunk=1 << 13)
    one = c_limit(KernelKind.IGAU, 0.5, threads=1, **kwargs)
    four = c_limit(KernelKind.IGAU, 0.5, threads=4, **kwargs)
    assert one == four


def test_c_limit_richardson():
    limit = c_limit(KernelKind.IGAU, 1.0, reps=100_000, b_probe=2e-3, rng=RngStream(6), richardson=True)
    assert limit.richardson
    assert limit.c_value == pytest.approx(analytic_limit(1.0), rel=0.03)


def test_c_limit_preconditions():
    with pytest.raises(DomainError):
        c_limit(KernelKind.IGAU, 1.0, reps=999)
    with pytest.raises(DomainError):
        c_limit(KernelKind.IGAU, 1.0, reps=10_000, b_probe=0.05)
    with pytest.raises(UnsupportedKindError):
        c_limit(KernelKind.GAM, 1.0, reps=10_000)


def test_limit_constant_round_trips_through_dict():
    limit = LimitConstant(KernelKind.RIG, 1.0, 1.1, 0.01, 10_000, 1e-4, 3, True)
    assert LimitConstant.from_dict(limit.to_dict()) == limit


def test_limit_curve_is_linear_from_one_probe():
    curve = LimitCurve({1.0: LimitConstant(KernelKind.IGAU, 1.0, 1.2, 0.0, 10_000, 1e-4)})
    assert curve(3.0) == pytest.approx(3.6)
    assert curve(0.25) == pytest.approx(0.3)
    with pytest.raises(DomainError):
        LimitCurve({})


def test_limit_rule_with_analytic_curve_equals_igam_rule():
    # with c(x) = 2x / sqrt(pi) the IGau constants coincide with the IGam ones
    b = b_opt_with_limit(KernelKind.IGAU, EXP1, 1000, analytic_limit)
    assert b == pytest.approx(b_opt_closed_form(KernelKind.IGAM, EXP1, 1000), rel=1e-8)
    with pytest.raises(UnsupportedKindError):
        b_opt_with_limit(KernelKind.GAM, EXP1, 1000, analytic_limit)


def test_numeric_bs_matches_ln_closed_form():
    assert b_opt_numeric(KernelKind.BS, EXP1, 1000) == pytest.approx(b_opt_closed_form(KernelKind.LN, EXP1, 1000),
                                                                     rel=1e-5)


def test_numeric_weibull_follows_n_to_minus_one_third():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        small = b_opt_numeric(KernelKind.W, EXP1, 1000)
        large = b_opt_numeric(KernelKind.W, EXP1, 8000)
    assert not any(issubclass(w.category, NonUnimodalObjectiveWarning) for w in caught)
    assert 1e-4 < large < small < 0.9
    assert large / small == pytest.approx(0.5, rel=0.15)


def test_weibull_kernel_mean_cdf_against_quadrature():
    truth = TargetDistribution.gamma(2.0, 1.0)
    x, b = 1.3, 0.2
    lam, k = x / math.gamma(1 + b), 1 / b
    density = stats.weibull_min(k, scale=lam).pdf
    exact = integrate.quad(lambda t: density(t) * float(truth.cdf(t)), 0, np.inf, epsabs=1e-13, epsrel=1e-12,
                           limit=200)[0]
    assert weibull_kernel_mean_cdf(truth.cdf, x, b) == pytest.approx(exact, rel=1e-7)


def test_numeric_rule_rejects_other_kernels():
    with pytest.raises(UnsupportedKindError):
        b_opt_numeric(KernelKind.GAM, EXP1, 100)


def _brute_force_cv(sample, b):
    values, n = sample.values, sample.n
    grid = np.linspace(0.0, values[-1] + b, 200_001)[1:]
    total = np.zeros_like(grid)
    for i in range(n):
        rest = Sample.from_values(np.delete(values, i))
        loo = FittedEstimator(EstimatorKind.BK, rest, b).evaluate(grid)
        total += ((values[i] <= grid) - loo) ** 2
    return integrate.trapezoid(total, grid) / n


def test_cv_criterion_matches_brute_force(small_sample):
    for b in (0.2, 1.0):
        assert cv_criterion(small_sample, b) == pytest.approx(_brute_force_cv(small_sample, b), rel=2e-3)


def _brute_force_lno(sample, b):
    values, n = sample.values, sample.n
    grid = np.linspace(0.0, values[-1] + b, 200_001)
    K = epanechnikov_cdf((grid[:, None] - values[None, :]) / b)
    ind = (values[None, :] <= grid[:, None]).astype(float)
    fit = (K.mean(axis=1) - ind.mean(axis=1)) ** 2
    own = (K * ind).sum(axis=1) / n
    cross = (K.sum(axis=1) * ind.sum(axis=1) - (K * ind).sum(axis=1)) / (n * (n - 1))
    edf = ind.sum(axis=1) * (n - ind.sum(axis=1)) / (n * (n - 1))
    return integrate.trapezoid(fit + 2.0 / n * (own - cross - edf), grid)


def test_lno_criterion_matches_brute_force(small_sample):
    for b in (0.3, 1.5):
        assert lno_criterion(small_sample, b) == pytest.approx(_brute_force_lno(small_sample, b), rel=2e-3, abs=1e-4)


def test_lno_vanishes_as_bandwidth_shrinks(small_sample):
    assert abs(lno_criterion(small_sample, 1e-9)) < 1e-7


def test_grid_selectors(small_sample):
    grid = [0.05, 0.1, 0.1, 0.4, 0.9]
    assert select_cv(small_sample, grid) in grid
    assert select_lno(small_sample, BandwidthGrid(0.01, 0.9, 5)) in BandwidthGrid(0.01, 0.9, 5).points()
    with pytest.raises(DomainError):
        select_cv(small_sample, [])
    with pytest.raises(DomainError):
        select_lno(Sample.from_values([1.0, 2.0]), grid)


def test_default_rules():
    assert default_rule(EstimatorKind.EDF) is None
    assert default_rule(EstimatorKind.GAM).variant == RuleVariant.PLUGIN_CLOSED_FORM
    assert default_rule(EstimatorKind.RIG).variant == RuleVariant.PLUGIN_CLOSED_FORM
    assert default_rule(EstimatorKind.W).variant == RuleVariant.PLUGIN_NUMERIC
    assert default_rule(EstimatorKind.OK).variant == RuleVariant.LEAVE_NONE_OUT
    assert default_rule(EstimatorKind.BK).variant == RuleVariant.CROSS_VALIDATION
    search = BandwidthGrid(0.01, 0.5, 10)
    assert default_rule(EstimatorKind.BK, search).grid == search
    assert default_rule(EstimatorKind.BS, search).grid == SCAN_GRID


def test_select_bandwidth_dispatch():
    s = TargetDistribution.gamma(2.0, 1.0).sample(RngStream(2, (3,)), 300)
    ref = fit_gamma_mle(s)
    assert select_bandwidth(EstimatorKind.EDF, s) is None
    assert select_bandwidth(EstimatorKind.GAM, s) == pytest.approx(b_opt_closed_form(KernelKind.GAM, ref, 300))
    assert select_bandwidth(EstimatorKind.LN, s, BandwidthRule(RuleVariant.FIXED, fixed=0.07)) == 0.07
    curve = LimitCurve({1.0: LimitConstant(KernelKind.RIG, 1.0, analytic_limit(1.0), 0.0, 10_000, 1e-4)})
    assert 0 < select_bandwidth(EstimatorKind.RIG, s, limits=curve) < 1
    with pytest.raises(SelectionError):
        select_bandwidth(EstimatorKind.IGAU, s)
    with pytest.raises(DomainError):
        BandwidthRule(RuleVariant.FIXED)


def test_numeric_rule_scans_its_own_grid():
    s = TargetDistribution.gamma(2.0, 1.0).sample(RngStream(2, (3,)), 300)
    # b_opt is far below 0.2, so the scan stops at the lower edge of the configured grid
    rule = BandwidthRule(RuleVariant.PLUGIN_NUMERIC, grid=BandwidthGrid(0.2, 0.9, 5))
    with pytest.warns(NonUnimodalObjectiveWarning):
        b = select_bandwidth(EstimatorKind.BS, s, rule)
    assert b == pytest.approx(0.2)
    default = select_bandwidth(EstimatorKind.BS, s)
    assert default == pytest.approx(b_opt_numeric(KernelKind.BS, fit_gamma_mle(s), 300))
    assert default < 0.2


def test_numeric_rule_ignores_grid_scaling():
    base = b_opt_numeric(KernelKind.BS, EXP1, 256)
    wide = b_opt_numeric(KernelKind.BS, EXP1, 256, grid=BandwidthGrid(1e-5, 9.0, 5))
    assert wide == pytest.approx(base, abs=1e-6)


def test_numeric_weibull_gamma_reference():
    b = b_opt_numeric(KernelKind.W, GammaReference(4.0, 2.0), 256)
    assert math.isfinite(b) and 0 < b < 1


def test_one_point_and_duplicate_grids(small_sample):
    assert select_cv(small_sample, [0.3]) == 0.3
    assert select_lno(small_sample, [0.3]) == 0.3
    grid = [0.05, 0.2, 0.8]
    assert select_cv(small_sample, grid + grid[::-1]) == select_cv(small_sample, grid)
