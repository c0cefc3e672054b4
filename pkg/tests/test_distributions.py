import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from app.tools.distributions import (
    STUDY_DISTRIBUTIONS,
    KernelKind,
    RngStream,
    TargetDistribution,
    draw_kernel,
    kernel_parameters,
    kernel_survival,
    sample_kernel,
    study_law,
)
from app.tools.errors import DomainError, UnsupportedKindError

ALL_KINDS = list(KernelKind)


def test_study_laws_are_the_eight_benchmark_laws():
    names = [law.name for law in STUDY_DISTRIBUTIONS]
    assert names == [
        "Burr(1,3,1)", "Gamma(0.6,2)", "Gamma(4,2)", "GeneralizedPareto(0.4,1,0)",
        "HalfNormal(1)", "LogNormal(0,0.75)", "Weibull(1.5,1.5)", "Weibull(3,2)",
    ]
    assert study_law(3).distribution.params == (4.0, 2.0)
    with pytest.raises(DomainError):
        study_law(9)


@pytest.mark.parametrize("law", STUDY_DISTRIBUTIONS, ids=lambda law: law.name)
def test_cdf_and_pdf_match_scipy(law):
    ref = law.distribution.frozen()
    x = np.linspace(0.05, 6.0, 40)
    assert np.allclose(law.distribution.cdf(x), ref.cdf(x), rtol=1e-10, atol=1e-14)
    assert np.allclose(law.distribution.pdf(x), ref.pdf(x), rtol=1e-10, atol=1e-14)
    assert law.distribution.cdf(0.0) == 0.0


@pytest.mark.parametrize("law", STUDY_DISTRIBUTIONS, ids=lambda law: law.name)
def test_pdf_derivative_matches_finite_difference(law):
    dist = law.distribution
    for x in (0.4, 1.1, 2.5):
        h = 1e-5 * x
        numeric = (dist.pdf(x + h) - dist.pdf(x - h)) / (2 * h)
        assert dist.pdf_derivative(x) == pytest.approx(numeric, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("law", STUDY_DISTRIBUTIONS, ids=lambda law: law.name)
def test_mean_matches_scipy(law):
    assert law.distribution.mean() == pytest.approx(float(law.distribution.frozen().mean()), rel=1e-10)


def test_parameter_validation():
    with pytest.raises(DomainError):
        TargetDistribution.gamma(-1.0, 1.0)
    with pytest.raises(DomainError):
        TargetDistribution.generalized_pareto(0.4, 1.0, 0.5)
    with pytest.raises(DomainError):
        TargetDistribution.exponential(1.0).cdf(-1.0)
    with pytest.raises(DomainError):
        TargetDistribution.exponential(1.0).pdf(0.0)


def test_streams_are_reproducible_and_distinct():
    law = study_law(1).distribution
    a = law.draw(RngStream(5, (1, 256, 0)), 50)
    b = law.draw(RngStream(5, (1, 256, 0)), 50)
    c = law.draw(RngStream(5, (1, 256, 1)), 50)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(5, (1,)).child(2) == RngStream(5, (1, 2))


@pytest.mark.parametrize("law", STUDY_DISTRIBUTIONS, ids=lambda law: law.name)
def test_draws_follow_the_law(law):
    from scipy import stats

    values = law.distribution.draw(RngStream(11, (law.index,)), 4000)
    assert np.all(values > 0)
    assert stats.kstest(values, law.distribution.frozen().cdf).pvalue > 1e-4


def test_sample_records_provenance():
    s = TargetDistribution.exponential(2.0).sample(RngStream(3, (4, 5)), 10)
    assert s.n == 10
    assert s.seed == 3 and s.stream == (4, 5)
    assert np.all(np.diff(s.values) >= 0)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_kernel_survival_is_one_at_zero_and_decreasing(kind):
    t = np.concatenate([[0.0], np.geomspace(1e-6, 1e3, 400)])
    s = kernel_survival(kind, t, 1.3, 0.05)
    assert s[0] == 1.0
    assert np.all(np.diff(s) <= 1e-12)
    assert np.all((s >= 0) & (s <= 1))
    assert s[-1] < 1e-6


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_kernel_law_mean_or_median(kind):
    # Gam has mode x, LN / BS median x, the others mean x
    x, b = 2.0, 0.04
    params = kernel_parameters(kind, x, b)
    if kind in (KernelKind.LN, KernelKind.BS):
        assert kernel_survival(kind, x, x, b) == pytest.approx(0.5, abs=1e-12)
    elif kind == KernelKind.GAM:
        assert (params["alpha"] - 1) * params["theta"] == pytest.approx(x)
    else:
        survival = lambda t: float(kernel_survival(kind, t, x, b))
        mean = integrate.quad(survival, 0, x, limit=200)[0] + integrate.quad(survival, x, np.inf, limit=200)[0]
        assert mean == pytest.approx(x, rel=1e-6)


def test_kernel_parameters_values():
    assert kernel_parameters(KernelKind.GAM, 2.0, 0.5) == {"alpha": 5.0, "theta": 0.5}
    assert kernel_parameters(KernelKind.IGAM, 2.0, 0.5) == {"alpha": 3.0, "theta": 0.25}
    rig = kernel_parameters(KernelKind.RIG, 2.0, 0.5)
    assert rig["mu"] == pytest.approx(1.0) and rig["lambda"] == pytest.approx(1.0)
    w = kernel_parameters(KernelKind.W, 2.0, 0.5)
    assert w["k"] == 2.0 and w["lambda"] == pytest.approx(2.0 / math.gamma(1.5))


def test_kernel_domain_errors():
    with pytest.raises(DomainError):
        kernel_parameters(KernelKind.RIG, 1.0, 1.0)
    with pytest.raises(DomainError):
        kernel_parameters(KernelKind.GAM, 0.0, 0.1)
    with pytest.raises(DomainError):
        kernel_survival(KernelKind.GAM, -1.0, 1.0, 0.1)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL_KINDS), st.floats(0.05, 20.0), st.floats(1e-3, 0.5), st.floats(0.0, 50.0))
def test_kernel_survival_in_unit_interval(kind, x, b, t):
    assert 0.0 <= kernel_survival(kind, t, x, b) <= 1.0


@pytest.mark.parametrize("kind", [KernelKind.IGAU, KernelKind.RIG])
def test_kernel_sampler_matches_survival(kind):
    from scipy import stats

    x, b = 1.5, 0.2
    draws = draw_kernel(kind, x, b, RngStream(9, (1,)), 5000)
    cdf = lambda t: 1.0 - kernel_survival(kind, t, x, b)
    assert stats.kstest(draws, cdf).pvalue > 1e-4
    assert sample_kernel(kind, x, b, RngStream(9, (1,)), 10).n == 10


def test_kernel_sampler_rejects_other_kinds():
    with pytest.raises(UnsupportedKindError):
        draw_kernel(KernelKind.GAM, 1.0, 0.1, RngStream(1), 10)
