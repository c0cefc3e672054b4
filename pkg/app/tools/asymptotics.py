"""
Asymptotic bias, variance, MSE and MISE expressions for the asymmetric kernels,
closed-form moments of the minimum of two i.i.d. kernel variates, and exact
(quadrature) expectations of the estimators used to check the expansions.

Coefficients follow the convention

    Bias(b) = b * leading_bias + o(b)
    n * Var(b) = F(1 - F) - sqrt(b) * variance_correction + O(b)

The Weibull kernel has no expansion of this form (its mean-matched kernel has
zero first-order bias) and is rejected with :class:`UnsupportedKindError`.
BS shares the LN coefficients.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import special, stats

from app.tools.distributions import Family, KernelKind, RngStream, TargetDistribution, kernel_survival
from app.tools.errors import DomainError, QuadratureError, SelectionError, UnsupportedKindError
from app.tools.estimators import EstimatorKind, FittedEstimator
from app.tools.quadrature import QuadratureSpec, integrate_half_line

SQRT_PI = math.sqrt(math.pi)
LimitFn = Callable[[float], float]
KindLike = Union[KernelKind, EstimatorKind, str]


def _kernel_kind(kind: KindLike) -> KernelKind:
    if isinstance(kind, EstimatorKind):
        if kind.kernel is None:
            raise UnsupportedKindError(f"{kind.label} has no asymptotic expansion here")
        return kind.kernel
    try:
        return KernelKind(kind)
    except ValueError:
        raise UnsupportedKindError(f"Unknown kernel {kind}")


def _expansion_kind(kind: KindLike) -> KernelKind:
    k = _kernel_kind(kind)
    if k == KernelKind.W:
        raise UnsupportedKindError("the Weibull kernel has no first-order bias/variance expansion")
    return k


def _needs_limit(kind: KernelKind) -> bool:
    return kind in (KernelKind.IGAU, KernelKind.RIG)


@dataclass(frozen=True)
class ExpansionTerms:
    kernel: KernelKind
    x: float
    leading_bias: float
    variance_main: float
    variance_correction: float


def leading_bias(kind: KindLike, x: float, f: float, fprime: float) -> float:
    """Coefficient of b in the bias of the estimator at x."""
    k = _expansion_kind(kind)
    if x <= 0:
        raise DomainError(f"x must be > 0, got {x}")
    if k == KernelKind.GAM:
        return f + 0.5 * x * fprime
    if k in (KernelKind.LN, KernelKind.BS):
        return 0.5 * x * (f + x * fprime)
    return 0.5 * x * x * fprime


def variance_correction(kind: KindLike, x: float, f: float, c_of_x: Optional[float] = None) -> float:
    """
    Coefficient of -n^{-1} b^{1/2} in the variance of the estimator at x.

    Args:
        kind: Kernel
        x: Evaluation point
        f: Target density at x
        c_of_x: Limit of b^{-1/2} E|T1 - T2| for two kernel variates at x;
            required for IGau and RIG only

    Returns:
        The variance correction coefficient
    """
    k = _expansion_kind(kind)
    if x <= 0:
        raise DomainError(f"x must be > 0, got {x}")
    if _needs_limit(k):
        if c_of_x is None:
            raise DomainError(f"{k.value} needs the limit constant c(x)")
        return 0.5 * f * c_of_x
    if k == KernelKind.GAM:
        return math.sqrt(x) * f / SQRT_PI
    return x * f / SQRT_PI


def expansion_terms(kind: KindLike, x: float, F: float, f: float, fprime: float,
                    c_of_x: Optional[float] = None) -> ExpansionTerms:
    return ExpansionTerms(
        kernel=_expansion_kind(kind),
        x=x,
        leading_bias=leading_bias(kind, x, f, fprime),
        variance_main=F * (1.0 - F),
        variance_correction=variance_correction(kind, x, f, c_of_x),
    )


def asymptotic_mse(kind: KindLike, x: float, F: float, f: float, fprime: float, n: int, b: float,
                   c_of_x: Optional[float] = None) -> float:
    if n < 1 or b < 0:
        raise DomainError(f"need n >= 1 and b >= 0, got n={n}, b={b}")
    terms = expansion_terms(kind, x, F, f, fprime, c_of_x)
    variance = (terms.variance_main - math.sqrt(b) * terms.variance_correction) / n
    return variance + (b * terms.leading_bias) ** 2


# ---------------------------------------------------------------------------
# MISE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MiseConstants:
    """
    MISE(b) = cdf_variance / n - sqrt(b) * variance / n + b^2 * bias.
    """
    kernel: KernelKind
    cdf_variance: float
    variance: float
    bias: float


def _integral(fn: Callable[[float], float], spec: QuadratureSpec, hint: float, what: str) -> float:
    try:
        value = integrate_half_line(fn, spec, breakpoints=(hint,)).value
    except QuadratureError as exc:
        raise DomainError(f"{what} integral does not converge: {exc}")
    if not math.isfinite(value):
        raise DomainError(f"{what} integral is not finite")
    return value


def mise_constants(kind: KindLike, reference: TargetDistribution, spec: Optional[QuadratureSpec] = None,
                   limit: Optional[LimitFn] = None) -> MiseConstants:
    """
    Integrated bias and variance constants of the MISE expansion under a reference law.

    Args:
        kind: Kernel (W is unsupported)
        reference: Law whose density stands in for the unknown target
        spec: Quadrature tolerances
        limit: c(x) for IGau and RIG

    Returns:
        MiseConstants
    """
    k = _expansion_kind(kind)
    spec = spec or QuadratureSpec()
    if _needs_limit(k) and limit is None:
        raise DomainError(f"{k.value} needs the limit function c(x)")
    if k == KernelKind.GAM and reference.family == Family.GAMMA and reference.params[0] <= 0.5:
        # (f + x f'/2)^2 behaves like x^{2 alpha - 2} at 0
        raise DomainError(f"Gam bias integral diverges for a Gamma reference with shape {reference.params[0]:g} <= 1/2")
    hint = reference.mean() if math.isfinite(reference.mean()) else 1.0
    pdf, dpdf = reference.pdf, reference.pdf_derivative

    def cdf_var(x):
        F = float(reference.cdf(x))
        return F * (1.0 - F)

    if k == KernelKind.GAM:
        def var(x):
            return math.sqrt(x) * pdf(x) / SQRT_PI

        def bias(x):
            return (pdf(x) + 0.5 * x * dpdf(x)) ** 2
    elif k in (KernelKind.LN, KernelKind.BS):
        def var(x):
            return x * pdf(x) / SQRT_PI

        def bias(x):
            return 0.25 * x * x * (pdf(x) + x * dpdf(x)) ** 2
    else:
        if k == KernelKind.IGAM:
            def var(x):
                return x * pdf(x) / SQRT_PI
        else:
            def var(x):
                return 0.5 * pdf(x) * limit(x)

        def bias(x):
            return 0.25 * x ** 4 * dpdf(x) ** 2

    return MiseConstants(
        kernel=k,
        cdf_variance=_integral(cdf_var, spec, hint, "F(1-F)"),
        variance=_integral(var, spec, hint, "variance"),
        bias=_integral(bias, spec, hint, "bias"),
    )


def asymptotic_mise(kind: KindLike, reference: TargetDistribution, n: int, b: float,
                    limit: Optional[LimitFn] = None, spec: Optional[QuadratureSpec] = None,
                    constants: Optional[MiseConstants] = None) -> float:
    if n < 1 or b < 0:
        raise DomainError(f"need n >= 1 and b >= 0, got n={n}, b={b}")
    c = constants or mise_constants(kind, reference, spec, limit)
    return c.cdf_variance / n - math.sqrt(b) * c.variance / n + b * b * c.bias


def mise_at_optimum(constants: MiseConstants, n: int) -> float:
    """Leading-order MISE at the optimal bandwidth."""
    if constants.bias <= 0 or constants.variance <= 0:
        raise DomainError("optimal MISE needs positive bias and variance constants")
    gain = 0.75 * n ** (-4.0 / 3.0) * (constants.variance ** 4 / (4.0 * constants.bias)) ** (1.0 / 3.0)
    return constants.cdf_variance / n - gain


def b_opt_mse(kind: KindLike, x: float, f: float, fprime: float, n: int,
              c_of_x: Optional[float] = None) -> float:
    """Pointwise MSE-optimal bandwidth n^{-2/3} [4 bias^2 / correction]^{-2/3}."""
    bias = leading_bias(kind, x, f, fprime)
    corr = variance_correction(kind, x, f, c_of_x)
    if bias == 0.0 or corr <= 0.0:
        raise SelectionError(f"MSE-optimal bandwidth undefined at x={x} (bias {bias}, correction {corr})")
    return n ** (-2.0 / 3.0) * (4.0 * bias * bias / corr) ** (-2.0 / 3.0)


# ---------------------------------------------------------------------------
# moments of the minimum of two i.i.d. variates
# ---------------------------------------------------------------------------

def _check_order(j: int) -> None:
    if j not in (1, 2):
        raise DomainError(f"closed form holds for j in {{1, 2}} only, got {j}")


def min_moment_gamma(alpha: float, theta: float, j: int) -> float:
    """E[min(X, Y)^j] for X, Y i.i.d. Gamma(alpha, theta) (shape/scale), j in {1, 2}."""
    _check_order(j)
    if alpha <= 0 or theta <= 0:
        raise DomainError("alpha and theta must be > 0")
    lg = special.gammaln(alpha)
    first = np.exp(special.gammaln(alpha + j) - lg)
    second = j / SQRT_PI * np.exp(special.gammaln(alpha + j - 0.5) - lg)
    return float(theta ** j * (first - second))


def min_moment_invgamma(alpha: float, theta: float, j: int) -> float:
    """
    E[min(X, Y)^j] for X, Y i.i.d. reciprocals of Gamma(alpha, theta) variates.

    Needs alpha > 2.
    """
    _check_order(j)
    if alpha <= 2 or theta <= 0:
        raise DomainError(f"need alpha > 2 and theta > 0, got alpha={alpha}, theta={theta}")
    lg = special.gammaln(alpha)
    base = special.gammaln(alpha - j) - lg
    first = np.exp(base)
    second = j / SQRT_PI * np.exp(base + special.gammaln(alpha - 0.5) - lg)
    return float(theta ** (-j) * (first - second))


def min_moment_lognormal(mu: float, sigma: float, a: float) -> float:
    if sigma <= 0 or a <= 0:
        raise DomainError("sigma and a must be > 0")
    s = a * sigma
    return float(2.0 * np.exp(a * mu + 0.5 * s * s + special.log_ndtr(-s / math.sqrt(2.0))))


def corollary_min_expansions(kind: KindLike, x: float, b: float) -> Tuple[float, float]:
    """
    Exact E[min - x] and E[(min - x)^2] for two i.i.d. kernel variates at (x, b).

    Written so that the O(1) parts cancel analytically; supports Gam, IGam, LN.
    """
    k = _kernel_kind(kind)
    if x <= 0 or b <= 0:
        raise DomainError(f"need x, b > 0, got x={x}, b={b}")
    if k == KernelKind.GAM:
        alpha = x / b + 1.0
        lg = special.gammaln(alpha)
        first = b - b / SQRT_PI * math.exp(special.gammaln(alpha + 0.5) - lg)
        second = 3 * b * x + 2 * b * b - 2 * b * b / SQRT_PI * math.exp(special.gammaln(alpha + 1.5) - lg) - 2 * x * first
        return first, second
    if k == KernelKind.IGAM:
        if b >= 1:
            raise DomainError("IGam minimum moments need b < 1")
        ratio = math.exp(special.gammaln(1 / b + 0.5) - special.gammaln(1 / b + 1))
        excess = 1.0 / (1.0 - b) - 1.0
        first = -x * ratio / SQRT_PI
        second = x * x * excess * (1.0 - 2.0 * ratio / SQRT_PI)
        return first, second
    if k == KernelKind.LN:
        half = math.exp(0.5 * b) * special.ndtr(-math.sqrt(0.5 * b))
        double = math.exp(2 * b) * special.ndtr(-math.sqrt(2 * b))
        first = x * (2 * half - 1.0)
        second = x * x * (2 * double - 4 * half + 1.0)
        return float(first), float(second)
    raise UnsupportedKindError(f"no minimum-moment closed form for {k.value}")


# ---------------------------------------------------------------------------
# exact expectations by quadrature
# ---------------------------------------------------------------------------

def _kernel_hints(x: float, b: float):
    spread = 6.0 * math.sqrt(b)
    return tuple(p for p in (x * max(1.0 - spread, 1e-3), x, x * (1.0 + spread)) if p > 0)


def expected_estimate(kind: KindLike, truth: TargetDistribution, x: float, b: float,
                      spec: Optional[QuadratureSpec] = None) -> float:
    """E[F_hat(x)] = integral of f(t) K(t | x, b) dt (F(x) for the EDF)."""
    if kind in (EstimatorKind.EDF, "EDF"):
        return float(truth.cdf(x))
    k = _kernel_kind(kind)
    return integrate_half_line(lambda t: truth.pdf(t) * float(kernel_survival(k, t, x, b)),
                               spec, breakpoints=_kernel_hints(x, b)).value


def expected_square(kind: KindLike, truth: TargetDistribution, x: float, b: float,
                    spec: Optional[QuadratureSpec] = None) -> float:
    """E[K(X | x, b)^2] for X from the truth."""
    if kind in (EstimatorKind.EDF, "EDF"):
        return float(truth.cdf(x))
    k = _kernel_kind(kind)
    return integrate_half_line(lambda t: truth.pdf(t) * float(kernel_survival(k, t, x, b)) ** 2,
                               spec, breakpoints=_kernel_hints(x, b)).value


def exact_bias_ratio(kind: KindLike, truth: TargetDistribution, x: float, b: float,
                     spec: Optional[QuadratureSpec] = None) -> float:
    """(E[F_hat(x)] - F(x)) / b; tends to leading_bias as b -> 0."""
    return (expected_estimate(kind, truth, x, b, spec) - float(truth.cdf(x))) / b


def exact_variance_ratio(kind: KindLike, truth: TargetDistribution, x: float, b: float,
                         spec: Optional[QuadratureSpec] = None) -> float:
    """(F(1-F) - n Var(F_hat(x))) / sqrt(b); tends to variance_correction as b -> 0."""
    F = float(truth.cdf(x))
    mean = expected_estimate(kind, truth, x, b, spec)
    second = expected_square(kind, truth, x, b, spec)
    return (F * (1.0 - F) - (second - mean * mean)) / math.sqrt(b)


# ---------------------------------------------------------------------------
# asymptotic normality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalityReport:
    kind: str
    x: float
    n: int
    b: float
    replicates: int
    ks_statistic: float
    p_value: float
    mean_shift: float
    shift_std_error: float
    expected_shift: float

    @property
    def lam(self) -> float:
        return math.sqrt(self.n) * self.b

    def passes(self, level: float = 0.01) -> bool:
        return self.p_value > level


def normality_check(kind: Union[EstimatorKind, str], truth: TargetDistribution, x: float, n: int, b: float,
                    replicates: int, rng: RngStream, spec: Optional[QuadratureSpec] = None) -> NormalityReport:
    """
    Simulate sqrt(n) (F_hat(x) - E F_hat(x)) / sigma(x) and test it against N(0, 1).

    Also reports the mean of sqrt(n) (F_hat(x) - F(x)) with its standard error
    and the limiting shift sqrt(n) b * leading_bias expected when sqrt(n) b
    stays bounded.

    Args:
        kind: Estimator (asymmetric kernel or EDF)
        truth: Target law
        x: Probe point with 0 < F(x) < 1
        n: Sample size
        b: Bandwidth (ignored for the EDF)
        replicates: Number of independent samples
        rng: Base stream; replicate r uses ``rng.child(r)``
        spec: Quadrature tolerances for the exact mean

    Returns:
        NormalityReport
    """
    est_kind = EstimatorKind.parse(kind)
    F = float(truth.cdf(x))
    if not 0.0 < F < 1.0:
        raise DomainError(f"normality needs 0 < F(x) < 1, got F({x}) = {F}")
    if replicates < 2:
        raise DomainError("need at least two replicates")
    sigma = math.sqrt(F * (1.0 - F))
    if est_kind == EstimatorKind.EDF:
        centre, expected = F, 0.0
    else:
        centre = expected_estimate(est_kind, truth, x, b, spec)
        try:
            expected = math.sqrt(n) * b * leading_bias(est_kind, x, float(truth.pdf(x)), float(truth.pdf_derivative(x)))
        except UnsupportedKindError:
            expected = float("nan")
    values = np.empty(replicates)
    for r in range(replicates):
        sample = truth.sample(rng.child(r), n)
        values[r] = FittedEstimator(est_kind, sample, b).evaluate(x)
    standardized = math.sqrt(n) * (values - centre) / sigma
    ks = stats.kstest(standardized, "norm")
    shifts = math.sqrt(n) * (values - F)
    return NormalityReport(
        kind=est_kind.label,
        x=x,
        n=n,
        b=b,
        replicates=replicates,
        ks_statistic=float(ks.statistic),
        p_value=float(ks.pvalue),
        mean_shift=float(shifts.mean()),
        shift_std_error=float(shifts.std(ddof=1) / math.sqrt(replicates)),
        expected_shift=expected,
    )
