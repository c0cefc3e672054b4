"""
Bandwidth selection for the ten estimators.

* Gam, IGam, LN: closed-form MISE-optimal b under a Gamma reference fitted by
  maximum likelihood.
* IGau, RIG: same rule with the Monte Carlo limit constant c(x) in the
  variance integral.
* BS, W: numeric minimization of an asymptotic MISE objective over a log grid,
  refined by golden-section search.
* OK: leave-none-out criterion; BK: leave-one-out cross-validation.
"""
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import optimize, special

from app.tools.asymptotics import MiseConstants, mise_constants
from app.tools.distributions import KernelKind, RngStream, TargetDistribution, draw_kernel
from app.tools.errors import (
    DomainError,
    EstimationError,
    NonUnimodalObjectiveWarning,
    SelectionError,
    UnsupportedKindError,
)
from app.tools.estimators import EstimatorKind, FittedEstimator, epanechnikov_sums
from app.tools.quadrature import QuadratureSpec, gauss_legendre_cells, integrate_half_line
from app.tools.sample import Sample
from app.tools.specfun import digamma, trigamma

SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# Gamma reference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaReference:
    alpha_hat: float
    theta_hat: float

    def __post_init__(self):
        if not (self.alpha_hat > 0 and self.theta_hat > 0):
            raise DomainError(f"Gamma reference needs positive parameters, got {self}")

    @property
    def distribution(self) -> TargetDistribution:
        return TargetDistribution.gamma(self.alpha_hat, self.theta_hat)


def fit_gamma_mle(sample: Sample, tol: float = 1e-10, max_iter: int = 100) -> GammaReference:
    """
    Maximum likelihood Gamma(alpha, theta) fit.

    Solves log(alpha) - psi(alpha) = log(mean) - mean(log) with Minka's
    generalized Newton update, then sets theta = mean / alpha.

    Args:
        sample: At least two positive observations, not all equal
        tol: Residual tolerance of the likelihood equation
        max_iter: Iteration cap

    Returns:
        GammaReference
    """
    values = sample.values
    if values.size < 2:
        raise EstimationError("Gamma MLE needs at least two observations")
    mean = float(np.mean(values))
    mean_log = math.fsum(np.log(values)) / values.size
    s = math.log(mean) - mean_log
    if not s > 1e-14:
        raise EstimationError("degenerate sample: the log observations have no spread")
    alpha = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(max_iter):
        residual = math.log(alpha) - digamma(alpha) - s
        if abs(residual) <= tol:
            return GammaReference(alpha, mean / alpha)
        slope = 1.0 / alpha - trigamma(alpha)
        alpha = 1.0 / (1.0 / alpha + residual / (alpha * alpha * slope))
        if not (alpha > 0 and math.isfinite(alpha)):
            break
    raise EstimationError(f"Gamma MLE did not converge (s={s:g})")


# ---------------------------------------------------------------------------
# grids and rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandwidthGrid:
    """Log-spaced bandwidths from ``lower`` to ``upper`` with ``per_decade`` points per decade."""
    lower: float = 1e-4
    upper: float = 0.9
    per_decade: int = 40

    def __post_init__(self):
        if not (0 < self.lower < self.upper) or self.per_decade < 1:
            raise DomainError(f"invalid bandwidth grid {self}")

    def points(self) -> np.ndarray:
        count = int(math.ceil(self.per_decade * math.log10(self.upper / self.lower))) + 1
        return np.geomspace(self.lower, self.upper, count)

    def scaled(self, factor: float) -> "BandwidthGrid":
        return BandwidthGrid(self.lower * factor, self.upper * factor, self.per_decade)


# coarse scan for the numeric BS and W rules, refined by golden section
SCAN_GRID = BandwidthGrid(per_decade=5)


class RuleVariant(str, Enum):
    FIXED = "fixed"
    PLUGIN_CLOSED_FORM = "plugin_closed_form"
    PLUGIN_NUMERIC = "plugin_numeric"
    CROSS_VALIDATION = "cv"
    LEAVE_NONE_OUT = "lno"


@dataclass(frozen=True)
class BandwidthRule:
    variant: RuleVariant
    fixed: Optional[float] = None
    grid: BandwidthGrid = field(default_factory=BandwidthGrid)

    def __post_init__(self):
        if self.variant == RuleVariant.FIXED and not (self.fixed is not None and self.fixed > 0):
            raise DomainError("a fixed rule needs b > 0")


def default_rule(kind: EstimatorKind, grid: Optional[BandwidthGrid] = None) -> Optional[BandwidthRule]:
    """Benchmark rule per estimator; None for the EDF."""
    grid = grid or BandwidthGrid()
    if kind in (EstimatorKind.GAM, EstimatorKind.IGAM, EstimatorKind.LN, EstimatorKind.IGAU, EstimatorKind.RIG):
        return BandwidthRule(RuleVariant.PLUGIN_CLOSED_FORM, grid=grid)
    if kind in (EstimatorKind.BS, EstimatorKind.W):
        return BandwidthRule(RuleVariant.PLUGIN_NUMERIC, grid=SCAN_GRID)
    if kind == EstimatorKind.OK:
        return BandwidthRule(RuleVariant.LEAVE_NONE_OUT, grid=grid)
    if kind == EstimatorKind.BK:
        return BandwidthRule(RuleVariant.CROSS_VALIDATION, grid=grid)
    return None


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _b_opt(constants: MiseConstants, n: int) -> float:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not (constants.bias > 1e-12 * max(constants.cdf_variance, 1.0)) or not constants.variance > 0:
        raise SelectionError(
            f"{constants.kernel.value}: b_opt undefined (bias {constants.bias:g}, variance {constants.variance:g})"
        )
    return n ** (-2.0 / 3.0) * (4.0 * constants.bias / constants.variance) ** (-2.0 / 3.0)


def _constants(kind: KernelKind, ref: GammaReference, spec: Optional[QuadratureSpec], limit=None) -> MiseConstants:
    try:
        return mise_constants(kind, ref.distribution, spec, limit)
    except UnsupportedKindError:
        raise
    except DomainError as exc:
        raise SelectionError(str(exc))


def b_opt_closed_form(kind: Union[KernelKind, str], ref: GammaReference, n: int,
                      spec: Optional[QuadratureSpec] = None) -> float:
    """n^{-2/3} (4B/V)^{-2/3} for Gam, IGam or LN under the Gamma reference."""
    k = KernelKind(kind)
    if k not in (KernelKind.GAM, KernelKind.IGAM, KernelKind.LN):
        raise UnsupportedKindError(f"no closed-form bandwidth for {k.value}")
    return _b_opt(_constants(k, ref, spec), n)


# ---------------------------------------------------------------------------
# IGau / RIG limit constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitConstant:
    """Monte Carlo estimate of c(x) = lim b^{-1/2} E|T1 - T2| for two kernel variates at x."""
    kind: KernelKind
    x: float
    c_value: float
    std_error: float
    reps: int
    b_probe: float
    seed: int = 0
    richardson: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value, "x": self.x, "c_value": self.c_value, "std_error": self.std_error,
            "reps": self.reps, "b_probe": self.b_probe, "seed": self.seed, "richardson": self.richardson,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LimitConstant":
        return cls(KernelKind(data["kind"]), float(data["x"]), float(data["c_value"]), float(data["std_error"]),
                   int(data["reps"]), float(data["b_probe"]), int(data.get("seed", 0)),
                   bool(data.get("richardson", False)))


def analytic_limit(x: float) -> float:
    """Normal-approximation value 2x / sqrt(pi) of the limit constant."""
    return 2.0 * x / SQRT_PI


def _probe(kind: KernelKind, x: float, b: float, reps: int, rng: RngStream, chunk: int, threads: int):
    sizes = [min(chunk, reps - start) for start in range(0, reps, chunk)]

    def block(i: int):
        stream = rng.child(i)
        gen = stream.generator()
        t1 = draw_kernel(kind, x, b, gen, sizes[i])
        t2 = draw_kernel(kind, x, b, gen, sizes[i])
        d = np.abs(t1 - t2) / math.sqrt(b)
        return math.fsum(d), math.fsum(d * d)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, range(len(sizes))))
    else:
        parts = [block(i) for i in range(len(sizes))]
    total = math.fsum(p[0] for p in parts)
    squares = math.fsum(p[1] for p in parts)
    mean = total / reps
    var = max(squares / reps - mean * mean, 0.0) * reps / (reps - 1)
    return mean, math.sqrt(var / reps)


def c_limit(kind: Union[KernelKind, str], x: float, reps: int = 10 ** 6, b_probe: float = 1e-4,
            rng: Optional[RngStream] = None, richardson: bool = False, chunk: int = 1 << 17,
            threads: int = 1) -> LimitConstant:
    """
    Estimate c(x) for the IGau or RIG kernel from paired i.i.d. kernel variates.

    Args:
        kind: IGau or RIG
        x: Evaluation point
        reps: Number of pairs (>= 10^4)
        b_probe: Bandwidth at which b^{-1/2} E|T1 - T2| is evaluated (<= 1e-2)
        rng: Base stream; disjoint children are used per chunk
        richardson: Also probe at 4 * b_probe and remove the O(b) term
        chunk: Pairs per stream
        threads: Worker threads; the reduction order does not depend on it

    Returns:
        LimitConstant
    """
    k = KernelKind(kind)
    if k not in (KernelKind.IGAU, KernelKind.RIG):
        raise UnsupportedKindError(f"c(x) is only needed for IGau and RIG, not {k.value}")
    if reps < 10 ** 4:
        raise DomainError(f"reps must be >= 10^4, got {reps}")
    if not 0 < b_probe <= 1e-2:
        raise DomainError(f"b_probe must lie in (0, 1e-2], got {b_probe}")
    if x <= 0:
        raise DomainError(f"x must be > 0, got {x}")
    rng = rng or RngStream(0)
    value, se = _probe(k, x, b_probe, reps, rng.child(0), chunk, threads)
    if richardson:
        coarse, coarse_se = _probe(k, x, 4 * b_probe, reps, rng.child(1), chunk, threads)
        value = (4.0 * value - coarse) / 3.0
        se = math.sqrt(16.0 * se * se + coarse_se * coarse_se) / 3.0
    return LimitConstant(k, float(x), value, se, reps, b_probe, rng.seed, richardson)


class LimitCurve:
    """
    c(x) interpolated from limit constants.

    c(x) / x is interpolated linearly in x and held constant outside the
    probed range; one probe therefore gives c(x) = x * c(x0) / x0.
    """

    def __init__(self, limits: Mapping[float, LimitConstant]):
        if not limits:
            raise DomainError("at least one limit constant is required")
        xs = np.array(sorted(limits), dtype=float)
        self.xs = xs
        self.ratios = np.array([limits[x].c_value / x for x in xs])

    def __call__(self, x: float) -> float:
        return float(x * np.interp(x, self.xs, self.ratios))


LimitLike = Union[LimitCurve, Mapping[float, LimitConstant], Callable[[float], float]]


def _limit_fn(limits: LimitLike) -> Callable[[float], float]:
    if isinstance(limits, Mapping):
        return LimitCurve(limits)
    return limits


def b_opt_with_limit(kind: Union[KernelKind, str], ref: GammaReference, n: int, limits: LimitLike,
                     spec: Optional[QuadratureSpec] = None) -> float:
    """MISE-optimal b for IGau or RIG with V = integral of (f/2) c(x) dx."""
    k = KernelKind(kind)
    if k not in (KernelKind.IGAU, KernelKind.RIG):
        raise UnsupportedKindError(f"{k.value} does not use the limit constant")
    b = _b_opt(_constants(k, ref, spec, _limit_fn(limits)), n)
    if k == KernelKind.RIG and b >= 1:
        raise SelectionError(f"RIG bandwidth {b:g} is not below 1")
    return b


# ---------------------------------------------------------------------------
# numeric minimization (BS, W)
# ---------------------------------------------------------------------------

_GUMBEL = np.linspace(-40.0, 4.0, 881)
_GUMBEL_WEIGHTS = np.exp(_GUMBEL - np.exp(_GUMBEL)) * (_GUMBEL[1] - _GUMBEL[0])


def weibull_kernel_mean_cdf(F: Callable[[np.ndarray], np.ndarray], x: float, b: float) -> float:
    """
    E[F(T)] for T from the Weibull kernel at (x, b).

    log T = log(lambda) + b * G with G the log of a unit exponential, so the
    expectation is a trapezoid sum over G with density exp(g - e^g).
    """
    lam = x / special.gamma(1.0 + b)
    with np.errstate(over="ignore"):
        t = lam * np.exp(b * _GUMBEL)
    return float(np.dot(F(np.minimum(t, np.finfo(float).max)), _GUMBEL_WEIGHTS))


def weibull_mise_objective(ref: TargetDistribution, n: int, spec: Optional[QuadratureSpec] = None):
    """
    b -> asymptotic MISE of the W estimator minus its b-free part n^{-1} int F(1-F).

    Variance term: -n^{-1} (1 - 2^{-b}) E[X], from E|T1 - T2| = 2x(1 - 2^{-b}).
    Bias term: integral of (E[F(T_x)] - F(x))^2 by quadrature.
    """
    mean = ref.mean()

    def objective(b: float) -> float:
        def bias_sq(x: float) -> float:
            d = weibull_kernel_mean_cdf(ref.cdf, x, b) - float(ref.cdf(x))
            return d * d
        bias = integrate_half_line(bias_sq, spec, breakpoints=(mean,)).value
        return -(1.0 - 2.0 ** (-b)) * mean / n + bias

    return objective


def _minimize_on_grid(objective: Callable[[float], float], grid: np.ndarray, label: str) -> float:
    values = np.array([objective(float(b)) for b in grid])
    if not np.all(np.isfinite(values)):
        raise SelectionError(f"{label}: objective is not finite on the grid")
    idx = int(np.argmin(values))
    interior = np.flatnonzero((values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])) + 1
    if idx in (0, grid.size - 1) or interior.size > 1:
        warnings.warn(f"{label}: objective is not unimodal on the grid; using the grid minimum b={grid[idx]:g}",
                      NonUnimodalObjectiveWarning, stacklevel=3)
        return float(grid[idx])
    logs = np.log(grid[idx - 1: idx + 2])
    try:
        res = optimize.minimize_scalar(lambda u: objective(math.exp(u)), bracket=tuple(logs), method="golden",
                                       tol=1e-10)
    except ValueError:
        # flat neighbourhood, no strict bracket
        return float(grid[idx])
    if not res.get("success", True) or res.fun > values[idx] or not logs[0] <= res.x <= logs[2]:
        return float(grid[idx])
    return float(math.exp(res.x))


def b_opt_numeric(kind: Union[KernelKind, str], ref: GammaReference, n: int,
                  grid: Optional[BandwidthGrid] = None, spec: Optional[QuadratureSpec] = None) -> float:
    """
    Minimize an asymptotic MISE objective for BS or W.

    BS uses the LN objective -sqrt(b) V / n + b^2 B; W uses
    :func:`weibull_mise_objective`. The b-free term is dropped.
    """
    k = KernelKind(kind)
    grid = grid or SCAN_GRID
    if k == KernelKind.BS:
        c = _constants(k, ref, spec)

        def objective(b: float) -> float:
            return -math.sqrt(b) * c.variance / n + b * b * c.bias
    elif k == KernelKind.W:
        objective = weibull_mise_objective(ref.distribution, n, spec)
    else:
        raise UnsupportedKindError(f"numeric bandwidth is provided for BS and W, not {k.value}")
    return _minimize_on_grid(objective, grid.points(), k.value)


# ---------------------------------------------------------------------------
# CV (BK) and LNO (OK)
# ---------------------------------------------------------------------------

def _check_sample(sample: Sample) -> None:
    if sample.n < 3:
        raise DomainError(f"grid criteria need n >= 3, got {sample.n}")


def cv_criterion(sample: Sample, b: float) -> float:
    """
    Leave-one-out cross-validation score of the BK estimator.

    CV(b) = (1/n) sum_i integral over (0, inf) of (1{X_i <= x} - F_{-i}(x))^2,
    where F_{-i} is the BK estimate without X_i.
    """
    _check_sample(sample)
    est = FittedEstimator(EstimatorKind.BK, sample, b)
    values, n = sample.values, sample.n
    top = est.saturation()
    edges = np.concatenate([[0.0, top], values, est.kinks()])
    edges = edges[edges <= top]

    def integrand(x: np.ndarray) -> np.ndarray:
        s = epanechnikov_sums(values, x, est.scale(x))
        cross = (s.total * s.count - s.below) / (n - 1)
        loo_sq = ((n - 2) * s.total ** 2 + s.squares) / (n - 1) ** 2
        return s.count - 2.0 * cross + loo_sq

    return gauss_legendre_cells(integrand, edges) / n


def lno_criterion(sample: Sample, b: float) -> float:
    """
    Leave-none-out estimate of MISE(b) - MISE(EDF) for the OK estimator.

    LNO(b) = int (F_b - F_n)^2 + (2/n) int [P/n - (S N - P) / (n(n-1)) - N(n-N) / (n(n-1))],
    with S = sum_i K_i(x), N = #{X_i <= x}, P = sum of K_i(x) over X_i <= x.
    Each bracketed term is unbiased for the matching term of the MISE difference,
    and LNO(b) = 0 as b -> 0.
    """
    _check_sample(sample)
    est = FittedEstimator(EstimatorKind.OK, sample, b)
    values, n = sample.values, sample.n
    top = est.saturation()
    edges = np.concatenate([[0.0, top], values, est.kinks()])
    edges = edges[edges <= top]
    pairs = n * (n - 1.0)

    def integrand(x: np.ndarray) -> np.ndarray:
        s = epanechnikov_sums(values, x, est.scale(x))
        fit = (s.total - s.count) / n
        cov = s.below / n - (s.total * s.count - s.below) / pairs - s.count * (n - s.count) / pairs
        return fit * fit + 2.0 / n * cov

    return gauss_legendre_cells(integrand, edges)


def _grid_points(grid: Union[BandwidthGrid, Sequence[float]]) -> np.ndarray:
    points = grid.points() if isinstance(grid, BandwidthGrid) else np.asarray(list(grid), dtype=float)
    points = np.unique(points)
    if points.size == 0:
        raise DomainError("bandwidth grid is empty")
    if np.any(points <= 0) or not np.all(np.isfinite(points)):
        raise DomainError("bandwidth grid must be finite and positive")
    return points


def _argmin(criterion: Callable[[Sample, float], float], sample: Sample, grid) -> float:
    points = _grid_points(grid)
    _check_sample(sample)
    scores = np.array([criterion(sample, float(b)) for b in points])
    if not np.any(np.isfinite(scores)):
        raise SelectionError("criterion is not finite on the grid")
    return float(points[int(np.nanargmin(scores))])


def select_cv(sample: Sample, grid: Union[BandwidthGrid, Sequence[float]]) -> float:
    return _argmin(cv_criterion, sample, grid)


def select_lno(sample: Sample, grid: Union[BandwidthGrid, Sequence[float]]) -> float:
    return _argmin(lno_criterion, sample, grid)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def select_bandwidth(kind: EstimatorKind, sample: Sample, rule: Optional[BandwidthRule] = None,
                     limits: Optional[LimitLike] = None, spec: Optional[QuadratureSpec] = None) -> Optional[float]:
    """
    Bandwidth for one estimator on one sample; None for the EDF.

    Args:
        kind: Estimator
        sample: Observations
        rule: Selection rule; the benchmark default when omitted
        limits: c(x) source for IGau and RIG
        spec: Quadrature tolerances

    Returns:
        The selected bandwidth
    """
    kind = EstimatorKind.parse(kind)
    rule = rule or default_rule(kind)
    if rule is None:
        return None
    if rule.variant == RuleVariant.FIXED:
        b = float(rule.fixed)
    elif rule.variant == RuleVariant.CROSS_VALIDATION:
        b = select_cv(sample, rule.grid)
    elif rule.variant == RuleVariant.LEAVE_NONE_OUT:
        b = select_lno(sample, rule.grid)
    else:
        ref = fit_gamma_mle(sample)
        if rule.variant == RuleVariant.PLUGIN_NUMERIC:
            b = b_opt_numeric(kind.kernel, ref, sample.n, grid=rule.grid, spec=spec)
        elif kind in (EstimatorKind.IGAU, EstimatorKind.RIG):
            if limits is None:
                raise SelectionError(f"{kind.label} needs limit constants")
            b = b_opt_with_limit(kind.kernel, ref, sample.n, limits, spec)
        else:
            b = b_opt_closed_form(kind.kernel, ref, sample.n, spec)
    if kind == EstimatorKind.RIG and b >= 1:
        raise SelectionError(f"RIG bandwidth {b:g} is not below 1")
    return b
