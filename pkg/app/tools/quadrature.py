"""
Numerical integration on the half-line (0, inf) and the ISE of a CDF estimate.

Three rules are available through :class:`QuadratureSpec`:

* ``RATIONAL`` (default): QUADPACK adaptive Gauss-Kronrod via
  ``scipy.integrate.quad``; the infinite tail is mapped onto a finite
  interval by a rational substitution.
* ``EXP_SUBSTITUTION``: x = a + e^u, integrated over the real line by QUADPACK.
* ``DOUBLE_EXPONENTIAL``: exp-sinh (tails) and tanh-sinh (finite pieces)
  trapezoid sums with step halving.

When ``fallback`` is set, a piece that fails under QUADPACK is retried with
the double-exponential rule before a :class:`QuadratureError` is raised.
"""
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, special

from app.tools.errors import DomainError, QuadratureError, QuadratureFallbackWarning

ScalarFn = Callable[[float], float]
VectorFn = Callable[[np.ndarray], np.ndarray]


class Transformation(str, Enum):
    RATIONAL = "rational"
    EXP_SUBSTITUTION = "exp"
    DOUBLE_EXPONENTIAL = "de"


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    transformation: Transformation = Transformation.RATIONAL
    fallback: bool = True

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be > 0")
        if self.max_subdivisions < 10:
            raise DomainError("max_subdivisions must be >= 10")
        object.__setattr__(self, "transformation", Transformation(self.transformation))

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


class QuadratureResult(NamedTuple):
    value: float
    error: float


# ---------------------------------------------------------------------------
# double-exponential rules
# ---------------------------------------------------------------------------

_DE_SPAN = 6.5
_DE_MAX_LEVEL = 10


def _de_nodes(a: float, b: float, t: np.ndarray):
    half_pi_sinh = 0.5 * math.pi * np.sinh(t)
    if math.isinf(b):
        e = np.exp(half_pi_sinh)
        return a + e, 0.5 * math.pi * np.cosh(t) * e
    half = 0.5 * (b - a)
    x = a + half * (1.0 + np.tanh(half_pi_sinh))
    w = half * 0.5 * math.pi * np.cosh(t) / np.cosh(half_pi_sinh) ** 2
    return x, w


def _de_sum(f: ScalarFn, a: float, b: float, t: np.ndarray) -> float:
    with np.errstate(over="ignore"):
        x, w = _de_nodes(a, b, t)
    terms = []
    for xi, wi in zip(x, w):
        if not (np.isfinite(xi) and np.isfinite(wi)) or wi == 0.0 or xi <= a or xi >= b:
            continue
        fx = f(float(xi))
        if not math.isfinite(fx):
            raise QuadratureError(f"integrand is not finite at x={xi}")
        terms.append(wi * fx)
    return math.fsum(terms)


def _double_exponential(f: ScalarFn, a: float, b: float, spec: QuadratureSpec) -> QuadratureResult:
    h = 1.0
    t = np.arange(-_DE_SPAN, _DE_SPAN + h / 2, h)
    raw = _de_sum(f, a, b, t)
    value = h * raw
    error = float("inf")
    for level in range(1, _DE_MAX_LEVEL + 1):
        h /= 2
        midpoints = np.arange(-_DE_SPAN + h, _DE_SPAN, 2 * h)
        raw += _de_sum(f, a, b, midpoints)
        new_value = h * raw
        error = abs(new_value - value)
        value = new_value
        if level >= 3 and error <= spec.tolerance(value):
            return QuadratureResult(value, error)
    raise QuadratureError(
        f"double-exponential rule did not converge on [{a}, {b}]", best_estimate=value, error_estimate=error
    )


# ---------------------------------------------------------------------------
# QUADPACK pieces
# ---------------------------------------------------------------------------

def _quadpack(f: ScalarFn, a: float, b: float, spec: QuadratureSpec) -> QuadratureResult:
    # full_output keeps QUADPACK from emitting warnings (not thread safe); a 4th item means failure
    out = integrate.quad(f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                         limit=spec.max_subdivisions, full_output=1)
    if len(out) > 3:
        raise QuadratureError(f"QUADPACK on [{a}, {b}]: {out[3]}", best_estimate=out[0], error_estimate=out[1])
    return QuadratureResult(out[0], out[1])


def _piece(f: ScalarFn, a: float, b: float, spec: QuadratureSpec) -> QuadratureResult:
    if spec.transformation == Transformation.DOUBLE_EXPONENTIAL:
        return _double_exponential(f, a, b, spec)
    try:
        if spec.transformation == Transformation.EXP_SUBSTITUTION and math.isinf(b):
            def g(u: float) -> float:
                e = math.exp(u) if u < 709.0 else float("inf")
                return 0.0 if math.isinf(e) else f(a + e) * e
            return _quadpack(g, -math.inf, math.inf, spec)
        return _quadpack(f, a, b, spec)
    except QuadratureError as primary:
        if not spec.fallback:
            raise
        warnings.warn(f"{primary}; retrying with the double-exponential rule",
                      QuadratureFallbackWarning, stacklevel=3)
        try:
            return _double_exponential(f, a, b, spec)
        except QuadratureError:
            raise primary


def integrate_half_line(
    f: ScalarFn,
    spec: Optional[QuadratureSpec] = None,
    lower: float = 0.0,
    breakpoints: Sequence[float] = (),
) -> QuadratureResult:
    """
    Integrate a scalar function over (lower, inf).

    Args:
        f: Integrand, finite almost everywhere on (lower, inf)
        spec: Tolerances and rule; defaults to ``QuadratureSpec()``
        lower: Left end of the half-line
        breakpoints: Interior points where the integrand changes character;
            the domain is split there and the pieces are summed

    Returns:
        QuadratureResult(value, error)
    """
    spec = spec or QuadratureSpec()
    cuts = sorted({float(p) for p in breakpoints if np.isfinite(p) and p > lower})
    edges = [float(lower)] + cuts + [math.inf]
    values, errors = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        try:
            piece = _piece(f, a, b, spec)
        except QuadratureError as exc:
            best = math.fsum(values) + exc.best_estimate
            raise QuadratureError(str(exc), best_estimate=best,
                                  error_estimate=math.fsum(errors) + exc.error_estimate) from exc
        values.append(piece.value)
        errors.append(piece.error)
    return QuadratureResult(math.fsum(values), math.fsum(errors))


# ---------------------------------------------------------------------------
# vectorized adaptive Gauss-Legendre on finite cells
# ---------------------------------------------------------------------------

_GL_COARSE = special.roots_legendre(10)
_GL_FINE = special.roots_legendre(21)
_MAX_DEPTH = 40


def _gl(f: VectorFn, a: np.ndarray, b: np.ndarray, rule) -> np.ndarray:
    nodes, weights = rule
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    x = mid + half * nodes[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    return (fx * weights[None, :]).sum(axis=1) * half[:, 0]


def gauss_legendre_cells(f: VectorFn, edges: Sequence[float], order: int = 8) -> float:
    """Fixed-order Gauss-Legendre over every cell; exact for piecewise polynomials of degree < 2 * order."""
    grid = np.unique(np.asarray(edges, dtype=float))
    if grid.size < 2:
        return 0.0
    return math.fsum(_gl(f, grid[:-1], grid[1:], special.roots_legendre(order)))


def integrate_cells(f: VectorFn, edges: Sequence[float], spec: Optional[QuadratureSpec] = None) -> QuadratureResult:
    """
    Integrate a vectorized function over [edges[0], edges[-1]].

    The integrand only needs to be smooth inside each cell; kinks and jumps
    belong on the edges. Cells are bisected until the 10- and 21-point
    Gauss-Legendre estimates agree to the cell's share of the tolerance.
    """
    spec = spec or QuadratureSpec()
    grid = np.unique(np.asarray(edges, dtype=float))
    if grid.size < 2:
        return QuadratureResult(0.0, 0.0)
    a, b = grid[:-1], grid[1:]
    width = grid[-1] - grid[0]
    budget = spec.max_subdivisions * a.size
    accepted, errors = [], []
    target = None
    splits = 0
    for _ in range(_MAX_DEPTH):
        fine = _gl(f, a, b, _GL_FINE)
        coarse = _gl(f, a, b, _GL_COARSE)
        if not np.all(np.isfinite(fine)):
            raise QuadratureError("integrand is not finite on a cell")
        if target is None:
            target = spec.tolerance(float(fine.sum()))
        diff = np.abs(fine - coarse)
        ok = diff <= target * (b - a) / width
        accepted.append(fine[ok])
        errors.append(diff[ok])
        if ok.all():
            return QuadratureResult(math.fsum(np.concatenate(accepted)), math.fsum(np.concatenate(errors)))
        a, b = a[~ok], b[~ok]
        splits += a.size
        if splits > budget:
            break
        mid = 0.5 * (a + b)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    best = math.fsum(np.concatenate(accepted)) + float(_gl(f, a, b, _GL_FINE).sum())
    raise QuadratureError("cell quadrature exceeded its subdivision budget", best_estimate=best,
                          error_estimate=float("nan"))


# ---------------------------------------------------------------------------
# integrated squared error
# ---------------------------------------------------------------------------

def ise(est, truth, spec: Optional[QuadratureSpec] = None) -> float:
    """
    Integrated squared error of a CDF estimate against a target law on (0, inf).

    Args:
        est: Object with ``evaluate(x)`` accepting arrays. If it also exposes
            ``kinks()`` (non-smooth points) and ``saturation()`` (point beyond
            which the estimate is identically 1), the finite part is integrated
            cell by cell and only the tail 1 - F goes to the half-line rule.
        truth: Object with a vectorized ``cdf``
        spec: Quadrature tolerances

    Returns:
        Nonnegative ISE
    """
    spec = spec or QuadratureSpec()
    kinks = est.kinks() if hasattr(est, "kinks") else None
    if kinks is None:
        def integrand(x: float) -> float:
            d = float(est.evaluate(x)) - float(truth.cdf(x))
            return d * d
        sample = getattr(est, "sample", None)
        hints = () if sample is None else (float(np.median(sample.values)), float(sample.values[-1]))
        value = integrate_half_line(integrand, spec, breakpoints=hints).value
        return max(value, 0.0)

    top = float(est.saturation())
    edges = np.concatenate([[0.0], np.asarray(kinks, dtype=float), [top]])
    edges = edges[(edges >= 0.0) & (edges <= top)]

    def squared(x: np.ndarray) -> np.ndarray:
        return (np.asarray(est.evaluate(x)) - np.asarray(truth.cdf(x))) ** 2

    body = integrate_cells(squared, edges, spec).value
    tail = integrate_half_line(lambda x: (1.0 - float(truth.cdf(x))) ** 2, spec, lower=top).value
    return max(body + tail, 0.0)
