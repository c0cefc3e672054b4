"""
Simulation target laws, kernel survival functions and seeded random streams.

The eight study laws use the density parametrizations of the ISE benchmark
(Burr, Gamma shape/scale, generalized Pareto, half-normal, lognormal and
Weibull scale/shape). Kernel survival functions take an observation ``t`` and
the evaluation point ``x`` with bandwidth ``b``; the (x, b) to kernel-parameter
maps live in :func:`kernel_parameters` only.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple, Union

import numpy as np
from scipy import special, stats

from app.tools.errors import DomainError, UnsupportedKindError
from app.tools.sample import Sample

ArrayLike = Union[float, np.ndarray]


def _as_output(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random stream identified by (seed, index).

    Identical (seed, index) pairs produce identical variates regardless of
    which worker thread draws them. ``index`` is any tuple of nonnegative
    integers, e.g. (distribution, n, replicate).
    """
    seed: int
    index: Tuple[int, ...] = ()
    algorithm: str = "philox"

    def __post_init__(self):
        if self.algorithm != "philox":
            raise DomainError(f"Unknown RNG algorithm: {self.algorithm}")
        if self.seed < 0 or any(i < 0 for i in self.index):
            raise DomainError("seed and stream indices must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=tuple(int(i) for i in self.index))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.seed, self.index + tuple(index), self.algorithm)


RngLike = Union[RngStream, np.random.Generator]


def _generator(rng: RngLike) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


# ---------------------------------------------------------------------------
# Target laws
# ---------------------------------------------------------------------------

class Family(str, Enum):
    BURR = "Burr"
    GAMMA = "Gamma"
    GENERALIZED_PARETO = "GeneralizedPareto"
    HALF_NORMAL = "HalfNormal"
    LOG_NORMAL = "LogNormal"
    WEIBULL = "Weibull"


_ARITY = {
    Family.BURR: 3,
    Family.GAMMA: 2,
    Family.GENERALIZED_PARETO: 3,
    Family.HALF_NORMAL: 1,
    Family.LOG_NORMAL: 2,
    Family.WEIBULL: 2,
}


@dataclass(frozen=True)
class TargetDistribution:
    """
    One of the benchmark laws on (0, inf).

    Parameters, by family:
        Burr: (lambda, c, k), GeneralizedPareto: (xi, sigma, mu),
        Gamma: (alpha, theta), HalfNormal: (sigma,), LogNormal: (mu, sigma),
        Weibull: (lambda, k).
    """
    family: Family
    params: Tuple[float, ...]

    def __post_init__(self):
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != _ARITY[self.family]:
            raise DomainError(f"{self.family.value} takes {_ARITY[self.family]} parameters, got {len(params)}")
        if not all(np.isfinite(params)):
            raise DomainError(f"non-finite parameters: {params}")
        if self.family == Family.GENERALIZED_PARETO:
            xi, sigma, mu = params
            if xi <= 0 or sigma <= 0 or mu != 0:
                raise DomainError("GeneralizedPareto needs xi, sigma > 0 and mu = 0 for support (0, inf)")
        elif self.family == Family.LOG_NORMAL:
            if params[1] <= 0:
                raise DomainError("LogNormal needs sigma > 0")
        elif any(p <= 0 for p in params):
            raise DomainError(f"{self.family.value} parameters must be > 0, got {params}")

    # named constructors -------------------------------------------------
    @classmethod
    def burr(cls, lam: float, c: float, k: float) -> "TargetDistribution":
        return cls(Family.BURR, (lam, c, k))

    @classmethod
    def gamma(cls, alpha: float, theta: float) -> "TargetDistribution":
        return cls(Family.GAMMA, (alpha, theta))

    @classmethod
    def generalized_pareto(cls, xi: float, sigma: float, mu: float = 0.0) -> "TargetDistribution":
        return cls(Family.GENERALIZED_PARETO, (xi, sigma, mu))

    @classmethod
    def half_normal(cls, sigma: float) -> "TargetDistribution":
        return cls(Family.HALF_NORMAL, (sigma,))

    @classmethod
    def log_normal(cls, mu: float, sigma: float) -> "TargetDistribution":
        return cls(Family.LOG_NORMAL, (mu, sigma))

    @classmethod
    def weibull(cls, lam: float, k: float) -> "TargetDistribution":
        return cls(Family.WEIBULL, (lam, k))

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "TargetDistribution":
        return cls.gamma(1.0, 1.0 / rate)

    @property
    def label(self) -> str:
        return f"{self.family.value}({','.join(f'{p:g}' for p in self.params)})"

    # density and distribution functions ----------------------------------
    def _check(self, x: ArrayLike, allow_zero: bool) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        bad = (arr < 0) if allow_zero else (arr <= 0)
        if np.any(np.isnan(arr)) or np.any(bad):
            raise DomainError(f"{self.label}: x must be {'>=' if allow_zero else '>'} 0, got {x}")
        return arr

    def log_pdf(self, x: ArrayLike) -> ArrayLike:
        x = self._check(x, allow_zero=False)
        p = self.params
        with np.errstate(over="ignore", divide="ignore"):
            if self.family == Family.BURR:
                lam, c, k = p
                z = x / lam
                out = np.log(c * k / lam) + (c - 1) * np.log(z) - (k + 1) * np.log1p(z ** c)
            elif self.family == Family.GAMMA:
                alpha, theta = p
                out = (alpha - 1) * np.log(x) - x / theta - alpha * np.log(theta) - special.gammaln(alpha)
            elif self.family == Family.GENERALIZED_PARETO:
                xi, sigma, mu = p
                out = -np.log(sigma) - (1 / xi + 1) * np.log1p(xi * (x - mu) / sigma)
            elif self.family == Family.HALF_NORMAL:
                (sigma,) = p
                out = 0.5 * np.log(2 / (np.pi * sigma ** 2)) - x ** 2 / (2 * sigma ** 2)
            elif self.family == Family.LOG_NORMAL:
                mu, sigma = p
                out = -np.log(x * np.sqrt(2 * np.pi) * sigma) - (np.log(x) - mu) ** 2 / (2 * sigma ** 2)
            else:
                lam, k = p
                z = x / lam
                out = np.log(k / lam) + (k - 1) * np.log(z) - z ** k
        return _as_output(out)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        return _as_output(np.exp(np.asarray(self.log_pdf(x))))

    def cdf(self, x: ArrayLike) -> ArrayLike:
        """CDF on [0, inf); x = 0 gives 0."""
        x = self._check(x, allow_zero=True)
        p = self.params
        with np.errstate(over="ignore", divide="ignore"):
            if self.family == Family.BURR:
                lam, c, k = p
                out = -np.expm1(-k * np.log1p((x / lam) ** c))
            elif self.family == Family.GAMMA:
                alpha, theta = p
                out = special.gammainc(alpha, x / theta)
            elif self.family == Family.GENERALIZED_PARETO:
                xi, sigma, mu = p
                out = -np.expm1(-np.log1p(xi * (x - mu) / sigma) / xi)
            elif self.family == Family.HALF_NORMAL:
                (sigma,) = p
                out = special.erf(x / (sigma * np.sqrt(2.0)))
            elif self.family == Family.LOG_NORMAL:
                mu, sigma = p
                out = special.ndtr((np.log(x) - mu) / sigma)
            else:
                lam, k = p
                out = -np.expm1(-((x / lam) ** k))
        return _as_output(out)

    def pdf_derivative(self, x: ArrayLike) -> ArrayLike:
        """f'(x), computed as f(x) times the derivative of log f."""
        x = self._check(x, allow_zero=False)
        p = self.params
        if self.family == Family.BURR:
            lam, c, k = p
            zc = (x / lam) ** c
            score = ((c - 1) - (k + 1) * c * zc / (1 + zc)) / x
        elif self.family == Family.GAMMA:
            alpha, theta = p
            score = (alpha - 1) / x - 1 / theta
        elif self.family == Family.GENERALIZED_PARETO:
            xi, sigma, mu = p
            score = -(1 + xi) / (sigma + xi * (x - mu))
        elif self.family == Family.HALF_NORMAL:
            (sigma,) = p
            score = -x / sigma ** 2
        elif self.family == Family.LOG_NORMAL:
            mu, sigma = p
            score = -(1 + (np.log(x) - mu) / sigma ** 2) / x
        else:
            lam, k = p
            score = ((k - 1) - k * (x / lam) ** k) / x
        return _as_output(np.asarray(self.pdf(x)) * score)

    def mean(self) -> float:
        p = self.params
        if self.family == Family.BURR:
            lam, c, k = p
            if c * k <= 1:
                return float("inf")
            return float(lam * k * np.exp(special.betaln(k - 1 / c, 1 + 1 / c)))
        if self.family == Family.GAMMA:
            return p[0] * p[1]
        if self.family == Family.GENERALIZED_PARETO:
            xi, sigma, mu = p
            return float("inf") if xi >= 1 else mu + sigma / (1 - xi)
        if self.family == Family.HALF_NORMAL:
            return p[0] * np.sqrt(2 / np.pi)
        if self.family == Family.LOG_NORMAL:
            return float(np.exp(p[0] + p[1] ** 2 / 2))
        lam, k = p
        return float(lam * special.gamma(1 + 1 / k))

    def frozen(self):
        """Equivalent ``scipy.stats`` frozen law, used as an independent reference."""
        p = self.params
        if self.family == Family.BURR:
            return stats.burr12(p[1], p[2], scale=p[0])
        if self.family == Family.GAMMA:
            return stats.gamma(p[0], scale=p[1])
        if self.family == Family.GENERALIZED_PARETO:
            return stats.genpareto(p[0], loc=p[2], scale=p[1])
        if self.family == Family.HALF_NORMAL:
            return stats.halfnorm(scale=p[0])
        if self.family == Family.LOG_NORMAL:
            return stats.lognorm(p[1], scale=np.exp(p[0]))
        return stats.weibull_min(p[1], scale=p[0])

    # sampling -------------------------------------------------------------
    def draw(self, rng: RngLike, n: int) -> np.ndarray:
        if n < 1:
            raise DomainError(f"n must be >= 1, got {n}")
        gen = _generator(rng)
        p = self.params
        if self.family == Family.GAMMA:
            values = gen.gamma(p[0], p[1], size=n)
        elif self.family == Family.HALF_NORMAL:
            values = np.abs(gen.standard_normal(n)) * p[0]
        elif self.family == Family.LOG_NORMAL:
            values = np.exp(p[0] + p[1] * gen.standard_normal(n))
        else:
            # inverse CDF on the survival scale: v = 1 - U
            v = 1.0 - gen.random(n)
            if self.family == Family.BURR:
                lam, c, k = p
                values = lam * np.expm1(-np.log(v) / k) ** (1 / c)
            elif self.family == Family.GENERALIZED_PARETO:
                xi, sigma, mu = p
                values = mu + sigma * np.expm1(-xi * np.log(v)) / xi
            else:
                lam, k = p
                values = lam * (-np.log(v)) ** (1 / k)
        # an exact zero has probability zero but can appear through underflow
        return np.maximum(values, np.nextafter(0.0, 1.0))

    def sample(self, rng: RngLike, n: int) -> Sample:
        values = self.draw(rng, n)
        if isinstance(rng, RngStream):
            return Sample.from_values(values, seed=rng.seed, stream=rng.index, law=self.label)
        return Sample.from_values(values, law=self.label)


@dataclass(frozen=True)
class StudyLaw:
    index: int
    distribution: TargetDistribution

    @property
    def name(self) -> str:
        return self.distribution.label


STUDY_DISTRIBUTIONS: Tuple[StudyLaw, ...] = (
    StudyLaw(1, TargetDistribution.burr(1, 3, 1)),
    StudyLaw(2, TargetDistribution.gamma(0.6, 2)),
    StudyLaw(3, TargetDistribution.gamma(4, 2)),
    StudyLaw(4, TargetDistribution.generalized_pareto(0.4, 1, 0)),
    StudyLaw(5, TargetDistribution.half_normal(1)),
    StudyLaw(6, TargetDistribution.log_normal(0, 0.75)),
    StudyLaw(7, TargetDistribution.weibull(1.5, 1.5)),
    StudyLaw(8, TargetDistribution.weibull(3, 2)),
)


def study_law(index: int) -> StudyLaw:
    for law in STUDY_DISTRIBUTIONS:
        if law.index == index:
            return law
    raise DomainError(f"Unknown distribution index {index}; expected 1..{len(STUDY_DISTRIBUTIONS)}")


# ---------------------------------------------------------------------------
# Kernel survival functions
# ---------------------------------------------------------------------------

class KernelKind(str, Enum):
    GAM = "Gam"
    IGAM = "IGam"
    LN = "LN"
    IGAU = "IGau"
    RIG = "RIG"
    BS = "BS"
    W = "W"


def _check_xb(kind: KernelKind, x: float, b: float) -> None:
    if not (np.isfinite(x) and x > 0):
        raise DomainError(f"x must be > 0, got {x}")
    if not (np.isfinite(b) and b > 0):
        raise DomainError(f"b must be > 0, got {b}")
    if kind == KernelKind.RIG and b >= 1:
        raise DomainError(f"RIG kernel needs b < 1, got {b}")


def kernel_parameters(kind: KernelKind, x: float, b: float) -> Dict[str, float]:
    """
    Parameters of the kernel law attached to the evaluation point x.

    Gam: mode x. IGam, IGau, RIG, W: mean x. LN, BS: median x.
    """
    kind = KernelKind(kind)
    _check_xb(kind, x, b)
    if kind == KernelKind.GAM:
        return {"alpha": x / b + 1, "theta": b}
    if kind == KernelKind.IGAM:
        return {"alpha": 1 / b + 1, "theta": b / x}
    if kind == KernelKind.LN:
        return {"mu": float(np.log(x)), "sigma": float(np.sqrt(b))}
    if kind == KernelKind.IGAU:
        return {"mu": x, "lambda": x / b}
    if kind == KernelKind.RIG:
        return {"mu": 1 / (x * (1 - b)), "lambda": 1 / (x * b)}
    if kind == KernelKind.BS:
        return {"beta": x, "alpha": float(np.sqrt(b))}
    return {"lambda": float(x / special.gamma(1 + b)), "k": 1 / b}


def kernel_survival(kind: KernelKind, t: ArrayLike, x: float, b: float) -> ArrayLike:
    """
    Survival function of the kernel law for point x and bandwidth b, at t >= 0.

    Vectorized over t; K(0) = 1 for every kind.
    """
    kind = KernelKind(kind)
    params = kernel_parameters(kind, x, b)
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < 0):
        raise DomainError("t must be >= 0")
    out = np.ones_like(t)
    pos = t > 0
    tp = t[pos]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if kind == KernelKind.GAM:
            out = special.gammaincc(params["alpha"], t / params["theta"])
        elif kind == KernelKind.IGAM:
            out[pos] = special.gammainc(params["alpha"], 1 / (tp * params["theta"]))
        elif kind == KernelKind.LN:
            out[pos] = special.ndtr((params["mu"] - np.log(tp)) / params["sigma"])
        elif kind == KernelKind.IGAU:
            mu, lam = params["mu"], params["lambda"]
            root = np.sqrt(lam / tp)
            out[pos] = special.ndtr(-root * (tp / mu - 1)) - np.exp(
                2 * lam / mu + special.log_ndtr(-root * (tp / mu + 1))
            )
        elif kind == KernelKind.RIG:
            mu, lam = params["mu"], params["lambda"]
            root = np.sqrt(lam * tp)
            out[pos] = special.ndtr(root * (1 / (tp * mu) - 1)) + np.exp(
                2 * lam / mu + special.log_ndtr(-root * (1 / (tp * mu) + 1))
            )
        elif kind == KernelKind.BS:
            beta, alpha = params["beta"], params["alpha"]
            out[pos] = special.ndtr((np.sqrt(beta / tp) - np.sqrt(tp / beta)) / alpha)
        else:
            out[pos] = np.exp(-((tp / params["lambda"]) ** params["k"]))
    return _as_output(np.clip(out, 0.0, 1.0))


def sample_kernel(kind: KernelKind, x: float, b: float, rng: RngLike, n: int) -> Sample:
    """
    Draw n variates from the IGau or RIG kernel law at (x, b).

    IGau(x, x/b) uses numpy's Wald sampler; RIG variates are reciprocals of
    IGau(1/(x(1-b)), 1/(xb)) variates.
    """
    return Sample.from_values(draw_kernel(kind, x, b, rng, n),
                              seed=rng.seed if isinstance(rng, RngStream) else None,
                              stream=rng.index if isinstance(rng, RngStream) else (),
                              law=f"{KernelKind(kind).value}(x={x:g}, b={b:g})")


def draw_kernel(kind: KernelKind, x: float, b: float, rng: RngLike, n: int) -> np.ndarray:
    kind = KernelKind(kind)
    if kind not in (KernelKind.IGAU, KernelKind.RIG):
        raise UnsupportedKindError(f"kernel sampling is only provided for IGau and RIG, not {kind.value}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    params = kernel_parameters(kind, x, b)
    gen = _generator(rng)
    draws = gen.wald(params["mu"], params["lambda"], size=n)
    if kind == KernelKind.RIG:
        draws = 1.0 / draws
    return np.maximum(draws, np.nextafter(0.0, 1.0))


