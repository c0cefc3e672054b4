"""
The ten CDF estimators of the ISE benchmark.

Indices 1..7 are the asymmetric-kernel estimators (Gam, IGam, LN, IGau, RIG,
BS, W), 8 is the ordinary Epanechnikov kernel estimator (OK), 9 the boundary
modified kernel estimator (BK) and 10 the empirical CDF (EDF).
"""
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

import numpy as np

from app.tools.distributions import KernelKind, kernel_survival
from app.tools.errors import DomainError
from app.tools.sample import Sample

ArrayLike = Union[float, np.ndarray]

# doubles per evaluation block (points x window)
_BLOCK = 1 << 21


class EstimatorKind(IntEnum):
    GAM = 1
    IGAM = 2
    LN = 3
    IGAU = 4
    RIG = 5
    BS = 6
    W = 7
    OK = 8
    BK = 9
    EDF = 10

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def kernel(self) -> Optional[KernelKind]:
        return KernelKind(self.label) if self <= EstimatorKind.W else None

    @property
    def is_asymmetric(self) -> bool:
        return self <= EstimatorKind.W

    @classmethod
    def parse(cls, token: Union[int, str, "EstimatorKind"]) -> "EstimatorKind":
        if isinstance(token, cls):
            return token
        text = str(token).strip()
        if text.isdigit():
            try:
                return cls(int(text))
            except ValueError:
                raise DomainError(f"Unknown estimator index {text}; expected 1..10")
        for kind in cls:
            if kind.label.lower() == text.lower().replace("-", ""):
                return kind
        raise DomainError(f"Unknown estimator '{token}'")


_LABELS = {
    EstimatorKind.GAM: "Gam",
    EstimatorKind.IGAM: "IGam",
    EstimatorKind.LN: "LN",
    EstimatorKind.IGAU: "IGau",
    EstimatorKind.RIG: "RIG",
    EstimatorKind.BS: "BS",
    EstimatorKind.W: "W",
    EstimatorKind.OK: "OK",
    EstimatorKind.BK: "BK",
    EstimatorKind.EDF: "EDF",
}


def epanechnikov_cdf(u: ArrayLike) -> ArrayLike:
    """CDF of the Epanechnikov kernel: 1/2 + 3u/4 - u^3/4 on (-1, 1), 0 below, 1 above."""
    v = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    out = 0.5 + 0.75 * v - 0.25 * v ** 3
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class KernelSums:
    """Per-point sums over the Epanechnikov terms K_i(x) = Epa((x - X_i) / s(x))."""
    total: np.ndarray
    squares: np.ndarray
    below: np.ndarray
    count: np.ndarray


def epanechnikov_sums(values: np.ndarray, x: np.ndarray, scale: np.ndarray) -> KernelSums:
    """
    Sum the Epanechnikov CDF terms of a sorted sample at many points.

    Only observations with |x - X_i| < s(x) contribute a fractional term;
    those at or below x - s(x) contribute 1 and are counted directly.

    Args:
        values: Sorted observations
        x: Evaluation points (1-d)
        scale: Bandwidth per point, >= 0 (0 makes every term 0 at x = 0)

    Returns:
        KernelSums with sum K_i, sum K_i^2, sum of K_i over X_i <= x and #{X_i <= x}
    """
    x = np.asarray(x, dtype=float)
    scale = np.asarray(scale, dtype=float)
    lo = np.searchsorted(values, x - scale, side="right")
    hi = np.searchsorted(values, x + scale, side="left")
    count = np.searchsorted(values, x, side="right").astype(float)
    total = lo.astype(float)
    squares = lo.astype(float)
    below = lo.astype(float)
    width = int((hi - lo).max()) if x.size else 0
    if width > 0:
        offsets = np.arange(width)
        rows = max(1, _BLOCK // width)
        last = values.size - 1
        for start in range(0, x.size, rows):
            sl = slice(start, start + rows)
            idx = lo[sl, None] + offsets[None, :]
            inside = idx < hi[sl, None]
            obs = values[np.minimum(idx, last)]
            with np.errstate(divide="ignore", invalid="ignore"):
                u = (x[sl, None] - obs) / scale[sl, None]
            k = np.where(inside, epanechnikov_cdf(np.where(inside, u, 0.0)), 0.0)
            total[sl] += k.sum(axis=1)
            squares[sl] += (k * k).sum(axis=1)
            below[sl] += np.where(obs <= x[sl, None], k, 0.0).sum(axis=1)
    return KernelSums(total=total, squares=squares, below=below, count=count)


@dataclass(frozen=True)
class FittedEstimator:
    """
    An estimator bound to a sample and a bandwidth.

    ``bandwidth`` is ignored (stored as None) for the EDF.
    """
    kind: EstimatorKind
    sample: Sample
    bandwidth: Optional[float] = None

    def __post_init__(self):
        kind = EstimatorKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == EstimatorKind.EDF:
            object.__setattr__(self, "bandwidth", None)
            return
        b = self.bandwidth
        if b is None or not np.isfinite(b) or b <= 0:
            raise DomainError(f"{kind.label} needs a bandwidth > 0, got {b}")
        if kind == EstimatorKind.RIG and b >= 1:
            raise DomainError(f"RIG needs a bandwidth < 1, got {b}")
        object.__setattr__(self, "bandwidth", float(b))

    # ------------------------------------------------------------------
    def evaluate(self, x: ArrayLike) -> ArrayLike:
        """
        Evaluate the estimate at x >= 0 (scalar or array).

        At x = 0 the asymmetric kernels return their right limit: 0, except
        for Gam whose formula stays defined there (mean of exp(-X_i / b)).
        """
        xs = np.asarray(x, dtype=float)
        if np.any(np.isnan(xs)) or np.any(xs < 0):
            raise DomainError(f"{self.kind.label} is evaluated at x >= 0 only, got {x}")
        flat = xs.reshape(-1)
        if self.kind == EstimatorKind.EDF:
            out = np.searchsorted(self.sample.values, flat, side="right") / self.sample.n
        elif self.kind.is_asymmetric:
            out = np.array([self._kernel_at(float(v)) for v in flat])
        else:
            out = epanechnikov_sums(self.sample.values, flat, self.scale(flat)).total / self.sample.n
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)

    def _kernel_at(self, x: float) -> float:
        if x > 0:
            terms = kernel_survival(self.kind.kernel, self.sample.values, x, self.bandwidth)
        elif self.kind == EstimatorKind.GAM:
            terms = np.exp(-self.sample.values / self.bandwidth)
        else:
            return 0.0
        return math.fsum(np.atleast_1d(terms)) / self.sample.n

    def scale(self, x: np.ndarray) -> np.ndarray:
        """Per-point Epanechnikov bandwidth: b for OK, b or x (below b) for BK."""
        b = self.bandwidth
        if self.kind == EstimatorKind.OK:
            return np.full_like(x, b)
        return np.where(x >= b, b, x)

    # ------------------------------------------------------------------
    def kinks(self) -> Optional[np.ndarray]:
        """Points where the estimate is not smooth, or None for the smooth kernels."""
        values = self.sample.values
        if self.kind == EstimatorKind.EDF:
            return values.copy()
        if self.kind.is_asymmetric:
            return None
        b = self.bandwidth
        points = np.concatenate([values - b, values + b])
        if self.kind == EstimatorKind.BK:
            points = np.concatenate([points[points >= b], [b], values[values / 2 < b] / 2])
        return np.unique(points[points > 0])

    def saturation(self) -> Optional[float]:
        """Smallest x from which the estimate is identically 1, when finite."""
        if self.kind == EstimatorKind.EDF:
            return float(self.sample.values[-1])
        if self.kind.is_asymmetric:
            return None
        return float(self.sample.values[-1] + self.bandwidth)


def evaluate(est: FittedEstimator, x: ArrayLike) -> ArrayLike:
    return est.evaluate(x)


def evaluate_bk(sample: Sample, b: float, x: ArrayLike) -> ArrayLike:
    """Boundary modified kernel estimate: bandwidth b for x >= b, shrinking bandwidth x on (0, b)."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise DomainError(f"evaluate_bk needs x > 0, got {x}")
    return FittedEstimator(EstimatorKind.BK, sample, b).evaluate(x)
