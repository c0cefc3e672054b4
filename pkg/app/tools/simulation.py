"""
Configuration and per-replicate work of the ISE benchmark.

A replicate (i, n, k) draws one sample from stream (seed, i, n, k); every
requested estimator sees that same sample, selects its bandwidth and gets its
ISE by quadrature. Failures become flagged records.
"""
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from app.tools.bandwidth import BandwidthGrid, LimitCurve, default_rule, select_bandwidth
from app.tools.distributions import STUDY_DISTRIBUTIONS, KernelKind, RngStream, StudyLaw, study_law
from app.tools.errors import (
    AcdfError,
    ConfigError,
    DomainError,
    EstimationError,
    QuadratureError,
    SelectionError,
)
from app.tools.estimators import EstimatorKind, FittedEstimator
from app.tools.quadrature import QuadratureSpec, ise
from app.tools.sample import Sample

DEFAULT_SEED = 20201215
FORMATS = ("csv", "markdown")
CURVE_POINTS = 200


def _int_tuple(value: Union[str, Iterable], name: str) -> Tuple[int, ...]:
    if isinstance(value, str):
        tokens = [t for t in value.replace(";", ",").split(",") if t.strip()]
    else:
        tokens = list(value)
    try:
        return tuple(int(str(t).strip()) for t in tokens)
    except ValueError:
        raise ConfigError(f"{name}: expected a comma separated list of integers, got {value!r}")


def _estimators(value: Union[str, Iterable]) -> Tuple[EstimatorKind, ...]:
    tokens = value.split(",") if isinstance(value, str) else list(value)
    tokens = [t for t in tokens if str(t).strip()]
    if len(tokens) == 1 and str(tokens[0]).strip().lower() == "all":
        return tuple(EstimatorKind)
    try:
        kinds = [EstimatorKind.parse(t) for t in tokens]
    except DomainError as exc:
        raise ConfigError(str(exc))
    return tuple(sorted(set(kinds)))


def _distributions(value: Union[str, Iterable]) -> Tuple[int, ...]:
    if isinstance(value, str) and value.strip().lower() == "all":
        return tuple(law.index for law in STUDY_DISTRIBUTIONS)
    return tuple(sorted(set(_int_tuple(value, "distributions"))))


def _bool(value: Union[str, bool]) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


@dataclass(frozen=True)
class SimulationConfig:
    """
    Everything one benchmark run depends on.

    Defaults reproduce the full study: M = 1000 replicates of sizes 256
    and 1000 from all eight laws, all ten estimators.
    """
    distributions: Tuple[int, ...] = tuple(range(1, 9))
    sizes: Tuple[int, ...] = (256, 1000)
    replicates: int = 1000
    estimators: Tuple[EstimatorKind, ...] = tuple(EstimatorKind)
    seed: int = DEFAULT_SEED
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    grid_lower: float = 1e-4
    grid_upper: float = 0.9
    grid_per_decade: int = 40
    limit_reps: int = 10 ** 6
    limit_b_probe: float = 1e-4
    limit_richardson: bool = False
    out_dir: str = "results"
    formats: Tuple[str, ...] = ("csv",)
    threads: int = 1
    curves: bool = True

    def __post_init__(self):
        object.__setattr__(self, "distributions", _distributions(self.distributions))
        object.__setattr__(self, "sizes", _int_tuple(self.sizes, "sizes"))
        object.__setattr__(self, "estimators", _estimators(self.estimators))
        formats = (self.formats,) if isinstance(self.formats, str) else tuple(self.formats)
        object.__setattr__(self, "formats", tuple(f.strip() for f in formats))
        if not self.distributions or not self.sizes or not self.estimators:
            raise ConfigError("distributions, sizes and estimators must be nonempty")
        if any(i not in range(1, 9) for i in self.distributions):
            raise ConfigError(f"distribution indices must be in 1..8, got {self.distributions}")
        if any(n < 1 for n in self.sizes):
            raise ConfigError(f"sample sizes must be >= 1, got {self.sizes}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit nonnegative integer, got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        unknown = [f for f in self.formats if f not in FORMATS]
        if unknown or not self.formats:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.formats}")
        try:
            QuadratureSpec(self.abs_tol, self.rel_tol, self.max_subdivisions)
            BandwidthGrid(self.grid_lower, self.grid_upper, self.grid_per_decade)
        except DomainError as exc:
            raise ConfigError(str(exc))

    @property
    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(self.abs_tol, self.rel_tol, self.max_subdivisions)

    @property
    def grid(self) -> BandwidthGrid:
        return BandwidthGrid(self.grid_lower, self.grid_upper, self.grid_per_decade)

    @property
    def laws(self) -> List[StudyLaw]:
        return [study_law(i) for i in self.distributions]

    def needs_limits(self) -> bool:
        return any(k in (EstimatorKind.IGAU, EstimatorKind.RIG) for k in self.estimators)

    def with_overrides(self, **overrides: Any) -> "SimulationConfig":
        values = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **values) if values else self


_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "distributions": str,
    "sizes": str,
    "replicates": int,
    "estimators": str,
    "seed": int,
    "abs_tol": float,
    "rel_tol": float,
    "max_subdivisions": int,
    "grid_lower": float,
    "grid_upper": float,
    "grid_per_decade": int,
    "limit_reps": int,
    "limit_b_probe": float,
    "limit_richardson": _bool,
    "out_dir": str,
    "format": lambda v: tuple(t.strip() for t in v.split(",") if t.strip()),
    "threads": int,
    "curves": _bool,
}


def parse_config_values(values: Mapping[str, Optional[str]]) -> Dict[str, Any]:
    """Convert raw ``key = value`` strings into SimulationConfig keyword arguments."""
    kwargs: Dict[str, Any] = {}
    for key, raw in values.items():
        name = key.strip().lower()
        if name not in _CONVERTERS:
            raise ConfigError(f"unknown configuration key '{key}'")
        if raw is None or not str(raw).strip():
            raise ConfigError(f"configuration key '{key}' has no value")
        try:
            value = _CONVERTERS[name](str(raw).strip())
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}")
        kwargs["formats" if name == "format" else name] = value
    return kwargs


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> SimulationConfig:
    """
    Build a SimulationConfig from an optional ``key = value`` file plus overrides.

    Args:
        path: Config file; ``#`` starts a comment
        **overrides: Values that win over the file (None is ignored)

    Returns:
        SimulationConfig
    """
    kwargs: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        kwargs = parse_config_values(dotenv_values(path, encoding="utf-8"))
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimulationConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc))


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IseRecord:
    dist_index: int
    estimator: EstimatorKind
    n: int
    replicate: int
    ise: float
    bandwidth: Optional[float] = None
    wall_time: float = 0.0
    flag: str = ""

    @property
    def key(self) -> Tuple[int, int, int, int]:
        return self.dist_index, int(self.estimator), self.n, self.replicate

    @property
    def flagged(self) -> bool:
        return bool(self.flag)


def failure_flag(exc: BaseException) -> str:
    if isinstance(exc, QuadratureError):
        return "quadrature"
    if isinstance(exc, EstimationError):
        return "estimation"
    if isinstance(exc, SelectionError):
        return "selection"
    return "domain"


def replicate_stream(config: SimulationConfig, i: int, n: int, k: int) -> RngStream:
    return RngStream(config.seed, (i, n, k))


def draw_replicate(config: SimulationConfig, i: int, n: int, k: int) -> Sample:
    return study_law(i).distribution.sample(replicate_stream(config, i, n, k), n)


Limits = Mapping[KernelKind, LimitCurve]


def fit_estimator(config: SimulationConfig, kind: EstimatorKind, sample: Sample,
                  limits: Optional[Limits] = None) -> FittedEstimator:
    rule = default_rule(kind, config.grid)
    curve = limits.get(kind.kernel) if limits and kind.kernel is not None else None
    b = select_bandwidth(kind, sample, rule, curve, config.quadrature)
    return FittedEstimator(kind, sample, b)


def simulate_cell(config: SimulationConfig, i: int, n: int, k: int, limits: Optional[Limits] = None,
                  on_failure: Optional[Callable[[IseRecord, BaseException], None]] = None) -> List[IseRecord]:
    """
    All estimator records of replicate k for law i and size n.

    Args:
        config: Run configuration
        i: Study law index
        n: Sample size
        k: Replicate index
        limits: c(x) curves for IGau and RIG, keyed by kernel
        on_failure: Called with each flagged record and its exception

    Returns:
        One IseRecord per configured estimator, in estimator order
    """
    law = study_law(i)
    sample = draw_replicate(config, i, n, k)
    records = []
    for kind in config.estimators:
        start = time.perf_counter()
        b = None
        try:
            est = fit_estimator(config, kind, sample, limits)
            b = est.bandwidth
            value = ise(est, law.distribution, config.quadrature)
            record = IseRecord(i, kind, n, k, value, b, time.perf_counter() - start)
        except AcdfError as exc:
            record = IseRecord(i, kind, n, k, math.nan, b, time.perf_counter() - start, failure_flag(exc))
            if on_failure is not None:
                on_failure(record, exc)
        records.append(record)
    return records


def plan_cells(config: SimulationConfig) -> List[Tuple[int, int, int]]:
    return [(i, n, k) for i in config.distributions for n in config.sizes for k in range(config.replicates)]


# ---------------------------------------------------------------------------
# curve data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveRow:
    dist_index: int
    estimator: EstimatorKind
    n: int
    x: float
    estimate: float
    truth: float


def curve_grid(law: StudyLaw, points: int = CURVE_POINTS) -> np.ndarray:
    """Evaluation points on [0, q_0.99] of the law."""
    upper = float(law.distribution.frozen().ppf(0.99))
    return np.linspace(0.0, upper, points)


def curve_rows(config: SimulationConfig, i: int, n: int, limits: Optional[Limits] = None) -> List[CurveRow]:
    """Every estimator's estimate and the true CDF on the first replicate of (i, n); failed estimators are skipped."""
    law = study_law(i)
    sample = draw_replicate(config, i, n, 0)
    xs = curve_grid(law)
    truth = np.asarray(law.distribution.cdf(xs))
    rows = []
    for kind in config.estimators:
        try:
            values = np.asarray(fit_estimator(config, kind, sample, limits).evaluate(xs))
        except AcdfError:
            continue
        rows.extend(CurveRow(i, kind, n, float(x), float(v), float(t)) for x, v, t in zip(xs, values, truth))
    return rows
