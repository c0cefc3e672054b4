"""
Special functions used by the kernel survival functions and bandwidth formulas.

Thin, domain-checked wrappers over ``scipy.special``. Every function accepts a
scalar or an array and returns the same shape (a float for scalar input).
"""
from typing import Union

import numpy as np
from scipy import special

from app.tools.errors import DomainError

ArrayLike = Union[float, np.ndarray]


def _as_output(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def _require_positive(name: str, value: np.ndarray) -> None:
    if np.any(np.isnan(value)) or np.any(value <= 0):
        raise DomainError(f"{name} must be > 0, got {value}")


def ln_gamma(alpha: ArrayLike) -> ArrayLike:
    """Natural log of the gamma function for alpha > 0."""
    a = np.asarray(alpha, dtype=float)
    _require_positive("alpha", a)
    return _as_output(special.gammaln(a))


def reg_upper_inc_gamma(alpha: ArrayLike, z: ArrayLike) -> ArrayLike:
    """
    Regularized upper incomplete gamma function Q(alpha, z) = Gamma(alpha, z) / Gamma(alpha).

    Args:
        alpha: Shape, strictly positive
        z: Lower integration limit, nonnegative (``inf`` allowed, giving 0)

    Returns:
        Q(alpha, z) in [0, 1]
    """
    a = np.asarray(alpha, dtype=float)
    x = np.asarray(z, dtype=float)
    _require_positive("alpha", a)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise DomainError(f"z must be >= 0, got {z}")
    return _as_output(special.gammaincc(a, x))


def reg_lower_inc_gamma(alpha: ArrayLike, z: ArrayLike) -> ArrayLike:
    """P(alpha, z) = 1 - Q(alpha, z), evaluated directly to keep accuracy near 0."""
    a = np.asarray(alpha, dtype=float)
    x = np.asarray(z, dtype=float)
    _require_positive("alpha", a)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise DomainError(f"z must be >= 0, got {z}")
    return _as_output(special.gammainc(a, x))


def std_normal_cdf(z: ArrayLike) -> ArrayLike:
    # ndtr is evaluated through erfc in the tails, so Phi(z) + Phi(-z) == 1 to machine precision.
    return _as_output(special.ndtr(np.asarray(z, dtype=float)))


def log_std_normal_cdf(z: ArrayLike) -> ArrayLike:
    return _as_output(special.log_ndtr(np.asarray(z, dtype=float)))


def digamma(alpha: ArrayLike) -> ArrayLike:
    """Digamma function psi(alpha) for alpha > 0."""
    a = np.asarray(alpha, dtype=float)
    _require_positive("alpha", a)
    return _as_output(special.digamma(a))


def trigamma(alpha: ArrayLike) -> ArrayLike:
    a = np.asarray(alpha, dtype=float)
    _require_positive("alpha", a)
    return _as_output(special.polygamma(1, a))
