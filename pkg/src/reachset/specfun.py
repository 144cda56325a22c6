"""Special functions and ball/cap volumes used by the sampling bounds.

Volumes are assembled in log space so that dimensions in the hundreds do not
overflow the gamma function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NumericalError

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAX_ITER = 100_000


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"ln_gamma requires a finite x > 0, got {x}")
    return math.lgamma(x)


def _beta_cf(x: float, a: float, b: float) -> float:
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericalError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def incomplete_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Evaluates the continued fraction on whichever side of the mean
    ``(a + 1) / (a + b + 2)`` it converges fastest, using
    ``I_x(a, b) = 1 - I_{1-x}(b, a)``.
    """
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"incomplete_beta requires a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"incomplete_beta requires 0 <= x <= 1, got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(x, a, b) / a
    return 1.0 - math.exp(log_front) * _beta_cf(1.0 - x, b, a) / b


def log_ball_volume(p: int, r: float) -> float:
    """log of the Lebesgue volume of a p-ball of radius r."""
    _check_dim(p)
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    return 0.5 * p * math.log(math.pi) + p * math.log(r) - math.lgamma(0.5 * p + 1.0)


def ball_volume(p: int, r: float) -> float:
    return math.exp(log_ball_volume(p, r))


def _check_dim(p):
    if int(p) != p or p < 1:
        raise DomainError(f"dimension must be a positive integer, got {p}")


def cap_volume(p: int, r: float, a: float) -> float:
    """Volume of the part of the p-ball of radius ``r`` beyond the hyperplane at signed offset ``a``.

    For ``a >= 0`` this is a cap no larger than a half ball; for ``a < 0`` the
    complementary expression ``half_ball * (2 - I)`` is used.
    """
    _check_dim(p)
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    if abs(a) > r:
        raise DomainError(f"cap offset |a|={abs(a)} exceeds radius {r}")
    log_half = log_ball_volume(p, r) - math.log(2.0)
    ib = incomplete_beta(max(0.0, 1.0 - (a / r) ** 2), 0.5 * (p + 1), 0.5)
    if a >= 0:
        return 0.0 if ib == 0.0 else math.exp(log_half + math.log(ib))
    return math.exp(log_half) * (2.0 - ib)


@dataclass(frozen=True)
class CapIntersectionQuery:
    """Lens B(0, rho) ∩ B((r, 0, ..., 0), r) in dimension p."""

    p: int
    rho: float
    r: float

    def __post_init__(self):
        _check_dim(self.p)
        if not self.r > 0 or not math.isfinite(self.r):
            raise DomainError(f"offset ball radius must be positive, got {self.r}")
        if not self.rho >= 0 or not math.isfinite(self.rho):
            raise DomainError(f"rho must be nonnegative, got {self.rho}")


@dataclass(frozen=True)
class CapIntersectionTerms:
    volume: float
    clamped: bool
    c1: float | None = None
    c2: float | None = None
    small_cap: float | None = None
    large_cap: float | None = None


def cap_intersection_terms(q: CapIntersectionQuery) -> CapIntersectionTerms:
    """Lens volume together with the intermediate constants, for audit output."""
    p, rho, r = q.p, q.rho, q.r
    if rho == 0.0:
        return CapIntersectionTerms(0.0, clamped=True)
    if rho >= 2.0 * r:
        # every point of B(r_vec, r) has norm <= 2r
        return CapIntersectionTerms(ball_volume(p, r), clamped=True)
    # radical hyperplane x_1 = c1; c2 is its offset from the second centre
    c1 = rho * rho / (2.0 * r)
    c2 = (2.0 * r * r - rho * rho) / (2.0 * r)
    small = cap_volume(p, rho, min(c1, rho))
    large = cap_volume(p, r, max(min(c2, r), -r))
    return CapIntersectionTerms(small + large, False, c1, c2, small, large)


def cap_intersection_volume(q: CapIntersectionQuery) -> float:
    return cap_intersection_terms(q).volume
