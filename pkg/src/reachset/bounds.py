"""Finite-sample guarantees for eps-padded hull estimators.

With a covering number D of the input boundary at scale ``eps / (2L)`` and a
lower bound Lambda on the probability of landing within that distance of any
boundary input, the estimate is eps-accurate and conservative except with
probability ``delta_M = D * (1 - Lambda)^M``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import DomainError, InfeasibleError
from .specfun import CapIntersectionQuery, cap_intersection_terms

BISECTION_TOL = 1e-6
# sample counts beyond this are reported as infeasible
MAX_SAMPLES = 2**53


@dataclass(frozen=True)
class Circle2D:
    """Boundary of a disc of the given radius."""

    radius: float


@dataclass(frozen=True)
class RectBoundary2D:
    perimeter: float


@dataclass(frozen=True)
class GeneralBall:
    """Any set of diameter at most ``d_sup`` in dimension ``n`` (box-grid covering)."""

    d_sup: float
    n: int


CoveringDescriptor = Circle2D | RectBoundary2D | GeneralBall


def log_covering_bound(c: CoveringDescriptor, d: float) -> float:
    if not d > 0:
        raise DomainError(f"covering scale must be positive, got {d}")
    if isinstance(c, Circle2D):
        _positive(c.radius, "circle radius")
        return math.log(math.pi * c.radius / d + 1.0)
    if isinstance(c, RectBoundary2D):
        _positive(c.perimeter, "perimeter")
        return math.log(c.perimeter / (2.0 * d) + 1.0)
    if isinstance(c, GeneralBall):
        _positive(c.d_sup, "d_sup")
        if int(c.n) != c.n or c.n < 1:
            raise DomainError(f"dimension must be a positive integer, got {c.n}")
        # a covering number is never below one
        return max(0.0, c.n * math.log(2.0 * c.d_sup * math.sqrt(c.n) / d))
    raise DomainError(f"unknown covering descriptor {c!r}")


def covering_bound(c: CoveringDescriptor, d: float) -> float:
    """Upper bound on the number of radius-``d`` balls needed to cover the boundary.

    Circle of radius R: ``pi R / d + 1``. Rectangle boundary of perimeter P:
    ``P / (2d) + 1``. General set: ``(2 d_sup sqrt(n) / d)^n``.
    """
    if isinstance(c, Circle2D):
        log_covering_bound(c, d)
        return math.pi * c.radius / d + 1.0
    if isinstance(c, RectBoundary2D):
        log_covering_bound(c, d)
        return c.perimeter / (2.0 * d) + 1.0
    return math.exp(log_covering_bound(c, d))


def _positive(x, name):
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"{name} must be positive, got {x}")


@dataclass(frozen=True)
class DirectLambda:
    value: float


@dataclass(frozen=True)
class LensLambda:
    """Lambda = p0 * vol(B(0, eps/2L) ∩ B((r, 0, ..), r)) for r-convex input complements."""

    p: int
    r: float
    p0: float


@dataclass(frozen=True)
class BoundSpec:
    eps: float
    L: float
    covering: CoveringDescriptor
    lambda_source: DirectLambda | LensLambda
    # the guarantee also needs the output boundary to be the image of the input
    # boundary; this is not checked, only carried along
    assumes_boundary_image: bool = True

    def __post_init__(self):
        _positive(self.eps, "eps")
        _positive(self.L, "L")

    @property
    def scale(self) -> float:
        return self.eps / (2.0 * self.L)


@dataclass(frozen=True)
class BoundResult:
    D: float
    Lambda: float
    delta_M: float | None = None
    M: int | None = None
    M_min: int | None = None
    eps_guaranteed: float | None = None


def coverage_lambda(spec: BoundSpec) -> float:
    """Lambda for ``spec``; raises if it is not a probability in (0, 1)."""
    src = spec.lambda_source
    if isinstance(src, DirectLambda):
        lam = float(src.value)
    elif isinstance(src, LensLambda):
        _positive(src.p0, "p0")
        vol = cap_intersection_terms(CapIntersectionQuery(src.p, spec.scale, src.r)).volume
        lam = src.p0 * vol
    else:
        raise DomainError(f"unknown lambda source {src!r}")
    if not 0 < lam < 1:
        raise DomainError(f"coverage constant Lambda={lam} is not in (0, 1); the guarantee is degenerate")
    return lam


def log_delta_m(spec: BoundSpec, M: int) -> float:
    if int(M) != M or M < 0:
        raise DomainError(f"M must be a nonnegative integer, got {M}")
    lam = coverage_lambda(spec)
    return log_covering_bound(spec.covering, spec.scale) + M * math.log1p(-lam)


def delta_m(spec: BoundSpec, M: int) -> float:
    """Failure probability bound ``D (1 - Lambda)^M``; values above 1 are vacuous but returned as is."""
    if int(M) != M or M < 0:
        raise DomainError(f"M must be a nonnegative integer, got {M}")
    D = covering_bound(spec.covering, spec.scale)
    lam = coverage_lambda(spec)
    if M == 0:
        return D
    return D * math.exp(M * math.log1p(-lam))


def min_samples(spec: BoundSpec, delta_target: float) -> int:
    """Smallest M with ``delta_m(spec, M) <= delta_target``."""
    if not 0 < delta_target or not math.isfinite(delta_target):
        raise DomainError(f"delta_target must be positive, got {delta_target}")
    D = covering_bound(spec.covering, spec.scale)
    lam = coverage_lambda(spec)
    if delta_target >= D:
        return 0
    estimate = (math.log(delta_target) - math.log(D)) / math.log1p(-lam)
    if not estimate < MAX_SAMPLES:
        raise InfeasibleError(f"delta={delta_target} needs about {estimate:.3g} samples (Lambda={lam:g})",
                              bracket=(0, MAX_SAMPLES), values=(D, delta_target))
    M = max(0, math.ceil(estimate))
    # guard the ceiling against rounding in either direction
    while delta_m(spec, M) > delta_target:
        M += 1
    while M > 0 and delta_m(spec, M - 1) <= delta_target:
        M -= 1
    return M


def bound_result(spec: BoundSpec, M: int | None = None, delta_target: float | None = None) -> BoundResult:
    D = covering_bound(spec.covering, spec.scale)
    lam = coverage_lambda(spec)
    return BoundResult(
        D=D,
        Lambda=lam,
        delta_M=None if M is None else delta_m(spec, M),
        M=M,
        M_min=None if delta_target is None else min_samples(spec, delta_target),
    )


def _log_delta_at(eps, p, r, p0_of_eps, covering, L, M):
    scale = eps / (2.0 * L)
    lam = p0_of_eps(eps) * cap_intersection_terms(CapIntersectionQuery(p, scale, r)).volume
    if lam >= 1.0:
        # every sample lands in every boundary neighbourhood
        return -math.inf
    return log_covering_bound(covering, scale) + M * math.log1p(-lam)


def eps_for_delta(p: int, r: float, p0_of_eps: Callable[[float], float], covering: CoveringDescriptor,
                  L: float, M: int, delta_target: float, tol: float = BISECTION_TOL) -> float:
    """Smallest padding eps whose bound ``delta_M`` reaches ``delta_target``, by bisection.

    ``p0_of_eps`` may depend on eps (the Beta-radial density ratio does).
    The search starts on ``[1e-8, 4 L r]`` and doubles the upper end while it
    is still infeasible.
    """
    _positive(r, "r")
    _positive(L, "L")
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")
    if not 0 < delta_target < 1:
        raise DomainError(f"delta_target must be in (0, 1), got {delta_target}")
    target = math.log(delta_target)

    def feasible(eps):
        return _log_delta_at(eps, p, r, p0_of_eps, covering, L, M) <= target

    lo, hi = 1e-8, 4.0 * L * r
    if feasible(lo):
        return lo
    for _ in range(60):
        if feasible(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InfeasibleError(f"no eps in [1e-8, {hi:g}] achieves delta={delta_target}",
                              bracket=(1e-8, hi),
                              values=(_log_delta_at(1e-8, p, r, p0_of_eps, covering, L, M),
                                      _log_delta_at(hi, p, r, p0_of_eps, covering, L, M)))
    while hi - lo > tol * min(1.0, hi) * 1e-3 and hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi
