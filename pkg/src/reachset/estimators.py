"""Sampling-based reachable set estimators."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .domains import InputSet, SamplingSpec, sample
from .errors import DomainError
from .geometry import Ball, HullEstimate, as_cloud, as_point, convex_hull, hull_distances, min_enclosing_ball
from .maps import ReachMap


@dataclass(frozen=True)
class RandupResult:
    hull: HullEstimate
    samples_out: np.ndarray
    elapsed: float
    seed: int


@dataclass(frozen=True)
class BallResult:
    ball: Ball
    samples_out: np.ndarray
    elapsed: float
    seed: int


@dataclass(frozen=True)
class UnionOfBalls:
    centers: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "centers", as_cloud(self.centers))
        if not self.radius >= 0:
            raise DomainError(f"radius must be nonnegative, got {self.radius}")


def _propagate(f: ReachMap, input_set: InputSet, spec: SamplingSpec, M: int, eps: float):
    if not eps >= 0 or not np.isfinite(eps):
        raise DomainError(f"eps must be a finite nonnegative number, got {eps}")
    if f.in_dim != input_set.dim:
        raise DomainError(f"map input dimension {f.in_dim} != input set dimension {input_set.dim}")
    return f(sample(input_set, spec, M))


def randup(f: ReachMap, input_set: InputSet, spec: SamplingSpec, M: int, eps: float) -> RandupResult:
    """Sample M inputs, push them through ``f`` and return the eps-padded hull of the outputs."""
    start = time.perf_counter()
    ys = _propagate(f, input_set, spec, M, eps)
    hull = convex_hull(ys).padded(eps)
    return RandupResult(hull, ys, time.perf_counter() - start, spec.seed)


def gotube_ball(f: ReachMap, input_set: InputSet, spec: SamplingSpec, M: int, eps: float) -> BallResult:
    """Same pipeline as :func:`randup` with the hull replaced by the minimal enclosing ball."""
    start = time.perf_counter()
    ys = _propagate(f, input_set, spec, M, eps)
    mb = min_enclosing_ball(ys)
    return BallResult(Ball(mb.center, mb.radius + eps), ys, time.perf_counter() - start, spec.seed)


def union_contains(u: UnionOfBalls, q) -> bool:
    q = as_point(q, u.centers.shape[1])
    return bool(np.min(np.linalg.norm(u.centers - q, axis=1)) <= u.radius)


def empirical_coverage(estimate: RandupResult | HullEstimate, truth_boundary, tol: float = 1e-9) -> float:
    """Fraction of ground-truth points inside the padded estimate (up to ``tol``)."""
    hull = estimate.hull if isinstance(estimate, RandupResult) else estimate
    truth = np.asarray(truth_boundary, dtype=float)
    if truth.size == 0:
        raise DomainError("ground-truth cloud is empty")
    d = hull_distances(truth, hull)
    return float(np.mean(d <= tol))
