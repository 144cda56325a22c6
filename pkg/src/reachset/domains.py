"""Input sets and the sampling distributions placed on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .geometry import as_point


@dataclass(frozen=True)
class BallSet:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in as_point(self.center)))
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def r_convexity(self) -> float:
        """Radius r for which the complement is r-convex: the ball's own radius."""
        return self.radius

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) <= self.radius * (1 + tol)

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class RectangleSet:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_p, hi_p]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = as_point(self.lo), as_point(self.hi)
        if lo.size != hi.size:
            raise DomainError("rectangle corners have different dimensions")
        if not np.all(lo < hi):
            raise DomainError(f"rectangle needs lo < hi componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lo", tuple(lo.tolist()))
        object.__setattr__(self, "hi", tuple(hi.tolist()))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def r_convexity(self):
        return None

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def surface_measure(self) -> float:
        """Boundary measure: the perimeter in the plane, 2 in dimension 1."""
        s = self.sides
        if self.dim == 1:
            return 2.0
        return float(2 * sum(np.prod(np.delete(s, k)) for k in range(self.dim)))

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= np.asarray(self.lo) - tol) & (pts <= np.asarray(self.hi) + tol), axis=1)

    def to_dict(self) -> dict:
        return {"kind": "rectangle", "lo": list(self.lo), "hi": list(self.hi)}


InputSet = BallSet | RectangleSet


@dataclass(frozen=True)
class UniformVolume:
    seed: int = 0


@dataclass(frozen=True)
class UniformBoundary:
    seed: int = 0


@dataclass(frozen=True)
class BetaRadial:
    """Ball sampler whose radial CDF variable follows Beta(alpha, 1); alpha = 1 is uniform."""

    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 1 or not math.isfinite(self.alpha):
            raise DomainError(f"alpha must be >= 1, got {self.alpha}")


SamplingSpec = UniformVolume | UniformBoundary | BetaRadial


def with_seed(spec: SamplingSpec, seed: int) -> SamplingSpec:
    return replace(spec, seed=int(seed))


def _check_seed(seed):
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")


def _ball_points(rng, s: BallSet, radial_u: np.ndarray, M: int) -> np.ndarray:
    p = s.dim
    z = rng.standard_normal((M, p))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    radius = radial_u ** (1.0 / p)
    return np.asarray(s.center) + s.radius * radius[:, None] * z


def _rectangle_boundary(rng, s: RectangleSet, M: int) -> np.ndarray:
    p = s.dim
    lo, hi, sides = np.asarray(s.lo), np.asarray(s.hi), s.sides
    if p == 1:
        pick = rng.integers(0, 2, size=M)
        return np.where(pick == 0, lo[0], hi[0])[:, None]
    # 2p faces; face 2k / 2k+1 fixes coordinate k at lo / hi
    face_measure = np.repeat([np.prod(np.delete(sides, k)) for k in range(p)], 2)
    face = rng.choice(2 * p, size=M, p=face_measure / face_measure.sum())
    x = lo + sides * rng.random((M, p))
    axis = face // 2
    rows = np.arange(M)
    x[rows, axis] = np.where(face % 2 == 0, lo[axis], hi[axis])
    return x


def sample(input_set: InputSet, spec: SamplingSpec, M: int) -> np.ndarray:
    """Draw ``M`` i.i.d. inputs; bit-identical output for identical arguments.

    Ball, uniform volume: radius ``u ** (1/p)`` with ``u ~ Unif(0, 1)`` times a
    normalised Gaussian direction. ``BetaRadial`` swaps ``u`` for a
    Beta(alpha, 1) draw ``v ** (1/alpha)``.
    """
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")
    M = int(M)
    _check_seed(spec.seed)
    rng = np.random.default_rng(int(spec.seed))
    if isinstance(input_set, BallSet):
        if isinstance(spec, UniformBoundary):
            return _ball_points(rng, input_set, np.ones(M), M)
        u = rng.random(M)
        if isinstance(spec, BetaRadial):
            u = u ** (1.0 / spec.alpha)
        return _ball_points(rng, input_set, u, M)
    if isinstance(input_set, RectangleSet):
        if isinstance(spec, BetaRadial):
            raise DomainError("BetaRadial sampling is only defined on ball input sets")
        if isinstance(spec, UniformBoundary):
            return _rectangle_boundary(rng, input_set, M)
        lo, hi = np.asarray(input_set.lo), np.asarray(input_set.hi)
        return lo + (hi - lo) * rng.random((M, input_set.dim))
    raise DomainError(f"unsupported input set {input_set!r}")


def boundary_density_constant(input_set: BallSet, spec: BetaRadial, eps_bar: float) -> float:
    """Density ratio p0 of the Beta-radial sampler against uniform sampling near the boundary.

    Ratio of the probabilities that each sampler lands in the outer shell of
    relative width ``eps_bar / radius``:
    ``(1 - (1-e)^(p*alpha)) / (1 - (1-e)^p)``. This is the ratio against the
    uniform sampler, not a bound on the absolute density.
    """
    if not isinstance(input_set, BallSet):
        raise DomainError("boundary_density_constant needs a ball input set")
    if not isinstance(spec, (BetaRadial, UniformVolume)):
        raise DomainError("boundary_density_constant needs a BetaRadial or UniformVolume spec")
    alpha = spec.alpha if isinstance(spec, BetaRadial) else 1.0
    if not eps_bar > 0:
        raise DomainError(f"eps_bar must be positive, got {eps_bar}")
    if eps_bar > input_set.radius:
        raise DomainError(f"eps_bar={eps_bar} exceeds the ball radius {input_set.radius}")
    if alpha == 1.0 or eps_bar == input_set.radius:
        # the shell is the whole ball: both probabilities are 1
        return 1.0
    p = input_set.dim
    log_inner = math.log1p(-eps_bar / input_set.radius)
    return math.expm1(p * alpha * log_inner) / math.expm1(p * log_inner)


def boundary_coverage_constant(input_set: RectangleSet, half_width: float) -> float:
    """Probability that perimeter-uniform sampling hits a boundary arc of length ``2 * half_width``.

    Corner overlaps are ignored, so this is a lower bound.
    """
    if not isinstance(input_set, RectangleSet) or input_set.dim != 2:
        raise DomainError("boundary_coverage_constant needs a 2-D rectangle")
    if not half_width > 0:
        raise DomainError(f"half_width must be positive, got {half_width}")
    if half_width >= input_set.sides.min() / 2:
        raise DomainError(f"half_width={half_width} must be below half the shortest side "
                          f"({input_set.sides.min() / 2})")
    return 2.0 * half_width / input_set.surface_measure


def input_set_from_dict(d: dict) -> InputSet:
    kind = d.get("kind")
    try:
        if kind == "ball":
            return BallSet(tuple(d["center"]), float(d["radius"]))
        if kind == "rectangle":
            return RectangleSet(tuple(d["lo"]), tuple(d["hi"]))
    except KeyError as exc:
        raise DomainError(f"input set is missing field {exc}") from None
    raise DomainError(f"unknown input set kind {kind!r}")


def sampling_from_dict(d: dict, seed: int = 0) -> SamplingSpec:
    kind = d.get("kind", "uniform")
    seed = int(d.get("seed", seed))
    if kind == "uniform":
        return UniformVolume(seed)
    if kind == "boundary":
        return UniformBoundary(seed)
    if kind == "beta":
        return BetaRadial(float(d.get("alpha", 1.0)), seed)
    raise DomainError(f"unknown sampling kind {kind!r}")


def sampling_to_dict(spec: SamplingSpec) -> dict:
    if isinstance(spec, BetaRadial):
        return {"kind": "beta", "alpha": spec.alpha, "seed": spec.seed}
    kind = "boundary" if isinstance(spec, UniformBoundary) else "uniform"
    return {"kind": kind, "seed": spec.seed}
