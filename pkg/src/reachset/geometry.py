"""Convex geometry on point clouds.

Point clouds are ``(M, dim)`` float arrays. Hulls are stored by their vertex
sets: exactly in dimension 1 and 2 (counter-clockwise, no collinear triples),
and implicitly as the deduplicated cloud in dimension 3 and higher, where every
query goes through a nearest-point solver instead of a facet description.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .errors import DomainError, NumericalError

PROJECTION_TOL = 1e-9
PROJECTION_MAX_ITER = 10_000
GRID_DIRECTIONS_2D = 4096
GRID_DIRECTIONS_ND = 65536

# upper bound on (points x edges) per vectorised distance block
_BLOCK = 2_000_000


def as_cloud(points, dim=None) -> np.ndarray:
    """Validate and return ``points`` as a finite ``(M, dim)`` float array."""
    try:
        arr = np.asarray(points, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"points are not a homogeneous numeric array: {exc}") from None
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DomainError(f"expected a (M, dim) array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DomainError("point cloud is empty")
    if dim is not None and arr.shape[1] != dim:
        raise DomainError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("point coordinates must be finite")
    return arr


def as_point(q, dim=None) -> np.ndarray:
    arr = np.asarray(q, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DomainError("point has no coordinates")
    if dim is not None and arr.size != dim:
        raise DomainError(f"dimension mismatch: expected {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("point coordinates must be finite")
    return arr


@dataclass(frozen=True)
class HullEstimate:
    """Convex hull of a point cloud, Minkowski-padded by a closed ball of radius ``padding``."""

    vertices: np.ndarray
    padding: float = 0.0

    def __post_init__(self):
        verts = as_cloud(self.vertices)
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        if not np.isfinite(self.padding) or self.padding < 0:
            raise DomainError(f"padding must be a finite nonnegative number, got {self.padding}")
        object.__setattr__(self, "padding", float(self.padding))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def padded(self, eps: float) -> "HullEstimate":
        return HullEstimate(self.vertices, eps)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float = field(default=0.0)

    def __post_init__(self):
        c = as_point(self.center)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not np.isfinite(self.radius) or self.radius < 0:
            raise DomainError(f"radius must be nonnegative, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def as_hull(self) -> HullEstimate:
        """The ball viewed as a single point padded by the radius."""
        return HullEstimate(self.center[None, :], self.radius)


# ---------------------------------------------------------------------------
# hulls


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _prefilter_2d(pts: np.ndarray) -> np.ndarray:
    """Drop points strictly inside the octagon spanned by 8 directional extremes."""
    if len(pts) < 64:
        return pts
    angles = np.arange(8) * (np.pi / 4)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    idx = np.argmax(pts @ dirs.T, axis=0)
    poly = pts[idx]
    # directional maxima come out in angular (ccw) order; drop repeats
    keep = [0]
    for k in range(1, 8):
        if idx[k] != idx[keep[-1]]:
            keep.append(k)
    if len(keep) > 1 and idx[keep[-1]] == idx[keep[0]]:
        keep.pop()
    poly = poly[keep]
    if len(poly) < 3:
        return pts
    edge = np.roll(poly, -1, axis=0) - poly
    rel = pts[:, None, :] - poly[None, :, :]
    cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
    strictly_inside = np.all(cross > 0, axis=1)
    return pts[~strictly_inside]


def _monotone_chain(pts: np.ndarray) -> np.ndarray:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    # exact duplicates would break the strict turn test
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    if len(pts) == 1:
        return pts
    plist = pts.tolist()
    lower: list = []
    for p in plist:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(plist):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=float)


def convex_hull(points) -> HullEstimate:
    """Unpadded convex hull of a point cloud.

    In dimension 2 the vertices are the extreme points in counter-clockwise
    order starting from the lexicographically smallest one. Collinear clouds
    give their two endpoints and a repeated point gives a single vertex.
    """
    pts = as_cloud(points)
    dim = pts.shape[1]
    if dim == 1:
        lo, hi = pts.min(), pts.max()
        verts = np.array([[lo]]) if lo == hi else np.array([[lo], [hi]])
    elif dim == 2:
        verts = _monotone_chain(_prefilter_2d(pts))
    else:
        verts = np.unique(pts, axis=0)
    return HullEstimate(verts, 0.0)


# ---------------------------------------------------------------------------
# distances


def _segment_distances(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from each row of ``q`` to each segment ``[a_j, b_j]``: shape (Q, E)."""
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    rel = q[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("qej,ej->qe", rel, ab) / denom, 0.0, 1.0)
    diff = rel - t[:, :, None] * ab[None, :, :]
    return np.sqrt(np.einsum("qej,qej->qe", diff, diff))


def _edge_sweep(qx, qy, ax, ay, ex, ey):
    """Squared distance to a single edge and the inside-halfplane test, vectorised over points."""
    rx, ry = qx - ax, qy - ay
    ee = ex * ex + ey * ey
    t = (rx * ex + ry * ey) / ee if ee > 0 else np.zeros_like(rx)
    np.clip(t, 0.0, 1.0, out=t)
    dx, dy = rx - t * ex, ry - t * ey
    return dx * dx + dy * dy, ex * ry - ey * rx >= 0


def _polygon_distances(q: np.ndarray, verts: np.ndarray) -> np.ndarray:
    n = len(verts)
    if n == 1:
        return np.linalg.norm(q - verts[0], axis=1)
    if n == 2:
        return _segment_distances(q, verts[:1], verts[1:])[:, 0]
    a = verts
    edge = np.roll(verts, -1, axis=0) - verts
    if n <= len(q):
        qx, qy = q[:, 0], q[:, 1]
        best = np.full(len(q), np.inf)
        inside = np.ones(len(q), dtype=bool)
        for j in range(n):
            d2, left = _edge_sweep(qx, qy, a[j, 0], a[j, 1], edge[j, 0], edge[j, 1])
            np.minimum(best, d2, out=best)
            inside &= left
        out = np.sqrt(best)
        out[inside] = 0.0
        return out
    # few queries against many edges: sweep over queries instead
    ee = np.einsum("ij,ij->i", edge, edge)
    ee = np.where(ee > 0, ee, 1.0)
    out = np.empty(len(q))
    for i, row in enumerate(q):
        rel = row - a
        if np.all(edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0] >= 0):
            out[i] = 0.0
            continue
        t = np.clip(np.einsum("ij,ij->i", rel, edge) / ee, 0.0, 1.0)
        diff = rel - t[:, None] * edge
        out[i] = np.sqrt(np.min(np.einsum("ij,ij->i", diff, diff)))
    return out


def min_norm_point(points, tol: float = PROJECTION_TOL, max_iter: int = PROJECTION_MAX_ITER):
    """Nearest point to the origin in the convex hull of ``points`` (Wolfe's method).

    Returns ``(x, weights)`` with ``x = weights @ points`` and ``weights`` in
    the probability simplex. Raises :class:`NumericalError` if the iteration
    cap is hit before the optimality gap drops below ``tol``.
    """
    P = as_cloud(points)
    n = len(P)
    sq = np.einsum("ij,ij->i", P, P)
    scale = max(float(sq.max()), 1e-300)
    j0 = int(np.argmin(sq))
    active = [j0]
    lam = np.array([1.0])
    x = P[j0].copy()
    for _ in range(max_iter):
        xx = float(x @ x)
        scores = P @ x
        j = int(np.argmin(scores))
        # optimality: <x, p_j> >= |x|^2 for every p_j
        if xx - scores[j] <= tol * scale or j in active:
            return x, _expand(lam, active, n)
        active.append(j)
        lam = np.append(lam, 0.0)
        for _ in range(max_iter):
            S = P[active]
            k = len(active)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = S @ S.T
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            mu = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
            if np.all(mu > 1e-14):
                lam = mu
                x = mu @ S
                break
            neg = mu <= 1e-14
            theta = np.min(lam[neg] / (lam[neg] - mu[neg]))
            lam = lam + theta * (mu - lam)
            drop = lam <= 1e-14
            # guarantee progress even when theta hits zero exactly
            if not np.any(drop):
                drop[np.argmin(np.where(neg, lam, np.inf))] = True
            active = [a for a, d in zip(active, drop) if not d]
            lam = lam[~drop]
            lam = lam / lam.sum()
            x = lam @ P[active]
        else:
            raise NumericalError("min-norm point inner loop did not converge")
    raise NumericalError(f"min-norm point did not converge within {max_iter} iterations")


def _expand(lam, active, n):
    w = np.zeros(n)
    w[active] = lam
    return w


def _unpadded_distances(q: np.ndarray, hull: HullEstimate) -> np.ndarray:
    verts = hull.vertices
    if hull.dim == 1:
        lo, hi = verts.min(), verts.max()
        return np.maximum(np.maximum(lo - q[:, 0], q[:, 0] - hi), 0.0)
    if hull.dim == 2:
        return _polygon_distances(q, verts)
    out = np.empty(len(q))
    for i, row in enumerate(q):
        x, _ = min_norm_point(verts - row)
        out[i] = np.sqrt(x @ x)
    return out


def hull_distances(points, hull: HullEstimate) -> np.ndarray:
    """Vectorised :func:`point_to_hull_distance` over the rows of ``points``."""
    q = as_cloud(points, hull.dim)
    return np.maximum(_unpadded_distances(q, hull) - hull.padding, 0.0)


def point_to_hull_distance(q, hull: HullEstimate) -> float:
    """Euclidean distance from ``q`` to the padded hull (0 inside)."""
    q = as_point(q, hull.dim)
    return float(hull_distances(q[None, :], hull)[0])


def hull_contains(hull: HullEstimate, q, tol: float = 1e-9) -> bool:
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    return point_to_hull_distance(q, hull) <= tol


# ---------------------------------------------------------------------------
# Hausdorff distance


def unit_directions(dim: int, count: int | None = None) -> np.ndarray:
    """Deterministic direction grid on the unit sphere.

    Equally spaced angles in the plane; scrambled-Sobol points pushed through
    the normal quantile and normalised in higher dimension.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        count = count or GRID_DIRECTIONS_2D
        t = np.arange(count) * (2 * np.pi / count)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    count = count or GRID_DIRECTIONS_ND
    u = qmc.Sobol(d=dim, scramble=True, seed=12345).random(count)
    z = _normal.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def support_function(hull: HullEstimate, directions: np.ndarray) -> np.ndarray:
    """h(u) = max_v <u, v> + padding for each row u of ``directions``."""
    out = np.full(len(directions), -np.inf)
    step = max(1, _BLOCK // len(hull.vertices))
    for start in range(0, len(directions), step):
        block = directions[start:start + step]
        out[start:start + step] = (block @ hull.vertices.T).max(axis=1)
    return out + hull.padding


def hausdorff_is_exact(a: HullEstimate, b: HullEstimate) -> bool:
    """Whether :func:`hausdorff_hulls` evaluates ``(a, b)`` exactly rather than on a grid."""
    return a.padding == 0 and b.padding == 0


def hausdorff_hulls(a: HullEstimate, b: HullEstimate, directions: int | None = None) -> float:
    """Hausdorff distance between two (padded) convex hulls.

    Unpadded pairs are exact: distance to a convex set is convex, so the
    directed distance peaks at a vertex. Padded pairs use the support
    function formula ``sup_u |h_a(u) - h_b(u)|`` over a direction grid and are
    therefore approximate; see :func:`hausdorff_is_exact`.
    """
    if a.dim != b.dim:
        raise DomainError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if hausdorff_is_exact(a, b):
        return float(max(_unpadded_distances(a.vertices, b).max(),
                         _unpadded_distances(b.vertices, a).max()))
    dirs = unit_directions(a.dim, directions)
    return float(np.max(np.abs(support_function(a, dirs) - support_function(b, dirs))))


# ---------------------------------------------------------------------------
# minimal enclosing ball


def _circumball(support: np.ndarray):
    """Smallest ball with every point of ``support`` on its boundary."""
    p0 = support[0]
    if len(support) == 1:
        return p0.copy(), 0.0
    A = support[1:] - p0
    gram = A @ A.T
    lam = np.linalg.lstsq(2.0 * gram, np.diag(gram), rcond=None)[0]
    center = p0 + lam @ A
    return center, float(np.linalg.norm(center - p0))


def _welzl(P: np.ndarray, end: int, support: list, rtol: float):
    dim = P.shape[1]
    if support:
        center, radius = _circumball(np.array(support))
    else:
        center, radius = None, -1.0
    if len(support) == dim + 1:
        return center, radius
    start = 0
    while start < end:
        if center is None:
            k = start
        else:
            d2 = np.einsum("ij,ij->i", P[start:end] - center, P[start:end] - center)
            bound = (radius * (1 + rtol) + rtol) ** 2
            outside = np.flatnonzero(d2 > bound)
            if outside.size == 0:
                break
            k = start + int(outside[0])
        pk = P[k].copy()
        center, radius = _welzl(P, k, support + [pk], rtol)
        # move-to-front: the violator is likely to constrain later balls too
        P[1:k + 1] = P[:k]
        P[0] = pk
        start = k + 1
    return center, radius


def min_enclosing_ball(points, rtol: float = 1e-12) -> Ball:
    """Smallest enclosing ball by Welzl's randomised incremental algorithm.

    The recursion runs over the support set only (depth at most dim + 1), the
    scan over points is vectorised, violators are moved to the front, and the
    shuffle uses a fixed seed so the result is deterministic.
    """
    pts = as_cloud(points)
    pts = np.unique(pts, axis=0)
    perm = np.random.default_rng(0).permutation(len(pts))
    center, radius = _welzl(pts[perm].copy(), len(pts), [], rtol)
    # numerical slack: make sure every point is covered
    radius = max(radius, float(np.sqrt(np.max(np.sum((pts - center) ** 2, axis=1)))))
    return Ball(center, radius)
