"""Reachability maps, their Jacobians and a sampled Lipschitz estimate.

All maps evaluate either a single point ``(p,)`` or a batch ``(M, p)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domains import InputSet, SamplingSpec, UniformVolume, sample
from .errors import DomainError


def _matrix(a, name) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.size == 0:
        raise DomainError(f"{name} must be a nonempty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


def _vector(v, n, name) -> np.ndarray:
    out = np.array(v, dtype=float).reshape(-1)
    if out.size != n:
        raise DomainError(f"{name} has length {out.size}, expected {n}")
    out.setflags(write=False)
    return out


def _batch(x, dim):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DomainError(f"dimension mismatch: map expects inputs of dimension {dim}, "
                          f"got shape {np.shape(x)}")
    return arr, single


class ReachMap:
    in_dim: int
    out_dim: int

    def __call__(self, x):
        arr, single = _batch(x, self.in_dim)
        y = self._forward(arr)
        return y[0] if single else y

    def jacobian(self, x) -> np.ndarray:
        """Jacobian(s): ``(n, p)`` for one point, ``(M, n, p)`` for a batch."""
        arr, single = _batch(x, self.in_dim)
        J = self._jacobians(arr)
        return J[0] if single else J


@dataclass(frozen=True, eq=False)
class Affine(ReachMap):
    A: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        A = _matrix(self.A, "A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", _vector(np.zeros(A.shape[0]) if self.b is None else self.b,
                                              A.shape[0], "b"))

    in_dim = property(lambda self: self.A.shape[1])
    out_dim = property(lambda self: self.A.shape[0])

    def _forward(self, x):
        return x @ self.A.T + self.b

    def _jacobians(self, x):
        return np.broadcast_to(self.A, (len(x),) + self.A.shape).copy()


@dataclass(frozen=True, eq=False)
class Scaling(ReachMap):
    """f(x) = (L * x_1, x_2) on the plane."""

    L: float

    def __post_init__(self):
        if not self.L >= 1 or not np.isfinite(self.L):
            raise DomainError(f"scaling factor L must be >= 1, got {self.L}")

    in_dim = 2
    out_dim = 2

    def _forward(self, x):
        return x * np.array([self.L, 1.0])

    def _jacobians(self, x):
        return np.broadcast_to(np.diag([self.L, 1.0]), (len(x), 2, 2)).copy()


@dataclass(frozen=True, eq=False)
class ReluNetwork(ReachMap):
    """Feed-forward network: ReLU after every layer except the last, which is affine."""

    layers: tuple

    def __post_init__(self):
        if len(self.layers) == 0:
            raise DomainError("a network needs at least its final affine layer")
        checked = []
        for k, (W, b) in enumerate(self.layers):
            W = _matrix(W, f"W[{k}]")
            b = _vector(b, W.shape[0], f"b[{k}]")
            if checked and W.shape[1] != checked[-1][0].shape[0]:
                raise DomainError(f"layer {k} expects width {W.shape[1]}, "
                                  f"previous layer outputs {checked[-1][0].shape[0]}")
            checked.append((W, b))
        object.__setattr__(self, "layers", tuple(checked))

    in_dim = property(lambda self: self.layers[0][0].shape[1])
    out_dim = property(lambda self: self.layers[-1][0].shape[0])

    def _forward(self, x):
        for W, b in self.layers[:-1]:
            x = np.maximum(x @ W.T + b, 0.0)
        W, b = self.layers[-1]
        return x @ W.T + b

    def _jacobians(self, x):
        J = None
        for W, b in self.layers[:-1]:
            pre = x @ W.T + b
            J = np.broadcast_to(W, (len(x),) + W.shape) if J is None else W @ J
            # zero pre-activation counts as inactive
            mask = (pre > 0).astype(float)
            J = mask[:, :, None] * J
            x = np.maximum(pre, 0.0)
        W, _ = self.layers[-1]
        J = np.broadcast_to(W, (len(x),) + W.shape) if J is None else W @ J
        return np.array(J)

    def global_lipschitz_bound(self) -> float:
        """Product of layer spectral norms; a valid global Lipschitz constant."""
        return float(np.prod([np.linalg.norm(W, 2) for W, _ in self.layers]))

    def to_dict(self) -> dict:
        return {"layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "ReluNetwork":
        try:
            return cls(tuple((layer["W"], layer["b"]) for layer in d["layers"]))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed network description: {exc}") from None

    @classmethod
    def load(cls, path) -> "ReluNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


@dataclass(frozen=True, eq=False)
class ClosedLoop(ReachMap):
    """``horizon`` steps of x <- A x + B controller(x)."""

    A: np.ndarray
    B: np.ndarray
    controller: ReluNetwork
    horizon: int

    def __post_init__(self):
        A, B = _matrix(self.A, "A"), _matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DomainError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DomainError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if self.controller.in_dim != A.shape[0] or self.controller.out_dim != B.shape[1]:
            raise DomainError("controller dimensions do not match (A, B)")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise DomainError(f"horizon must be a nonnegative integer, got {self.horizon}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "horizon", int(self.horizon))

    in_dim = property(lambda self: self.A.shape[0])
    out_dim = property(lambda self: self.A.shape[0])

    def with_horizon(self, horizon: int) -> "ClosedLoop":
        return ClosedLoop(self.A, self.B, self.controller, horizon)

    def _forward(self, x):
        for _ in range(self.horizon):
            x = x @ self.A.T + self.controller._forward(x) @ self.B.T
        return x

    def _jacobians(self, x):
        J = np.broadcast_to(np.eye(self.in_dim), (len(x), self.in_dim, self.in_dim))
        for _ in range(self.horizon):
            step = self.A + self.B @ self.controller._jacobians(x)
            J = step @ J
            x = x @ self.A.T + self.controller._forward(x) @ self.B.T
        return np.array(J)


def eval_map(f: ReachMap, x):
    return f(x)


def jacobian(f: ReachMap, x) -> np.ndarray:
    return f.jacobian(x)


def build_saturated_feedback_controller(K, lo: float, hi: float) -> ReluNetwork:
    """ReLU network computing ``clamp(-K.x, lo, hi)`` exactly.

    Uses ``clamp(v) = lo + relu(v - lo) - relu(v - hi)`` with one hidden layer
    of two units.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got lo={lo}, hi={hi}")
    K = np.asarray(K, dtype=float).reshape(-1)
    hidden_W = np.stack([-K, -K])
    hidden_b = np.array([-lo, -hi], dtype=float)
    out_W = np.array([[1.0, -1.0]])
    out_b = np.array([float(lo)])
    return ReluNetwork(((hidden_W, hidden_b), (out_W, out_b)))


@dataclass(frozen=True)
class LipschitzEstimate:
    L_hat: float
    M_used: int
    confidence_delta: float | None = None


def region_failure_probability(N: int, Lambda_N: float, M: int) -> float:
    """N (1 - Lambda_N)^M: chance that some activation region got no sample."""
    if N < 1 or not 0 < Lambda_N <= 1:
        raise DomainError(f"need N >= 1 and 0 < Lambda_N <= 1, got N={N}, Lambda_N={Lambda_N}")
    return float(N * (1.0 - Lambda_N) ** M)


def estimate_lipschitz(f: ReachMap, input_set: InputSet, spec: SamplingSpec, M: int,
                       region_data=None) -> LipschitzEstimate:
    """Largest Jacobian spectral norm over ``M`` uniform samples of the input set.

    ``region_data = (N, Lambda_N)`` (activation-region count and smallest
    normalised region volume) adds the probability that the estimate misses a
    region.
    """
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")
    if not isinstance(spec, UniformVolume):
        raise DomainError("the sampled Lipschitz estimate assumes uniform volume sampling")
    xs = sample(input_set, spec, int(M))
    norms = np.linalg.norm(f.jacobian(xs), ord=2, axis=(1, 2))
    delta = None
    if region_data is not None:
        N, Lambda_N = region_data
        delta = region_failure_probability(N, Lambda_N, int(M))
    return LipschitzEstimate(float(norms.max()), int(M), delta)


def map_from_dict(d: dict, weights=None) -> ReachMap:
    """Build a map from its config description (``kind`` = affine | scaling | relu | closed_loop)."""
    kind = d.get("kind")
    try:
        if kind == "affine":
            return Affine(d["A"], d.get("b"))
        if kind == "scaling":
            return Scaling(float(d["L"]))
        if kind == "relu":
            return ReluNetwork.load(weights or d["weights"]) if ("weights" in d or weights) \
                else ReluNetwork.from_dict(d)
        if kind == "closed_loop":
            ctrl = d.get("controller", {})
            if weights is not None:
                net = ReluNetwork.load(weights)
            elif "weights" in ctrl:
                net = ReluNetwork.load(ctrl["weights"])
            else:
                net = build_saturated_feedback_controller(ctrl["K"], ctrl["lo"], ctrl["hi"])
            return ClosedLoop(d["A"], d["B"], net, int(d.get("horizon", 0)))
    except KeyError as exc:
        raise DomainError(f"map description is missing field {exc}") from None
    raise DomainError(f"unknown map kind {kind!r}")
