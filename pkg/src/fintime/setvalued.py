"""Compact convex sets, Caratheodory set-valued maps and Filippov intervals.

Every set produced by this package is a singleton, a box, a finite vertex
polytope, or an affine image ``A @ box + b`` of a box.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .functions import ConfigError, GainFunction

__all__ = [
    "VertexOverflowError",
    "Singleton",
    "Box",
    "VertexPolytope",
    "AffineImage",
    "ConvexSet",
    "CaratheodoryMap",
    "Jump",
    "MonotoneScalarFunction",
    "filippov_interval",
    "product_box",
    "vertices",
    "point_set_distance",
    "support_value",
    "sup_norm",
    "MAX_VERTEX_DIM",
]

MAX_VERTEX_DIM = 20


class VertexOverflowError(OverflowError):
    """Vertex enumeration would produce more than 2**cap points."""


def _vec(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError("expected a vector")
    return arr


@dataclass(frozen=True, eq=False)
class Singleton:
    point: np.ndarray

    def __post_init__(self):
        p = _vec(self.point)
        if not np.all(np.isfinite(p)):
            raise ValueError("singleton point must be finite")
        object.__setattr__(self, "point", p)

    @property
    def dim(self) -> int:
        return self.point.size


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _vec(self.lower), _vec(self.upper)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box is empty: lower > upper in some coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def free_dims(self) -> int:
        return int(np.count_nonzero(self.upper > self.lower))


@dataclass(frozen=True, eq=False)
class VertexPolytope:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("vertex polytope needs a nonempty list of vectors")
        if not np.all(np.isfinite(pts)):
            raise ValueError("vertices must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class AffineImage:
    """The set {A u + b : u in base}."""

    A: np.ndarray
    b: np.ndarray
    base: Box

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = _vec(self.b)
        if A.shape != (b.size, self.base.dim):
            raise ValueError(f"affine map shape {A.shape} does not fit base dim {self.base.dim}"
                             f" and offset dim {b.size}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("affine map must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.b.size


ConvexSet = Singleton | Box | VertexPolytope | AffineImage


def product_box(intervals: Sequence[tuple[float, float]]) -> Box | Singleton:
    """Cartesian product of closed intervals; a point when every side collapses."""
    lo = np.array([float(a) for a, _ in intervals])
    hi = np.array([float(b) for _, b in intervals])
    if np.array_equal(lo, hi):
        return Singleton(lo)
    return Box(lo, hi)


def _box_corners(box: Box, cap: int) -> np.ndarray:
    free = np.nonzero(box.upper > box.lower)[0]
    if free.size > cap:
        raise VertexOverflowError(
            f"box has {free.size} nondegenerate sides; vertex enumeration is capped at {cap}"
        )
    corners = np.repeat(box.lower[None, :], 2 ** free.size, axis=0)
    for row, bits in enumerate(itertools.product((0, 1), repeat=free.size)):
        for j, bit in zip(free, bits):
            if bit:
                corners[row, j] = box.upper[j]
    return corners


def vertices(s: ConvexSet, cap: int = MAX_VERTEX_DIM) -> np.ndarray:
    """Extreme-point list of ``s`` as an (m, n) array.

    Boxes enumerate their corners with collapsed sides deduplicated, so a box
    with k nondegenerate sides has 2**k corners. Affine images return the
    images of the base corners (duplicates removed, order kept).
    """
    if isinstance(s, Singleton):
        return s.point[None, :].copy()
    if isinstance(s, Box):
        return _box_corners(s, cap)
    if isinstance(s, VertexPolytope):
        return s.points.copy()
    if isinstance(s, AffineImage):
        img = _box_corners(s.base, cap) @ s.A.T + s.b
        _, first = np.unique(img, axis=0, return_index=True)
        return img[np.sort(first)]
    raise TypeError(f"not a convex set: {type(s).__name__}")


def support_value(s: ConvexSet, d) -> float:
    """max over f in s of <d, f>."""
    d = _vec(d)
    if isinstance(s, Singleton):
        return float(d @ s.point)
    if isinstance(s, Box):
        return float(np.sum(np.maximum(d * s.lower, d * s.upper)))
    if isinstance(s, VertexPolytope):
        return float(np.max(s.points @ d))
    if isinstance(s, AffineImage):
        return float(d @ s.b) + support_value(s.base, s.A.T @ d)
    raise TypeError(f"not a convex set: {type(s).__name__}")


def sup_norm(s: ConvexSet) -> float:
    """|s| = sup{|f| : f in s}, attained at a vertex."""
    if isinstance(s, Singleton):
        return float(np.linalg.norm(s.point))
    if isinstance(s, Box):
        return float(np.linalg.norm(np.maximum(np.abs(s.lower), np.abs(s.upper))))
    return float(np.max(np.linalg.norm(vertices(s), axis=1)))


def _min_norm_point(P: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Wolfe's algorithm: point of minimum Euclidean norm in conv(rows of P)."""
    scale = max(1.0, float(np.max(np.einsum("ij,ij->i", P, P))))
    j0 = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    active = [j0]
    lam = np.array([1.0])
    x = P[j0].copy()
    for _ in range(50 * (P.shape[0] + P.shape[1]) + 100):
        j = int(np.argmin(P @ x))
        if x @ x - x @ P[j] <= tol * scale or j in active:
            break
        active.append(j)
        lam = np.append(lam, 0.0)
        while True:
            S = P[active]
            k = len(active)
            M = np.zeros((k + 1, k + 1))
            M[:k, :k] = S @ S.T
            M[:k, k] = 1.0
            M[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            mu = np.linalg.lstsq(M, rhs, rcond=None)[0][:k]
            if np.all(mu > tol):
                lam = mu
                break
            neg = mu <= tol
            ratios = lam[neg] / np.maximum(lam[neg] - mu[neg], 1e-300)
            theta = float(np.min(ratios)) if ratios.size else 0.0
            lam = lam + theta * (mu - lam)
            keep = lam > tol
            if not np.any(keep):
                keep[int(np.argmax(lam))] = True
            active = [a for a, kp in zip(active, keep) if kp]
            lam = lam[keep]
            lam /= lam.sum()
        x = lam @ P[active]
    return x


def point_set_distance(p, s: ConvexSet) -> float:
    """Euclidean distance from ``p`` to ``s``."""
    p = _vec(p)
    if isinstance(s, Singleton):
        return float(np.linalg.norm(p - s.point))
    if isinstance(s, Box):
        return float(np.linalg.norm(p - np.clip(p, s.lower, s.upper)))
    if isinstance(s, VertexPolytope):
        return float(np.linalg.norm(_min_norm_point(s.points - p)))
    if isinstance(s, AffineImage):
        free = s.base.upper > s.base.lower
        target = p - s.b - s.A[:, ~free] @ s.base.lower[~free]
        if not np.any(free):
            return float(np.linalg.norm(target))
        res = lsq_linear(s.A[:, free], target, bounds=(s.base.lower[free], s.base.upper[free]),
                         method="bvls", tol=1e-14)
        return float(np.linalg.norm(s.A[:, free] @ res.x - target))
    raise TypeError(f"not a convex set: {type(s).__name__}")


@dataclass(frozen=True, eq=False)
class CaratheodoryMap:
    """Set-valued right-hand side F(t, x) with linear growth envelope.

    ``evaluator(t, x)`` must return a :data:`ConvexSet` of dimension ``dim``.
    Measurability in t and upper semicontinuity in x are caller contracts;
    only the growth bound |F(t,x)| <= mu(t)(1+|x|) and the equilibrium
    0 in F(t,0) can be spot-checked.
    """

    dim: int
    evaluator: Callable[[float, np.ndarray], ConvexSet]
    growth: GainFunction
    equilibrium: bool = True
    name: str = ""

    def __call__(self, t: float, x) -> ConvexSet:
        s = self.evaluator(float(t), _vec(x))
        if s.dim != self.dim:
            raise ValueError(f"F returned a set of dimension {s.dim}, expected {self.dim}")
        return s

    def growth_excess(self, t: float, x) -> float:
        """sup-norm of F(t,x) minus the envelope; positive means violated."""
        x = _vec(x)
        return sup_norm(self(t, x)) - self.growth(t) * (1.0 + float(np.linalg.norm(x)))

    def check_growth(self, points, tol: float = 1e-9) -> bool:
        return all(self.growth_excess(t, x) <= tol for t, x in points)

    def check_equilibrium(self, times, tol: float = 1e-9) -> bool:
        zero = np.zeros(self.dim)
        return all(point_set_distance(zero, self(t, zero)) <= tol for t in times)


@dataclass(frozen=True)
class Jump:
    """Declared discontinuity of a monotone function at ``at``."""

    at: float
    left: float
    right: float


@dataclass(frozen=True, eq=False)
class MonotoneScalarFunction:
    """Nondecreasing scalar function with optional jump metadata.

    When ``jumps`` is ``None`` the discontinuities are unknown and one-sided
    limits are estimated numerically. An empty tuple declares the function
    continuous everywhere.
    """

    evaluator: Callable[[float], float]
    jumps: tuple[Jump, ...] | None = None
    nondecreasing: bool = True
    name: str = ""
    config: dict | None = field(default=None, compare=False)

    def __call__(self, x: float) -> float:
        return float(self.evaluator(float(x)))

    def jump_at(self, x: float) -> Jump | None:
        for j in self.jumps or ():
            if x == j.at:
                return j
        return None

    def check_monotone(self, xs) -> bool:
        xs = np.sort(np.asarray(xs, dtype=float))
        vals = np.array([self(x) for x in xs])
        if np.any(np.diff(vals) < 0):
            return False
        for j in self.jumps or ():
            if not j.left <= self(j.at) <= j.right:
                return False
        return True

    # presets -----------------------------------------------------------
    @classmethod
    def identity(cls) -> "MonotoneScalarFunction":
        return cls(lambda x: x, (), name="identity", config={"kind": "identity"})

    @classmethod
    def sign(cls) -> "MonotoneScalarFunction":
        return cls(lambda x: float(np.sign(x)), (Jump(0.0, -1.0, 1.0),), name="sign",
                   config={"kind": "sign"})

    @classmethod
    def saturated_step(cls, threshold: float, jump: float) -> "MonotoneScalarFunction":
        """x on (-threshold, threshold); x + sign(x) * jump outside, right-continuous
        at +threshold and left-continuous at -threshold."""
        if threshold <= 0 or jump < 0:
            raise ValueError("saturated_step needs threshold > 0 and jump >= 0")

        def f(x: float) -> float:
            if x >= threshold:
                return x + jump
            if x <= -threshold:
                return x - jump
            return x

        jumps = (Jump(-threshold, -threshold - jump, -threshold),
                 Jump(threshold, threshold, threshold + jump))
        return cls(f, jumps, name=f"step({threshold:g},{jump:g})",
                   config={"kind": "step", "threshold": threshold, "jump": jump})

    @classmethod
    def from_config(cls, doc) -> "MonotoneScalarFunction":
        kind = doc if isinstance(doc, str) else doc.get("kind")
        if kind == "identity":
            return cls.identity()
        if kind == "sign":
            return cls.sign()
        if kind == "step":
            return cls.saturated_step(float(doc["threshold"]), float(doc["jump"]))
        raise ConfigError(f"unknown activation {kind!r}")


_OFFSETS = 10.0 ** -np.arange(3, 13)


def _one_sided_limit(f: MonotoneScalarFunction, x: float, side: int) -> float:
    scale = max(1.0, abs(x))
    vals = np.array([f(x + side * h * scale) for h in _OFFSETS])
    # Richardson step for a sequence linear in h with ratio 10
    return float(vals[-1] + (vals[-1] - vals[-2]) / 9.0)


def filippov_interval(f: MonotoneScalarFunction, x: float) -> tuple[float, float]:
    """[f(x-), f(x+)] for a nondecreasing f.

    Declared jumps are used verbatim; with ``jumps=None`` the limits are
    estimated by sampling at offsets 1e-3 ... 1e-12 (scaled by |x|).
    """
    x = float(x)
    fx = f(x)
    if f.jumps is not None:
        j = f.jump_at(x)
        return (j.left, j.right) if j is not None else (fx, fx)
    lo = min(_one_sided_limit(f, x, -1), fx)
    hi = max(_one_sided_limit(f, x, +1), fx)
    if hi - lo <= 1e-8 * (1.0 + abs(fx)):
        return fx, fx
    return lo, hi
