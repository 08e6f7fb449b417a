"""Truncated sequence spaces: vectors with an l^p norm, feasible sets, projections.

Points of l^p are represented by their first ``D`` coordinates. Everything
beyond the truncation is taken to be zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Vec",
    "SpaceMismatch",
    "NonConvexProjection",
    "Ball",
    "Box",
    "Hull",
    "BallPlusPoints",
    "FeasibleSet",
    "ModulusGap",
    "norm",
    "dist",
    "convex_combination",
    "project",
    "contains",
    "diameter",
    "modulus_check",
    "set_to_json",
    "set_from_json",
    "simplex_qp",
]

MEMBERSHIP_TOL = 1e-12


class SpaceMismatch(ValueError):
    """Two vectors with different dimension or norm exponent were combined."""


class NonConvexProjection(ValueError):
    """Projection was requested onto a set with no well-defined nearest point."""


class Vec:
    """An immutable point of a truncated l^p space."""

    __slots__ = ("coords", "p")

    def __init__(self, coords: Union[Sequence[float], np.ndarray], p: float = 2.0):
        arr = np.array(coords, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValueError("a vector needs at least one coordinate")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        p = float(p)
        if not p >= 1.0:
            raise ValueError(f"norm exponent must be >= 1, got {p}")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "p", p)

    def __setattr__(self, name, value):
        raise AttributeError("Vec is immutable")

    @classmethod
    def zeros(cls, dim: int, p: float = 2.0) -> "Vec":
        return cls(np.zeros(dim), p)

    @classmethod
    def basis(cls, dim: int, index: int, p: float = 2.0, scale: float = 1.0) -> "Vec":
        """``scale`` times the 1-based ``index``-th unit vector."""
        if not 1 <= index <= dim:
            raise IndexError(f"basis index {index} outside 1..{dim}")
        arr = np.zeros(dim)
        arr[index - 1] = scale
        return cls(arr, p)

    @property
    def dim(self) -> int:
        return self.coords.size

    def _check(self, other: "Vec") -> None:
        if not isinstance(other, Vec):
            raise TypeError(f"expected Vec, got {type(other).__name__}")
        if other.dim != self.dim:
            raise SpaceMismatch(f"dimension mismatch: {self.dim} vs {other.dim}")
        if other.p != self.p:
            raise SpaceMismatch(f"norm exponent mismatch: {self.p} vs {other.p}")

    def __add__(self, other: "Vec") -> "Vec":
        self._check(other)
        return Vec(self.coords + other.coords, self.p)

    def __sub__(self, other: "Vec") -> "Vec":
        self._check(other)
        return Vec(self.coords - other.coords, self.p)

    def __mul__(self, scalar: float) -> "Vec":
        return Vec(self.coords * float(scalar), self.p)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Vec":
        return Vec(self.coords / float(scalar), self.p)

    def __neg__(self) -> "Vec":
        return Vec(-self.coords, self.p)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vec):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash((self.p, self.coords.tobytes()))

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"Vec({self.coords.tolist()!r}, p={self.p:g})"

    def norm(self) -> float:
        return _lp_norm(self.coords, self.p)

    def to_list(self) -> list[float]:
        return self.coords.tolist()


def _lp_norm(x: np.ndarray, p: float) -> float:
    if p == 2.0:
        return float(np.linalg.norm(x))
    if p == 1.0:
        return float(np.sum(np.abs(x)))
    if math.isinf(p):
        return float(np.max(np.abs(x)))
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    if scale == 0.0:
        return 0.0
    return scale * float(np.sum((np.abs(x) / scale) ** p) ** (1.0 / p))


def norm(v: Vec) -> float:
    """l^p norm of ``v`` using its own exponent."""
    return v.norm()


def dist(u: Vec, v: Vec) -> float:
    return (u - v).norm()


def convex_combination(c: float, p: Vec, q: Vec) -> Vec:
    """``c*p + (1-c)*q``."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {c}")
    p._check(q)
    return Vec(c * p.coords + (1.0 - c) * q.coords, p.p)


# ---------------------------------------------------------------------------
# simplex-constrained quadratic programs


def simplex_qp(gram: np.ndarray, lin: np.ndarray, tol: float = 1e-10,
               max_iter: int = 100_000, w0: np.ndarray | None = None):
    """Minimize ``w'Gw - 2 c'w`` over the probability simplex.

    Pairwise Frank-Wolfe: mass moves from the worst active vertex to the best
    vertex with an exact line search. Converges linearly on this problem class.

    Returns ``(w, gap, iterations)`` where ``gap`` is the Frank-Wolfe duality
    gap ``g'w - min(g)`` with ``g = Gw - c`` (half the true gradient).
    """
    n = lin.size
    if w0 is None:
        w = np.zeros(n)
        w[int(np.argmin(np.diag(gram) - 2.0 * lin))] = 1.0
    else:
        w = np.asarray(w0, dtype=float).copy()
    g = gram @ w - lin
    scale = max(1.0, float(np.max(np.abs(np.diag(gram)))))
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        i = int(np.argmin(g))
        active = np.flatnonzero(w > 0.0)
        j = int(active[np.argmax(g[active])])
        gap = float(g @ w - g[i])
        if gap <= tol * scale or i == j:
            break
        curv = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        slope = g[i] - g[j]
        t = w[j] if curv <= 0.0 else min(w[j], -slope / curv)
        if t <= 0.0:
            break
        w[i] += t
        w[j] -= t
        if w[j] < 1e-300:
            w[j] = 0.0
        g += t * (gram[:, i] - gram[:, j])
    return w, max(gap, 0.0), it


# ---------------------------------------------------------------------------
# feasible sets


@dataclass(frozen=True)
class Ball:
    center: Vec
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    convex = True

    @property
    def dim(self) -> int:
        return self.center.dim

    def contains(self, v: Vec, tol: float = MEMBERSHIP_TOL) -> bool:
        return dist(v, self.center) <= self.radius * (1.0 + tol) + tol

    def project(self, v: Vec) -> Vec:
        # Radial retraction; this is the l2 nearest point when p == 2.
        d = v - self.center
        n = d.norm()
        if n <= self.radius:
            return v
        return self.center + d * (self.radius / n)

    def diameter(self) -> float:
        return 2.0 * self.radius

    def support_min(self, g: np.ndarray) -> Vec:
        """Minimizer of ``<g, y>`` over the ball."""
        p = self.center.p
        if not np.any(g):
            return self.center
        if p == 2.0:
            d = g / np.linalg.norm(g)
        elif p == 1.0:
            d = np.zeros_like(g)
            i = int(np.argmax(np.abs(g)))
            d[i] = np.sign(g[i])
        else:
            q = p / (p - 1.0)
            d = np.sign(g) * (np.abs(g) / _lp_norm(g, q)) ** (q - 1.0)
        return Vec(self.center.coords - self.radius * d, p)


@dataclass(frozen=True)
class Box:
    lower: Vec
    upper: Vec

    def __post_init__(self):
        self.lower._check(self.upper)
        if np.any(self.lower.coords > self.upper.coords):
            raise ValueError("box needs lower <= upper coordinatewise")

    convex = True

    @property
    def dim(self) -> int:
        return self.lower.dim

    def contains(self, v: Vec, tol: float = MEMBERSHIP_TOL) -> bool:
        x = v.coords
        return bool(np.all(x >= self.lower.coords - tol) and np.all(x <= self.upper.coords + tol))

    def project(self, v: Vec) -> Vec:
        if self.contains(v, tol=0.0):
            return v
        return Vec(np.clip(v.coords, self.lower.coords, self.upper.coords), v.p)

    def diameter(self) -> float:
        return dist(self.upper, self.lower)

    def support_min(self, g: np.ndarray) -> Vec:
        return Vec(np.where(g > 0, self.lower.coords, self.upper.coords), self.lower.p)


@dataclass(frozen=True)
class Hull:
    points: tuple[Vec, ...]
    tol: float = 1e-10

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("hull needs at least one point")
        for q in pts[1:]:
            pts[0]._check(q)
        object.__setattr__(self, "points", pts)

    convex = True

    @property
    def dim(self) -> int:
        return self.points[0].dim

    def _matrix(self) -> np.ndarray:
        return np.stack([q.coords for q in self.points])

    def project_weights(self, v: Vec) -> tuple[np.ndarray, float]:
        X = self._matrix()
        w, gap, _ = simplex_qp(X @ X.T, X @ v.coords, tol=self.tol)
        return w, gap

    def project(self, v: Vec) -> Vec:
        self.points[0]._check(v)
        w, _ = self.project_weights(v)
        return Vec(w @ self._matrix(), v.p)

    def contains(self, v: Vec, tol: float = 1e-9) -> bool:
        return dist(self.project(v), v) <= tol

    def diameter(self) -> float:
        X = self._matrix()
        p = self.points[0].p
        best = 0.0
        for i in range(len(X)):
            for j in range(i + 1, len(X)):
                best = max(best, _lp_norm(X[i] - X[j], p))
        return best

    def support_min(self, g: np.ndarray) -> Vec:
        X = self._matrix()
        return self.points[int(np.argmin(X @ g))]


@dataclass(frozen=True)
class BallPlusPoints:
    """A ball together with finitely many isolated extra points (not convex)."""

    ball: Ball
    extras: tuple[Vec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        extras = tuple(self.extras)
        for e in extras:
            self.ball.center._check(e)
        object.__setattr__(self, "extras", extras)

    convex = False

    @property
    def dim(self) -> int:
        return self.ball.dim

    def contains(self, v: Vec, tol: float = MEMBERSHIP_TOL) -> bool:
        if self.ball.contains(v, tol):
            return True
        return any(dist(v, e) <= tol for e in self.extras)

    def project(self, v: Vec) -> Vec:
        raise NonConvexProjection("projection onto a ball with extra points is not defined")

    def diameter(self) -> float:
        c, R = self.ball.center, self.ball.radius
        best = 2.0 * R
        for i, e in enumerate(self.extras):
            best = max(best, dist(e, c) + R)
            for f in self.extras[i + 1:]:
                best = max(best, dist(e, f))
        return best


FeasibleSet = Union[Ball, Box, Hull, BallPlusPoints]


def contains(S: FeasibleSet, v: Vec) -> bool:
    return S.contains(v)


def project(S: FeasibleSet, v: Vec) -> Vec:
    """Nearest point of a convex feasible set to ``v``."""
    if not S.convex:
        raise NonConvexProjection(f"cannot project onto non-convex set {type(S).__name__}")
    return S.project(v)


def diameter(S: FeasibleSet) -> float:
    return S.diameter()


@dataclass(frozen=True)
class ModulusGap:
    lhs: float
    rhs: float
    gap: float


def modulus_check(p: Vec, q: Vec, c: float) -> ModulusGap:
    """Two-point uniform convexity inequality in Hilbert space with phi(t) = t**2.

    ``lhs = |cp + (1-c)q|^2`` and ``rhs = c|p|^2 + (1-c)|q|^2 - c(1-c)|p-q|^2``.
    In l2 these agree identically, so ``gap`` is pure rounding error.
    """
    p._check(q)
    if p.p != 2.0:
        raise ValueError("modulus_check is only exact for p_exp = 2")
    lhs = convex_combination(c, p, q).norm() ** 2
    rhs = c * p.norm() ** 2 + (1.0 - c) * q.norm() ** 2 - c * (1.0 - c) * dist(p, q) ** 2
    return ModulusGap(lhs=lhs, rhs=rhs, gap=rhs - lhs)


# ---------------------------------------------------------------------------
# JSON


def _vec(data: Iterable[float], p: float) -> Vec:
    return Vec(list(data), p)


def set_to_json(S: FeasibleSet) -> dict:
    if isinstance(S, Ball):
        return {"type": "ball", "center": S.center.to_list(), "radius": S.radius, "p_exp": S.center.p}
    if isinstance(S, Box):
        return {"type": "box", "lower": S.lower.to_list(), "upper": S.upper.to_list(), "p_exp": S.lower.p}
    if isinstance(S, Hull):
        return {"type": "hull", "points": [q.to_list() for q in S.points], "p_exp": S.points[0].p}
    if isinstance(S, BallPlusPoints):
        return {
            "type": "ball_plus_points",
            "ball": set_to_json(S.ball),
            "extras": [e.to_list() for e in S.extras],
            "p_exp": S.ball.center.p,
        }
    raise TypeError(f"not a feasible set: {S!r}")


def set_from_json(data: dict) -> FeasibleSet:
    kind = data.get("type")
    p = float(data.get("p_exp", 2.0))
    if kind == "ball":
        return Ball(_vec(data["center"], p), float(data["radius"]))
    if kind == "box":
        return Box(_vec(data["lower"], p), _vec(data["upper"], p))
    if kind == "hull":
        return Hull(tuple(_vec(q, p) for q in data["points"]))
    if kind == "ball_plus_points":
        ball = set_from_json({**data["ball"], "p_exp": p})
        return BallPlusPoints(ball, tuple(_vec(e, p) for e in data.get("extras", [])))
    raise ValueError(f"unknown feasible set type {kind!r}")
