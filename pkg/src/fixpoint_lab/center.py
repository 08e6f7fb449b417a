"""Asymptotic centers and radii of orbit tails.

The limsup in ``f(q) = limsup |q_n - q|`` is replaced by a maximum over a
finite window of the orbit. In l2 the unconstrained minimizer of that maximum
is the center of the smallest enclosing ball of the window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .operators import OperatorSpec, iterate_n
from .space import BallPlusPoints, FeasibleSet, Vec, _lp_norm, simplex_qp

__all__ = [
    "OrbitSample",
    "CenterResult",
    "SolverOptions",
    "GateResult",
    "orbit_sample",
    "type_function",
    "smallest_enclosing_ball",
    "asymptotic_center",
    "radius_gate",
]

WELZL_MAX_DIM = 8


@dataclass(frozen=True)
class OrbitSample:
    points: tuple[Vec, ...]
    burn_in: int = 0
    window: int = 0

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("an orbit sample needs at least one point")
        for q in pts[1:]:
            pts[0]._check(q)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "window", len(pts))

    @property
    def matrix(self) -> np.ndarray:
        return np.stack([q.coords for q in self.points])

    @property
    def p(self) -> float:
        return self.points[0].p


def orbit_sample(op: OperatorSpec, q0: Vec, burn_in: int = 8, window: int = 32) -> OrbitSample:
    """``T^n q0`` for ``n = burn_in .. burn_in + window - 1``."""
    if window < 1:
        raise ValueError("window must be at least 1")
    first = iterate_n(op, q0, burn_in)
    pts = [first]
    x = first.coords
    for _ in range(window - 1):
        x = op.apply_rule(x)
        pts.append(Vec(x, q0.p))
    return OrbitSample(tuple(pts), burn_in, window)


def type_function(sample: OrbitSample, q: Vec) -> float:
    """Windowed ``limsup_n |q_n - q|``: the largest distance from ``q`` to the sample."""
    sample.points[0]._check(q)
    d = sample.matrix - q.coords
    if sample.p == 2.0:
        return float(np.max(np.linalg.norm(d, axis=1)))
    return max(_lp_norm(row, sample.p) for row in d)


# ---------------------------------------------------------------------------
# smallest enclosing ball


def _circumball(S: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest ball with every row of ``S`` on its boundary (center in their affine hull)."""
    if len(S) == 1:
        return S[0].copy(), 0.0
    A = S[1:] - S[0]
    rhs = 0.5 * np.sum(A * A, axis=1)
    lam = np.linalg.lstsq(A @ A.T, rhs, rcond=None)[0]
    c = S[0] + lam @ A
    return c, float(np.max(np.sum((S - c) ** 2, axis=1)))


def _mtf(P: list, end: int, support: list, d: int, eps: float):
    if support:
        c, r2 = _circumball(np.stack(support))
    else:
        c, r2 = None, -1.0
    if len(support) == d + 1:
        return c, r2
    i = 0
    while i < end:
        p = P[i]
        if c is None or np.sum((p - c) ** 2) > r2 * (1.0 + eps) + eps:
            c, r2 = _mtf(P, i, support + [p], d, eps)
            P.insert(0, P.pop(i))
        i += 1
    return c, r2


def _welzl(X: np.ndarray, seed: int = 0) -> tuple[np.ndarray, float]:
    """Move-to-front variant of Welzl's algorithm (recursion depth <= d + 1)."""
    order = np.random.default_rng(seed).permutation(len(X))
    P = [X[i] for i in order]
    scale = float(np.max(np.abs(X))) or 1.0
    c, r2 = _mtf(P, len(P), [], X.shape[1], 1e-12 * scale**2)
    # the support-set radius can be a hair short of the true coverage radius
    r = float(np.max(np.linalg.norm(X - c, axis=1)))
    return c, r


def _seb_dual(X: np.ndarray, tol: float = 1e-13) -> tuple[np.ndarray, float]:
    """Enclosing ball from its dual, ``max_w sum w_i|x_i|^2 - |sum w_i x_i|^2`` on the simplex."""
    shift = X.mean(axis=0)
    Y = X - shift
    G = Y @ Y.T
    w, _, _ = simplex_qp(G, 0.5 * np.diag(G), tol=tol, max_iter=200_000)
    c = w @ Y + shift
    return c, float(np.max(np.linalg.norm(X - c, axis=1)))


def smallest_enclosing_ball(points: Sequence[Vec]) -> tuple[Vec, float]:
    """Chebyshev center and radius of a finite point set in l2.

    Points are first expressed in coordinates of their affine span; if that
    span has dimension at most 8 the exact Welzl path runs there, otherwise
    the dual quadratic program is solved iteratively.
    """
    pts = list(points)
    if not pts:
        raise ValueError("need at least one point")
    for q in pts[1:]:
        pts[0]._check(q)
    if pts[0].p != 2.0:
        raise ValueError("the enclosing-ball oracle is only defined for l2")
    X = np.stack([q.coords for q in pts])
    if len(X) == 1:
        return pts[0], 0.0
    origin = X[0]
    A = X - origin
    _, s, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * max(1.0, float(s[0]) if s.size else 1.0)))
    if rank == 0:
        return pts[0], 0.0
    if rank <= WELZL_MAX_DIM:
        basis = Vt[:rank]
        c_low, _ = _welzl(A @ basis.T)
        c = origin + c_low @ basis
    else:
        c, _ = _seb_dual(X)
    r = float(np.max(np.linalg.norm(X - c, axis=1)))
    return Vec(c), r


# ---------------------------------------------------------------------------
# constrained center


@dataclass(frozen=True)
class SolverOptions:
    step0: Optional[float] = None  # default: diameter(Q) / 2
    iters: int = 5000
    tol: float = 1e-9


@dataclass(frozen=True)
class CenterResult:
    center: Vec
    radius: float
    iterations: int
    certified_gap: float

    def to_json(self) -> dict:
        return {
            "center": self.center.to_list(),
            "radius": self.radius,
            "iterations": self.iterations,
            "certified_gap": self.certified_gap,
        }


def _lp_grad(d: np.ndarray, p: float) -> np.ndarray:
    """Gradient of ``x -> |x|_p`` at ``d != 0``."""
    if p == 2.0:
        return d / np.linalg.norm(d)
    n = _lp_norm(d, p)
    return np.sign(d) * (np.abs(d) / n) ** (p - 1.0)


def _lower_bound(X: np.ndarray, x: np.ndarray, fx: float, dists: np.ndarray, Q: FeasibleSet,
                 p: float) -> float:
    """A certified lower bound on ``min_Q f`` from subgradients near-active at ``x``.

    For weights ``lam`` on the simplex and ``g = sum lam_i g_i``,
    ``f(y) >= sum lam_i |x - x_i| + <g, y - x>`` for every ``y``; the right side
    is minimized over ``Q`` through its support function.
    """
    active = np.flatnonzero((dists >= fx * (1.0 - 1e-6)) & (dists > 0))
    if active.size == 0:
        return fx
    G = np.stack([_lp_grad(x - X[i], p) for i in active])
    w, _, _ = simplex_qp(G @ G.T, np.zeros(len(G)), tol=1e-15)
    weights = list(np.eye(len(G))) + [w]
    best = -math.inf
    for lam in weights:
        g = lam @ G
        y = Q.support_min(g).coords
        best = max(best, float(lam @ dists[active]) + float(g @ (y - x)))
    return best


def _distances(X: np.ndarray, x: np.ndarray, p: float) -> np.ndarray:
    if p == 2.0:
        return np.linalg.norm(X - x, axis=1)
    return np.array([_lp_norm(r, p) for r in X - x])


def _subgradient(X: np.ndarray, Q: FeasibleSet, x0: np.ndarray, step0: float, iters: int,
                 p: float, tol: float, lb: float) -> tuple[np.ndarray, float, int]:
    x = Q.project(Vec(x0, p)).coords
    best_x, best_f = x, math.inf
    for k in range(1, iters + 1):
        diff = x - X
        dists = _distances(X, x, p)
        j = int(np.argmax(dists))  # lowest index wins ties
        f = float(dists[j])
        if f < best_f:
            best_x, best_f = x, f
        if f == 0.0:
            return x, 0.0, k
        if k % 25 == 1:
            lb = max(lb, _lower_bound(X, best_x, best_f, _distances(X, best_x, p), Q, p))
            if best_f - lb <= tol:
                return best_x, best_f, k
        g = _lp_grad(diff[j], p)
        x = Q.project(Vec(x - step0 / math.sqrt(k) * g, p)).coords
    return best_x, best_f, iters


def _pairwise_bound(X: np.ndarray, p: float) -> float:
    best = 0.0
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            best = max(best, _lp_norm(X[i] - X[j], p))
    return best / 2.0


def asymptotic_center(sample: OrbitSample, Q: FeasibleSet,
                      solver: Optional[SolverOptions] = None) -> CenterResult:
    """Minimize the windowed type function over ``Q``.

    In l2 the enclosing-ball center is returned directly when it lies in
    ``Q``. Otherwise projected subgradient steps ``step0/sqrt(k)`` are taken
    from its projection. ``certified_gap`` is the distance from the reported
    radius to a valid lower bound on the constrained optimum.
    """
    solver = solver or SolverOptions()
    if isinstance(Q, BallPlusPoints):
        results = [asymptotic_center(sample, Q.ball, solver)]
        for e in Q.extras:
            fe = type_function(sample, e)
            results.append(CenterResult(e, fe, 0, 0.0))
        best = min(results, key=lambda res: res.radius)
        lb = min(res.radius - res.certified_gap for res in results)
        return CenterResult(best.center, best.radius, results[0].iterations, best.radius - lb)
    if not Q.convex:
        raise ValueError("asymptotic_center needs a convex feasible set")

    X = sample.matrix
    p = sample.p
    lb = _pairwise_bound(X, p) if len(X) <= 256 else 0.0
    if p == 2.0:
        c, R = smallest_enclosing_ball(sample.points)
        lb = max(lb, R)
        if Q.contains(c, 1e-9):
            return CenterResult(c, type_function(sample, c), 0, max(0.0, type_function(sample, c) - lb))
        x0 = c.coords
    else:
        x0 = X.mean(axis=0)
    step0 = solver.step0 if solver.step0 is not None else Q.diameter() / 2.0
    x, _, its = _subgradient(X, Q, x0, step0, solver.iters, p, solver.tol, lb)
    center = Vec(x, p)
    fx = type_function(sample, center)
    lb = max(lb, _lower_bound(X, x, fx, _distances(X, x, p), Q, p))
    return CenterResult(center, fx, its, max(0.0, fx - lb))


@dataclass(frozen=True)
class GateResult:
    passes: bool
    rho_hat: float
    center: CenterResult

    def to_json(self) -> dict:
        return {"passes": self.passes, "rho_hat": self.rho_hat, "center": self.center.to_json()}


def radius_gate(sample: OrbitSample, Q: FeasibleSet, r: float,
                solver: Optional[SolverOptions] = None) -> GateResult:
    """Compare the windowed asymptotic radius with the locality radius ``r``."""
    res = asymptotic_center(sample, Q, solver)
    return GateResult(res.radius < r, res.radius, res)
