"""Self-maps with a locality radius and a Lipschitz-type schedule.

An operator here is a map ``T`` on a feasible set ``Q`` together with a radius
``r`` and a sequence ``beta_n`` such that ``|T^n u - T^n v| <= beta_n |u - v|``
is claimed for every pair with ``|u - v| < r``. The claim is only ever checked
empirically (:func:`local_lipschitz_probe`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .space import Ball, BallPlusPoints, Box, FeasibleSet, Hull, Vec

__all__ = [
    "Constant",
    "ProductOfB",
    "Explicit",
    "BetaSchedule",
    "PointwiseSchedule",
    "ExampleParams",
    "OperatorSpec",
    "OutsideDomain",
    "SamplingError",
    "TruncationError",
    "apply",
    "iterate_n",
    "beta_at",
    "schedule_limit",
    "example_closed_form",
    "local_lipschitz_probe",
    "local_lipschitz_profile",
    "sample_close_pairs",
    "example_lipschitz_bound",
    "excess_partial_sum",
    "example32",
    "scale",
    "affine",
    "rotation",
    "CATALOG",
    "build_operator",
]


class OutsideDomain(ValueError):
    pass


class SamplingError(RuntimeError):
    pass


class TruncationError(ValueError):
    """The requested iterate would move mass past the truncation dimension."""


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Constant:
    """``beta_n = theta`` for every n (a one-step contraction factor)."""

    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise ValueError(f"theta must lie in [0, 1), got {self.theta}")

    @property
    def limit(self) -> float:
        return self.theta

    def at(self, n: int) -> float:
        return self.theta


@dataclass(frozen=True)
class Explicit:
    """Tabulated values; indices past the table return ``limit``."""

    values: tuple[float, ...]
    limit: float

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("explicit schedule needs at least one value")
        if any(not v > 0 for v in vals):
            raise ValueError("schedule values must be positive")
        if abs(vals[-1] - self.limit) > 1e-9:
            raise ValueError(
                f"declared limit {self.limit} disagrees with the stored tail value {vals[-1]}"
            )
        object.__setattr__(self, "values", vals)

    def at(self, n: int) -> float:
        return self.values[n - 1] if n <= len(self.values) else self.limit


def default_b(j: int) -> float:
    return math.exp(-(2.0 ** -j))


@dataclass(frozen=True)
class ExampleParams:
    """Truncation dimension and the weights ``b_2 .. b_D`` of the shift example.

    ``b_rule`` extends the weights past ``D``; schedules need ``b_{2n+1}`` for
    arbitrarily large ``n`` even though the map itself only uses ``b_2..b_{D-2}``.
    """

    dimension: int = 32
    b: tuple[float, ...] = ()
    b_rule: Optional[Callable[[int], float]] = default_b

    def __post_init__(self):
        if self.dimension < 4:
            raise ValueError("example dimension must be at least 4")
        b = tuple(float(x) for x in self.b)
        if not b:
            if self.b_rule is None:
                raise ValueError("need either explicit weights or a rule")
            b = tuple(self.b_rule(j) for j in range(2, self.dimension + 1))
        if len(b) != self.dimension - 1:
            raise ValueError(f"expected {self.dimension - 1} weights b_2..b_D, got {len(b)}")
        if any(not 0.0 < x < 1.0 for x in b):
            raise ValueError("weights must lie in (0, 1)")
        object.__setattr__(self, "b", b)

    @classmethod
    def from_list(cls, b: Sequence[float]) -> "ExampleParams":
        return cls(dimension=len(b) + 1, b=tuple(b), b_rule=None)

    def b_at(self, j: int) -> float:
        if j < 2:
            raise IndexError("weights start at b_2")
        if j <= self.dimension:
            return self.b[j - 2]
        if self.b_rule is None:
            raise IndexError(f"b_{j} is beyond the stored weights and no rule was given")
        return self.b_rule(j)

    @property
    def b_array(self) -> np.ndarray:
        return np.asarray(self.b)


@dataclass(frozen=True)
class ProductOfB:
    """``beta_n = prod_{j=1..n} b_{2j+1}``."""

    params: ExampleParams = field(default_factory=ExampleParams)

    @property
    def limit(self) -> float:
        if self.params.b_rule is default_b:
            return math.exp(-1.0 / 6.0)
        # slowly converging in general; 4096 factors is plenty for the rules used here
        return self.at(4096)

    def at(self, n: int) -> float:
        out = 1.0
        for j in range(1, n + 1):
            out *= self.params.b_at(2 * j + 1)
        return out


BetaSchedule = Union[Constant, ProductOfB, Explicit]


@dataclass(frozen=True)
class PointwiseSchedule:
    """A schedule whose n-th value depends on a base point, ``alpha_n(q)``."""

    evaluate: Callable[[Vec, int], float]
    limit_rule: Callable[[Vec], float]

    def at(self, n: int, q: Vec) -> float:
        return float(self.evaluate(q, n))

    def convergence_error(self, q: Vec, n_max: int = 1000) -> float:
        return abs(self.at(n_max, q) - float(self.limit_rule(q)))

    @classmethod
    def decaying(cls, base: float, amplitude: float = 1.0) -> "PointwiseSchedule":
        """``alpha_n(q) = base + amplitude*|q| / (n + |q|)``, tending to ``base``."""

        def evaluate(q: Vec, n: int) -> float:
            s = q.norm()
            return base + amplitude * s / (n + s)

        return cls(evaluate=evaluate, limit_rule=lambda q: base)


def beta_at(s, n: int, q: Optional[Vec] = None) -> float:
    if n < 1:
        raise ValueError("schedules are indexed from n = 1")
    if isinstance(s, PointwiseSchedule):
        if q is None:
            raise ValueError("a pointwise schedule needs a base point")
        return s.at(n, q)
    return float(s.at(n))


def schedule_limit(s, q: Optional[Vec] = None) -> float:
    if isinstance(s, PointwiseSchedule):
        if q is None:
            raise ValueError("a pointwise schedule needs a base point")
        return float(s.limit_rule(q))
    return float(s.limit)


def excess_partial_sum(s, n_max: int, q: Optional[Vec] = None) -> float:
    """``sum_{n<=n_max} (beta_n - 1)``, the summability quantity of pointwise results."""
    return float(sum(beta_at(s, n, q) - 1.0 for n in range(1, n_max + 1)))


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    domain: FeasibleSet
    apply_rule: Callable[[np.ndarray], np.ndarray]
    radius: float
    schedule: Union[Constant, ProductOfB, Explicit, PointwiseSchedule]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("locality radius must be positive")

    @property
    def p(self) -> float:
        return _set_exponent(self.domain)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, v: Vec) -> Vec:
        return apply(self, v)


def _set_exponent(S: FeasibleSet) -> float:
    if isinstance(S, Ball):
        return S.center.p
    if isinstance(S, Box):
        return S.lower.p
    if isinstance(S, Hull):
        return S.points[0].p
    return S.ball.center.p


def _require_in_domain(op: OperatorSpec, v: Vec) -> None:
    if v.dim != op.dim:
        raise OutsideDomain(f"{op.name}: expected dimension {op.dim}, got {v.dim}")
    if not op.domain.contains(v):
        raise OutsideDomain(f"{op.name}: input lies outside the domain")


def apply(op: OperatorSpec, v: Vec) -> Vec:
    _require_in_domain(op, v)
    return Vec(op.apply_rule(v.coords), v.p)


def iterate_n(op: OperatorSpec, v: Vec, n: int) -> Vec:
    """``T^n v``; ``n = 0`` is the identity."""
    if n < 0:
        raise ValueError("iterate count must be non-negative")
    _require_in_domain(op, v)
    x = v.coords
    for _ in range(n):
        x = op.apply_rule(x)
    return Vec(x, v.p)


def _iterate_raw(op: OperatorSpec, X: np.ndarray, n: int) -> np.ndarray:
    for _ in range(n):
        X = op.apply_rule(X)
    return X


# ---------------------------------------------------------------------------
# the shift example on the half ball plus e_1


def _example_rule(params: ExampleParams) -> Callable[[np.ndarray], np.ndarray]:
    D = params.dimension
    weights = params.b_array[: D - 3]  # b_2 .. b_{D-2}; later coordinates fall off
    e1 = np.zeros(D)
    e1[0] = 1.0

    def rule(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.zeros_like(x)
        y[..., 2] = x[..., 0] ** 2
        y[..., 3:] = weights * x[..., 1 : D - 2]
        special = np.linalg.norm(x - e1, axis=-1) <= 1e-12
        if np.any(special):
            y[special] = 0.0
            y[special, 0] = 0.5
        return y

    return rule


def example32(params: Optional[ExampleParams] = None, restrict_to_ball: bool = False) -> OperatorSpec:
    """The l2 shift-and-square map on ``{|u| <= 1/2} U {e_1}``.

    ``T(u) = (0, 0, u_1^2, b_2 u_2, b_3 u_3, ...)`` on the ball and
    ``T(e_1) = e_1 / 2``. With ``restrict_to_ball`` the domain is the convex
    half ball alone, which the Mann-type schemes need.
    """
    params = params or ExampleParams()
    D = params.dimension
    ball = Ball(Vec.zeros(D), 0.5)
    domain = ball if restrict_to_ball else BallPlusPoints(ball, (Vec.basis(D, 1),))
    return OperatorSpec(
        name="example32",
        domain=domain,
        apply_rule=_example_rule(params),
        radius=0.5,
        schedule=ProductOfB(params),
        params={"dimension": D, "restrict_to_ball": restrict_to_ball},
    )


def example_closed_form(params: ExampleParams, n: int) -> Vec:
    """``T^n e_1`` for the shift example, valid from ``n = 2``.

    The single nonzero coordinate sits at position ``2n - 1`` and equals
    ``(b_3 b_5 ... b_{2n-3}) / 4``.
    """
    if n < 2:
        raise ValueError("the closed form starts at n = 2")
    pos = 2 * n - 1
    if pos > params.dimension:
        raise TruncationError(f"T^{n} e_1 lives at coordinate {pos} > D = {params.dimension}")
    value = 0.25
    for k in range(3, 2 * n - 2, 2):
        value *= params.b_at(k)
    return Vec.basis(params.dimension, pos, scale=value)


def example_lipschitz_bound(params: ExampleParams, n: int) -> float:
    """Exact local Lipschitz constant of ``T^n`` on the truncated half ball.

    ``T^n`` moves coordinate ``k`` to ``k + 2n`` with weight
    ``b_k b_{k+2} ... b_{k+2n-2}`` (coordinate 1 is squared first, so its
    factor ``|u_1 + v_1| < 1`` replaces ``b_1``). Coordinates pushed past ``D``
    vanish. The difference map is diagonal in this sense, so the constant is
    the largest surviving weight.
    """
    D = params.dimension
    best = 0.0
    for k in range(1, D + 1):
        if k + 2 * n > D:
            break
        w = 1.0
        for i in range(n):
            j = k + 2 * i
            if j >= 2:
                w *= params.b_at(j)
        best = max(best, w)
    return best


# ---------------------------------------------------------------------------
# simple contractions


def scale(theta: float, dimension: int = 2, radius: float = 0.5, domain_radius: float = 1.0,
          p_exp: float = 2.0) -> OperatorSpec:
    """``Sx = theta*x`` on a centered ball."""
    domain = Ball(Vec.zeros(dimension, p_exp), domain_radius)
    return OperatorSpec(
        name="scale",
        domain=domain,
        apply_rule=lambda x: theta * np.asarray(x, dtype=float),
        radius=radius,
        schedule=Constant(theta),
        params={"theta": theta, "dimension": dimension},
    )


def affine(theta: float, shift: Sequence[float], radius: float = 0.5, domain_radius: float = 1.0,
           p_exp: float = 2.0) -> OperatorSpec:
    """``Sx = theta*x + shift``; the fixed point is ``shift / (1 - theta)``."""
    s = np.asarray(shift, dtype=float)
    if theta * domain_radius + np.linalg.norm(s) > domain_radius * (1 + 1e-12):
        raise ValueError("affine map does not send its domain ball into itself")
    domain = Ball(Vec.zeros(s.size, p_exp), domain_radius)
    return OperatorSpec(
        name="affine",
        domain=domain,
        apply_rule=lambda x: theta * np.asarray(x, dtype=float) + s,
        radius=radius,
        schedule=Constant(theta),
        params={"theta": theta, "shift": s.tolist()},
    )


def rotation(angle: float, dimension: int = 2, radius: float = 0.5) -> OperatorSpec:
    """Rotation of the first two coordinates: an isometry, never a contraction."""
    c, s = math.cos(angle), math.sin(angle)

    def rule(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x.copy()
        y[..., 0] = c * x[..., 0] - s * x[..., 1]
        y[..., 1] = s * x[..., 0] + c * x[..., 1]
        return y

    return OperatorSpec(
        name="rotation",
        domain=Ball(Vec.zeros(dimension), 1.0),
        apply_rule=rule,
        radius=radius,
        schedule=Explicit((1.0,), 1.0),
        params={"angle": angle, "dimension": dimension},
    )


def _build_example32(params: dict, dimension: int, p_exp: float) -> OperatorSpec:
    if p_exp != 2.0:
        raise ValueError("example32 lives in l2")
    return example32(ExampleParams(dimension=dimension),
                     restrict_to_ball=bool(params.get("restrict_to_ball", False)))


def _build_scale(params: dict, dimension: int, p_exp: float) -> OperatorSpec:
    return scale(float(params.get("theta", 0.5)), dimension=dimension,
                 radius=float(params.get("radius", 0.5)),
                 domain_radius=float(params.get("domain_radius", 1.0)), p_exp=p_exp)


def _build_affine(params: dict, dimension: int, p_exp: float) -> OperatorSpec:
    shift = list(params.get("shift", [0.1]))
    shift = shift + [0.0] * (dimension - len(shift))
    if len(shift) != dimension:
        raise ValueError(f"shift has {len(shift)} entries for dimension {dimension}")
    return affine(float(params.get("theta", 0.5)), shift,
                  radius=float(params.get("radius", 0.5)),
                  domain_radius=float(params.get("domain_radius", 1.0)), p_exp=p_exp)


def _build_rotation(params: dict, dimension: int, p_exp: float) -> OperatorSpec:
    return rotation(float(params.get("angle", 0.5)), dimension=dimension,
                    radius=float(params.get("radius", 0.5)))


CATALOG: dict[str, tuple[Callable[[dict, int, float], OperatorSpec], str]] = {
    "affine": (_build_affine, "affine(theta, shift): x -> theta*x + shift on the unit ball; "
                              "params theta=0.5, shift=[0.1], radius=0.5, domain_radius=1.0"),
    "example32": (_build_example32, "example32: shift-and-square map on the half ball plus e_1; "
                                    "params restrict_to_ball=false"),
    "rotation": (_build_rotation, "rotation(angle): isometry of the first two coordinates; "
                                  "params angle=0.5, radius=0.5"),
    "scale": (_build_scale, "scale(theta): x -> theta*x on the unit ball; "
                            "params theta=0.5, radius=0.5, domain_radius=1.0"),
}


def build_operator(name: str, params: Optional[dict] = None, dimension: int = 32,
                   p_exp: float = 2.0) -> OperatorSpec:
    try:
        builder, _ = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown operator {name!r}; known: {sorted(CATALOG)}") from None
    return builder(dict(params or {}), dimension, p_exp)


# ---------------------------------------------------------------------------
# empirical Lipschitz probing


def _sampling_region(S: FeasibleSet):
    return S.ball if isinstance(S, BallPlusPoints) else S


def _sample(region, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(region, Ball):
        D = region.dim
        g = rng.standard_normal((n, D))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = region.radius * rng.random(n) ** (1.0 / D)
        return region.center.coords + g * rad[:, None]
    if isinstance(region, Box):
        lo, hi = region.lower.coords, region.upper.coords
        return lo + (hi - lo) * rng.random((n, region.dim))
    if isinstance(region, Hull):
        X = np.stack([q.coords for q in region.points])
        w = rng.dirichlet(np.ones(len(X)), size=n)
        return w @ X
    raise TypeError(f"cannot sample from {type(region).__name__}")


def sample_close_pairs(op: OperatorSpec, samples: int, seed: int, retry_limit: int = 10_000,
                       batch: int = 65_536) -> tuple[np.ndarray, np.ndarray]:
    """Uniform pairs from the domain (its ball part), kept when ``0 < |u-v| < r``.

    Rejection sampling; raises :class:`SamplingError` once ``retry_limit``
    consecutive candidates have been rejected.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    region = _sampling_region(op.domain)
    rng = np.random.default_rng(seed)
    us, vs = [], []
    have = 0
    misses = 0
    while have < samples:
        U = _sample(region, batch, rng)
        V = _sample(region, batch, rng)
        d = np.array([np.linalg.norm(a - b, ord=op.p) for a, b in zip(U, V)]) if op.p != 2.0 \
            else np.linalg.norm(U - V, axis=1)
        ok = np.flatnonzero((d > 0) & (d < op.radius))
        if ok.size == 0:
            misses += batch
            if misses >= retry_limit:
                raise SamplingError(f"no pair within radius {op.radius} after {misses} draws")
            continue
        # rejections before the first success in this batch extend the current run
        if misses + int(ok[0]) >= retry_limit:
            raise SamplingError(f"no pair within radius {op.radius} after {retry_limit} draws")
        gaps = np.diff(ok)
        if gaps.size and int(gaps.max()) - 1 >= retry_limit:
            raise SamplingError(f"no pair within radius {op.radius} after {retry_limit} draws")
        misses = batch - 1 - int(ok[-1])
        take = ok[: samples - have]
        us.append(U[take])
        vs.append(V[take])
        have += take.size
    return np.concatenate(us), np.concatenate(vs)


def local_lipschitz_profile(op: OperatorSpec, ns: Sequence[int], samples: int,
                            seed: int) -> dict[int, float]:
    """:func:`local_lipschitz_probe` for several iterate counts on one set of pairs."""
    U, V = sample_close_pairs(op, samples, seed)
    if op.p == 2.0:
        den = np.linalg.norm(U - V, axis=1)
    else:
        den = np.array([np.linalg.norm(a, ord=op.p) for a in U - V])
    out = {}
    TU, TV, done = U, V, 0
    for n in sorted(set(ns)):
        TU = _iterate_raw(op, TU, n - done)
        TV = _iterate_raw(op, TV, n - done)
        done = n
        D = TU - TV
        num = np.linalg.norm(D, axis=1) if op.p == 2.0 else np.array(
            [np.linalg.norm(a, ord=op.p) for a in D])
        out[n] = float(np.max(num / den))
    return {n: out[n] for n in ns}


def local_lipschitz_probe(op: OperatorSpec, n: int, samples: int, seed: int) -> float:
    """Largest observed ``|T^n u - T^n v| / |u - v|`` over seeded close pairs."""
    return local_lipschitz_profile(op, [n], samples, seed)[n]
