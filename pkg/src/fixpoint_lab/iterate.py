"""Iteration engines and the diagnostics built on top of them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .operators import (
    OperatorSpec,
    PointwiseSchedule,
    apply,
    beta_at,
    iterate_n,
    schedule_limit,
)
from .space import NonConvexProjection, Vec, dist

__all__ = [
    "StepSchedule",
    "StopReason",
    "IterationTrace",
    "Chain",
    "Verdict",
    "residual",
    "picard",
    "schu",
    "residual_m",
    "lemma36_bound",
    "schu_energy_sums",
    "chain",
    "chain_contract_bound",
    "uniqueness_probe",
]


class StopReason(str, Enum):
    TOLERANCE_MET = "tolerance_met"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class StepSchedule:
    """Mann weights ``gamma_n``.

    Two regimes are supported. Bounded: ``a <= gamma_n <= b`` for all ``n``.
    Summable: ``gamma_n = min(b, c / n^2)``, which eventually drops below any
    positive lower bound, so ``a`` is only a floor for the early steps.
    """

    rule: Callable[[int], float]
    lower: float
    upper: float
    summable_flag: bool = False
    label: str = ""

    def __post_init__(self):
        if not 0.0 < self.lower <= self.upper < 1.0:
            raise ValueError(f"need 0 < a <= b < 1, got a={self.lower}, b={self.upper}")

    def __call__(self, n: int) -> float:
        g = float(self.rule(n))
        if not 0.0 < g < 1.0:
            raise ValueError(f"gamma_{n} = {g} outside (0, 1)")
        if not self.summable_flag and not self.lower <= g <= self.upper:
            raise ValueError(f"gamma_{n} = {g} outside [{self.lower}, {self.upper}]")
        return g

    @classmethod
    def constant(cls, gamma: float) -> "StepSchedule":
        return cls(rule=lambda n: gamma, lower=gamma, upper=gamma, label=f"constant({gamma})")

    @classmethod
    def summable(cls, c: float = 1.0, b: float = 0.5) -> "StepSchedule":
        return cls(rule=lambda n: min(b, c / n**2), lower=min(b, c), upper=b,
                   summable_flag=True, label=f"summable(c={c}, b={b})")

    def to_json(self) -> dict:
        return {"label": self.label, "a": self.lower, "b": self.upper, "summable": self.summable_flag}


@dataclass(frozen=True)
class IterationTrace:
    """Iterates ``q_1, q_2, ...`` with their residuals ``|q_n - T q_n|``.

    ``steps`` holds ``gamma_n`` for Mann-type runs (one per transition) and is
    empty for Picard. ``orbit_gaps`` holds ``|q_n - T^n q_n|`` for Schu runs.
    """

    iterates: list[Vec]
    residuals: list[float]
    steps: list[float]
    stop_reason: StopReason
    scheme: str = "picard"
    orbit_gaps: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.iterates) != len(self.residuals):
            raise ValueError("iterates and residuals must have equal length")

    @property
    def final(self) -> Vec:
        return self.iterates[-1]

    @property
    def converged(self) -> bool:
        return self.stop_reason is StopReason.TOLERANCE_MET


def residual(op: OperatorSpec, q: Vec) -> float:
    """``|q - Tq|``."""
    return dist(q, apply(op, q))


def _divergence_cap(op: OperatorSpec) -> float:
    return 1e3 * op.domain.diameter()


def picard(op: OperatorSpec, q0: Vec, tol: float, max_iter: int,
           stop_at_tol: bool = True) -> IterationTrace:
    """``q_{n+1} = T q_n`` until ``|q_n - T q_n| < tol`` or ``max_iter`` iterates.

    With ``stop_at_tol=False`` all ``max_iter`` iterates are produced and the
    stop reason reflects the final residual only.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    cap = _divergence_cap(op)
    iterates, residuals = [], []
    q = q0
    reason = StopReason.MAX_ITER
    for _ in range(max_iter):
        tq = apply(op, q)
        iterates.append(q)
        residuals.append(dist(q, tq))
        if stop_at_tol and residuals[-1] < tol:
            reason = StopReason.TOLERANCE_MET
            break
        if tq.norm() > cap:
            reason = StopReason.DIVERGED
            break
        q = tq
    if not stop_at_tol and reason is StopReason.MAX_ITER and residuals[-1] < tol:
        reason = StopReason.TOLERANCE_MET
    return IterationTrace(iterates, residuals, [], reason, scheme="picard")


def schu(op: OperatorSpec, q0: Vec, steps: StepSchedule, tol: float, max_iter: int,
         stop_at_tol: bool = True) -> IterationTrace:
    """``q_{n+1} = (1 - gamma_n) q_n + gamma_n T^n q_n`` starting from ``q_1 = q0``.

    ``T^n q_n`` is recomputed from scratch at every step, so the total cost
    is quadratic in ``max_iter``.
    """
    if not op.domain.convex:
        raise NonConvexProjection("the averaged scheme needs a convex domain")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    cap = _divergence_cap(op)
    iterates, residuals, gammas, gaps = [], [], [], []
    q = q0
    reason = StopReason.MAX_ITER
    for n in range(1, max_iter + 1):
        iterates.append(q)
        residuals.append(residual(op, q))
        if stop_at_tol and residuals[-1] < tol:
            reason = StopReason.TOLERANCE_MET
            break
        if n == max_iter:
            break
        g = steps(n)
        tnq = iterate_n(op, q, n)
        gaps.append(dist(q, tnq))
        gammas.append(g)
        q = Vec((1.0 - g) * q.coords + g * tnq.coords, q.p)
        if q.norm() > cap:
            iterates.append(q)
            residuals.append(residual(op, q) if op.domain.contains(q) else math.inf)
            reason = StopReason.DIVERGED
            break
    if not stop_at_tol and reason is StopReason.MAX_ITER and residuals[-1] < tol:
        reason = StopReason.TOLERANCE_MET
    return IterationTrace(iterates, residuals, gammas, reason, scheme="schu", orbit_gaps=gaps)


def residual_m(op: OperatorSpec, qs: Sequence[Vec], m: int) -> list[float]:
    """``|T^m q_n - q_n|`` for every ``q_n`` in ``qs``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return [dist(iterate_n(op, q, m), q) for q in qs]


def lemma36_bound(op: OperatorSpec, q: Vec, m: int) -> float:
    """Telescoped bound ``(1 + sum_{j<m} beta_j) |Tq - q|`` on ``|T^m q - q|``.

    Valid whenever ``|Tq - q| < r``; pointwise schedules are evaluated at ``q``.
    """
    coef = 1.0 + sum(beta_at(op.schedule, j, q) for j in range(1, m))
    return coef * residual(op, q)


def schu_energy_sums(op: OperatorSpec, trace: IterationTrace, fixed_point: Vec,
                     diam: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums of both sides of the Schu energy estimate in Hilbert space.

    ``lhs_m = sum_{n<=m} gamma_n (1 - gamma_n) |T^n q_n - q_n|^2`` and
    ``rhs_m = |q_1 - q*|^2 + diam^2 * sum_{n<=m} gamma_n``.
    """
    if trace.scheme != "schu":
        raise ValueError("energy sums need a Schu trace")
    if diam is None:
        diam = op.domain.diameter()
    g = np.asarray(trace.steps)
    gaps = np.asarray(trace.orbit_gaps)
    lhs = np.cumsum(g * (1.0 - g) * gaps**2)
    rhs = dist(trace.iterates[0], fixed_point) ** 2 + diam**2 * np.cumsum(g)
    return lhs, rhs


# ---------------------------------------------------------------------------
# finite paths for uniqueness


@dataclass(frozen=True)
class Chain:
    nodes: list[Vec]
    segment_bound: float

    @property
    def length(self) -> float:
        return sum(dist(a, b) for a, b in zip(self.nodes, self.nodes[1:]))

    @property
    def L(self) -> int:
        return len(self.nodes) - 1


def chain(u: Vec, v: Vec, r: float) -> Chain:
    """Equal subdivision of ``[u, v]`` into ``floor(|u-v|/r) + 1`` pieces, each shorter than ``r``."""
    if not r > 0:
        raise ValueError("chain radius must be positive")
    d = dist(u, v)
    L = int(math.floor(d / r)) + 1
    nodes = [u]
    for i in range(1, L):
        t = i / L
        nodes.append(Vec((1.0 - t) * u.coords + t * v.coords, u.p))
    nodes.append(v)
    return Chain(nodes, d / L)


def _chain_beta(op: OperatorSpec, ch: Chain, n: Optional[int]) -> float:
    if isinstance(op.schedule, PointwiseSchedule):
        if n is None:
            return max(schedule_limit(op.schedule, z) for z in ch.nodes)
        return max(beta_at(op.schedule, n, z) for z in ch.nodes)
    return schedule_limit(op.schedule) if n is None else beta_at(op.schedule, n)


def chain_contract_bound(op: OperatorSpec, ch: Chain, n: int, m: int,
                         eps: Optional[float] = None) -> float:
    """``(beta + eps)^m * sum_i |z_{i-1} - z_i|``, bounding ``|T^{nm} z_0 - T^{nm} z_L|``.

    ``beta`` is the schedule limit, ``eps`` defaults to ``(1 - beta)/2``. The
    bound only applies when ``beta_n < beta + eps``, which is checked.
    """
    beta = _chain_beta(op, ch, None)
    if beta >= 1.0:
        raise ValueError(f"schedule limit {beta} is not a contraction")
    if eps is None:
        eps = (1.0 - beta) / 2.0
    if not (0.0 < eps and beta + eps < 1.0):
        raise ValueError("need eps > 0 with beta + eps < 1")
    if m < 0:
        raise ValueError("m must be non-negative")
    if m > 0 and _chain_beta(op, ch, n) >= beta + eps:
        raise ValueError(f"beta_{n} has not yet dropped below beta + eps = {beta + eps}")
    return (beta + eps) ** m * ch.length


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    kind: str  # unique_within_tol | inconsistent | inconclusive
    points: list[Vec]
    spread: float = math.nan

    @property
    def point(self) -> Optional[Vec]:
        return self.points[0] if self.kind == "unique_within_tol" else None


def uniqueness_probe(op: OperatorSpec, starts: Sequence[Vec], tol: float, max_iter: int) -> Verdict:
    """Run Picard from every start and compare the limits pairwise."""
    limits = []
    for s in starts:
        tr = picard(op, s, tol, max_iter)
        if not tr.converged:
            return Verdict("inconclusive", [tr.final])
        limits.append(tr.final)
    spread = max((dist(a, b) for i, a in enumerate(limits) for b in limits[i + 1:]), default=0.0)
    if spread <= 10.0 * tol:
        return Verdict("unique_within_tol", limits, spread)
    return Verdict("inconsistent", limits, spread)
