"""Checkable consequences of the fixed-point results, packaged as suites.

Each suite returns a :class:`SuiteReport` whose ``worst_case`` holds enough
input to recompute ``max_violation`` with :func:`replay`. A suite passes when
its largest violation is at most its tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .center import OrbitSample, radius_gate
from .iterate import IterationTrace, StopReason, lemma36_bound, residual, residual_m
from .operators import OperatorSpec, beta_at, local_lipschitz_profile
from .space import BallPlusPoints, Vec, dist, modulus_check

__all__ = [
    "SuiteReport",
    "NotConvergent",
    "lemma22_suite",
    "opial_demo",
    "closedness_demo",
    "demiclosedness_demo",
    "locality_suite",
    "lemma36_suite",
    "replay",
    "SUITES",
]


class NotConvergent(ValueError):
    """The supplied sequence does not look convergent, so the demo does not apply."""


@dataclass
class SuiteReport:
    suite_name: str
    cases_run: int
    max_violation: float
    worst_case: dict
    passed: bool
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "suite_name": self.suite_name,
            "cases_run": self.cases_run,
            "max_violation": self.max_violation,
            "worst_case": self.worst_case,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "details": self.details,
        }


def _report(name: str, violations: list[tuple[float, dict]], tol: float, **details) -> SuiteReport:
    worst, case = max(violations, key=lambda vc: vc[0])
    return SuiteReport(name, len(violations), float(worst), case, bool(worst <= tol), tol, details)


def _beta1(op: OperatorSpec, q: Optional[Vec] = None) -> float:
    return beta_at(op.schedule, 1, q)


# ---------------------------------------------------------------------------


def _lemma22_violation(p: Vec, q: Vec, c: float) -> float:
    return -modulus_check(p, q, c).gap


def lemma22_suite(dim: int, samples: int, seed: int) -> SuiteReport:
    """Sample the Hilbert two-point identity; violation is ``lhs - rhs``."""
    rng = np.random.default_rng(seed)
    cases = []

    def unit_ball_point():
        g = rng.standard_normal(dim)
        return Vec(g / np.linalg.norm(g) * rng.random() ** (1.0 / dim))

    for k in range(samples):
        p = unit_ball_point()
        if k % 10 == 0:
            q = p  # degenerate pair
        else:
            q = unit_ball_point()
        c = (0.0, 1.0)[k % 2] if k % 10 == 5 else float(rng.random())
        cases.append((_lemma22_violation(p, q, c), {"p": p.to_list(), "q": q.to_list(), "c": c}))
    return _report("lemma22", cases, 1e-12, dim=dim, seed=seed)


def _opial_case(dim: int, cand: Vec) -> tuple[float, dict]:
    x = np.zeros(dim)
    c = cand.coords
    if c.size > dim and np.any(c[dim:]):
        raise ValueError(f"candidate support extends beyond dimension {dim}")
    x[: min(dim, c.size)] = c[:dim]
    nz = np.flatnonzero(x)
    if nz.size == 0:
        raise ValueError("candidate must differ from the weak limit 0")
    last = int(nz[-1])  # 0-based index of the last nonzero coordinate
    if last + 1 >= dim:
        raise ValueError("candidate leaves no tail of basis vectors inside the dimension")
    tail = np.eye(dim)[last + 1:]
    lhs = float(np.max(np.linalg.norm(tail, axis=1)))
    rhs = float(np.max(np.linalg.norm(tail - x, axis=1)))
    return lhs - rhs, {"dim": dim, "candidate": x.tolist(), "lhs": lhs, "rhs": rhs}


def opial_demo(dim: int, candidates: Sequence[Vec]) -> SuiteReport:
    """Opial inequality for the weakly null basis sequence ``e_1, e_2, ...``.

    For every candidate ``p != 0`` the tail maximum of ``|e_n|`` must not
    exceed the tail maximum of ``|e_n - p|``. Violation is their difference,
    so the margin is its negative.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    cases = [_opial_case(dim, c) for c in candidates]
    margins = [-v for v, _ in cases]
    return _report("opial", cases, 0.0, dim=dim, margins=margins)


def _aitken(a: Vec, b: Vec, c: Vec) -> Vec:
    x0, x1, x2 = a.coords, b.coords, c.coords
    den = x2 - 2.0 * x1 + x0
    safe = np.abs(den) > 1e-300
    out = x2.copy()
    out[safe] = x2[safe] - (x2[safe] - x1[safe]) ** 2 / den[safe]
    return Vec(out, c.p)


def _check_cauchy(seq: Sequence[Vec], tol: float) -> None:
    """Reject lists whose tail is not closer to the final element than the whole list is."""
    if len(seq) < 2:
        return
    last = seq[-1]
    d = np.array([dist(x, last) for x in seq])
    head, tail = d, d[len(d) // 2:]
    if tail.max() > tol and tail.max() >= head.max():
        raise NotConvergent("the sequence does not approach its final element")


def closedness_demo(op: OperatorSpec, fp_like: Sequence[Vec], tol: float,
                    extrapolate: bool = False) -> SuiteReport:
    """Approximate fixed points accumulate at an approximate fixed point.

    Two families of cases are checked at the limit point ``p``:
    ``|Tp - p| <= (1 + beta_1) tol`` and, for every list element ``p_k``,
    ``|Tp - p| <= (1 + beta_1)|p - p_k| + |Tp_k - p_k|``.
    """
    if not fp_like:
        raise ValueError("need at least one approximate fixed point")
    res = [residual(op, x) for x in fp_like]
    bad = [k for k, r in enumerate(res) if not r < tol]
    if bad:
        raise ValueError(f"elements {bad[:5]} are not approximate fixed points at tol {tol}")
    _check_cauchy(fp_like, tol)
    limit = fp_like[-1]
    if extrapolate and len(fp_like) >= 3:
        limit = _aitken(*fp_like[-3:])
        if not op.domain.contains(limit):
            limit = fp_like[-1]
    b1 = _beta1(op, limit)
    r_lim = residual(op, limit)
    cases = [(r_lim - (1.0 + b1) * tol, {"kind": "limit", "limit": limit.to_list(), "tol": tol, "beta1": b1})]
    for x, rx in zip(fp_like, res):
        bound = (1.0 + b1) * dist(limit, x) + rx
        cases.append((r_lim - bound, {"kind": "triangle", "limit": limit.to_list(), "element": x.to_list(),
                                      "beta1": b1}))
    return _report("closedness", cases, 1e-9, limit_residual=r_lim, beta1=b1)


def demiclosedness_demo(op: OperatorSpec, trace: IterationTrace, tol: float,
                        burn_in: Optional[int] = None) -> SuiteReport:
    """The limit of an approximate fixed-point sequence is (approximately) fixed.

    Strong convergence of the trace stands in for weak convergence. The
    windowed asymptotic radius of the trace tail is recorded next to the
    locality radius, since the conclusion is only claimed when it is smaller.
    """
    if trace.stop_reason is StopReason.DIVERGED:
        raise NotConvergent("trace diverged")
    if not trace.residuals[-1] < tol:
        raise NotConvergent(f"final residual {trace.residuals[-1]:.3g} is not below {tol}")
    _check_cauchy(trace.iterates, tol)
    w = trace.final
    b1 = _beta1(op, w)
    r_w = residual(op, w)
    start = len(trace.iterates) // 2 if burn_in is None else burn_in
    tail = OrbitSample(tuple(trace.iterates[start:]), start)
    Q = op.domain
    if isinstance(Q, BallPlusPoints):
        Q = Q.ball
    gate = radius_gate(tail, Q, op.radius)
    case = {"w": w.to_list(), "tol": tol, "beta1": b1}
    return _report("demiclosedness", [(r_w - (2.0 + b1) * tol, case)], 0.0,
                   residual_at_limit=r_w, rho_hat=gate.rho_hat, radius=op.radius,
                   gate_passes=gate.passes)


def locality_suite(op: OperatorSpec, ns: Sequence[int], samples: int, seed: int) -> SuiteReport:
    """Probe ``|T^n u - T^n v| / |u - v|`` against the declared schedule."""
    est = local_lipschitz_profile(op, ns, samples, seed)
    cases = [(est[n] - beta_at(op.schedule, n), {"n": n, "estimate": est[n],
                                                 "bound": beta_at(op.schedule, n)}) for n in ns]
    return _report("locality", cases, 1e-9, samples=samples, seed=seed)


def lemma36_suite(op: OperatorSpec, qs: Sequence[Vec], ms: Sequence[int]) -> SuiteReport:
    """``|T^m q - q| <= (1 + sum_{j<m} beta_j)|Tq - q|`` on points with residual below ``r``."""
    cases = []
    pts = [q for q in qs if residual(op, q) < op.radius]
    if not pts:
        raise ValueError("no point has residual below the locality radius")
    for m in ms:
        lhs = residual_m(op, pts, m)
        for q, val in zip(pts, lhs):
            cases.append((val - lemma36_bound(op, q, m), {"m": m, "q": q.to_list()}))
    return _report("lemma36", cases, 1e-9, points=len(pts))


# ---------------------------------------------------------------------------


def replay(report: SuiteReport, op: Optional[OperatorSpec] = None) -> float:
    """Recompute the violation of ``report.worst_case`` from scratch."""
    wc = report.worst_case
    name = report.suite_name
    if name == "lemma22":
        return _lemma22_violation(Vec(wc["p"]), Vec(wc["q"]), wc["c"])
    if name == "opial":
        return _opial_case(wc["dim"], Vec(wc["candidate"]))[0]
    if op is None:
        raise ValueError(f"replaying {name} needs the operator")
    if name == "closedness":
        limit = Vec(wc["limit"], op.p)
        r_lim = residual(op, limit)
        if wc["kind"] == "limit":
            return r_lim - (1.0 + wc["beta1"]) * wc["tol"]
        x = Vec(wc["element"], op.p)
        return r_lim - ((1.0 + wc["beta1"]) * dist(limit, x) + residual(op, x))
    if name == "demiclosedness":
        return residual(op, Vec(wc["w"], op.p)) - (2.0 + wc["beta1"]) * wc["tol"]
    if name == "lemma36":
        q = Vec(wc["q"], op.p)
        return residual_m(op, [q], wc["m"])[0] - lemma36_bound(op, q, wc["m"])
    if name == "locality":
        return wc["estimate"] - beta_at(op.schedule, wc["n"])
    raise ValueError(f"unknown suite {name!r}")


SUITES = {
    "closedness": "closedness: residual at the limit of approximate fixed points <= (1 + beta_1) tol",
    "demiclosedness": "demiclosedness: limit of a convergent trace with residuals -> 0 is fixed, "
                      "residual <= (2 + beta_1) tol",
    "lemma22": "lemma22: Hilbert two-point identity with phi(t) = t^2, violation <= 1e-12",
    "lemma36": "lemma36: |T^m q - q| <= (1 + sum beta_j)|Tq - q| along a trace",
    "locality": "locality: sampled local Lipschitz ratio of T^n <= beta_n + 1e-9",
    "opial": "opial: tail max |e_n| <= tail max |e_n - p| for candidates p != 0",
}
