import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fixpoint_lab.iterate import (
    StepSchedule,
    StopReason,
    chain,
    chain_contract_bound,
    lemma36_bound,
    picard,
    residual,
    residual_m,
    schu,
    schu_energy_sums,
    uniqueness_probe,
)
from fixpoint_lab.operators import OperatorSpec, Explicit, affine, example32, iterate_n, rotation, scale
from fixpoint_lab.space import Ball, NonConvexProjection, Vec, dist

D = 32


def test_picard_scale_halves():
    tr = picard(scale(0.5), Vec([0.8, 0.0]), tol=1e-10, max_iter=200)
    assert tr.converged
    assert tr.iterates[1] == Vec([0.4, 0.0])
    assert tr.residuals[0] == pytest.approx(0.4)
    assert tr.final.norm() < 2e-10
    assert tr.steps == []


def test_picard_affine_limit():
    tr = picard(affine(0.5, [0.1, 0.0]), Vec([0.0, 0.0]), tol=1e-12, max_iter=200)
    np.testing.assert_allclose(tr.final.coords, [0.2, 0.0], atol=1e-11)


def test_picard_max_iter_and_full_length():
    tr = picard(rotation(0.5), Vec([0.5, 0.0]), tol=1e-8, max_iter=30)
    assert tr.stop_reason is StopReason.MAX_ITER
    assert len(tr.iterates) == 30
    tr = picard(scale(0.5), Vec([0.5, 0.0]), tol=1e-3, max_iter=50, stop_at_tol=False)
    assert len(tr.iterates) == 50 and tr.converged


def test_picard_divergence_detected():
    # a non-self map: the domain check is bypassed by a huge ball
    op = OperatorSpec("grow", Ball(Vec.zeros(1), 1e300), lambda x: 10.0 * np.asarray(x),
                      0.5, Explicit((10.0,), 10.0))
    tr = picard(op, Vec([1.0]), tol=1e-8, max_iter=10_000)
    assert tr.stop_reason is StopReason.DIVERGED


def test_schu_first_step_frozen():
    op = example32(restrict_to_ball=True)
    tr = schu(op, Vec.basis(D, 1, scale=0.5), StepSchedule.constant(0.5), 1e-6, 2)
    np.testing.assert_array_equal(tr.iterates[1].coords[:5], [0.25, 0.0, 0.125, 0.0, 0.0])
    assert tr.steps == [0.5]
    assert tr.orbit_gaps[0] == pytest.approx(math.sqrt(0.25 + 1 / 16))


def test_schu_needs_convex_domain():
    with pytest.raises(NonConvexProjection):
        schu(example32(), Vec.basis(D, 1, scale=0.5), StepSchedule.constant(0.5), 1e-6, 10)


def test_step_schedules():
    s = StepSchedule.summable(c=1.0, b=0.5)
    assert [s(n) for n in (1, 2, 4)] == [0.5, 0.25, 0.0625]
    assert sum(s(n) for n in range(1, 10_000)) < 2.0
    with pytest.raises(ValueError):
        StepSchedule.constant(1.0)
    bad = StepSchedule(rule=lambda n: 0.9, lower=0.1, upper=0.5)
    with pytest.raises(ValueError):
        bad(1)


def test_schu_trace_identity_on_example():
    op = example32(restrict_to_ball=True)
    tr = schu(op, Vec.basis(D, 1, scale=0.5), StepSchedule.constant(0.5), 1e-6, 60)
    for n, (a, b) in enumerate(zip(tr.iterates, tr.iterates[1:])):
        assert abs(dist(a, b) - tr.steps[n] * tr.orbit_gaps[n]) <= 1e-12


def test_schu_energy_estimate_summable_regime():
    op = scale(0.5, dimension=3)
    tr = schu(op, Vec([0.5, -0.2, 0.1]), StepSchedule.summable(), 1e-12, 200)
    lhs, rhs = schu_energy_sums(op, tr, Vec.zeros(3))
    assert np.all(lhs <= rhs + 1e-12)
    with pytest.raises(ValueError):
        schu_energy_sums(op, picard(op, Vec([0.5, 0, 0]), 1e-3, 5), Vec.zeros(3))


def test_residual_m_and_lemma36_bound_on_scale():
    op = scale(0.5)
    q = Vec([0.4, 0.0])
    # |T^m q - q| = (1 - 2^-m)|q|; bound (1 + sum_{j<m} 0.5)*0.2
    assert residual_m(op, [q], 3)[0] == pytest.approx(0.35)
    assert lemma36_bound(op, q, 3) == pytest.approx(2.0 * 0.2)
    assert residual(op, q) == pytest.approx(0.2)


def test_chain_geometry():
    ch = chain(Vec([0.0, 0.0]), Vec([1.0, 0.0]), 0.3)
    assert ch.L == 4
    assert ch.length == pytest.approx(1.0)
    assert all(dist(a, b) < 0.3 for a, b in zip(ch.nodes, ch.nodes[1:]))
    assert chain(Vec([0.0]), Vec([0.6]), 0.3).L == 3  # floor(2) + 1
    assert chain(Vec([0.0]), Vec([0.0]), 0.3).L == 1


def test_chain_contract_bound_dominates_iterates():
    op = scale(0.5)
    u, v = Vec([0.9, 0.0]), Vec([-0.9, 0.0])
    ch = chain(u, v, op.radius)
    prev = math.inf
    for m in range(0, 11):
        bound = chain_contract_bound(op, ch, 1, m)
        assert bound < prev
        prev = bound
        assert dist(iterate_n(op, u, m), iterate_n(op, v, m)) <= bound + 1e-9


def test_chain_contract_bound_rejects_noncontraction():
    with pytest.raises(ValueError):
        chain_contract_bound(rotation(0.5), chain(Vec([0.1, 0]), Vec([0, 0.1]), 0.5), 1, 2)
    with pytest.raises(ValueError):
        chain_contract_bound(scale(0.5), chain(Vec([0.1, 0]), Vec([0, 0.1]), 0.5), 1, 2, eps=0.6)


def test_uniqueness_verdicts():
    rng = np.random.default_rng(0)
    starts = [Vec(x / (1 + np.linalg.norm(x))) for x in rng.standard_normal((8, 2))]
    v = uniqueness_probe(scale(0.5), starts, 1e-10, 500)
    assert v.kind == "unique_within_tol" and v.spread < 1e-8
    v = uniqueness_probe(rotation(0.5), starts, 1e-10, 50)
    assert v.kind == "inconclusive" and v.point is None
    ident = OperatorSpec("identity", Ball(Vec.zeros(2), 1.0), lambda x: np.asarray(x, float), 0.5,
                         Explicit((1.0,), 1.0))
    v = uniqueness_probe(ident, starts, 1e-10, 5)
    assert v.kind == "inconsistent"


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_picard_contraction_converges_to_unique_point(theta, s1, s2):
    if 0.5 * theta + math.hypot(s1, s2) > 0.5:
        return
    op = affine(theta, [s1, s2])
    tr = picard(op, Vec([0.5, 0.0]), 1e-12, 2000)
    expected = np.array([s1, s2]) / (1 - theta)
    assert tr.converged
    np.testing.assert_allclose(tr.final.coords, expected, atol=1e-10 / (1 - theta))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 40))
def test_schu_step_norm_identity(gamma, n_steps):
    op = scale(0.7, dimension=2)
    tr = schu(op, Vec([0.6, -0.3]), StepSchedule.constant(gamma), 1e-14, n_steps)
    for k in range(len(tr.steps)):
        assert abs(dist(tr.iterates[k], tr.iterates[k + 1]) - tr.steps[k] * tr.orbit_gaps[k]) <= 1e-12
