"""Acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion
is printed in the terminal summary.
"""
import time
from pathlib import Path

import numpy as np
import pytest

from fixpoint_lab.center import OrbitSample, asymptotic_center, smallest_enclosing_ball
from fixpoint_lab.cli import main
from fixpoint_lab.iterate import (
    StepSchedule,
    chain,
    chain_contract_bound,
    picard,
    residual_m,
    schu,
    uniqueness_probe,
)
from fixpoint_lab.operators import (
    ExampleParams,
    ProductOfB,
    affine,
    beta_at,
    example32,
    example_closed_form,
    iterate_n,
    local_lipschitz_profile,
    scale,
)
from fixpoint_lab.space import Ball, Vec, dist
from fixpoint_lab.verify import closedness_demo, demiclosedness_demo, lemma22_suite

from oracles import enclosing_circle_brute, scan_segment_minimax

D = 32
E1 = Vec.basis(D, 1)


@pytest.fixture(scope="module")
def schu_trace():
    op = example32(restrict_to_ball=True)
    t0 = time.perf_counter()
    tr = schu(op, Vec.basis(D, 1, scale=0.5), StepSchedule.constant(0.5), 1e-6, 500)
    return op, tr, time.perf_counter() - t0


def test_criterion_1_closed_form_orbit():
    t0 = time.perf_counter()
    op, params = example32(), ExampleParams()
    for n in range(2, 17):
        got = iterate_n(op, E1, n).coords
        want = example_closed_form(params, n).coords
        assert np.max(np.abs(got - want)) <= 1e-12
    assert time.perf_counter() - t0 < 1.0


def test_criterion_2_locality_bound():
    # the profile evaluates local_lipschitz_probe for every n on one seeded draw of pairs
    t0 = time.perf_counter()
    op = example32()
    sched = ProductOfB()
    seen = local_lipschitz_profile(op, list(range(1, 9)), 10_000, seed=0)
    elapsed = time.perf_counter() - t0
    over = {n: (v, beta_at(sched, n)) for n, v in seen.items() if v > beta_at(sched, n) + 1e-9}
    assert not over, f"probe exceeds beta_n (estimate, bound): {over}"
    assert elapsed < 10.0


def test_criterion_3_non_globality():
    op = example32()
    zero = Vec.zeros(D)
    for n in range(2, 17):
        ratio = dist(iterate_n(op, E1, n), iterate_n(op, zero, n)) / dist(E1, zero)
        assert ratio <= 0.25


def test_criterion_4_hilbert_modulus():
    rep = lemma22_suite(64, 10_000, seed=0)
    assert rep.cases_run == 10_000
    assert rep.max_violation <= 1e-12


def test_criterion_5_schu_fixed_point(schu_trace):
    op, tr, elapsed = schu_trace
    assert elapsed < 5.0
    assert len(tr.iterates) <= 500
    assert tr.residuals[-1] < 1e-6
    running = np.minimum.accumulate(tr.residuals)
    assert np.all(np.diff(running) <= 0.0)
    assert running[-1] < 1e-6


def test_criterion_6_schu_trace_identity(schu_trace):
    _, tr, _ = schu_trace
    assert tr.steps
    for n in range(len(tr.steps)):
        lhs = dist(tr.iterates[n + 1], tr.iterates[n])
        assert abs(lhs - tr.steps[n] * tr.orbit_gaps[n]) <= 1e-12


def test_criterion_7_residual_propagation(schu_trace):
    op, tr, _ = schu_trace
    tail = tr.iterates[len(tr.iterates) // 2:]
    sched = op.schedule
    for m in (2, 3, 4, 8):
        coef = 1.0 + sum(beta_at(sched, j) for j in range(1, m))
        lhs = residual_m(op, tail, m)
        one = residual_m(op, tail, 1)
        for a, b in zip(lhs, one):
            assert a <= coef * b + 1e-9


def test_criterion_8_enclosing_ball_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        P = rng.uniform(-1, 1, (int(rng.integers(3, 13)), 2))
        pts = [Vec(x) for x in P]
        _, r = smallest_enclosing_ball(pts)
        _, r_ref = enclosing_circle_brute(P)
        assert abs(r - r_ref) <= 1e-9
        res = asymptotic_center(OrbitSample(tuple(pts)), Ball(Vec([0.0, 0.0]), 10.0))
        assert abs(res.radius - r_ref) <= 1e-6
    assert time.perf_counter() - t0 < 30.0


def test_criterion_9_constrained_center():
    res = asymptotic_center(OrbitSample((Vec([0.0, 0.0]), Vec([2.0, 0.0]))), Ball(Vec([0.0, 0.0]), 0.5))
    x_ref, f_ref = scan_segment_minimax([[0, 0], [2, 0]], [-0.5, 0.0], [0.5, 0.0])
    assert np.linalg.norm(res.center.coords - x_ref) <= 1e-4
    assert np.linalg.norm(res.center.coords - [0.5, 0.0]) <= 1e-4
    assert abs(res.radius - f_ref) <= 1e-4
    assert abs(res.radius - 1.5) <= 1e-4


def test_criterion_10_uniqueness():
    rng = np.random.default_rng(10)
    starts = []
    while len(starts) < 8:
        x = rng.uniform(-1, 1, 2)
        if np.linalg.norm(x) <= 1.0:
            starts.append(Vec(x))
    for op in (scale(0.5), affine(0.5, (0.1, 0.0))):
        v = uniqueness_probe(op, starts, 1e-10, 1000)
        assert v.kind == "unique_within_tol"
        assert v.spread < 1e-8
        u, w = starts[0], starts[1]
        ch = chain(u, w, op.radius)
        bounds = [chain_contract_bound(op, ch, 1, m) for m in range(0, 11)]
        ratios = np.array(bounds[1:]) / np.array(bounds[:-1])
        assert np.allclose(ratios, ratios[0]) and ratios[0] < 1.0
        for m, bound in enumerate(bounds):
            assert dist(iterate_n(op, u, m), iterate_n(op, w, m)) <= bound + 1e-9


def test_criterion_11_closedness_demiclosedness():
    tol = 1e-6
    cases = [
        (scale(0.5), Vec([0.8, 0.0]), "picard"),
        (scale(0.5), Vec([0.8, 0.0]), "schu"),
        (example32(), Vec.basis(D, 1, scale=0.5), "picard"),
        (example32(restrict_to_ball=True), Vec.basis(D, 1, scale=0.5), "schu"),
    ]
    for op, q0, scheme in cases:
        if scheme == "schu":
            tr = schu(op, q0, StepSchedule.constant(0.5), tol, 500, stop_at_tol=False)
        else:
            tr = picard(op, q0, tol, 500, stop_at_tol=False)
        fp = [q for q, r in zip(tr.iterates, tr.residuals) if r < tol]
        b1 = beta_at(op.schedule, 1)
        closed = closedness_demo(op, fp, tol)
        assert closed.passed
        assert closed.details["limit_residual"] <= (1.0 + b1) * tol
        demi = demiclosedness_demo(op, tr, tol)
        assert demi.passed
        assert demi.details["residual_at_limit"] <= (2.0 + b1) * tol


def test_criterion_12_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("FIXPOINT_LAB_OUT", str(tmp_path))
    configs = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.json"))
    assert configs
    for cfg in configs:
        a, b = f"{cfg.stem}.a", f"{cfg.stem}.b"
        assert main(["run", "--config", str(cfg), "--seed", "3", "--out", a]) in (0, 2)
        assert main(["run", "--config", str(cfg), "--seed", "3", "--out", b]) in (0, 2)
        assert (tmp_path / a).read_bytes() == (tmp_path / b).read_bytes()
