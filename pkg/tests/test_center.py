import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fixpoint_lab.center import (
    OrbitSample,
    SolverOptions,
    asymptotic_center,
    orbit_sample,
    radius_gate,
    smallest_enclosing_ball,
    type_function,
)
from fixpoint_lab.operators import example32, scale
from fixpoint_lab.space import Ball, BallPlusPoints, Box, Vec

from oracles import enclosing_circle_brute, scan_segment_minimax


def sample_of(points, p=2.0):
    return OrbitSample(tuple(Vec(x, p) for x in points))


def test_seb_two_points():
    c, r = smallest_enclosing_ball([Vec([0, 0]), Vec([2, 0])])
    np.testing.assert_allclose(c.coords, [1.0, 0.0], atol=1e-12)
    assert r == pytest.approx(1.0, abs=1e-12)


def test_seb_degenerate_inputs():
    c, r = smallest_enclosing_ball([Vec([0.3, 0.4])])
    assert r == 0.0 and c == Vec([0.3, 0.4])
    pts = [Vec([t, 2 * t, 0.0]) for t in (0.0, 0.25, 1.0)]  # collinear in 3-D
    c, r = smallest_enclosing_ball(pts)
    np.testing.assert_allclose(c.coords, [0.5, 1.0, 0.0], atol=1e-12)
    c, r = smallest_enclosing_ball([Vec([1.0, 1.0])] * 4)
    assert r == pytest.approx(0.0, abs=1e-15)


def test_seb_high_dimension_uses_dual():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 20))
    c, r = smallest_enclosing_ball([Vec(x) for x in X])
    d = np.linalg.norm(X - c.coords, axis=1)
    assert d.max() == pytest.approx(r, abs=1e-12)
    # optimality: the center lies in the hull of the farthest points
    active = X[d > r - 1e-6]
    w, *_ = np.linalg.lstsq(np.vstack([active.T, np.ones(len(active))]),
                            np.append(c.coords, 1.0), rcond=None)
    assert np.all(w > -1e-6)


def test_seb_matches_brute_force_on_random_sets():
    rng = np.random.default_rng(11)
    for _ in range(200):
        P = rng.uniform(-1, 1, (int(rng.integers(3, 13)), 2))
        c, r = smallest_enclosing_ball([Vec(x) for x in P])
        _, r_ref = enclosing_circle_brute(P)
        assert abs(r - r_ref) <= 1e-9


def test_constrained_center_against_scan():
    s = sample_of([[0, 0], [2, 0]])
    res = asymptotic_center(s, Ball(Vec([0.0, 0.0]), 0.5))
    x_ref, f_ref = scan_segment_minimax([[0, 0], [2, 0]], [-0.5, 0], [0.5, 0])
    np.testing.assert_allclose(res.center.coords, x_ref, atol=1e-4)
    assert res.radius == pytest.approx(f_ref, abs=1e-4)
    assert res.certified_gap <= 1e-9


def test_center_in_box():
    s = sample_of([[0, 0], [2, 0], [1, 1]])
    res = asymptotic_center(s, Box(Vec([-1, -1]), Vec([0.5, 0.5])))
    # optimum on the edge x = 0.5; minimize max distance along it
    x_ref, f_ref = scan_segment_minimax([[0, 0], [2, 0], [1, 1]], [0.5, -1], [0.5, 0.5])
    assert res.radius == pytest.approx(f_ref, abs=1e-5)
    np.testing.assert_allclose(res.center.coords, x_ref, atol=1e-3)


def test_center_interior_equals_seb():
    s = sample_of([[0.1, 0.0], [-0.1, 0.0], [0.0, 0.1]])
    res = asymptotic_center(s, Ball(Vec([0.0, 0.0]), 1.0))
    c, r = smallest_enclosing_ball(s.points)
    assert res.iterations == 0
    assert res.radius == pytest.approx(r, abs=1e-12)
    assert res.center == c


def test_center_in_lp_space():
    s = sample_of([[0, 0], [2, 0]], p=3.0)
    res = asymptotic_center(s, Ball(Vec([0.0, 0.0], 3.0), 5.0), SolverOptions(iters=20000, tol=1e-6))
    np.testing.assert_allclose(res.center.coords, [1.0, 0.0], atol=1e-3)
    assert res.radius == pytest.approx(1.0, abs=1e-3)


def test_center_over_ball_plus_points():
    s = sample_of([[1.0, 0.0], [1.2, 0.0]])
    Q = BallPlusPoints(Ball(Vec([0.0, 0.0]), 0.5), (Vec([1.1, 0.0]),))
    res = asymptotic_center(s, Q)
    np.testing.assert_allclose(res.center.coords, [1.1, 0.0])
    assert res.radius == pytest.approx(0.1)


def test_orbit_sample_and_type_function():
    op = scale(0.5)
    s = orbit_sample(op, Vec([0.8, 0.0]), burn_in=1, window=3)
    np.testing.assert_allclose(s.matrix[:, 0], [0.4, 0.2, 0.1])
    assert type_function(s, Vec([0.0, 0.0])) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        OrbitSample(())


def test_radius_gate_example():
    op = example32()
    s = orbit_sample(op, Vec.basis(32, 1, scale=0.5), burn_in=4, window=16)
    g = radius_gate(s, op.domain, 0.5)
    assert g.passes
    # KKT certificate: the center is a convex combination of the farthest points
    X = s.matrix
    c = g.center.center.coords
    d = np.linalg.norm(X - c, axis=1)
    assert d.max() == pytest.approx(g.rho_hat, abs=1e-12)
    active = X[d > g.rho_hat - 1e-9]
    w, *_ = np.linalg.lstsq(np.vstack([active.T, np.ones(len(active))]), np.append(c, 1.0), rcond=None)
    assert np.all(w > -1e-9)
    np.testing.assert_allclose(w @ active, c, atol=1e-9)
    assert 0.2 < g.rho_hat < 0.21
    assert not radius_gate(s, op.domain, 0.2).passes


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=10))
def test_seb_encloses_and_is_minimal(points):
    P = np.asarray(points)
    c, r = smallest_enclosing_ball([Vec(x) for x in P])
    assert np.all(np.linalg.norm(P - c.coords, axis=1) <= r + 1e-12)
    _, r_ref = enclosing_circle_brute(P)
    assert r <= r_ref + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=8),
       st.floats(0.05, 2.0))
def test_center_lies_in_Q_and_beats_projection(points, radius):
    s = sample_of(points)
    Q = Ball(Vec([0.0, 0.0]), radius)
    res = asymptotic_center(s, Q)
    assert Q.contains(res.center, 1e-9)
    c, _ = smallest_enclosing_ball(s.points)
    assert res.radius <= type_function(s, Q.project(c)) + 1e-9
    assert res.certified_gap >= 0.0
