import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import deviance_loop, grid_weights_loop, loglik_loop
from ppenet.geom import PointPattern, Window, contains
from ppenet.quadrature import (
    ResolutionError,
    build_grid_scheme,
    deviance,
    loglik,
    poisson_deviance,
    write_scheme_csv,
)

UNIT = Window.rectangle(0, 0, 1, 1)
L_SHAPE = Window([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])


def uniform_pattern(w, n, rng):
    xmin, ymin, xmax, ymax = w.bbox
    out = []
    while len(out) < n:
        p = rng.uniform((xmin, ymin), (xmax, ymax))
        if contains(w, p):
            out.append(p)
    return PointPattern(np.array(out).reshape(-1, 2), w)


def test_empty_pattern_two_by_two():
    q = build_grid_scheme(PointPattern(np.empty((0, 2)), UNIT), UNIT, 2)
    assert q.m == 4 and q.n_events == 0
    assert np.all(q.weights == 0.25)
    assert np.all(q.responses == 0)


def test_single_event_single_tile():
    q = build_grid_scheme(PointPattern([(0.1, 0.1)], UNIT), UNIT, 1)
    assert q.tile_area == 1.0
    assert q.weights.tolist() == [0.5, 0.5]
    assert q.responses.tolist() == [2.0, 0.0]
    assert q.counts.tolist() == [2, 2]


def test_weights_match_loop_oracle_on_l_shape():
    rng = np.random.default_rng(5)
    x = uniform_pattern(L_SHAPE, 60, rng)
    q = build_grid_scheme(x, L_SHAPE, 7)
    ref, kept = grid_weights_loop(x.points, L_SHAPE.bbox, 7, lambda a, b: contains(L_SHAPE, (a, b)), L_SHAPE.area)
    assert q.n_dummies == kept
    assert np.allclose(q.weights, ref, rtol=0, atol=1e-15)


def test_boundary_event_in_outside_tile_is_attached():
    # (1, 1.9) sits in a tile whose centre lies in the notch of the L
    x = PointPattern([(1.0, 1.9)], L_SHAPE)
    q = build_grid_scheme(x, L_SHAPE, 4)
    assert q.n_events == 1
    assert math.isclose(q.weights.sum(), L_SHAPE.area, rel_tol=1e-12)
    ref, _ = grid_weights_loop(x.points, L_SHAPE.bbox, 4, lambda a, b: contains(L_SHAPE, (a, b)), L_SHAPE.area)
    assert np.allclose(q.weights, ref)


def test_responses_are_indicator_over_weight():
    rng = np.random.default_rng(1)
    q = build_grid_scheme(uniform_pattern(UNIT, 40, rng), UNIT, 5)
    assert np.array_equal(q.responses, q.is_event / q.weights)
    assert q.is_event[:40].all() and not q.is_event[40:].any()


def test_every_event_appears_once():
    rng = np.random.default_rng(2)
    x = uniform_pattern(UNIT, 30, rng)
    q = build_grid_scheme(x, UNIT, 6)
    assert np.array_equal(q.points[q.is_event == 1], x.points)


def test_random_dummies_stay_in_their_tiles_and_window():
    rng = np.random.default_rng(0)
    x = uniform_pattern(L_SHAPE, 20, rng)
    q = build_grid_scheme(x, L_SHAPE, 9, dummy_mode="random", seed=4)
    d = q.points[q.is_event == 0]
    assert contains(L_SHAPE, d).all()
    q2 = build_grid_scheme(x, L_SHAPE, 9, dummy_mode="random", seed=4)
    assert np.array_equal(q.points, q2.points)
    assert math.isclose(q.weights.sum(), L_SHAPE.area, rel_tol=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        build_grid_scheme(PointPattern([(0.5, 0.5)], UNIT), Window.rectangle(2, 2, 3, 3), 2)
    with pytest.raises(ResolutionError):
        build_grid_scheme(PointPattern(np.empty((0, 2)), UNIT), UNIT, 0)
    thin_l = Window([(0, 0), (3, 0), (3, 1), (1, 1), (1, 3), (0, 3)])  # bbox centre in the notch
    with pytest.raises(ResolutionError):
        build_grid_scheme(PointPattern(np.empty((0, 2)), thin_l), thin_l, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 40), st.integers(0, 80))
def test_weights_sum_to_area(seed, T, n):
    rng = np.random.default_rng(seed)
    w = L_SHAPE.scaled(rng.uniform(0.5, 300)).shifted(*rng.uniform(-1e5, 1e5, 2))
    q = build_grid_scheme(uniform_pattern(w, n, rng), w, T)
    assert abs(q.weights.sum() - w.area) / w.area < 1e-9


def test_loglik_examples():
    empty = build_grid_scheme(PointPattern(np.empty((0, 2)), UNIT), UNIT, 3)
    assert loglik(empty, np.zeros((empty.m, 0)), (0.0, np.zeros(0))) == pytest.approx(-1.0, abs=1e-12)
    rng = np.random.default_rng(0)
    n = 25
    q = build_grid_scheme(uniform_pattern(UNIT, n, rng), UNIT, 4)
    assert loglik(q, np.zeros((q.m, 1)), (math.log(n), np.zeros(1))) == pytest.approx(n * math.log(n) - n, rel=1e-12)


def test_loglik_scaling_invariance_and_oracle():
    rng = np.random.default_rng(3)
    q = build_grid_scheme(uniform_pattern(UNIT, 50, rng), UNIT, 8)
    Z = rng.standard_normal((q.m, 3))
    beta = np.array([0.3, -0.2, 0.1])
    a = loglik(q, Z, (2.0, beta))
    assert loglik(q, 2 * Z, (2.0, beta / 2)) == pytest.approx(a, rel=1e-12)
    assert a == pytest.approx(loglik_loop(q.weights, q.responses, 2.0 + Z @ beta), rel=1e-10)


def test_loglik_clamps_with_warning():
    q = build_grid_scheme(PointPattern([(0.5, 0.5)], UNIT), UNIT, 2)
    with pytest.warns(RuntimeWarning):
        v = loglik(q, np.ones((q.m, 1)), (0.0, np.array([800.0])))
    assert v == pytest.approx(q.weights @ (q.responses * 700 - math.exp(700)))


def test_deviance_examples():
    assert poisson_deviance(np.array([1.0]), np.array([2.0]), np.array([1.0])) == pytest.approx(2 * (2 * math.log(2) - 1))
    y = np.array([2.0, 0.0, 4.0])
    assert poisson_deviance(np.ones(3), y, np.array([2.0, 1e-300, 4.0])) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        poisson_deviance(np.ones(2), np.ones(2), np.array([1.0, 0.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_deviance_nonnegative_and_matches_loop(seed):
    rng = np.random.default_rng(seed)
    q = build_grid_scheme(uniform_pattern(UNIT, int(rng.integers(1, 30)), rng), UNIT, int(rng.integers(1, 8)))
    mu = rng.uniform(0.01, 50, q.m)
    d = deviance(q, mu)
    assert d >= 0
    assert d == pytest.approx(deviance_loop(q.weights, q.responses, mu), rel=1e-10)


def test_loglik_refinement_converges():
    # deterministic stand-in for a smooth intensity: same events, finer tiles
    rng = np.random.default_rng(9)
    x = uniform_pattern(UNIT, 400, rng)

    def ll(T):
        q = build_grid_scheme(x, UNIT, T)
        Z = np.column_stack([q.points[:, 0], np.sin(3 * q.points[:, 1])])
        return loglik(q, Z, (math.log(400), np.array([0.8, -0.5])))

    a, b = ll(64), ll(128)
    assert abs(a - b) / abs(b) < 0.005


def test_scheme_csv_dump(tmp_path):
    q = build_grid_scheme(PointPattern([(0.1, 0.1)], UNIT), UNIT, 1)
    write_scheme_csv(tmp_path / "q.csv", q)
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines == ["x,y,a,w,y_resp", "0.1,0.1,1,0.5,2.0", "0.5,0.5,0,0.5,0.0"]
