import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnsmap.routing import nearest_neighbor_order, path_length, plan_tsp_route

from oracles import brute_force_tsp, path_len


def test_empty():
    assert plan_tsp_route([], (0, 0)) == []


def test_collinear_in_order():
    pts = [(30, 0), (10, 0), (40, 0), (20, 0)]
    order = plan_tsp_route(pts, (0, 0))
    assert order == [1, 3, 0, 2]
    assert path_length(np.array(pts)[order], (0, 0)) == pytest.approx(40.0)


def test_square_corners():
    pts = [(10, 10), (0, 10), (10, 0)]
    order = plan_tsp_route(pts, (0, 0))
    assert path_length(np.array(pts)[order], (0, 0)) == pytest.approx(30.0)


def test_permutation():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 100, (40, 2))
    assert sorted(plan_tsp_route(pts, (0, 0))) == list(range(40))


def test_path_length_matches_oracle():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 100, (7, 2))
    assert path_length(pts, (3, 4)) == pytest.approx(path_len((3, 4), pts.tolist()))


@given(st.integers(0, 2**31 - 1), st.integers(2, 30))
@settings(max_examples=50, deadline=None)
def test_not_longer_than_nearest_neighbour(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 100, (n, 2))
    nn = path_length(pts[nearest_neighbor_order(pts, (0, 0))], (0, 0))
    assert path_length(pts[plan_tsp_route(pts, (0, 0))], (0, 0)) <= nn + 1e-9


def test_near_optimal_small_instances():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 9))
        pts = rng.uniform(0, 100, (n, 2))
        start = tuple(rng.uniform(0, 100, 2))
        opt = brute_force_tsp(pts.tolist(), start)
        got = path_length(pts[plan_tsp_route(pts, start)], start)
        worst = max(worst, got / opt)
    assert worst <= 1.05
