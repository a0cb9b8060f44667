import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ucvoronoi.errors import PointOutsideWorld, UnboundedWorld
from ucvoronoi.sites import Points, Segment
from ucvoronoi.space import NormedSpace
from ucvoronoi.world import Ball, Box, Polytope, boundary_distance, world_from_dict

E2 = NormedSpace.euclidean()
SQUARE = Box([-10, -10], [10, 10])


def worlds():
    return [
        SQUARE,
        Ball(E2, [0, 0], 5.0),
        Ball(NormedSpace.lp(3), [1, 1], 4.0),
        Polytope.from_vertices([[0, 0], [6, 0], [0, 6]]),
        Polytope([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1]], [3, 3, 3, 3, 4]),
    ]


def test_box_ray_exit_examples():
    assert SQUARE.ray_exit([0, 0], [1 / math.sqrt(2), 1 / math.sqrt(2)]) == pytest.approx(10 * math.sqrt(2))
    assert SQUARE.ray_exit([0, 0], [0, 1]) == pytest.approx(10.0)
    assert SQUARE.ray_exit([10, 0], [1, 0]) == 0.0
    with pytest.raises(PointOutsideWorld):
        SQUARE.ray_exit([11, 0], [1, 0])


def test_box_boundary_distance_example():
    seg = Segment([-1, 0], [8, 0])
    for space in [E2, NormedSpace.lp(3), NormedSpace.linf(), NormedSpace.l1()]:
        assert boundary_distance(SQUARE, space, seg) == pytest.approx(2.0)


def test_unbounded_world():
    plane = Box.plane()
    assert not plane.bounded
    assert plane.contains([1e9, -1e9])
    assert plane.ray_exit([0, 0], [1, 0]) == math.inf
    with pytest.raises(UnboundedWorld):
        boundary_distance(plane, E2, Points([[0, 0]]))
    with pytest.raises(UnboundedWorld):
        plane.diameter(E2)


@pytest.mark.parametrize("world", worlds(), ids=repr)
def test_ray_exit_is_the_chord_end(world, rng):
    pts = world.sample(rng, 200)
    assert np.all(world.contains(pts))
    th = rng.normal(size=(200, 2))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    for p, t in zip(pts, th):
        s = world.ray_exit(p, t)
        assert s >= 0
        assert world.contains(p + s * t, atol=1e-9)
        assert not world.contains(p + (s + 1e-6) * t, atol=0)
        # every intermediate point stays inside (convexity)
        assert np.all(world.contains(p + np.linspace(0, s, 17)[:, None] * t, atol=1e-9))


@pytest.mark.parametrize("world", worlds(), ids=repr)
def test_point_boundary_distance_matches_sampled_boundary(world, rng):
    space = getattr(world, "space", NormedSpace.lp(3))
    # boundary points from radial ray exits seen from an interior point
    c = world.sample(rng, 1)[0]
    ang = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
    th = np.c_[np.cos(ang), np.sin(ang)]
    bd = c + world.ray_exit(c, th)[:, None] * th
    x = world.sample(rng, 30)
    want = np.min(space.norm(x[:, None, :] - bd[None]), axis=1)
    got = world.point_boundary_distance(space, x)
    assert np.all(got <= want + 1e-9)
    assert np.all(got >= want - 0.01 * world.diameter(space))


def test_boundary_distance_of_site_is_min_over_points():
    seg = Segment([-3, 1], [2, 4])
    for space in [E2, NormedSpace.lp(1.5), NormedSpace.lp(4)]:
        for world in worlds()[:2] + worlds()[3:]:
            if not np.all(world.contains(np.array([[-3, 1], [2, 4]]))):
                continue
            ts = np.linspace(0, 1, 4001)
            pts = seg.a + ts[:, None] * (seg.b - seg.a)
            want = world.point_boundary_distance(space, pts).min()
            assert boundary_distance(world, space, seg) == pytest.approx(want, abs=1e-9)


def test_volumes():
    assert SQUARE.volume == 400.0
    assert Ball(E2, [0, 0], 2).volume == pytest.approx(4 * math.pi)
    assert Ball(NormedSpace.linf(), [0, 0], 2).volume == pytest.approx(16.0)
    assert Ball(NormedSpace.l1(), [0, 0], 2).volume == pytest.approx(8.0)
    assert Polytope.from_vertices([[0, 0], [6, 0], [0, 6]]).volume == pytest.approx(18.0)


def test_world_round_trip():
    for w in worlds():
        space = getattr(w, "space", E2)
        w2 = world_from_dict(w.to_dict(), space)
        x = np.random.default_rng(1).uniform(-12, 12, size=(500, 2))
        assert np.array_equal(w.contains(x), w2.contains(x))


@settings(max_examples=200, deadline=None)
@given(st.floats(-9.9, 9.9), st.floats(-9.9, 9.9), st.floats(0, 2 * math.pi))
def test_box_chord_through_point(x, y, a):
    p = np.array([x, y])
    t = np.array([math.cos(a), math.sin(a)])
    forward, back = SQUARE.ray_exit(p, t), SQUARE.ray_exit(p, -t)
    q0, q1 = p - back * t, p + forward * t
    # the chord endpoints lie on the boundary
    for q in (q0, q1):
        assert SQUARE.point_boundary_distance(E2, q) == pytest.approx(0.0, abs=1e-9)
