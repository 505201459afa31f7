import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfnvem.errors import CoplanarFractures, DegenerateInput, NonPlanarInput
from dfnvem.geometry import (
    Polygon2,
    aspect_ratio,
    build_frame,
    centroid_area,
    inertia_tensor,
    intersect_coplanar_line,
    intersect_fractures,
)

UNIT_SQUARE = Polygon2(np.array([[0.0, 0.0], [1, 0], [1, 1], [0, 1]]))
TRIANGLE = Polygon2(np.array([[0.0, 0.0], [1, 0], [0, 1]]))


def random_convex_polygon(rng, n=6, scale=1.0):
    """Convex polygon as the hull-order walk of points on a random ellipse."""
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    a, b = rng.uniform(0.3, 1.5, 2) * scale
    pts = np.stack([a * np.cos(ang), b * np.sin(ang)], axis=1)
    th = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    return Polygon2(pts @ rot.T + rng.uniform(-2, 2, 2))


class TestPolygon2:
    def test_rejects_too_few_vertices(self):
        with pytest.raises(DegenerateInput):
            Polygon2(np.array([[0.0, 0.0], [1, 0]]))

    def test_rejects_nonconvex(self):
        with pytest.raises(DegenerateInput):
            Polygon2(np.array([[0.0, 0.0], [2, 0], [2, 2], [1, 0.5], [0, 2]]))

    def test_rejects_clockwise(self):
        with pytest.raises(DegenerateInput):
            Polygon2(np.array([[0.0, 0.0], [0, 1], [1, 1], [1, 0]]))

    def test_aligned_vertices_allowed(self):
        p = Polygon2(np.array([[0.0, 0.0], [0.5, 0], [1, 0], [1, 1], [0, 1]]))
        assert p.n == 5

    def test_contains(self):
        assert UNIT_SQUARE.contains([0.5, 0.5])
        assert not UNIT_SQUARE.contains([1.5, 0.5])


class TestMoments:
    def test_unit_square(self):
        c, a = centroid_area(UNIT_SQUARE)
        assert a == pytest.approx(1.0)
        assert c == pytest.approx([0.5, 0.5])

    def test_triangle(self):
        c, a = centroid_area(TRIANGLE)
        assert a == pytest.approx(0.5)
        assert c == pytest.approx([1 / 3, 1 / 3])

    def test_rectangle(self):
        r = Polygon2(np.array([[0.0, 0.0], [4, 0], [4, 1], [0, 1]]))
        c, a = centroid_area(r)
        assert a == pytest.approx(4.0)
        assert c == pytest.approx([2.0, 0.5])

    def test_inertia_rectangle_4x1(self):
        r = Polygon2(np.array([[-2.0, -0.5], [2, -0.5], [2, 0.5], [-2, 0.5]]))
        J = inertia_tensor(r)
        # closed form w h^3/12 and w^3 h/12
        assert J == pytest.approx(np.diag([1 / 3, 16 / 3]))
        evals, evecs = np.linalg.eigh(J)
        long_axis = evecs[:, 0]
        assert abs(long_axis @ [1, 0]) == pytest.approx(1.0)

    def test_inertia_unit_square(self):
        J = inertia_tensor(UNIT_SQUARE)
        assert J == pytest.approx(np.eye(2) / 12)

    def test_inertia_rotation_equivariance(self):
        r = np.array([[-2.0, -0.5], [2, -0.5], [2, 0.5], [-2, 0.5]])
        rot90 = np.array([[0.0, -1], [1, 0]])
        J = inertia_tensor(Polygon2(r @ rot90.T))
        evals, evecs = np.linalg.eigh(J)
        assert abs(evecs[:, 0] @ [0, 1]) == pytest.approx(1.0)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_centroid_invariance_properties(self, seed):
        rng = np.random.default_rng(seed)
        poly = random_convex_polygon(rng)
        c, a = centroid_area(poly)
        # vertex-list rotation
        k = rng.integers(1, poly.n)
        c2, a2 = centroid_area(Polygon2(np.roll(poly.vertices, k, axis=0)))
        assert a2 == pytest.approx(a, rel=1e-12)
        assert c2 == pytest.approx(c, rel=1e-12, abs=1e-12)
        # translation equivariance
        t = rng.uniform(-5, 5, 2)
        c3, a3 = centroid_area(Polygon2(poly.vertices + t))
        assert a3 == pytest.approx(a, rel=1e-12)
        assert c3 == pytest.approx(c + t, rel=1e-10, abs=1e-10)
        # inertia trace rotation invariance
        th = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        Ja = inertia_tensor(poly)
        Jb = inertia_tensor(Polygon2((poly.vertices - c) @ rot.T + c))
        assert np.trace(Jb) == pytest.approx(np.trace(Ja), rel=1e-10)


class TestAspectRatio:
    def test_unit_square(self):
        assert aspect_ratio(UNIT_SQUARE) == pytest.approx(np.sqrt(2))

    def test_regular_hexagon(self):
        ang = np.arange(6) * np.pi / 3
        hexa = Polygon2(np.stack([np.cos(ang), np.sin(ang)], axis=1))
        assert aspect_ratio(hexa) == pytest.approx(2 / np.sqrt(3))

    def test_rectangle_10x1_exceeds_maxar(self):
        r = Polygon2(np.array([[0.0, 0.0], [10, 0], [10, 1], [0, 1]]))
        assert aspect_ratio(r) == pytest.approx(np.sqrt(101))
        assert aspect_ratio(r) > 10.0

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_scale_invariance(self, seed):
        rng = np.random.default_rng(seed)
        poly = random_convex_polygon(rng)
        s = rng.uniform(0.1, 100.0)
        assert aspect_ratio(Polygon2(poly.vertices * s)) == pytest.approx(
            aspect_ratio(poly), rel=1e-12
        )
        assert aspect_ratio(poly) >= 1.0


class TestLineIntersection:
    def test_vertical_through_square(self):
        hits = intersect_coplanar_line(UNIT_SQUARE, [0.5, 0.5], [0, 1])
        assert len(hits) == 2
        pts = sorted([tuple(np.round(h[0], 12)) for h in hits])
        assert pts == [(0.5, 0.0), (0.5, 1.0)]

    def test_diagonal_through_corners(self):
        hits = intersect_coplanar_line(UNIT_SQUARE, [0.5, 0.5], np.array([1, 1]) / np.sqrt(2))
        assert len(hits) == 2
        pts = sorted(tuple(np.round(h[0], 12)) for h in hits)
        assert pts == [(0.0, 0.0), (1.0, 1.0)]

    def test_horizontal_through_triangle(self):
        hits = intersect_coplanar_line(TRIANGLE, [0.25, 0.25], [1, 0])
        pts = sorted(tuple(np.round(h[0], 12)) for h in hits)
        assert pts == [(0.0, 0.25), (0.75, 0.25)]

    def test_missing_line(self):
        assert intersect_coplanar_line(UNIT_SQUARE, [5.0, 5.0], [0, 1]) == []

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_interior_point_gives_two_hits(self, seed):
        rng = np.random.default_rng(seed)
        poly = random_convex_polygon(rng)
        c, _ = centroid_area(poly)
        th = rng.uniform(0, 2 * np.pi)
        hits = intersect_coplanar_line(poly, c, [np.cos(th), np.sin(th)])
        assert len(hits) == 2
        for q, i, t in hits:
            a = poly.vertices[i]
            b = poly.vertices[(i + 1) % poly.n]
            assert q == pytest.approx(a + t * (b - a), abs=1e-9)


class TestFrames:
    def test_axis_aligned_square(self):
        f = build_frame(np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]))
        assert f.origin == pytest.approx([0, 0, 0])
        assert f.basis_u == pytest.approx([1, 0, 0])
        assert f.basis_v == pytest.approx([0, 1, 0])
        assert f.normal == pytest.approx([0, 0, 1])

    def test_constant_x_plane(self):
        pts = np.array([[0.5, -1, -1], [0.5, 1, -1], [0.5, 1, 1], [0.5, -1, 1]])
        f = build_frame(pts)
        assert abs(f.normal @ [1, 0, 0]) == pytest.approx(1.0)

    def test_collinear_points_rejected(self):
        with pytest.raises(DegenerateInput):
            build_frame(np.array([[0.0, 0, 0], [1, 1, 1], [2, 2, 2]]))

    def test_nonplanar_rejected(self):
        pts = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0.3], [0, 1, 0]])
        with pytest.raises(NonPlanarInput):
            build_frame(pts)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        poly = random_convex_polygon(rng)
        # embed in a random plane
        o = rng.uniform(-3, 3, 3)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        pts3 = o + poly.vertices @ q[:, :2].T
        f = build_frame(pts3)
        back = f.to_world(f.to_local(pts3))
        assert back == pytest.approx(pts3, abs=1e-12 * max(1.0, poly.diameter()))


class TestFractureIntersection:
    def test_problem1_trace(self):
        f1 = np.array([[-1.0, -1, 0], [1, -1, 0], [1, 1, 0], [-1, 1, 0]])
        f2 = np.array([[-1.0, 0, -1], [0, 0, -1], [0, 0, 1], [-1, 0, 1]])
        seg = intersect_fractures(f1, build_frame(f1), f2, build_frame(f2))
        assert seg is not None
        ends = sorted(tuple(np.round(p, 9)) for p in seg)
        assert ends == [(-1.0, 0.0, 0.0), (0.0, 0.0, 0.0)]

    def test_parallel_planes(self):
        f1 = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        f2 = f1 + [0, 0, 1.0]
        assert intersect_fractures(f1, build_frame(f1), f2, build_frame(f2)) is None

    def test_coplanar_raises(self):
        f1 = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        f2 = f1 + [0.5, 0.5, 0.0]
        with pytest.raises(CoplanarFractures):
            intersect_fractures(f1, build_frame(f1), f2, build_frame(f2))

    def test_disjoint_in_plane(self):
        f1 = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        f2 = np.array([[5.0, 0, -1], [6, 0, -1], [6, 0, 1], [5, 0, 1]])
        assert intersect_fractures(f1, build_frame(f1), f2, build_frame(f2)) is None
