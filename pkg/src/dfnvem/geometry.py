"""Planar and 3D polygon primitives: frames, intersections, moments, aspect ratio.

All tolerance decisions are relative to the local diameter through TOL_GEOM,
so the kernel behaves identically for metre-scale and kilometre-scale inputs.
Polygons are convex, counter-clockwise, and may carry aligned (zero-turn)
vertices, which the mesh layer relies on for conformity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoplanarFractures, DegenerateInput, NonPlanarInput

TOL_GEOM = 1e-9


def _as_points(pts, dim: int) -> np.ndarray:
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DegenerateInput(f"expected (n,{dim}) point array, got shape {arr.shape}")
    return arr


def points_diameter(pts: np.ndarray) -> float:
    """Max pairwise distance; O(n^2), cells are small."""
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


@dataclass(frozen=True)
class Polygon2:
    """Convex, simple, counter-clockwise 2D polygon. Aligned vertices allowed."""

    vertices: np.ndarray

    def __post_init__(self):
        v = _as_points(self.vertices, 2)
        object.__setattr__(self, "vertices", v)
        n = len(v)
        if n < 3:
            raise DegenerateInput("polygon needs at least 3 vertices")
        diam = points_diameter(v)
        if diam <= 0.0:
            raise DegenerateInput("all polygon vertices coincide")
        e = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(e[:, 0], e[:, 1]) <= TOL_GEOM * diam):
            raise DegenerateInput("consecutive vertices too close")
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(cross < -TOL_GEOM * diam**2):
            raise DegenerateInput("polygon not convex/counter-clockwise")
        if signed_area(v) <= 0.0:
            raise DegenerateInput("polygon has non-positive area")

    @property
    def n(self) -> int:
        return len(self.vertices)

    def diameter(self) -> float:
        return points_diameter(self.vertices)

    def edges(self) -> np.ndarray:
        """(n,2,2) array of edge endpoint pairs, edge i = v[i] -> v[i+1]."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    def contains(self, p, tol: float | None = None) -> bool:
        v = self.vertices
        if tol is None:
            tol = TOL_GEOM * self.diameter()
        e = np.roll(v, -1, axis=0) - v
        w = np.asarray(p, dtype=float) - v
        cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
        lens = np.hypot(e[:, 0], e[:, 1])
        return bool(np.all(cross >= -tol * lens))


def signed_area(v: np.ndarray) -> float:
    # shift to a local origin: shoelace products on far-from-origin
    # coordinates cancel catastrophically for tiny cells
    v = v - v[0]
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def centroid_area(poly: Polygon2) -> tuple[np.ndarray, float]:
    """Exact shoelace centroid and area (computed about a local origin)."""
    o = poly.vertices[0]
    v = poly.vertices - o
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy]) + o, float(area)


def inertia_tensor(poly: Polygon2) -> np.ndarray:
    """Second-moment tensor about the centroid.

    J = [[int (y-yc)^2, -int (x-xc)(y-yc)], [sym, int (x-xc)^2]]; the
    eigenvector of the smallest eigenvalue points along the cell's long axis.
    """
    c, area = centroid_area(poly)
    v = poly.vertices - c
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    ixx = (cross * (y**2 + y * yn + yn**2)).sum() / 12.0
    iyy = (cross * (x**2 + x * xn + xn**2)).sum() / 12.0
    ixy = (cross * (x * yn + 2.0 * x * y + 2.0 * xn * yn + xn * y)).sum() / 24.0
    return np.array([[ixx, -ixy], [-ixy, iyy]])


def aspect_ratio(poly: Polygon2) -> float:
    """Max centroid-to-vertex distance over min centroid-to-edge distance."""
    c, _ = centroid_area(poly)
    v = poly.vertices
    rmax = float(np.hypot(*(v - c).T).max())
    e = np.roll(v, -1, axis=0) - v
    w = c - v
    # distance from interior centroid to each edge's supporting line
    d = np.abs(e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]) / np.hypot(e[:, 0], e[:, 1])
    return rmax / float(d.min())


def intersect_coplanar_line(
    poly: Polygon2, point, direction
) -> list[tuple[np.ndarray, int, float]]:
    """Intersect the line point + s*direction with the polygon boundary.

    Returns up to two (point, edge_index, edge_parameter) hits ordered by the
    line parameter s. For a point strictly inside a convex polygon exactly two
    hits are returned. Corner hits are reported once.
    """
    p = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    nd = np.hypot(*d)
    if nd == 0.0:
        raise DegenerateInput("zero direction")
    d = d / nd
    diam = poly.diameter()
    tol = TOL_GEOM * diam
    hits: list[tuple[float, np.ndarray, int, float]] = []
    v = poly.vertices
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        e = b - a
        den = d[0] * e[1] - d[1] * e[0]
        elen = np.hypot(*e)
        if abs(den) <= 1e-14 * elen:
            continue  # parallel edge; overlap handled by neighbours' corners
        w = a - p
        s = (w[0] * e[1] - w[1] * e[0]) / den
        t = (w[0] * d[1] - w[1] * d[0]) / den
        if -tol / elen <= t <= 1.0 + tol / elen:
            t = min(max(t, 0.0), 1.0)
            q = a + t * e
            hits.append((s, q, i, t))
    hits.sort(key=lambda h: h[0])
    out: list[tuple[np.ndarray, int, float]] = []
    for s, q, i, t in hits:
        if out and np.hypot(*(q - out[-1][0])) <= tol:
            continue
        out.append((q, i, t))
    if len(out) > 2:
        # keep the extreme pair along the line
        out = [out[0], out[-1]]
    return out


def clip_line_parameter_interval(
    poly2: np.ndarray, p0: np.ndarray, d: np.ndarray, tol: float
) -> tuple[float, float] | None:
    """Interval of s where p0 + s*d lies in the convex polygon, or None."""
    smin, smax = -np.inf, np.inf
    n = len(poly2)
    for i in range(n):
        a, b = poly2[i], poly2[(i + 1) % n]
        e = b - a
        # inside condition: cross(e, x - a) >= 0
        ca = e[0] * (p0[1] - a[1]) - e[1] * (p0[0] - a[0])
        cd = e[0] * d[1] - e[1] * d[0]
        elen = np.hypot(*e)
        if abs(cd) <= 1e-15 * elen:
            if ca < -tol * elen:
                return None
            continue
        s = -ca / cd
        if cd > 0:
            smin = max(smin, s)
        else:
            smax = min(smax, s)
    if smin >= smax:
        return None
    return smin, smax


@dataclass(frozen=True)
class Frame3:
    """Orthonormal in-plane frame of a 3D-embedded planar polygon."""

    origin: np.ndarray
    basis_u: np.ndarray
    basis_v: np.ndarray
    normal: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float)
        u = np.asarray(self.basis_u, dtype=float)
        w = np.asarray(self.basis_v, dtype=float)
        n = np.cross(u, w) if self.normal is None else np.asarray(self.normal, dtype=float)
        for name, vec in (("basis_u", u), ("basis_v", w), ("normal", n)):
            if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise DegenerateInput(f"{name} not unit length")
        if abs(np.dot(u, w)) > 1e-12:
            raise DegenerateInput("basis_u and basis_v not orthogonal")
        if np.linalg.norm(np.cross(u, w) - n) > 1e-12:
            raise DegenerateInput("normal != basis_u x basis_v")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "basis_u", u)
        object.__setattr__(self, "basis_v", w)
        object.__setattr__(self, "normal", n)

    def to_local(self, pts3) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts3, dtype=float)) - self.origin
        out = np.stack([p @ self.basis_u, p @ self.basis_v], axis=-1)
        return out[0] if np.asarray(pts3).ndim == 1 else out

    def to_world(self, pts2) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts2, dtype=float))
        out = self.origin + np.outer(p[:, 0], self.basis_u) + np.outer(p[:, 1], self.basis_v)
        return out[0] if np.asarray(pts2).ndim == 1 else out

    def plane_distance(self, pts3) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts3, dtype=float)) - self.origin
        return p @ self.normal


def build_frame(polygon3d) -> Frame3:
    """Isometric 2D frame of a coplanar 3D point loop.

    Origin is the first point, basis_u the first edge direction, so an
    axis-aligned input maps to the identity embedding.
    """
    pts = _as_points(polygon3d, 3)
    if len(pts) < 3:
        raise DegenerateInput("need at least 3 points")
    diam = points_diameter(pts)
    if diam <= 0.0:
        raise DegenerateInput("coincident points")
    # Newell normal is robust against near-collinear leading edges
    nrm = np.zeros(3)
    for i in range(len(pts)):
        a, b = pts[i], pts[(i + 1) % len(pts)]
        nrm += np.cross(a, b)
    nn = np.linalg.norm(nrm)
    if nn <= TOL_GEOM * diam**2:
        raise DegenerateInput("points are collinear")
    normal = nrm / nn
    origin = pts[0]
    u = pts[1] - pts[0]
    u = u - np.dot(u, normal) * normal
    u = u / np.linalg.norm(u)
    v = np.cross(normal, u)
    frame = Frame3(origin, u, v, normal)
    if np.abs(frame.plane_distance(pts)).max() > TOL_GEOM * diam:
        raise NonPlanarInput("points not coplanar within tolerance")
    return frame


def intersect_fractures(
    poly1_3d, frame1: Frame3, poly2_3d, frame2: Frame3
) -> np.ndarray | None:
    """Trace segment of two convex planar polygons, as a (2,3) array or None.

    Raises CoplanarFractures when the two supporting planes coincide.
    """
    p1 = _as_points(poly1_3d, 3)
    p2 = _as_points(poly2_3d, 3)
    diam = max(points_diameter(p1), points_diameter(p2))
    tol = TOL_GEOM * diam
    n1, n2 = frame1.normal, frame2.normal
    d = np.cross(n1, n2)
    dn = np.linalg.norm(d)
    if dn <= TOL_GEOM:
        if abs(np.dot(frame2.origin - frame1.origin, n1)) <= tol:
            raise CoplanarFractures("coplanar fractures are not supported")
        return None
    d = d / dn
    # point on both planes: solve [n1; n2; d] x = [n1.o1, n2.o2, 0]
    A = np.stack([n1, n2, d])
    rhs = np.array([np.dot(n1, frame1.origin), np.dot(n2, frame2.origin), 0.0])
    p0 = np.linalg.solve(A, rhs)

    ivals = []
    for pts, frame in ((p1, frame1), (p2, frame2)):
        local = frame.to_local(pts)
        q0 = frame.to_local(p0)
        qd = np.array([np.dot(d, frame.basis_u), np.dot(d, frame.basis_v)])
        iv = clip_line_parameter_interval(local, q0, qd, TOL_GEOM)
        if iv is None:
            return None
        ivals.append(iv)
    smin = max(ivals[0][0], ivals[1][0])
    smax = min(ivals[0][1], ivals[1][1])
    if smax - smin <= tol:
        return None
    return np.stack([p0 + smin * d, p0 + smax * d])
