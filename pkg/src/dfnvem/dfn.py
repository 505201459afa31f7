"""DFN data model and ingestion: fractures, traces, boundary conditions,
forcing terms and exact solutions, plus the two built-in validation problems
and a seeded synthetic network generator."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy as sp
from scipy.spatial import ConvexHull

from .errors import (
    CoplanarFractures,
    DegenerateInput,
    NonPlanarInput,
    ParseError,
    UnknownProblem,
    ValidationError,
)
from .functions import U, V, X, Y, Z, PlaneField, parse_expression
from .geometry import (
    TOL_GEOM,
    Frame3,
    Polygon2,
    build_frame,
    intersect_fractures,
    points_diameter,
)

DIRICHLET = "DIR"
NEUMANN = "NEU"


@dataclass
class Fracture:
    id: int
    polygon3d: np.ndarray  # (n,3)
    frame: Frame3
    polygon2: Polygon2
    transmissivity: float

    @classmethod
    def from_points(cls, fid: int, pts3, transmissivity: float) -> "Fracture":
        if transmissivity <= 0.0:
            raise ValidationError(f"fracture {fid}: transmissivity must be positive")
        pts3 = np.asarray(pts3, dtype=float)
        try:
            frame = build_frame(pts3)
            local = frame.to_local(pts3)
            try:
                poly2 = Polygon2(local)
            except DegenerateInput:
                # input wound clockwise; flip the frame instead of the points
                frame = Frame3(frame.origin, frame.basis_u, -frame.basis_v, -frame.normal)
                poly2 = Polygon2(frame.to_local(pts3))
        except (DegenerateInput, NonPlanarInput) as exc:
            raise ValidationError(f"fracture {fid}: {exc}") from exc
        return cls(fid, pts3, frame, poly2, float(transmissivity))


@dataclass
class Trace:
    id: int
    fractures: tuple[int, int]
    segment3d: np.ndarray  # (2,3)

    def segment2d_on(self, frame: Frame3) -> np.ndarray:
        return frame.to_local(self.segment3d)

    def point3d(self, t: float) -> np.ndarray:
        a, b = self.segment3d
        return a + t * (b - a)

    def param_of(self, p3: np.ndarray) -> float:
        a, b = self.segment3d
        d = b - a
        return float(np.dot(p3 - a, d) / np.dot(d, d))


@dataclass
class BoundaryCondition:
    kind: str  # DIRICHLET | NEUMANN
    func: PlaneField


@dataclass
class ProblemSpec:
    """Immutable problem description: geometry plus data functions.

    bcs[i][e] is the condition on edge e of fracture i's polygon; forcing[i],
    exact[i], exact_grad via PlaneField. exact entries may be None.
    """

    name: str
    fractures: list[Fracture]
    traces: list[Trace]
    bcs: list[list[BoundaryCondition]]
    forcing: list[PlaneField]
    exact: list[PlaneField | None] = field(default_factory=list)

    @property
    def has_exact(self) -> bool:
        return bool(self.exact) and all(e is not None for e in self.exact)

    def traces_of(self, fid: int) -> list[Trace]:
        return [t for t in self.traces if fid in t.fractures]

    def validate(self) -> None:
        n = len(self.fractures)
        if not (len(self.bcs) == len(self.forcing) == n):
            raise ValidationError("per-fracture data length mismatch")
        for f, bc in zip(self.fractures, self.bcs):
            if len(bc) != f.polygon2.n:
                raise ValidationError(f"fracture {f.id}: one BC per polygon edge required")
        if not any(c.kind == DIRICHLET for bc in self.bcs for c in bc):
            raise ValidationError("Dirichlet boundary is empty")
        if self.exact and len(self.exact) != n:
            raise ValidationError("exact solution must cover every fracture")


def compute_traces(fractures: list[Fracture]) -> list[Trace]:
    traces = []
    for i in range(len(fractures)):
        for j in range(i + 1, len(fractures)):
            fi, fj = fractures[i], fractures[j]
            seg = intersect_fractures(fi.polygon3d, fi.frame, fj.polygon3d, fj.frame)
            if seg is not None:
                traces.append(Trace(len(traces), (fi.id, fj.id), seg))
    return traces


# ---------------------------------------------------------------------------
# file ingestion
# ---------------------------------------------------------------------------


def load_dfn(path) -> ProblemSpec:
    """Parse the line-oriented DFN input format into a validated ProblemSpec."""
    lines = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines or not lines[0].startswith("DFN"):
        raise ParseError("missing DFN header")
    try:
        n_frac = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ParseError("malformed DFN header") from exc

    pos = 1
    fractures: list[Fracture] = []
    for _ in range(n_frac):
        if pos >= len(lines) or not lines[pos].startswith("FRACTURE"):
            raise ParseError(f"expected FRACTURE record at line {pos + 1}")
        parts = lines[pos].split()
        try:
            fid, k, nv = int(parts[1]), float(parts[2]), int(parts[3])
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed FRACTURE record: {lines[pos]!r}") from exc
        pos += 1
        try:
            pts = np.array(
                [[float(c) for c in lines[pos + r].split()] for r in range(nv)]
            )
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed vertex block for fracture {fid}") from exc
        if pts.shape != (nv, 3):
            raise ParseError(f"fracture {fid}: expected {nv} x/y/z lines")
        pos += nv
        fractures.append(Fracture.from_points(fid, pts, k))

    by_id = {f.id: f for f in fractures}
    if len(by_id) != len(fractures):
        raise ValidationError("duplicate fracture ids")

    bcs: dict[int, dict[int, BoundaryCondition]] = {f.id: {} for f in fractures}
    forcing: dict[int, PlaneField] = {}
    exact: dict[int, PlaneField] = {}
    for ln in lines[pos:]:
        parts = ln.split(maxsplit=1)
        tag = parts[0]
        if tag == "BC":
            fields = ln.split(maxsplit=4)
            if len(fields) != 5 or fields[3] not in (DIRICHLET, NEUMANN):
                raise ParseError(f"malformed BC record: {ln!r}")
            fid, edge = int(fields[1]), int(fields[2])
            if fid not in by_id:
                raise ParseError(f"BC for unknown fracture {fid}")
            if not 0 <= edge < by_id[fid].polygon2.n:
                raise ParseError(f"BC edge index {edge} out of range for fracture {fid}")
            func = PlaneField.from_world(parse_expression(fields[4]), by_id[fid].frame)
            bcs[fid][edge] = BoundaryCondition(fields[3], func)
        elif tag == "FORCING":
            fields = ln.split(maxsplit=2)
            if len(fields) != 3:
                raise ParseError(f"malformed FORCING record: {ln!r}")
            fid = int(fields[1])
            forcing[fid] = PlaneField.from_world(parse_expression(fields[2]), by_id[fid].frame)
        elif tag == "EXACT":
            fields = ln.split(maxsplit=2)
            if len(fields) != 3:
                raise ParseError(f"malformed EXACT record: {ln!r}")
            fid = int(fields[1])
            exact[fid] = PlaneField.from_world(parse_expression(fields[2]), by_id[fid].frame)
        else:
            raise ParseError(f"unknown record {tag!r}")

    zero = PlaneField.constant(0.0)
    spec = ProblemSpec(
        name=str(path),
        fractures=fractures,
        traces=compute_traces(fractures),
        bcs=[
            [bcs[f.id].get(e, BoundaryCondition(NEUMANN, zero)) for e in range(f.polygon2.n)]
            for f in fractures
        ],
        forcing=[forcing.get(f.id, zero) for f in fractures],
        exact=[exact.get(f.id) for f in fractures] if exact else [],
    )
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# built-in validation problems
# ---------------------------------------------------------------------------

# Both built-in problems use the standard polar angle atan2(ordinate, abscissa)
# of the local fracture coordinates; this is the unique reading that makes the
# exact solutions continuous across the traces with balanced fluxes.


def _manufactured(name, frac_pts, exprs_xyz, k=1.0):
    fractures = [Fracture.from_points(i, pts, k) for i, pts in enumerate(frac_pts)]
    exact = [PlaneField.from_world(e, f.frame) for e, f in zip(exprs_xyz, fractures)]
    forcing = [e.negated_scaled_laplacian(f.transmissivity) for e, f in zip(exact, fractures)]
    bcs = [
        [BoundaryCondition(DIRICHLET, e) for _ in range(f.polygon2.n)]
        for e, f in zip(exact, fractures)
    ]
    spec = ProblemSpec(
        name=name,
        fractures=fractures,
        traces=compute_traces(fractures),
        bcs=bcs,
        forcing=forcing,
        exact=exact,
    )
    spec.validate()
    return spec


def builtin_problem(name: str) -> ProblemSpec:
    """Two-fracture (problem1) and three-fracture (problem2) benchmarks with
    known exact solutions; unit transmissivities, Dirichlet data from the
    exact solution on every boundary edge."""
    if name == "problem1":
        f1 = [[-1, -1, 0], [1, -1, 0], [1, 1, 0], [-1, 1, 0]]
        f2 = [[-1, 0, -1], [0, 0, -1], [0, 0, 1], [-1, 0, 1]]
        h1 = (X**2 - 1) * (Y**2 - 1) * (X**2 + Y**2) * sp.cos(sp.atan2(Y, X) / 2)
        h2 = -(Z**2 - 1) * (X**2 - 1) * (X**2 + Z**2) * sp.cos(sp.atan2(Z, X) / 2)
        return _manufactured("problem1", [f1, f2], [h1, h2])
    if name == "problem2":
        half = sp.Rational(1, 2)
        f1 = [[-1, -1, 0], [0.5, -1, 0], [0.5, 1, 0], [-1, 1, 0]]
        f2 = [[-1, 0, -1], [0, 0, -1], [0, 0, 1], [-1, 0, 1]]
        f3 = [[-0.5, -1, -1], [-0.5, 1, -1], [-0.5, 1, 1], [-0.5, -1, 1]]
        h1 = -sp.Rational(1, 10) * (X + half) * (
            8 * X * Y * (X**2 + Y**2) * sp.atan2(Y, X) + X**3
        )
        h2 = -sp.Rational(1, 10) * (X + half) * X**3 * (1 - 8 * sp.pi * sp.Abs(Z))
        h3 = Y * (Y - 1) * (Y + 1) * (Z - 1) * Z
        return _manufactured("problem2", [f1, f2, f3], [h1, h2, h3])
    raise UnknownProblem(name)


# ---------------------------------------------------------------------------
# synthetic networks
# ---------------------------------------------------------------------------


def _clip_convex(verts: np.ndarray, a: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Keep the part of a convex polygon with (x - a).n <= 0 (one
    Sutherland-Hodgman pass)."""
    out = []
    m = len(verts)
    d = (verts - a) @ n
    for i in range(m):
        j = (i + 1) % m
        if d[i] <= 0:
            out.append(verts[i])
        if (d[i] < 0 < d[j]) or (d[j] < 0 < d[i]):
            t = d[i] / (d[i] - d[j])
            out.append(verts[i] + t * (verts[j] - verts[i]))
    if not out:
        return np.empty((0, 2))
    out = np.array(out)
    # drop near-duplicate consecutive vertices
    keep = [0]
    diam = points_diameter(out) if len(out) > 1 else 0.0
    for i in range(1, len(out)):
        if np.hypot(*(out[i] - out[keep[-1]])) > max(1e-7 * diam, 1e-14):
            keep.append(i)
    if len(keep) > 1 and np.hypot(*(out[keep[-1]] - out[keep[0]])) <= max(1e-7 * diam, 1e-14):
        keep.pop()
    return out[keep]


def generate_synthetic_dfn(
    seed: int,
    n_fractures: int,
    domain=((0.0, 0.0, 0.0), (1000.0, 1000.0, 1000.0)),
    sigma: float = 10.0,
) -> ProblemSpec:
    """Seeded random DFN: connected network of convex planar fractures clipped
    to a box, log-normal transmissivities (log10 K ~ N(0, log10 sigma)),
    Dirichlet 10 on edges at x=x_min, Dirichlet 0 at x=x_max, homogeneous
    Neumann elsewhere, zero forcing."""
    if n_fractures < 1:
        raise ValidationError("need at least one fracture")
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(domain[0], float), np.asarray(domain[1], float)
    size = hi - lo
    box_planes = []
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = 1.0
        box_planes.append((lo, -e))
        box_planes.append((hi, e))

    def clip_to_box(pts3: np.ndarray) -> np.ndarray | None:
        frame = build_frame(pts3)
        verts = frame.to_local(pts3)
        for a3, n3 in box_planes:
            # half-space restricted to the plane: affine in local coordinates
            g = np.array([n3 @ frame.basis_u, n3 @ frame.basis_v])
            c0 = (frame.origin - a3) @ n3
            if np.hypot(*g) < 1e-12:
                if c0 > 0:
                    return None
                continue
            # point on the clipping line in local coords
            p_line = -c0 * g / (g @ g)
            verts = _clip_convex(verts, p_line, g)
            if len(verts) < 3:
                return None
        if len(verts) < 3 or abs(_poly_area(verts)) < 1e-6 * float(size.min()) ** 2:
            return None
        return frame.to_world(verts)

    def _poly_area(v):
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def random_plane_polygon(first: bool) -> np.ndarray:
        if first:
            # backbone rectangle spanning the full x extent, so the clipped
            # polygon always carries Dirichlet edges on both x faces
            center = lo + size * [0.5, 0.5, 0.5]
            u = np.array([1.0, 0.0, 0.0])
            tilt = rng.uniform(-0.3, 0.3)
            v = np.array([0.0, np.cos(tilt), np.sin(tilt)])
            a, b = 1.2 * float(size.max()), 0.7 * float(size.max())
            return center + np.array(
                [-a * u - b * v, a * u - b * v, a * u + b * v, -a * u + b * v]
            )
        else:
            center = lo + rng.uniform(0.15, 0.85, 3) * size
            q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            u, v = q[:, 0], q[:, 1]
            radius = rng.uniform(0.25, 0.7) * float(size.max())
        nv = int(rng.integers(4, 8))
        ang = np.sort(rng.uniform(0, 2 * np.pi, nv))
        rad = radius * rng.uniform(0.7, 1.0, nv)
        pts2 = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        hull = ConvexHull(pts2)
        pts2 = pts2[hull.vertices]  # counter-clockwise convex subset
        return center + np.outer(pts2[:, 0], u) + np.outer(pts2[:, 1], v)

    fractures: list[Fracture] = []
    attempts = 0
    while len(fractures) < n_fractures:
        attempts += 1
        if attempts > 200 * n_fractures:
            raise ValidationError("could not generate a connected synthetic DFN")
        pts = clip_to_box(random_plane_polygon(first=not fractures))
        if pts is None:
            continue
        k = 10.0 ** rng.normal(0.0, np.log10(sigma)) if sigma > 1.0 else 1.0
        cand = Fracture.from_points(len(fractures), pts, k)
        if fractures:
            try:
                hit = any(
                    intersect_fractures(f.polygon3d, f.frame, cand.polygon3d, cand.frame)
                    is not None
                    for f in fractures
                )
            except CoplanarFractures:
                continue
            if not hit:
                continue
        fractures.append(cand)

    tol_x = 1e-6 * size[0]
    zero = PlaneField.constant(0.0)
    ten = PlaneField.constant(10.0)
    bcs = []
    for f in fractures:
        row = []
        p3 = f.polygon3d
        for e in range(f.polygon2.n):
            a, b = p3[e], p3[(e + 1) % len(p3)]
            if abs(a[0] - lo[0]) < tol_x and abs(b[0] - lo[0]) < tol_x:
                row.append(BoundaryCondition(DIRICHLET, ten))
            elif abs(a[0] - hi[0]) < tol_x and abs(b[0] - hi[0]) < tol_x:
                row.append(BoundaryCondition(DIRICHLET, zero))
            else:
                row.append(BoundaryCondition(NEUMANN, zero))
        bcs.append(row)

    spec = ProblemSpec(
        name=f"synthetic-{seed}-{n_fractures}",
        fractures=fractures,
        traces=compute_traces(fractures),
        bcs=bcs,
        forcing=[zero] * len(fractures),
        exact=[],
    )
    spec.validate()
    return spec
