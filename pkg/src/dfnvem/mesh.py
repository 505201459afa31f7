"""Globally conforming polygonal mesh over a fracture network.

Each fracture carries its own 2D vertex/edge/cell stores; edges on traces are
linked to their twin on the other fracture so that mutations (edge split, cell
split) keep the two sides mirrored. Aligned (collinear) vertices are
first-class citizens: splitting a shared edge inserts such a vertex in the
neighbouring cell instead of creating a hanging node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dfn import ProblemSpec
from .errors import (
    ChildTooThin,
    DegenerateChord,
    DegenerateInput,
    PointOffEdge,
    StaleRef,
)
from .geometry import TOL_GEOM, Frame3, Polygon2, aspect_ratio, centroid_area

__all__ = [
    "Vertex",
    "Edge",
    "Cell",
    "CellRef",
    "FractureMesh",
    "ConformingMesh",
    "ConformityReport",
    "build_initial_mesh",
    "write_vtk",
    "dump_text",
]


@dataclass(slots=True)
class Vertex:
    id: int
    p2: np.ndarray  # (2,) in the fracture frame
    p3: np.ndarray  # (3,) world image


@dataclass(slots=True)
class Edge:
    id: int
    v: tuple[int, int]
    cells: list[int]
    boundary: bool
    bedge: int | None  # original fracture-polygon edge (BC lookup), boundary only
    trace: int | None = None
    tparam: tuple[float, float] | None = None  # trace params at v[0], v[1]


@dataclass(slots=True)
class Cell:
    id: int
    loop: list[int]  # counter-clockwise vertex ids
    generation: int


@dataclass(frozen=True)
class CellRef:
    fracture: int
    cell: int
    generation: int


@dataclass
class ConformityReport:
    ok: bool
    violations: list[str]


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class FractureMesh:
    """Vertex/edge/cell stores of a single fracture."""

    def __init__(self, fid: int, frame: Frame3, area: float, diameter: float):
        self.fid = fid
        self.frame = frame
        self.area = area
        self.diameter = diameter
        self.verts: dict[int, Vertex] = {}
        self.edges: dict[int, Edge] = {}
        self.cells: dict[int, Cell] = {}
        self.edge_of: dict[tuple[int, int], int] = {}
        self._next_v = 0
        self._next_e = 0
        self._next_c = 0
        # keyed by (cid, loop tuple): stale entries are never looked up again
        self._poly_cache: dict = {}
        self._ar_cache: dict = {}

    # -- construction helpers -----------------------------------------------

    def add_vertex(self, p2: np.ndarray, p3: np.ndarray | None = None) -> int:
        vid = self._next_v
        self._next_v += 1
        p2 = np.asarray(p2, dtype=float)
        if p3 is None:
            p3 = self.frame.to_world(p2)
        self.verts[vid] = Vertex(vid, p2, np.asarray(p3, dtype=float))
        return vid

    def add_edge(self, a: int, b: int, **kw) -> int:
        eid = self._next_e
        self._next_e += 1
        self.edges[eid] = Edge(eid, (a, b), kw.pop("cells", []), **kw)
        self.edge_of[_pair(a, b)] = eid
        return eid

    def add_cell(self, loop: list[int], generation: int) -> int:
        cid = self._next_c
        self._next_c += 1
        self.cells[cid] = Cell(cid, list(loop), generation)
        return cid

    # -- queries ------------------------------------------------------------

    def points(self, cid: int) -> np.ndarray:
        return np.array([self.verts[v].p2 for v in self.cells[cid].loop])

    def polygon(self, cid: int) -> Polygon2:
        key = (cid, tuple(self.cells[cid].loop))
        poly = self._poly_cache.get(key)
        if poly is None:
            poly = self._poly_cache[key] = Polygon2(self.points(cid))
        return poly

    def cell_ar(self, cid: int) -> float:
        key = (cid, tuple(self.cells[cid].loop))
        ar = self._ar_cache.get(key)
        if ar is None:
            ar = self._ar_cache[key] = aspect_ratio(self.polygon(cid))
        return ar

    def cell_edges(self, cid: int) -> list[int]:
        """Edge ids in loop order, edge i joining loop[i] -> loop[i+1]."""
        loop = self.cells[cid].loop
        return [
            self.edge_of[_pair(loop[i], loop[(i + 1) % len(loop)])]
            for i in range(len(loop))
        ]

    def edge_length(self, eid: int) -> float:
        a, b = self.edges[eid].v
        return float(np.hypot(*(self.verts[b].p2 - self.verts[a].p2)))


class ConformingMesh:
    def __init__(self, fractures: list[FractureMesh]):
        self.fractures = fractures
        self.twin: dict[tuple[int, int], tuple[int, int]] = {}
        self.generation = 0

    # -- references ---------------------------------------------------------

    def ref(self, fi: int, cid: int) -> CellRef:
        return CellRef(fi, cid, self.fractures[fi].cells[cid].generation)

    def _resolve(self, ref_or_pair) -> tuple[FractureMesh, Cell]:
        if isinstance(ref_or_pair, CellRef):
            fi, cid, gen = ref_or_pair.fracture, ref_or_pair.cell, ref_or_pair.generation
        else:
            fi, cid = ref_or_pair
            gen = None
        fm = self.fractures[fi]
        cell = fm.cells.get(cid)
        if cell is None or (gen is not None and cell.generation != gen):
            raise StaleRef(f"cell ({fi},{cid}) is stale or retired")
        return fm, cell

    def cell_ids(self):
        for fm in self.fractures:
            for cid in fm.cells:
                yield fm.fid, cid

    @property
    def n_cells(self) -> int:
        return sum(len(fm.cells) for fm in self.fractures)

    # -- mutations ----------------------------------------------------------

    def split_edge(self, fi: int, eid: int, t: float) -> tuple[int, int, int]:
        """Split edge eid at parameter t in (0,1); returns (eid_a, eid_b, vid).

        Mirrors the split onto the twin edge when the edge lies on a trace.
        """
        fm = self.fractures[fi]
        e = fm.edges.get(eid)
        if e is None:
            raise StaleRef(f"edge ({fi},{eid}) is retired")
        if not (TOL_GEOM < t < 1.0 - TOL_GEOM):
            raise PointOffEdge(f"split parameter {t} not interior to edge {eid}")
        va, vb = e.v
        pa, pb = fm.verts[va], fm.verts[vb]
        p2 = pa.p2 + t * (pb.p2 - pa.p2)
        vn = fm.add_vertex(p2)
        tp = e.tparam
        tn = None if tp is None else tp[0] + t * (tp[1] - tp[0])
        common = dict(boundary=e.boundary, bedge=e.bedge, trace=e.trace)
        e1 = fm.add_edge(va, vn, tparam=None if tp is None else (tp[0], tn), **common)
        e2 = fm.add_edge(vn, vb, tparam=None if tp is None else (tn, tp[1]), **common)
        fm.edges[e1].cells = list(e.cells)
        fm.edges[e2].cells = list(e.cells)
        for cid in e.cells:
            loop = fm.cells[cid].loop
            n = len(loop)
            for i in range(n):
                a, b = loop[i], loop[(i + 1) % n]
                if {a, b} == {va, vb}:
                    loop.insert(i + 1, vn)
                    break
            else:
                raise StaleRef(f"edge {eid} not found in cell {cid} loop")
        del fm.edges[eid]
        fm.edge_of.pop(_pair(va, vb), None)

        tw = self.twin.pop((fi, eid), None)
        if tw is not None:
            fj, ejd = tw
            del self.twin[tw]
            fmj = self.fractures[fj]
            ej = fmj.edges[ejd]
            ta, tb = ej.tparam
            s = (tn - ta) / (tb - ta)
            j1, j2, _ = self.split_edge(fj, ejd, s)
            # re-link the four sub-edges by matching trace-parameter midpoints
            for ei in (e1, e2):
                mid = 0.5 * sum(fm.edges[ei].tparam)
                ejx = min(j1, j2, key=lambda j: abs(0.5 * sum(fmj.edges[j].tparam) - mid))
                self.twin[(fi, ei)] = (fj, ejx)
                self.twin[(fj, ejx)] = (fi, ei)
        return e1, e2, vn

    def split_cell(self, fi: int, cid: int, end_a, end_b, generation: int | None = None):
        """Split a cell along the chord end_a -- end_b.

        Each end is ("vertex", vid) or ("edge", eid, t). Returns
        (cid1, cid2, chord_eid). Edge-interior ends trigger split_edge first
        (with trace mirroring).
        """
        fm = self.fractures[fi]
        cell = fm.cells.get(cid)
        if cell is None or (generation is not None and cell.generation != generation):
            raise StaleRef(f"cell ({fi},{cid}) is stale or retired")

        vids = []
        for end in (end_a, end_b):
            if end[0] == "vertex":
                vids.append(end[1])
            else:
                _, eid, t = end
                _, _, vn = self.split_edge(fi, eid, t)
                vids.append(vn)
        va, vb = vids
        loop = cell.loop
        n = len(loop)
        if va == vb or va not in loop or vb not in loop:
            raise DegenerateChord(f"chord endpoints {va},{vb} invalid for cell {cid}")
        ia, ib = loop.index(va), loop.index(vb)
        if (ia - ib) % n in (1, n - 1):
            raise DegenerateChord("chord coincides with an existing edge")

        loop1 = loop[ia : ib + 1] if ia < ib else loop[ia:] + loop[: ib + 1]
        loop2 = loop[ib : ia + 1] if ib < ia else loop[ib:] + loop[: ia + 1]
        parent_area = abs(centroid_area(fm.polygon(cid))[1])
        polys = []
        for lp in (loop1, loop2):
            try:
                polys.append(Polygon2(np.array([fm.verts[v].p2 for v in lp])))
            except DegenerateInput as exc:
                raise ChildTooThin(f"child of cell {cid} degenerate: {exc}") from exc
        for poly in polys:
            if abs(centroid_area(poly)[1]) < 1e-12 * parent_area:
                raise ChildTooThin(f"child of cell {cid} below area threshold")

        self.generation += 1
        c1 = fm.add_cell(loop1, self.generation)
        c2 = fm.add_cell(loop2, self.generation)
        for child, lp in ((c1, loop1), (c2, loop2)):
            for i in range(len(lp) - 1):  # last pair is the chord
                e = fm.edges[fm.edge_of[_pair(lp[i], lp[i + 1])]]
                e.cells = [child if c == cid else c for c in e.cells]
        chord = fm.add_edge(va, vb, boundary=False, bedge=None, cells=[c1, c2])
        del fm.cells[cid]
        return c1, c2, chord

    # -- audit --------------------------------------------------------------

    def audit(self) -> ConformityReport:
        bad: list[str] = []
        for fm in self.fractures:
            fi = fm.fid
            for eid, e in fm.edges.items():
                nc = len(e.cells)
                if e.boundary and nc != 1:
                    bad.append(f"f{fi} edge {eid}: boundary with {nc} cells")
                if not e.boundary and nc != 2:
                    bad.append(f"f{fi} edge {eid}: interior with {nc} cells")
                if e.boundary and e.bedge is None:
                    bad.append(f"f{fi} edge {eid}: boundary edge without BC index")
                for cid in e.cells:
                    if cid not in fm.cells:
                        bad.append(f"f{fi} edge {eid}: dangling cell {cid}")
                if e.trace is not None and (fi, eid) not in self.twin:
                    bad.append(f"f{fi} edge {eid}: trace edge without twin")
            area = 0.0
            for cid, cell in fm.cells.items():
                loop = cell.loop
                if len(loop) < 3:
                    bad.append(f"f{fi} cell {cid}: loop too short")
                    continue
                try:
                    poly = fm.polygon(cid)
                    area += centroid_area(poly)[1]
                except DegenerateInput as exc:
                    bad.append(f"f{fi} cell {cid}: invalid polygon ({exc})")
                    continue
                for i in range(len(loop)):
                    key = _pair(loop[i], loop[(i + 1) % len(loop)])
                    eid = fm.edge_of.get(key)
                    if eid is None:
                        bad.append(f"f{fi} cell {cid}: missing edge {key}")
                    elif cid not in fm.edges[eid].cells:
                        bad.append(f"f{fi} cell {cid}: edge {eid} lacks adjacency")
            if abs(area - fm.area) > 1e-10 * fm.area:
                bad.append(f"f{fi}: cell areas sum {area} != fracture area {fm.area}")
        for (fi, eid), (fj, ejd) in self.twin.items():
            if self.twin.get((fj, ejd)) != (fi, eid):
                bad.append(f"twin map asymmetric at f{fi} edge {eid}")
                continue
            ei = self.fractures[fi].edges.get(eid)
            ej = self.fractures[fj].edges.get(ejd)
            if ei is None or ej is None:
                bad.append(f"twin of f{fi} edge {eid} is retired")
                continue
            if ei.trace != ej.trace or ei.trace is None:
                bad.append(f"f{fi} edge {eid}: twin trace mismatch")
                continue
            si = self._edge_seg3(fi, eid)
            sj = self._edge_seg3(fj, ejd)
            tol = TOL_GEOM * max(self.fractures[fi].diameter, self.fractures[fj].diameter)
            d = min(
                np.abs(si - sj).max(),
                np.abs(si - sj[::-1]).max(),
            )
            if d > tol:
                bad.append(f"f{fi} edge {eid}: twin 3D segments differ by {d}")
        # per-trace endpoint mirroring
        sides: dict[int, dict[int, list[float]]] = {}
        for fm in self.fractures:
            for e in fm.edges.values():
                if e.trace is not None:
                    sides.setdefault(e.trace, {}).setdefault(fm.fid, []).extend(e.tparam)
        for tid, per_frac in sides.items():
            if len(per_frac) != 2:
                bad.append(f"trace {tid}: edges present on {len(per_frac)} fractures")
                continue
            (fa, pa), (fb, pb) = sorted(per_frac.items())
            ua, ub = np.unique(np.round(pa, 9)), np.unique(np.round(pb, 9))
            if len(ua) != len(ub) or np.abs(ua - ub).max() > 1e-8:
                bad.append(f"trace {tid}: breakpoints differ between f{fa} and f{fb}")
        return ConformityReport(not bad, bad)

    def _edge_seg3(self, fi: int, eid: int) -> np.ndarray:
        fm = self.fractures[fi]
        a, b = fm.edges[eid].v
        return np.stack([fm.verts[a].p3, fm.verts[b].p3])


def build_initial_mesh(problem: ProblemSpec) -> ConformingMesh:
    """One cell per fracture; boundary edges keyed to the BC edge index."""
    fms = []
    for frac in problem.fractures:
        poly = frac.polygon2
        _, area = centroid_area(poly)
        fm = FractureMesh(frac.id, frac.frame, area, poly.diameter())
        vids = [fm.add_vertex(p2, p3) for p2, p3 in zip(poly.vertices, frac.polygon3d)]
        for i in range(len(vids)):
            fm.add_edge(vids[i], vids[(i + 1) % len(vids)], boundary=True, bedge=i)
        cid = fm.add_cell(vids, 0)
        for eid in fm.cell_edges(cid):
            fm.edges[eid].cells = [cid]
        fms.append(fm)
    return ConformingMesh(fms)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_vtk(mesh: ConformingMesh, path, cell_scalars: dict | None = None) -> None:
    """Legacy ASCII VTK polydata; cell_scalars maps name -> {(fid,cid): value}."""
    points: list[np.ndarray] = []
    polys: list[list[int]] = []
    order: list[tuple[int, int]] = []
    for fm in mesh.fractures:
        local = {}
        for vid, v in fm.verts.items():
            local[vid] = len(points)
            points.append(v.p3)
        for cid in sorted(fm.cells):
            polys.append([local[v] for v in fm.cells[cid].loop])
            order.append((fm.fid, cid))
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nfracture network mesh\nASCII\n")
        fh.write("DATASET POLYDATA\n")
        fh.write(f"POINTS {len(points)} double\n")
        for p in points:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        size = sum(len(p) + 1 for p in polys)
        fh.write(f"POLYGONS {len(polys)} {size}\n")
        for p in polys:
            fh.write(" ".join(str(x) for x in [len(p), *p]) + "\n")
        scalars = dict(cell_scalars or {})
        scalars.setdefault("fracture", {k: float(k[0]) for k in order})
        fh.write(f"CELL_DATA {len(polys)}\n")
        for name, values in scalars.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for key in order:
                fh.write(f"{values.get(key, 0.0):.17g}\n")


def dump_text(mesh: ConformingMesh) -> str:
    """Deterministic plain-text dump for golden comparisons."""
    out = []
    for fm in mesh.fractures:
        out.append(f"fracture {fm.fid} nv={len(fm.verts)} ne={len(fm.edges)} nc={len(fm.cells)}")
        for vid in sorted(fm.verts):
            p = fm.verts[vid].p2
            out.append(f"  v {vid} {p[0]:.12g} {p[1]:.12g}")
        for eid in sorted(fm.edges):
            e = fm.edges[eid]
            flags = "B" if e.boundary else "I"
            tr = f" t{e.trace}" if e.trace is not None else ""
            out.append(f"  e {eid} {e.v[0]}-{e.v[1]} {flags}{tr} cells={sorted(e.cells)}")
        for cid in sorted(fm.cells):
            out.append(f"  c {cid} " + " ".join(map(str, fm.cells[cid].loop)))
    for key in sorted(mesh.twin):
        out.append(f"twin {key} -> {mesh.twin[key]}")
    return "\n".join(out) + "\n"
