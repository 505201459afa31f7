"""Coarse conforming mesh: split each fracture along its traces.

Traces are processed crossing-first, then by descending length. A leaf cell is
cut whenever the trace segment reaches its interior; the cut chord is the
trace's supporting line clipped to the leaf, so interior trace tips leave an
extension edge that is not flagged as trace. After all fractures are cut, the
two sides of every trace are split at each other's breakpoints and linked as
twin edges.
"""

from __future__ import annotations

import numpy as np

from .dfn import Fracture, ProblemSpec, Trace
from .geometry import (
    TOL_GEOM,
    Polygon2,
    clip_line_parameter_interval,
    intersect_coplanar_line,
)
from .mesh import ConformingMesh, FractureMesh, build_initial_mesh, _pair

__all__ = ["order_traces", "build_minimal_mesh"]


def _on_boundary(poly: Polygon2, p: np.ndarray, tol: float) -> bool:
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    w = p - v
    cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
    along = (e * w).sum(axis=1)
    lens2 = (e**2).sum(axis=1)
    near = np.abs(cross) <= tol * np.sqrt(lens2)
    within = (along >= -tol * np.sqrt(lens2)) & (along <= lens2 + tol * np.sqrt(lens2))
    return bool(np.any(near & within))


def _strictly_inside(poly: Polygon2, p: np.ndarray, tol: float) -> bool:
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    w = p - v
    cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
    return bool(np.all(cross > tol * np.hypot(e[:, 0], e[:, 1])))


def order_traces(fracture: Fracture, traces: list[Trace]) -> list[Trace]:
    """Boundary-crossing traces first, then longest first; ties by id."""
    poly = fracture.polygon2
    tol = TOL_GEOM * poly.diameter()

    def key(tr: Trace):
        seg = tr.segment2d_on(fracture.frame)
        crossing = _on_boundary(poly, seg[0], tol) and _on_boundary(poly, seg[1], tol)
        length = float(np.hypot(*(seg[1] - seg[0])))
        return (0 if crossing else 1, -length, tr.id)

    return sorted(traces, key=key)


def _chord_end(fm: FractureMesh, cid: int, q: np.ndarray, poly_edge: int, t: float):
    """Map a polygon-boundary hit to a split_cell end spec (vertex or edge)."""
    loop = fm.cells[cid].loop
    n = len(loop)
    a, b = loop[poly_edge], loop[(poly_edge + 1) % n]
    pa, pb = fm.verts[a].p2, fm.verts[b].p2
    elen = float(np.hypot(*(pb - pa)))
    tol = TOL_GEOM * fm.diameter
    if t * elen <= tol:
        return ("vertex", a)
    if (1.0 - t) * elen <= tol:
        return ("vertex", b)
    eid = fm.edge_of[_pair(a, b)]
    te = t if fm.edges[eid].v == (a, b) else 1.0 - t
    return ("edge", eid, te)


def _cut_fracture(mesh: ConformingMesh, frac: Fracture, traces: list[Trace]) -> None:
    fm = mesh.fractures[frac.id]
    for tr in order_traces(frac, traces):
        seg = tr.segment2d_on(frac.frame)
        d = seg[1] - seg[0]
        length = float(np.hypot(*d))
        du = d / length
        for cid in list(fm.cells):
            poly = fm.polygon(cid)
            tol = TOL_GEOM * poly.diameter()
            iv = clip_line_parameter_interval(poly.vertices, seg[0], du, TOL_GEOM)
            if iv is None:
                continue
            s0, s1 = max(iv[0], 0.0), min(iv[1], length)
            if s1 - s0 <= tol:
                continue
            mid = seg[0] + 0.5 * (s0 + s1) * du
            if not _strictly_inside(poly, mid, tol):
                continue  # trace only grazes the boundary of this leaf
            hits = intersect_coplanar_line(poly, seg[0], du)
            if len(hits) != 2:
                continue
            ends = [_chord_end(fm, cid, q, i, t) for q, i, t in hits]
            mesh.split_cell(frac.id, cid, ends[0], ends[1])
        _flag_trace(mesh, fm, tr, seg, length)


def _flag_trace(
    mesh: ConformingMesh,
    fm: FractureMesh,
    tr: Trace,
    seg: np.ndarray,
    length: float,
) -> None:
    """Mark every mesh edge lying on the trace segment; insert tip vertices.

    A sweep over all edges (rather than just the freshly cut chords) also
    covers traces running along a fracture boundary or along an earlier cut.
    """
    du = (seg[1] - seg[0]) / length
    tol = TOL_GEOM * fm.diameter
    eps = 10.0 * TOL_GEOM

    def tparam(vid: int) -> float:
        return float(np.dot(fm.verts[vid].p2 - seg[0], du) / length)

    def offline(vid: int) -> float:
        w = fm.verts[vid].p2 - seg[0]
        return abs(w[0] * du[1] - w[1] * du[0])

    pieces = [
        eid
        for eid, e in fm.edges.items()
        if e.trace is None and offline(e.v[0]) <= tol and offline(e.v[1]) <= tol
    ]
    for tip in (0.0, 1.0):
        for eid in list(pieces):
            a, b = fm.edges[eid].v
            ta, tb = tparam(a), tparam(b)
            s = (tip - ta) / (tb - ta)
            if eps < s < 1.0 - eps:
                e1, e2, _ = mesh.split_edge(fm.fid, eid, s)
                pieces.remove(eid)
                pieces.extend([e1, e2])
                break
    for eid in pieces:
        a, b = fm.edges[eid].v
        ta, tb = tparam(a), tparam(b)
        if min(ta, tb) >= -eps and max(ta, tb) <= 1.0 + eps:
            fm.edges[eid].trace = tr.id
            fm.edges[eid].tparam = (ta, tb)


def _unify_trace(mesh: ConformingMesh, tr: Trace) -> None:
    """Split each side at the other side's breakpoints, then register twins."""
    fa, fb = tr.fractures
    tol = TOL_GEOM * max(mesh.fractures[fa].diameter, mesh.fractures[fb].diameter)
    seglen = float(np.linalg.norm(tr.segment3d[1] - tr.segment3d[0]))
    ptol = max(tol / seglen, 1e-12)

    def side_edges(fi: int) -> list[int]:
        fm = mesh.fractures[fi]
        return [e.id for e in fm.edges.values() if e.trace == tr.id]

    def breakpoints(fi: int) -> np.ndarray:
        fm = mesh.fractures[fi]
        ts = [t for eid in side_edges(fi) for t in fm.edges[eid].tparam]
        return np.unique(np.round(np.array(ts) / ptol).astype(np.int64)) * ptol

    allpts = np.concatenate([breakpoints(fa), breakpoints(fb)])
    allpts = np.unique(np.round(allpts / ptol).astype(np.int64)) * ptol
    for fi in (fa, fb):
        fm = mesh.fractures[fi]
        for t in allpts:
            for eid in side_edges(fi):
                ta, tb = fm.edges[eid].tparam
                lo, hi = min(ta, tb), max(ta, tb)
                if lo + ptol < t < hi - ptol:
                    mesh.split_edge(fi, eid, (t - ta) / (tb - ta))
                    break

    ea = sorted(side_edges(fa), key=lambda e: sum(mesh.fractures[fa].edges[e].tparam))
    eb = sorted(side_edges(fb), key=lambda e: sum(mesh.fractures[fb].edges[e].tparam))
    if len(ea) != len(eb):
        raise AssertionError(
            f"trace {tr.id}: {len(ea)} edges on f{fa} vs {len(eb)} on f{fb}"
        )
    for i, j in zip(ea, eb):
        mesh.twin[(fa, i)] = (fb, j)
        mesh.twin[(fb, j)] = (fa, i)


def build_minimal_mesh(problem: ProblemSpec) -> ConformingMesh:
    mesh = build_initial_mesh(problem)
    for frac in problem.fractures:
        _cut_fracture(mesh, frac, problem.traces_of(frac.id))
    for tr in problem.traces:
        _unify_trace(mesh, tr)
    return mesh
