"""Marking and convex-cell refinement.

Cells are marked by the Dörfler rule (smallest prefix of the sorted squared
indicators reaching a fraction C of the total). Each marked cell is cut once
along a chord through its centroid; the cut direction comes from one of four
strategies, with the inertia-based MaxMom acting as the universal fallback and
as the forced choice for cells whose aspect ratio exceeds MaxAR. Chord
endpoints landing within CollapseToll of a host-edge endpoint snap to that
vertex, letting the chord pivot away from the centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChildTooThin, CutDegenerate, DegenerateChord, ValidationError
from .geometry import (
    TOL_GEOM,
    Polygon2,
    centroid_area,
    inertia_tensor,
    intersect_coplanar_line,
)
from .mesh import ConformingMesh, _pair

__all__ = [
    "RefinementConfig",
    "CutPlan",
    "RefineStats",
    "mark",
    "maxmom_direction",
    "choose_direction",
    "refine_cell",
    "refine",
]

STRATEGIES = ("maxmom", "trdir", "maxpnt", "maxedg")


@dataclass(frozen=True)
class RefinementConfig:
    strategy: str = "maxmom"
    c: float = 0.5
    collapse_toll: float = 0.2
    max_ar: float = 10.0
    max_np: int = 12
    center_tol: float = 1e-3  # MaxPnt coincidence tolerance, relative to h_E

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.c < 1.0:
            raise ValidationError("Dörfler fraction must be in (0,1)")
        if not 0.0 < self.collapse_toll < 0.5:
            raise ValidationError("CollapseToll must be in (0,0.5)")
        if self.max_ar <= 1.0:
            raise ValidationError("MaxAR must exceed 1")
        if self.max_np < 4:
            raise ValidationError("MaxNP must be at least 4")


@dataclass
class CutPlan:
    fid: int
    cid: int
    direction: np.ndarray
    effective: str  # strategy after fallbacks


@dataclass
class RefineStats:
    cells_cut: int = 0
    fallbacks: dict = field(default_factory=dict)  # reason -> count
    uncollapsed: int = 0
    ar_stats: dict = field(default_factory=dict)  # fid -> (min, mean, max)

    def bump(self, reason: str):
        self.fallbacks[reason] = self.fallbacks.get(reason, 0) + 1


def mark(per_cell_est2: dict, c: float) -> list:
    """Smallest prefix of cells (by descending est^2) reaching c * total."""
    items = sorted(per_cell_est2.items(), key=lambda kv: (-kv[1], kv[0]))
    total = sum(v for _, v in items)
    out, acc = [], 0.0
    for key, v in items:
        if acc >= c * total and out:
            break
        out.append(key)
        acc += v
    return out


def maxmom_direction(poly: Polygon2) -> np.ndarray:
    """Unit cut direction orthogonal to the cell's inertia long axis."""
    J = inertia_tensor(poly)
    w, V = np.linalg.eigh(J)
    if abs(w[1] - w[0]) <= 1e-12 * (abs(w[0]) + abs(w[1])):
        # symmetric cell: take the eigenvector closest to the x-axis
        v = V[:, int(np.argmax(np.abs(V[0, :])))]
    else:
        v = V[:, 0]
    d = np.array([-v[1], v[0]])
    if d[1] < 0 or (d[1] == 0 and d[0] < 0):
        d = -d
    return d


def _cell_traces(mesh: ConformingMesh, fid: int, cid: int) -> dict:
    """trace id -> a representative (unit direction) among the cell's edges."""
    fm = mesh.fractures[fid]
    out = {}
    for eid in fm.cell_edges(cid):
        e = fm.edges[eid]
        if e.trace is None:
            continue
        a, b = e.v
        d = fm.verts[b].p2 - fm.verts[a].p2
        out[e.trace] = d / np.hypot(*d)
    return out


def _merged_edges(poly: Polygon2) -> list:
    """Maximal straight chains of the vertex loop as (length, midpoint) items."""
    v = poly.vertices
    n = len(v)
    diam = poly.diameter()
    e = np.roll(v, -1, axis=0) - v
    # start indices: vertices where the direction turns
    cross = e[:, 0] * np.roll(e[:, 1], 1) - e[:, 1] * np.roll(e[:, 0], 1)
    corners = [i for i in range(n) if abs(cross[i]) > TOL_GEOM * diam**2]
    if not corners:
        return []
    chains = []
    for ci, start in enumerate(corners):
        end = corners[(ci + 1) % len(corners)]
        a, b = v[start], v[end]
        seg = b - a
        chains.append((float(np.hypot(*seg)), 0.5 * (a + b)))
    return chains


def choose_direction(
    mesh: ConformingMesh,
    fid: int,
    cid: int,
    config: RefinementConfig,
    stats: RefineStats | None = None,
) -> CutPlan:
    fm = mesh.fractures[fid]
    poly = fm.polygon(cid)

    def fallback(reason: str) -> CutPlan:
        if stats is not None:
            stats.bump(reason)
        return CutPlan(fid, cid, maxmom_direction(poly), "maxmom")

    if fm.cell_ar(cid) > config.max_ar:
        return fallback("max_ar") if config.strategy != "maxmom" else CutPlan(
            fid, cid, maxmom_direction(poly), "maxmom"
        )
    s = config.strategy
    if s == "maxmom":
        return CutPlan(fid, cid, maxmom_direction(poly), "maxmom")
    if s == "trdir":
        traces = _cell_traces(mesh, fid, cid)
        if len(traces) != 1:
            return fallback("trace_count")
        d = next(iter(traces.values()))
        return CutPlan(fid, cid, d.copy(), "trdir")
    if s == "maxpnt":
        if poly.n < config.max_np:
            return fallback("vertex_count")
        xg = poly.vertices.mean(axis=0)
        xc, _ = centroid_area(poly)
        d = xg - xc
        if np.hypot(*d) < config.center_tol * poly.diameter():
            return fallback("center_coincide")
        return CutPlan(fid, cid, d / np.hypot(*d), "maxpnt")
    # maxedg
    chains = _merged_edges(poly)
    if not chains:
        return fallback("no_corner")
    xc, _ = centroid_area(poly)
    chains.sort(key=lambda lm: (-lm[0], lm[1][0], lm[1][1]))
    mid = chains[0][1]
    d = mid - xc
    if np.hypot(*d) <= TOL_GEOM * poly.diameter():
        return fallback("midpoint_at_centroid")
    return CutPlan(fid, cid, d / np.hypot(*d), "maxedg")


def _chord_ends(fm, cid, poly, direction, collapse_toll):
    """Boundary ends of the centroid cut with CollapseToll vertex snapping."""
    xc, _ = centroid_area(poly)
    hits = intersect_coplanar_line(poly, xc, direction)
    if len(hits) != 2:
        raise CutDegenerate("cut line misses the cell boundary twice")
    loop = fm.cells[cid].loop
    n = len(loop)
    ends = []
    for q, i, t in hits:
        a, b = loop[i], loop[(i + 1) % n]
        if t <= collapse_toll:
            ends.append(("vertex", a))
        elif t >= 1.0 - collapse_toll:
            ends.append(("vertex", b))
        else:
            eid = fm.edge_of[_pair(a, b)]
            te = t if fm.edges[eid].v == (a, b) else 1.0 - t
            ends.append(("edge", eid, te))
    if ends[0][0] == "vertex" and ends[1][0] == "vertex":
        va, vb = ends[0][1], ends[1][1]
        ia, ib = loop.index(va), loop.index(vb)
        if va == vb or (ia - ib) % n in (1, n - 1):
            raise CutDegenerate("collapsed chord lies on the boundary")
    return ends


def refine_cell(mesh: ConformingMesh, plan: CutPlan, config: RefinementConfig, stats=None):
    fm = mesh.fractures[plan.fid]
    poly = fm.polygon(plan.cid)
    attempts = [(plan.direction, config.collapse_toll)]
    if plan.effective != "maxmom":
        attempts.append((maxmom_direction(poly), config.collapse_toll))
        if stats is not None:
            pass  # counted only if actually used
    attempts.append((attempts[-1][0], 10.0 * TOL_GEOM))  # uncollapsed last resort
    last = None
    for ai, (d, toll) in enumerate(attempts):
        try:
            ends = _chord_ends(fm, plan.cid, poly, d, toll)
            c1, c2, _ = mesh.split_cell(plan.fid, plan.cid, ends[0], ends[1])
            if stats is not None:
                if ai == len(attempts) - 1:
                    stats.uncollapsed += 1
                elif ai > 0:
                    stats.bump("cut_degenerate")
            return c1, c2
        except (CutDegenerate, DegenerateChord, ChildTooThin) as exc:
            last = exc
    raise CutDegenerate(f"cell ({plan.fid},{plan.cid}): {last}")


def refine(mesh: ConformingMesh, marked: list, config: RefinementConfig) -> RefineStats:
    stats = RefineStats()
    for fid, cid in sorted(marked):
        plan = choose_direction(mesh, fid, cid, config, stats)
        refine_cell(mesh, plan, config, stats)
        stats.cells_cut += 1
    for fm in mesh.fractures:
        ars = [fm.cell_ar(cid) for cid in fm.cells]
        stats.ar_stats[fm.fid] = (min(ars), float(np.mean(ars)), max(ars))
    return stats
