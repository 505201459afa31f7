"""Residual a posteriori estimator, energy error, and effectivity index.

All polynomial quantities come from the per-cell monomial expansion of the
projected solution; the Laplacian is taken exactly on coefficients. Edge terms
are split among the adjacent cells proportionally to their areas; trace terms
are evaluated once per twin pair by matching quadrature points through the 3D
trace parametrization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dfn import NEUMANN, ProblemSpec
from .errors import EstimatorZero, MeshSolutionMismatch, NoExactSolution
from .mesh import ConformingMesh
from .quadrature import polygon_quadrature, segment_rule
from .vem import DofMap, build_dof_map, build_element

__all__ = [
    "CellEstimate",
    "EstimatorReport",
    "compute_estimator",
    "energy_error",
    "effectivity",
    "projected_energy",
]


@dataclass(slots=True)
class CellEstimate:
    interior: float = 0.0
    edge_jump: float = 0.0
    neumann: float = 0.0
    oscillation: float = 0.0
    trace: float = 0.0

    @property
    def total(self) -> float:
        return self.interior + self.edge_jump + self.neumann + self.oscillation + self.trace


@dataclass
class EstimatorReport:
    per_cell: dict  # (fid, cid) -> CellEstimate
    est: float
    err: float | None = None
    eff: float | None = None


def _elements_for(mesh, problem, k, elements):
    if elements is None:
        elements = {}
        for fm in mesh.fractures:
            kappa = problem.fractures[fm.fid].transmissivity
            for cid in fm.cells:
                elements[(fm.fid, cid)] = build_element(fm, cid, k, kappa)
    return elements


def _cell_work(el, f_field, key, cache):
    """Solution-independent per-cell data: forcing moments against the basis
    and the oscillation term. Everything is contracted over the quadrature
    points up front, so a cached entry is O(basis size^2) however fine the
    rule. Cell geometry is immutable once created, so entries stay valid
    across adaptive iterations."""
    ck = ("c",) + key
    entry = None if cache is None else cache.get(ck)
    if entry is None:
        qpts, qw = polygon_quadrature(el.poly, 2 * el.k + 2)
        fv = f_field.value(qpts)
        nbm1 = el.p0_coef.shape[0]
        Mv = el.basis.eval(qpts)
        fhat = (Mv[:, :nbm1] * (qw * fv)[:, None]).sum(0)
        fproj = Mv[:, :nbm1] @ np.linalg.solve(el.gram_km1, fhat)
        h2k = el.poly.diameter() ** 2 / el.kappa
        osc = h2k * float(np.dot(qw, (fv - fproj) ** 2))
        s0 = float(np.dot(qw, fproj**2))
        s1 = Mv.T @ (qw * fproj)
        S2 = (Mv * qw[:, None]).T @ Mv
        entry = (s0, s1, S2, osc, h2k)
        if cache is not None:
            cache[ck] = entry
    return entry


def _grad_quad(el, key, cache):
    """Degree-2k quadrature and the basis-gradient tensor on it."""
    ck = ("q",) + key
    entry = None if cache is None else cache.get(ck)
    if entry is None:
        qpts, qw = polygon_quadrature(el.poly, 2 * el.k)
        entry = (qpts, qw, el.basis.grad(qpts))
        if cache is not None:
            cache[ck] = entry
    return entry


def _energy_matrix(el, key, cache):
    """Gram matrix of the basis gradients: coefficients -> broken energy."""
    ck = ("E",) + key
    entry = None if cache is None else cache.get(ck)
    if entry is None:
        qpts, qw = polygon_quadrature(el.poly, 2 * el.k)
        Gq = el.basis.grad(qpts)
        entry = np.einsum("qad,qbd,q->ab", Gq, Gq, qw)
        if cache is not None:
            cache[ck] = entry
    return entry


def _edge_flux_matrix(el, pts, nrm, ck, cache):
    """Matrix mapping monomial coefficients to the conormal flux at pts."""
    entry = None if cache is None else cache.get(ck)
    if entry is None:
        entry = np.einsum("qad,d->qa", el.basis.grad(pts), nrm)
        if cache is not None:
            cache[ck] = entry
    return entry


def _poly_coeffs(x, dof_map: DofMap, elements) -> dict:
    coeffs = {}
    for key, el in elements.items():
        coeffs[key] = el.pi_star @ x[dof_map.cell_dofs[key]]
    return coeffs


def _outward_normal(fm, cid, a: int, b: int) -> np.ndarray:
    """Outward unit normal of the cell across edge (a,b)."""
    loop = fm.cells[cid].loop
    n = len(loop)
    i = loop.index(a)
    forward = loop[(i + 1) % n] == b
    pa, pb = fm.verts[a].p2, fm.verts[b].p2
    t = (pb - pa) if forward else (pa - pb)
    t /= np.hypot(*t)
    return np.array([t[1], -t[0]])


def compute_estimator(
    mesh: ConformingMesh,
    x: np.ndarray,
    problem: ProblemSpec,
    k: int,
    elements: dict | None = None,
    dof_map: DofMap | None = None,
    work_cache: dict | None = None,
) -> EstimatorReport:
    if dof_map is None:
        dof_map = build_dof_map(mesh, problem, k)
    if len(x) != dof_map.n_total:
        raise MeshSolutionMismatch(f"{len(x)} DOFs given, mesh has {dof_map.n_total}")
    elements = _elements_for(mesh, problem, k, elements)
    coeffs = _poly_coeffs(x, dof_map, elements)
    per_cell = {key: CellEstimate() for key in elements}
    areas = {key: el.area for key, el in elements.items()}

    # (a) interior residual and (d) oscillation
    for key, el in elements.items():
        kappa = el.kappa
        s0, s1, S2, osc, h2k = _cell_work(
            el, problem.forcing[key[0]], key, work_cache
        )
        lap_c = el.basis.laplacian_matrix().T @ coeffs[key]
        # expanded |fproj + kappa * lap|^2 against the cached contractions
        per_cell[key].interior = h2k * float(
            s0 + 2.0 * kappa * (s1 @ lap_c) + kappa**2 * (lap_c @ S2 @ lap_c)
        )
        per_cell[key].oscillation = osc

    xg, wg = segment_rule(k + 2)

    def grad_dot(key, pts2, nrm, ck, nrm0) -> np.ndarray:
        # cache against the edge's own normal; the caller's outward normal
        # only flips the sign (edge->cell adjacency order may change between
        # iterations, the edge geometry never does)
        F = _edge_flux_matrix(elements[key], pts2, nrm0, ck, work_cache)
        return float(np.dot(nrm, nrm0)) * (F @ coeffs[key])

    # (b) interior non-trace jumps and (c) Neumann residuals
    for fm in mesh.fractures:
        fi = fm.fid
        kappa = problem.fractures[fi].transmissivity
        for eid in sorted(fm.edges):
            e = fm.edges[eid]
            if e.trace is not None:
                continue
            a, b = e.v
            pa, pb = fm.verts[a].p2, fm.verts[b].p2
            he = float(np.hypot(*(pb - pa)))
            pts = pa + np.outer(xg, pb - pa)
            t = (pb - pa) / he
            nrm0 = np.array([t[1], -t[0]])
            if e.boundary:
                bc = problem.bcs[fi][e.bedge]
                if bc.kind != NEUMANN:
                    continue
                cid = e.cells[0]
                nrm = _outward_normal(fm, cid, a, b)
                gk = ("nv", fi, eid)
                gv = None if work_cache is None else work_cache.get(gk)
                if gv is None:
                    gv = bc.func.value(pts)
                    if work_cache is not None:
                        work_cache[gk] = gv
                flux = grad_dot((fi, cid), pts, nrm, ("e", fi, eid, cid), nrm0)
                resid = kappa * flux - gv
                term = (he / kappa) * he * float(np.dot(wg, resid**2))
                per_cell[(fi, cid)].neumann += term
            else:
                c1, c2 = e.cells
                nrm = _outward_normal(fm, c1, a, b)
                jump = kappa * (
                    grad_dot((fi, c1), pts, nrm, ("e", fi, eid, c1), nrm0)
                    - grad_dot((fi, c2), pts, nrm, ("e", fi, eid, c2), nrm0)
                )
                term = (he / kappa) * he * float(np.dot(wg, jump**2))
                a1, a2 = areas[(fi, c1)], areas[(fi, c2)]
                per_cell[(fi, c1)].edge_jump += term * a1 / (a1 + a2)
                per_cell[(fi, c2)].edge_jump += term * a2 / (a1 + a2)

    # (e) trace-edge flux residual, once per twin pair
    for (fi, ei), (fj, ej) in sorted(mesh.twin.items()):
        if (fi, ei) > (fj, ej):
            continue
        tr = next(t for t in problem.traces if t.id == mesh.fractures[fi].edges[ei].trace)
        ki = problem.fractures[fi].transmissivity
        kj = problem.fractures[fj].transmissivity
        fm_i, fm_j = mesh.fractures[fi], mesh.fractures[fj]
        e_i, e_j = fm_i.edges[ei], fm_j.edges[ej]
        ai, bi = e_i.v
        pa = fm_i.verts[ai].p2
        pb = fm_i.verts[bi].p2
        he = float(np.hypot(*(pb - pa)))
        pk = ("tp", fi, ei)
        cached = None if work_cache is None else work_cache.get(pk)
        if cached is None:
            ta, tb = e_i.tparam
            tg = ta + xg * (tb - ta)
            pts_i = pa + np.outer(xg, pb - pa)
            p3 = np.array([tr.point3d(t) for t in tg])
            pts_j = fm_j.frame.to_local(p3)
            cached = (pts_i, pts_j)
            if work_cache is not None:
                work_cache[pk] = cached
        pts_i, pts_j = cached
        total_flux = np.zeros(len(xg))
        sides = [(fi, fm_i, e_i, ei, pts_i, ki), (fj, fm_j, e_j, ej, pts_j, kj)]
        cells_touched = []
        for fidx, fm, e, eidx, pts, kap in sides:
            va, vb = e.v
            qa, qb = fm.verts[va].p2, fm.verts[vb].p2
            te = (qb - qa) / np.hypot(*(qb - qa))
            nrm0 = np.array([te[1], -te[0]])
            for cid in e.cells:
                nrm = _outward_normal(fm, cid, va, vb)
                total_flux += kap * grad_dot(
                    (fidx, cid), pts, nrm, ("e", fidx, eidx, cid), nrm0
                )
                cells_touched.append((fidx, cid))
        term = (he / min(ki, kj)) * he * float(np.dot(wg, total_flux**2))
        tot_area = sum(areas[c] for c in cells_touched)
        for c in cells_touched:
            per_cell[c].trace += term * areas[c] / tot_area

    est2 = sum(ce.total for ce in per_cell.values())
    return EstimatorReport(per_cell, float(np.sqrt(est2)))


def energy_error(
    mesh: ConformingMesh,
    x: np.ndarray,
    problem: ProblemSpec,
    k: int,
    elements: dict | None = None,
    dof_map: DofMap | None = None,
    work_cache: dict | None = None,
) -> float:
    if not problem.has_exact:
        raise NoExactSolution("problem has no exact solution")
    if dof_map is None:
        dof_map = build_dof_map(mesh, problem, k)
    if len(x) != dof_map.n_total:
        raise MeshSolutionMismatch(f"{len(x)} DOFs given, mesh has {dof_map.n_total}")
    elements = _elements_for(mesh, problem, k, elements)
    coeffs = _poly_coeffs(x, dof_map, elements)
    err2 = 0.0
    for key, el in elements.items():
        qpts, qw, Gq = _grad_quad(el, key, work_cache)
        gk = ("g",) + key
        gh = None if work_cache is None else work_cache.get(gk)
        if gh is None:
            gh = problem.exact[key[0]].grad(qpts)
            if work_cache is not None:
                work_cache[gk] = gh
        gp = np.einsum("qad,a->qd", Gq, coeffs[key])
        diff = gh - gp
        err2 += el.kappa * float(np.dot(qw, (diff**2).sum(1)))
    return float(np.sqrt(err2))


def projected_energy(
    mesh: ConformingMesh,
    x: np.ndarray,
    problem: ProblemSpec,
    k: int,
    elements: dict,
    dof_map: DofMap,
    work_cache: dict | None = None,
) -> float:
    """Broken energy norm of the projected solution (stopping denominator)."""
    coeffs = _poly_coeffs(x, dof_map, elements)
    tot = 0.0
    for key, el in elements.items():
        E = _energy_matrix(el, key, work_cache)
        c = coeffs[key]
        tot += el.kappa * float(c @ E @ c)
    return float(np.sqrt(tot))


def effectivity(report: EstimatorReport) -> float:
    if report.err is None:
        raise NoExactSolution("energy error missing from report")
    if report.est <= 0.0:
        raise EstimatorZero("estimator is zero")
    return report.err / report.est
