"""Order-k virtual element discretization on conforming polygonal meshes.

Local spaces use scaled monomials centred at the cell centroid. Per cell the
degrees of freedom are the vertex values, k-1 Gauss-Lobatto points inside each
edge, and the scaled moments up to degree k-2. The local bilinear form is the
projected-gradient consistency term plus the dofi-dofi stabilization applied
to (I - P), both scaled by the fracture transmissivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from .dfn import DIRICHLET, NEUMANN, ProblemSpec
from .errors import EmptyDirichlet, SingularProjector
from .geometry import Polygon2, centroid_area
from .mesh import ConformingMesh, FractureMesh
from .quadrature import gauss_lobatto_internal, polygon_quadrature, segment_rule

__all__ = [
    "MonomialBasis",
    "VemElement",
    "DofMap",
    "build_element",
    "project_nabla",
    "local_load",
    "build_dof_map",
    "assemble",
    "apply_dirichlet",
]


def monomial_exponents(k: int) -> list[tuple[int, int]]:
    return [(d - j, j) for d in range(k + 1) for j in range(d + 1)]


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomials m_a = ((x-xc)/h)^a1-ish: ((x-xc)^a1 (y-yc)^a2)/h^|a|."""

    center: np.ndarray
    h: float
    k: int
    exps: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "exps", tuple(monomial_exponents(self.k)))

    @property
    def size(self) -> int:
        return len(self.exps)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        xi = (pts - self.center) / self.h
        out = np.empty((len(pts), self.size))
        for c, (a1, a2) in enumerate(self.exps):
            out[:, c] = xi[:, 0] ** a1 * xi[:, 1] ** a2
        return out

    def grad(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        xi = (pts - self.center) / self.h
        out = np.zeros((len(pts), self.size, 2))
        for c, (a1, a2) in enumerate(self.exps):
            if a1:
                out[:, c, 0] = a1 * xi[:, 0] ** (a1 - 1) * xi[:, 1] ** a2 / self.h
            if a2:
                out[:, c, 1] = a2 * xi[:, 0] ** a1 * xi[:, 1] ** (a2 - 1) / self.h
        return out

    def laplacian_matrix(self) -> np.ndarray:
        """L with (Delta m_a) = sum_b L[a,b] m_b, b over the same basis."""
        index = {e: i for i, e in enumerate(self.exps)}
        L = np.zeros((self.size, self.size))
        for a, (a1, a2) in enumerate(self.exps):
            if a1 >= 2:
                L[a, index[(a1 - 2, a2)]] += a1 * (a1 - 1) / self.h**2
            if a2 >= 2:
                L[a, index[(a1, a2 - 2)]] += a2 * (a2 - 1) / self.h**2
        return L

    def derivative_matrix(self, axis: int) -> np.ndarray:
        """Dx with (d m_a / dx) = sum_b Dx[a,b] m_b (likewise for y)."""
        index = {e: i for i, e in enumerate(self.exps)}
        D = np.zeros((self.size, self.size))
        for a, (a1, a2) in enumerate(self.exps):
            p = a1 if axis == 0 else a2
            if p:
                tgt = (a1 - 1, a2) if axis == 0 else (a1, a2 - 1)
                D[a, index[tgt]] = p / self.h
        return D


@dataclass(slots=True)
class VemElement:
    fid: int
    cid: int
    k: int
    kappa: float
    poly: Polygon2
    basis: MonomialBasis
    area: float
    ndof: int
    nv: int
    pi_star: np.ndarray  # (nb_k, ndof): dofs -> Pi^nabla coefficients
    p0_coef: np.ndarray  # (nb_{k-1}, ndof): dofs -> Pi^0_{k-1} coefficients
    gram_km1: np.ndarray  # (m_b, m_g) Gram matrix, degree <= k-1
    A: np.ndarray
    edge_nodes: np.ndarray  # (ne, k+1, 2): boundary node coordinates per edge


def _edge_lagrange(k: int, xg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [0,1] (endpoints + internal GL) and their Lagrange values at xg."""
    tn = np.concatenate([[0.0], gauss_lobatto_internal(k), [1.0]])
    V = np.vander(tn, increasing=True)
    E = np.vander(xg, N=k + 1, increasing=True)
    # row j of inv(V).T gives coefficients of Lagrange poly j
    return tn, E @ np.linalg.inv(V)


def build_element(
    fm: FractureMesh, cid: int, k: int, kappa: float
) -> VemElement:
    poly = fm.polygon(cid)
    c, area = centroid_area(poly)
    h = poly.diameter()
    basis = MonomialBasis(c, h, k)
    nb = basis.size
    nv = poly.n
    nk2 = (k - 1) * k // 2  # moments up to degree k-2
    ndof = nv * k + nk2
    v = poly.vertices

    qpts, qw = polygon_quadrature(poly, 2 * k + 2)
    M = basis.eval(qpts)  # (nq, nb)
    H = (M * qw[:, None]).T @ M  # full Gram up to degree k
    nbm1 = (k) * (k + 1) // 2  # basis size of degree k-1
    Hm1 = H[:nbm1, :nbm1]

    # boundary quadrature per edge
    xg, wg = segment_rule(k + 2)
    tn, lag = _edge_lagrange(k, xg)  # lag: (nq_edge, k+1)

    # order along the edge: start vertex, internal nodes, end vertex;
    # matches tn = [0, gl..., 1]
    def edge_dof_order(e: int) -> list[int]:
        mid = [nv + e * (k - 1) + j for j in range(k - 1)]
        return [e, *mid, (e + 1) % nv]

    edge_nodes = np.empty((nv, k + 1, 2))
    B = np.zeros((nb, ndof))
    Ex = np.zeros((nbm1, ndof))
    Ey = np.zeros((nbm1, ndof))
    Lap = basis.laplacian_matrix()
    Dx = basis.derivative_matrix(0)[:nbm1, :nbm1]
    Dy = basis.derivative_matrix(1)[:nbm1, :nbm1]

    for e in range(nv):
        p0, p1 = v[e], v[(e + 1) % nv]
        t = p1 - p0
        le = float(np.hypot(*t))
        nrm = np.array([t[1], -t[0]]) / le  # outward for CCW loops
        pts = p0 + np.outer(xg, t)
        edge_nodes[e] = p0 + np.outer(tn, t)
        gm = basis.grad(pts)  # (nq, nb, 2)
        dn = gm[:, :, 0] * nrm[0] + gm[:, :, 1] * nrm[1]  # (nq, nb)
        mv = basis.eval(pts)[:, :nbm1]  # (nq, nbm1)
        dofs = edge_dof_order(e)
        for jl, dj in enumerate(dofs):
            wphi = wg * lag[:, jl] * le
            B[:, dj] += dn.T @ wphi
            Ex[:, dj] += mv.T @ (wphi * nrm[0])
            Ey[:, dj] += mv.T @ (wphi * nrm[1])

    # interior parts: moments of phi are DOFs scaled by |E|
    mom_cols = np.arange(nv * k, ndof)
    if nk2:
        B[:, mom_cols] -= area * Lap[:, :nk2]

    # closure row for the projector system
    B[0, :] = 0.0
    if k == 1:
        B[0, :nv] = 1.0 / nv
    else:
        B[0, nv * k] = 1.0  # cell-mean DOF

    D = np.empty((ndof, nb))
    D[:nv] = basis.eval(v)
    for e in range(nv):
        D[nv + e * (k - 1) : nv + (e + 1) * (k - 1)] = basis.eval(edge_nodes[e][1:-1])
    if nk2:
        D[mom_cols] = ((M[:, :nk2] * qw[:, None]).T @ M) / area

    # solve in the L2-orthonormalized basis: monomials are badly conditioned
    # on elongated cells at k=4
    try:
        R = sla.cholesky(H)
        Bt = sla.solve_triangular(R, B, trans="T")
        Dt = sla.solve_triangular(R, D.T, trans="T").T
        pi_star = sla.solve_triangular(R, np.linalg.solve(Bt @ Dt, Bt))
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularProjector(f"cell ({fm.fid},{cid}): {exc}") from exc
    pi_dof = D @ pi_star

    # Pi^0_{k-1} of the function: moments <= k-2 are DOFs; degrees k-1 use the
    # enhanced-space identity (m_b, v) = (m_b, Pi^nabla v)
    C = np.zeros((nbm1, ndof))
    if nk2:
        C[:nk2, mom_cols] = area * np.eye(nk2)
    C[nk2:nbm1] = H[nk2:nbm1, :] @ pi_star
    p0_coef = np.linalg.solve(Hm1, C)

    # Pi^0_{k-1} of the gradient: (m_b, dv/dx) = -(dm_b/dx, v) + boundary term
    if nk2:
        Ex[:, mom_cols] -= area * Dx[:, :nk2]
        Ey[:, mom_cols] -= area * Dy[:, :nk2]
    gx = np.linalg.solve(Hm1, Ex)
    gy = np.linalg.solve(Hm1, Ey)

    Ac = gx.T @ Hm1 @ gx + gy.T @ Hm1 @ gy
    R = np.eye(ndof) - pi_dof
    A = kappa * (Ac + R.T @ R)
    A = 0.5 * (A + A.T)
    return VemElement(
        fm.fid, cid, k, kappa, poly, basis, area, ndof, nv,
        pi_star, p0_coef, Hm1, A, edge_nodes,
    )


def project_nabla(el: VemElement, dofs: np.ndarray) -> np.ndarray:
    """Coefficients of Pi^nabla_k v in the element's monomial basis."""
    return el.pi_star @ np.asarray(dofs, dtype=float)


def local_load(el: VemElement, f_field) -> np.ndarray:
    """b_E[i] = (f, Pi^0_{k-1} phi_i); vertex-mean rule for k=1."""
    qpts, qw = polygon_quadrature(el.poly, 2 * el.k + 2)
    fv = f_field.value(qpts)
    if el.k == 1:
        b = np.zeros(el.ndof)
        b[: el.nv] = float(np.dot(qw, fv)) / el.nv
        return b
    fhat = (el.basis.eval(qpts)[:, : el.p0_coef.shape[0]] * (qw * fv)[:, None]).sum(0)
    return el.p0_coef.T @ fhat


# ---------------------------------------------------------------------------
# global DOF map and assembly
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        if p != x:
            p = self.parent[x] = self.find(p)
        return p

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@dataclass
class DofMap:
    k: int
    n_total: int
    vertex_global: dict  # (fid, vid) -> global index
    edge_global: dict  # (fid, eid) -> list of k-1 global indices (edge.v order)
    cell_dofs: dict  # (fid, cid) -> np.ndarray of global indices
    dirichlet: np.ndarray  # bool mask
    values: np.ndarray  # prescribed values where dirichlet


def _twin_vertex_pairs(mesh: ConformingMesh):
    for (fi, ei), (fj, ej) in mesh.twin.items():
        if (fi, ei) > (fj, ej):
            continue
        a, b = mesh.fractures[fi].edges[ei].v
        c, d = mesh.fractures[fj].edges[ej].v
        ta, tb = mesh.fractures[fi].edges[ei].tparam
        tc, td = mesh.fractures[fj].edges[ej].tparam
        if abs(ta - tc) <= abs(ta - td):
            yield (fi, a), (fj, c)
            yield (fi, b), (fj, d)
        else:
            yield (fi, a), (fj, d)
            yield (fi, b), (fj, c)


def build_dof_map(mesh: ConformingMesh, problem: ProblemSpec, k: int) -> DofMap:
    uf = _UnionFind()
    for fm in mesh.fractures:
        for vid in fm.verts:
            uf.find((fm.fid, vid))
    for a, b in _twin_vertex_pairs(mesh):
        uf.union(a, b)

    vertex_global: dict = {}
    counter = 0
    for fm in mesh.fractures:
        for vid in sorted(fm.verts):
            root = uf.find((fm.fid, vid))
            if root not in vertex_global:
                vertex_global[root] = counter
                counter += 1
    vmap = {
        (fm.fid, vid): vertex_global[uf.find((fm.fid, vid))]
        for fm in mesh.fractures
        for vid in fm.verts
    }

    edge_global: dict = {}
    if k >= 2:
        for fm in mesh.fractures:
            for eid in sorted(fm.edges):
                key = (fm.fid, eid)
                if key in edge_global:
                    continue
                ids = list(range(counter, counter + k - 1))
                counter += k - 1
                edge_global[key] = ids
                tw = mesh.twin.get(key)
                if tw is not None:
                    # orientation along the trace decides the shared order
                    ta, tb = fm.edges[eid].tparam
                    tc, td = mesh.fractures[tw[0]].edges[tw[1]].tparam
                    same = (tb - ta) * (td - tc) > 0
                    edge_global[tw] = ids if same else ids[::-1]
    else:
        for fm in mesh.fractures:
            for eid in fm.edges:
                edge_global[(fm.fid, eid)] = []

    nk2 = (k - 1) * k // 2
    cell_dofs: dict = {}
    for fm in mesh.fractures:
        for cid in sorted(fm.cells):
            loop = fm.cells[cid].loop
            nv = len(loop)
            idx = [vmap[(fm.fid, vid)] for vid in loop]
            if k >= 2:
                from .mesh import _pair

                for i in range(nv):
                    a, b = loop[i], loop[(i + 1) % nv]
                    eid = fm.edge_of[_pair(a, b)]
                    ids = edge_global[(fm.fid, eid)]
                    # element orders nodes from loop[i] to loop[i+1]
                    idx.extend(ids if fm.edges[eid].v == (a, b) else ids[::-1])
            idx.extend(range(counter, counter + nk2))
            counter += nk2
            cell_dofs[(fm.fid, cid)] = np.array(idx, dtype=np.int64)

    dirichlet = np.zeros(counter, dtype=bool)
    values = np.zeros(counter)
    gl = gauss_lobatto_internal(k)
    for fm in mesh.fractures:
        for eid in sorted(fm.edges):
            e = fm.edges[eid]
            if not e.boundary:
                continue
            bc = problem.bcs[fm.fid][e.bedge]
            if bc.kind != DIRICHLET:
                continue
            a, b = e.v
            pa, pb = fm.verts[a].p2, fm.verts[b].p2
            for vid, p in ((a, pa), (b, pb)):
                g = vmap[(fm.fid, vid)]
                dirichlet[g] = True
                values[g] = bc.func.value(p[None])[0]
            if k >= 2:
                nodes = pa + np.outer(gl, pb - pa)
                vals = bc.func.value(nodes)
                for g, val in zip(edge_global[(fm.fid, eid)], vals):
                    dirichlet[g] = True
                    values[g] = val
    if not dirichlet.any():
        raise EmptyDirichlet("no Dirichlet DOFs: singular system")
    return DofMap(k, counter, vmap, edge_global, cell_dofs, dirichlet, values)


def assemble(
    mesh: ConformingMesh,
    problem: ProblemSpec,
    k: int,
    element_cache: dict | None = None,
):
    """Global stiffness, load (Neumann included) and DOF map.

    element_cache maps (fid, cid, vertex-loop tuple) -> VemElement and is
    valid across adaptive iterations because cells are immutable once built
    except for retirement and aligned-vertex insertion (which changes the key).
    """
    dof_map = build_dof_map(mesh, problem, k)
    elements: dict = {}
    b = np.zeros(dof_map.n_total)
    nnz = 0
    for fm in mesh.fractures:
        kappa = problem.fractures[fm.fid].transmissivity
        f_field = problem.forcing[fm.fid]
        for cid in sorted(fm.cells):
            key = (fm.fid, cid, tuple(fm.cells[cid].loop))
            hit = None if element_cache is None else element_cache.get(key)
            if hit is None:
                el = build_element(fm, cid, k, kappa)
                b_loc = local_load(el, f_field)
                if element_cache is not None:
                    element_cache[key] = (el, b_loc)
            else:
                el, b_loc = hit
            elements[(fm.fid, cid)] = el
            idx = dof_map.cell_dofs[(fm.fid, cid)]
            b[idx] += b_loc
            nnz += el.ndof * el.ndof
    # flat preallocated triplets: a list of per-cell arrays costs ~10x the
    # payload in object overhead once the mesh reaches 1e5+ cells
    rows = np.empty(nnz, dtype=np.int32)
    cols = np.empty(nnz, dtype=np.int32)
    vals = np.empty(nnz)
    at = 0
    for (fid, cid), el in elements.items():
        idx = dof_map.cell_dofs[(fid, cid)]
        n2 = el.ndof * el.ndof
        rows[at : at + n2] = np.repeat(idx, el.ndof)
        cols[at : at + n2] = np.tile(idx, el.ndof)
        vals[at : at + n2] = el.A.ravel()
        at += n2

    # Neumann boundary terms
    xg, wg = segment_rule(k + 2)
    _, lag = _edge_lagrange(k, xg)
    for fm in mesh.fractures:
        for eid in sorted(fm.edges):
            e = fm.edges[eid]
            if not e.boundary:
                continue
            bc = problem.bcs[fm.fid][e.bedge]
            if bc.kind != NEUMANN:
                continue
            a, bb = e.v
            pa, pb = fm.verts[a].p2, fm.verts[bb].p2
            le = float(np.hypot(*(pb - pa)))
            gv = bc.func.value(pa + np.outer(xg, pb - pa))
            gidx = [
                dof_map.vertex_global[(fm.fid, a)],
                *dof_map.edge_global[(fm.fid, eid)],
                dof_map.vertex_global[(fm.fid, bb)],
            ]
            for jl, g in enumerate(gidx):
                b[g] += le * float(np.dot(wg * lag[:, jl], gv))

    A = sps.csr_matrix(
        (vals, (rows, cols)), shape=(dof_map.n_total, dof_map.n_total)
    )
    return A, b, dof_map, elements


def apply_dirichlet(A: sps.csr_matrix, b: np.ndarray, dof_map: DofMap):
    """Reduced SPD system on free DOFs and the lifting of the full solution."""
    free = ~dof_map.dirichlet
    g = dof_map.values
    A_ff = A[free][:, free].tocsr()
    rhs = b[free] - A[free][:, dof_map.dirichlet] @ g[dof_map.dirichlet]

    def expand(x_f: np.ndarray) -> np.ndarray:
        x = g.copy()
        x[free] = x_f
        return x

    return A_ff, rhs, expand
