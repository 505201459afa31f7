"""End-to-end acceptance checks: convergence rates, effectivity stability,
marking/refinement invariants, solver agreement, and strategy equivalences on
the built-in benchmarks plus a seeded synthetic network."""

import json
import subprocess
import sys
import time

import numpy as np
import pytest
import sympy as sp

from dfnvem.adapt import (
    RefinementConfig,
    choose_direction,
    mark,
    refine_cell,
    RefineStats,
)
from dfnvem.dfn import _manufactured, builtin_problem
from dfnvem.driver import RunConfig, fit_rate, run_adaptive
from dfnvem.errors import MaxIterations
from dfnvem.estimator import energy_error
from dfnvem.functions import X, Y, Z
from dfnvem.geometry import centroid_area
from dfnvem.mesh import ConformingMesh
from dfnvem.minimal_mesh import build_minimal_mesh
from dfnvem.quadrature import polygon_quadrature
from dfnvem.solver import ic_factorize, pcg
from dfnvem.vem import apply_dirichlet, assemble
from test_adapt import brute_force_mark
from test_vem import mesh_of_poly, random_convex


def solve(mesh, problem, k):
    A, b, dm, els = assemble(mesh, problem, k)
    A_ff, rhs, expand = apply_dirichlet(A, b, dm)
    if A_ff.shape[0] == 0:
        return expand(np.zeros(0)), dm, els
    A_ff = A_ff.tocsr()
    x, _ = pcg(A_ff, rhs, ic_factorize(A_ff), rel_tol=1e-15)
    return expand(x), dm, els


def exact_energy(mesh, problem, k):
    tot = 0.0
    for fm in mesh.fractures:
        kappa = problem.fractures[fm.fid].transmissivity
        ex = problem.exact[fm.fid]
        for cid in fm.cells:
            qpts, qw = polygon_quadrature(fm.polygon(cid), 2 * k)
            g = ex.grad(qpts)
            tot += kappa * float(np.dot(qw, (g**2).sum(1)))
    return float(np.sqrt(tot))


class TestPatch:
    def test_polynomial_reproduction(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(11)
        for k in (1, 2, 3, 4):
            # (a) single fracture, random convex polygon, split twice
            expr = (0.4 * X - 0.7 * Y + 0.3) ** k
            pts2 = random_convex(rng, 7)
            pts3 = np.c_[pts2, np.zeros(len(pts2))]
            prob = _manufactured(f"poly{k}", [pts3], [expr], k=1.7)
            mesh = build_minimal_mesh(prob)
            cfg = RefinementConfig()
            stats = RefineStats()
            for _ in range(2):
                for fid, cid in list(mesh.cell_ids()):
                    plan = choose_direction(mesh, fid, cid, cfg, stats)
                    refine_cell(mesh, plan, cfg, stats)
            x, dm, els = solve(mesh, prob, k)
            err = energy_error(mesh, x, prob, k, elements=els, dof_map=dm)
            assert err / exact_energy(mesh, prob, k) < 1e-8, f"single fracture k={k}"

            # (b) problem-1 geometry, global degree-k polynomial continuous
            # across the trace
            p1 = builtin_problem("problem1")
            gexpr = (0.3 * X + 0.5 * Y + 0.2 * Z + 0.4) ** k
            prob = _manufactured(
                f"gpoly{k}",
                [f.polygon3d.tolist() for f in p1.fractures],
                [gexpr, gexpr],
                k=2.0,
            )
            mesh = build_minimal_mesh(prob)
            x, dm, els = solve(mesh, prob, k)
            err = energy_error(mesh, x, prob, k, elements=els, dof_map=dm)
            assert err / exact_energy(mesh, prob, k) < 1e-8, f"two fractures k={k}"
        assert time.perf_counter() - t0 < 10.0


@pytest.fixture(scope="module")
def p1_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("p1")
    logs = {}
    for k in (1, 2, 3, 4):
        cfg = RunConfig(
            problem="problem1",
            order=k,
            tol=0.05,
            max_iter=28 if k == 1 else 60,
            out=out / f"k{k}",
            timing=False,
        )
        t0 = time.perf_counter()
        logs[k] = run_adaptive(cfg)
        assert time.perf_counter() - t0 < 300.0
    return out, logs


@pytest.fixture(scope="module")
def p2_runs():
    logs = {}
    for strat in ("maxmom", "trdir", "maxedg"):
        for k in (1, 2):
            cfg = RunConfig(
                problem="problem2",
                order=k,
                refinement=RefinementConfig(strategy=strat),
                tol=0.05,
                max_iter=28 if k == 1 else 60,
                timing=False,
            )
            t0 = time.perf_counter()
            logs[(strat, k)] = run_adaptive(cfg)
            assert time.perf_counter() - t0 < 300.0
    return logs


class TestProblem1Convergence:
    def test_rates(self, p1_runs):
        _, logs = p1_runs
        a1 = fit_rate(logs[1])
        assert -0.65 <= a1 <= -0.40
        assert abs(fit_rate(logs[1], quantity="err") - a1) <= 0.15
        a2 = fit_rate(logs[2])
        assert -1.25 <= a2 <= -0.80
        assert abs(fit_rate(logs[2], quantity="err") - a2) <= 0.15
        assert fit_rate(logs[3]) <= -1.0
        assert fit_rate(logs[4]) <= -1.0

    def test_effectivity_stability(self, p1_runs):
        _, logs = p1_runs
        effs = [s.eff for s in logs[1].steps if s.ndof > 500]
        assert len(effs) >= 2
        assert max(effs) / min(effs) < 2.0

    def test_pcg_ratio_decreasing(self, p1_runs):
        _, logs = p1_runs
        steps = logs[1].steps
        r5 = steps[4].pcg_it / steps[4].ndof
        rf = steps[-1].pcg_it / steps[-1].ndof
        assert rf < r5


class TestProblem2Convergence:
    def test_rates(self, p2_runs):
        for strat in ("maxmom", "trdir", "maxedg"):
            a1 = fit_rate(p2_runs[(strat, 1)])
            assert -0.65 <= a1 <= -0.40, strat
            assert abs(fit_rate(p2_runs[(strat, 1)], quantity="err") - a1) <= 0.15
            a2 = fit_rate(p2_runs[(strat, 2)])
            assert -1.25 <= a2 <= -0.80, strat
            assert abs(fit_rate(p2_runs[(strat, 2)], quantity="err") - a2) <= 0.15

    def test_conformity_and_area_conservation(self, p2_runs):
        prob = builtin_problem("problem2")
        for key, log in p2_runs.items():
            mesh = log.mesh
            rep = mesh.audit()
            assert rep.ok, (key, rep.violations)
            for fm in mesh.fractures:
                tot = sum(centroid_area(fm.polygon(cid))[1] for cid in fm.cells)
                assert abs(tot - fm.area) <= 1e-10 * fm.area


class TestMarkingOracle:
    def test_200_random_vectors(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            n = int(rng.integers(1, 51))
            est2 = {(0, i): float(v) for i, v in enumerate(rng.uniform(0, 1, n))}
            c = float(rng.uniform(0.05, 0.95))
            assert mark(est2, c) == brute_force_mark(est2, c)


class TestRefinementFuzz:
    @pytest.mark.parametrize("strategy", ["maxmom", "trdir", "maxpnt", "maxedg"])
    def test_1000_cells(self, strategy):
        rng = np.random.default_rng(abs(hash(strategy)) % (1 << 31))
        cfg = RefinementConfig(strategy=strategy)

        def convex_sample():
            while True:
                n = int(rng.integers(4, 11))
                ang = np.sort(rng.uniform(0, 2 * np.pi, n))
                gaps = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
                if gaps.min() > 0.08:  # avoid near-duplicate vertices
                    a, b = rng.uniform(0.5, 1.5, 2)
                    return np.stack([a * np.cos(ang), b * np.sin(ang)], axis=1)

        for trial in range(1000):
            pts = convex_sample()
            scale = 10.0 ** rng.uniform(-3, 3)
            shift = rng.uniform(-100, 100, 2)
            stretch = np.array([10.0 ** rng.uniform(0, 1.2), 1.0])
            pts = pts * stretch * scale + shift
            fm = mesh_of_poly(pts)
            mesh = ConformingMesh([fm])
            parent = fm.polygon(0)
            _, parent_area = centroid_area(parent)
            parent_loop = list(fm.cells[0].loop)
            parent_pts = {v: fm.verts[v].p2.copy() for v in parent_loop}
            stats = RefineStats()
            plan = choose_direction(mesh, 0, 0, cfg, stats)
            if fm.cell_ar(0) > cfg.max_ar:
                assert plan.effective == "maxmom"
            c1, c2 = refine_cell(mesh, plan, cfg, stats)
            p1, p2 = fm.polygon(c1), fm.polygon(c2)  # Polygon2 asserts convexity
            _, a1 = centroid_area(p1)
            _, a2 = centroid_area(p2)
            assert abs(a1 + a2 - parent_area) <= 1e-12 * parent_area
            if stats.uncollapsed == 0:
                # any vertex the cut created must respect the snapping margin
                # on its host edge
                n = len(parent_loop)
                for vid in fm.verts:
                    if vid in parent_pts:
                        continue
                    p = fm.verts[vid].p2
                    ts = []
                    for i in range(n):
                        a = parent_pts[parent_loop[i]]
                        b = parent_pts[parent_loop[(i + 1) % n]]
                        e = b - a
                        L2 = float(e @ e)
                        t = float((p - a) @ e) / L2
                        off = np.hypot(*(p - a - t * e))
                        if off <= 1e-9 * np.sqrt(L2) * 10 and -0.1 < t < 1.1:
                            ts.append(t)
                    assert ts, "new vertex not on any parent edge"
                    t = min(ts, key=lambda tt: min(abs(tt), abs(1 - tt)))
                    margin = cfg.collapse_toll * (1.0 - 1e-9)
                    assert margin <= t <= 1.0 - margin, (strategy, trial, t)


class TestSolverAgreement:
    def test_dense_direct(self):
        rng = np.random.default_rng(77)
        import scipy.sparse as sps

        for n in (50, 200, 500):
            B = sps.random(
                n, n, density=0.02, random_state=np.random.RandomState(int(rng.integers(1 << 31)))
            )
            A = sps.csr_matrix(B @ B.T + n * sps.eye(n))
            b = rng.standard_normal(n)
            x, _ = pcg(A, b, ic_factorize(A), rel_tol=1e-15)
            ref = np.linalg.solve(A.toarray(), b)
            assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)


class TestMaxPntEqualsMaxMom:
    def test_bitwise_csv(self, p1_runs, tmp_path):
        out, logs = p1_runs
        cfg = RunConfig(
            problem="problem1",
            order=1,
            refinement=RefinementConfig(strategy="maxpnt"),
            tol=0.05,
            max_iter=28,
            out=tmp_path,
            timing=False,
        )
        log = run_adaptive(cfg)
        ref = (out / "k1" / "runlog.csv").read_bytes()
        got = (tmp_path / "runlog.csv").read_bytes()
        assert got == ref
        # mesh sequences identical: same cell counts every step
        assert [s.ncell for s in log.steps] == [s.ncell for s in logs[1].steps]


_SYNTH_RUNNER = """
import json, sys
from dfnvem.adapt import RefinementConfig
from dfnvem.driver import RunConfig, fit_rate, run_adaptive

cfg = RunConfig(problem="synthetic:42", order=1,
                refinement=RefinementConfig(strategy=sys.argv[1]),
                tol=1e-12, max_iter=40, timing=False)
log = run_adaptive(cfg)
rep = log.mesh.audit()
print(json.dumps({
    "nsteps": len(log.steps),
    "audit_ok": rep.ok,
    "violations": rep.violations[:5],
    "ests": [s.est for s in log.steps],
    "alpha": fit_rate(log),
}))
"""


class TestSyntheticNetwork:
    # each strategy runs in its own process: the meshes reach several
    # hundred thousand cells and a single process holding four of them
    # in sequence exceeds the memory available here
    @pytest.mark.parametrize("strategy", ["maxmom", "trdir", "maxpnt", "maxedg"])
    def test_40_iterations(self, strategy):
        proc = subprocess.run(
            [sys.executable, "-c", _SYNTH_RUNNER, strategy],
            capture_output=True, text=True, timeout=3600,
        )
        assert proc.returncode == 0, proc.stderr[-2000:]
        out = json.loads(proc.stdout)
        assert out["nsteps"] == 40
        assert out["audit_ok"], out["violations"]
        ests = out["ests"]
        assert all(ests[i + 1] < ests[i] for i in range(4, 39)), strategy
        assert out["alpha"] <= -0.35
