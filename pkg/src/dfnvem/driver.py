"""SOLVE-ESTIMATE-MARK-REFINE orchestration, logging, and rate fitting.

Each iteration assembles on the current mesh (reusing element matrices of
untouched cells), solves the reduced SPD system with IC(0)-preconditioned CG,
evaluates the residual estimator (plus the energy error when the problem
carries an exact solution), appends a CSV row, and either stops — estimated
relative error below the threshold, or iteration budget exhausted — or marks
and refines. The CSV schema is fixed; downstream plotting reads it as-is.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adapt import RefinementConfig, mark, refine
from .dfn import ProblemSpec, builtin_problem, generate_synthetic_dfn, load_dfn
from .errors import InsufficientData, ValidationError
from .estimator import compute_estimator, energy_error, projected_energy
from .mesh import write_vtk
from .minimal_mesh import build_minimal_mesh
from .solver import ic_factorize, pcg
from .vem import apply_dirichlet, assemble

__all__ = [
    "RunConfig",
    "RunStep",
    "RunLog",
    "CSV_COLUMNS",
    "resolve_problem",
    "run_adaptive",
    "fit_rate",
    "write_csv",
    "read_csv",
]

CSV_COLUMNS = (
    "step",
    "ncell",
    "ndof",
    "est",
    "err",
    "eff",
    "pcg_it",
    "ar_min",
    "ar_mean",
    "ar_max",
    "wall_ms",
)

SYNTHETIC_FRACTURES = 20


@dataclass(frozen=True)
class RunConfig:
    problem: str = "problem1"
    order: int = 1
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    tol: float = 0.05
    max_iter: int = 60
    out: Path | None = None
    vtk: bool = False
    pcg_rel_tol: float = 1e-15
    timing: bool = True  # blank wall_ms column when False (reproducible CSVs)

    def __post_init__(self):
        if not 1 <= self.order <= 4:
            raise ValidationError("VEM order must be in 1..4")
        if self.tol <= 0:
            raise ValidationError("stopping threshold must be positive")
        if self.max_iter < 1:
            raise ValidationError("need at least one iteration")


@dataclass
class RunStep:
    step: int
    ncell: int
    ndof: int
    est: float
    err: float | None
    eff: float | None
    pcg_it: int
    ar_min: float
    ar_mean: float
    ar_max: float
    wall_ms: float | None


@dataclass
class RunLog:
    steps: list
    status: str  # "converged" | "max_iterations"
    rel_est: float  # estimated relative error at the last step
    mesh: object | None = None  # final ConformingMesh (not serialized)

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "converged" else 2


def resolve_problem(src: str) -> ProblemSpec:
    """`problem1` | `problem2` | `file:<path>` | `synthetic:<seed>`."""
    if src.startswith("file:"):
        return load_dfn(src[5:])
    if src.startswith("synthetic:"):
        return generate_synthetic_dfn(int(src[10:]), SYNTHETIC_FRACTURES)
    return builtin_problem(src)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def _row(s: RunStep) -> list:
    return [_fmt(getattr(s, c)) for c in CSV_COLUMNS]


def write_csv(steps: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for s in steps:
            w.writerow(_row(s))


def read_csv(path) -> list:
    """CSV rows back as RunStep records (blank err/eff/wall_ms -> None)."""
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_COLUMNS:
            raise ValidationError(f"unexpected CSV columns in {path}")
        for r in rd:
            out.append(
                RunStep(
                    step=int(r["step"]),
                    ncell=int(r["ncell"]),
                    ndof=int(r["ndof"]),
                    est=float(r["est"]),
                    err=float(r["err"]) if r["err"] else None,
                    eff=float(r["eff"]) if r["eff"] else None,
                    pcg_it=int(r["pcg_it"]),
                    ar_min=float(r["ar_min"]),
                    ar_mean=float(r["ar_mean"]),
                    ar_max=float(r["ar_max"]),
                    wall_ms=float(r["wall_ms"]) if r["wall_ms"] else None,
                )
            )
    return out


def _prune_caches(mesh, element_cache: dict, work_cache: dict) -> None:
    """Drop cache entries of retired cells/edges so memory tracks the mesh."""
    live_cells = {(fm.fid, cid) for fm in mesh.fractures for cid in fm.cells}
    live_edges = {(fm.fid, eid) for fm in mesh.fractures for eid in fm.edges}
    loops = {
        (fm.fid, cid): tuple(cell.loop)
        for fm in mesh.fractures
        for cid, cell in fm.cells.items()
    }
    for key in [k for k in element_cache if loops.get((k[0], k[1])) != k[2]]:
        del element_cache[key]
    stale = []
    for key in work_cache:
        tag = key[0]
        if tag in ("c", "q", "g", "E"):
            if (key[1], key[2]) not in live_cells:
                stale.append(key)
        elif tag == "e":
            if (key[1], key[2]) not in live_edges or (key[1], key[3]) not in live_cells:
                stale.append(key)
        elif (key[1], key[2]) not in live_edges:  # "nv", "tp"
            stale.append(key)
    for key in stale:
        del work_cache[key]
    for fm in mesh.fractures:
        for store in (fm._poly_cache, fm._ar_cache):
            for key in [k for k in store if k[0] not in fm.cells or tuple(fm.cells[k[0]].loop) != k[1]]:
                del store[key]


def run_adaptive(config: RunConfig, problem: ProblemSpec | None = None) -> RunLog:
    if problem is None:
        problem = resolve_problem(config.problem)
    mesh = build_minimal_mesh(problem)
    cache: dict = {}
    wcache: dict = {}
    steps: list = []
    status = "max_iterations"
    rel = float("inf")
    out = Path(config.out) if config.out is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "runlog.csv" if out is not None else None

    csv_fh = open(csv_path, "w", newline="") if csv_path is not None else None
    writer = None
    if csv_fh is not None:
        writer = csv.writer(csv_fh)
        writer.writerow(CSV_COLUMNS)
        csv_fh.flush()
    try:
        for it in range(1, config.max_iter + 1):
            t0 = time.perf_counter()
            A, b, dm, els = assemble(mesh, problem, config.order, element_cache=cache)
            A_ff, rhs, expand = apply_dirichlet(A, b, dm)
            if A_ff.shape[0] == 0:
                x, pcg_it = expand(np.zeros(0)), 0
            else:
                A_ff = A_ff.tocsr()
                M = ic_factorize(A_ff)
                xf, pcg_it = pcg(A_ff, rhs, M, rel_tol=config.pcg_rel_tol)
                x = expand(xf)
            rep = compute_estimator(
                mesh, x, problem, config.order, elements=els, dof_map=dm, work_cache=wcache
            )
            err = eff = None
            if problem.has_exact:
                err = energy_error(
                    mesh, x, problem, config.order, elements=els, dof_map=dm, work_cache=wcache
                )
                eff = err / rep.est if rep.est > 0 else None
            den = projected_energy(mesh, x, problem, config.order, els, dm, work_cache=wcache)
            rel = rep.est / den if den > 0 else float("inf")
            ars = [fm.cell_ar(cid) for fm in mesh.fractures for cid in fm.cells]
            wall = (time.perf_counter() - t0) * 1e3 if config.timing else None
            step = RunStep(
                it,
                mesh.n_cells,
                dm.n_total,
                rep.est,
                err,
                eff,
                pcg_it,
                min(ars),
                float(np.mean(ars)),
                max(ars),
                wall,
            )
            steps.append(step)
            if writer is not None:
                writer.writerow(_row(step))
                csv_fh.flush()
            if config.vtk and out is not None:
                scal = {"est2": {k: ce.total for k, ce in rep.per_cell.items()}}
                write_vtk(mesh, out / f"step_{it:03d}.vtk", cell_scalars=scal)
            if rel <= config.tol:
                status = "converged"
                break
            if it == config.max_iter:  # budget spent: no point refining further
                break
            marked = mark({k: ce.total for k, ce in rep.per_cell.items()}, config.refinement.c)
            refine(mesh, marked, config.refinement)
            _prune_caches(mesh, cache, wcache)
    finally:
        if csv_fh is not None:
            csv_fh.close()
    return RunLog(steps, status, rel, mesh)


def fit_rate(log, window: int = 5, quantity: str = "est") -> float:
    """Least-squares slope of log(quantity) vs log(NDOF), last `window` steps."""
    if quantity not in ("est", "err"):
        raise ValidationError(f"unknown quantity {quantity!r}")
    steps = log.steps if isinstance(log, RunLog) else list(log)
    if len(steps) < window:
        raise InsufficientData(f"{len(steps)} steps logged, need {window}")
    tail = steps[-window:]
    vals = [getattr(s, quantity) for s in tail]
    if any(v is None or v <= 0 for v in vals):
        raise InsufficientData("non-positive or missing values in fit window")
    xs = np.log([s.ndof for s in tail])
    ys = np.log(vals)
    return float(np.polyfit(xs, ys, 1)[0])
