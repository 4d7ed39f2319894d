"""End-to-end drivers behind the command line: solve, sweep, compare-cn, diag."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import glsqr
from .cn import solve_cn
from .config import ProblemConfig
from .spatial import SpatialOperators, assemble_MA, export_snapshot
from .system import QUADRATURE_RULES, SpaceTimeSystem, TestVector
from .temporal import TemporalMesh, temporal_operators

log = logging.getLogger(__name__)


@dataclass
class Problem:
    """Spatial operators plus the data callables derived from a config."""

    config: ProblemConfig
    spatial: SpatialOperators

    @classmethod
    def from_config(cls, config: ProblemConfig) -> "Problem":
        a = config.expression("a")
        return cls(config, assemble_MA(config.spatial_mesh(), a.spatial()))

    @property
    def f(self):
        expr = self.config.expression("f")
        return lambda t: expr.spatial(t)

    @property
    def g(self):
        expr = self.config.expression("g")
        return lambda t: expr.spatial(t)

    @property
    def h(self):
        return self.config.expression("h").spatial()

    def system(self, TE: TemporalMesh, nref: int) -> SpaceTimeSystem:
        return SpaceTimeSystem(self.spatial, temporal_operators(TE, nref), workers=self.config.threads)

    def load(self, system: SpaceTimeSystem) -> TestVector:
        return system.load(self.f, self.g, self.h, QUADRATURE_RULES[self.config.quadrature])


def run_glsqr(system: SpaceTimeSystem, b: TestVector, tol: float, maxit: int):
    return glsqr.solve(system.apply_B, system.apply_Bt, system.apply_Minv, system.apply_Ninv,
                       b, tol=tol, maxit=maxit)


def interpolate_in_time(TE: TemporalMesh, u: np.ndarray, times) -> np.ndarray:
    """Piecewise affine interpolation of nodal columns ``u`` to ``times``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    t = TE.nodes
    k = np.clip(np.searchsorted(t, times, side="right") - 1, 0, t.size - 2)
    s = (times - t[k]) / (t[k + 1] - t[k])
    return u[:, k] * (1 - s) + u[:, k + 1] * s


def x_norm_error(reference: SpaceTimeSystem, u_ref: np.ndarray, TE: TemporalMesh,
                 u: np.ndarray) -> float:
    """``sqrt(e^T M e)`` on the reference temporal mesh, ``u`` prolonged to it."""
    e = interpolate_in_time(TE, u, reference.temporal.TE.nodes) - u_ref
    return reference.x_norm(e)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class SolveOutcome:
    u: np.ndarray
    report: glsqr.SolveReport
    TE: TemporalMesh
    files: list[Path]


def run_solve(config: ProblemConfig, out_dir=None) -> SolveOutcome:
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = Problem.from_config(config)
    TE = config.temporal_mesh()
    system = problem.system(TE, config.nref)
    t0 = time.perf_counter()
    b = problem.load(system)
    t1 = time.perf_counter()
    u, report = run_glsqr(system, b, config.tol, config.maxit)
    t2 = time.perf_counter()
    log.info("load %.3fs, glsqr %.3fs, %d iterations, residual %.3e, converged=%s",
             t1 - t0, t2 - t1, report.iterations, report.residual, report.converged)

    files = [out / "report.csv", out / "summary.csv", out / "solution.csv"]
    _write_csv(files[0], ["iteration", "residual"],
               [[i, _fmt(r)] for i, r in enumerate(report.residual_history)])
    _write_csv(files[1], ["key", "value"], [
        ["iterations", report.iterations],
        ["residual", _fmt(report.residual)],
        ["converged", int(report.converged)],
        ["K", TE.element_count],
        ["nref", config.nref],
        ["spatial_dofs", system.nS],
    ])
    node_ids = system.spatial.free + 1
    _write_csv(files[2], ["t"] + [f"u{i}" for i in node_ids],
               [[_fmt(t)] + [_fmt(v) for v in u[:, k]] for k, t in enumerate(TE.nodes)])
    snaps = interpolate_in_time(TE, u, config.snapshots)
    mesh = system.spatial.mesh
    for j, t in enumerate(config.snapshots):
        path = out / f"snapshot_{j:03d}_t{t:g}.txt"
        export_snapshot(mesh, system.spatial.free, snaps[:, j], path)
        files.append(path)
    return SolveOutcome(u, report, TE, files)


SWEEP_HEADER = ["K", "nref", "iterations", "cond", "kappa_h", "cfl_h", "error_X"]


def run_condition_sweep(config: ProblemConfig, K_list, nref_list, out_path=None,
                        with_cond: bool = True, cap: int = 5000, lanczos: bool = False,
                        ref_factor: int = 4) -> list[dict]:
    """Iterations, conditioning and X-norm error on uniform temporal meshes.

    The error is measured against a Type 2 solution on a uniform mesh with
    ``ref_factor * max(K_list)`` elements.
    """
    problem = Problem.from_config(config)
    K_ref = ref_factor * max(K_list)
    reference = problem.system(TemporalMesh.uniform(config.T, K_ref), 1)
    u_ref, _ = run_glsqr(reference, problem.load(reference), min(config.tol, 1e-10), 10 * config.maxit)
    rows = []
    for nref in nref_list:
        for K in K_list:
            TE = TemporalMesh.uniform(config.T, K)
            system = problem.system(TE, nref)
            u, report = run_glsqr(system, problem.load(system), config.tol, config.maxit)
            row = dict(K=K, nref=nref, iterations=report.iterations,
                       error_X=x_norm_error(reference, u_ref, TE, u))
            if with_cond:
                diag = system.diagnostics(cap=cap, lanczos=lanczos)
                row.update(cond=diag.cond, kappa_h=diag.kappa_h, cfl_h=diag.cfl_h)
            else:
                row.update(cond=float("nan"), kappa_h=float("nan"), cfl_h=float("nan"))
            log.info("sweep %s", row)
            rows.append(row)
    if out_path is not None:
        _write_csv(Path(out_path), SWEEP_HEADER, [[_fmt(r[k]) for k in SWEEP_HEADER] for r in rows])
    return rows


COMPARE_HEADER = ["K", "nref", "iterations", "glsqr_seconds", "load_seconds", "cn_seconds",
                  "max_discrepancy"]


def run_compare_cn(config: ProblemConfig, K_list, out_path=None) -> list[dict]:
    """Space-time solve against Crank-Nicolson on the same temporal mesh.

    ``max_discrepancy`` is the largest Mx-norm difference over the temporal
    nodes divided by the largest Mx-norm of the Crank-Nicolson solution.
    """
    problem = Problem.from_config(config)
    rows = []
    for K in K_list:
        TE = config.replace(K=K).temporal_mesh() if config.spacing != "explicit" else config.temporal_mesh()
        system = problem.system(TE, config.nref)
        t0 = time.perf_counter()
        b = problem.load(system)
        t1 = time.perf_counter()
        u, report = run_glsqr(system, b, config.tol, config.maxit)
        t2 = time.perf_counter()
        u_cn = solve_cn(problem.spatial, TE, problem.f, problem.g, problem.h)
        t3 = time.perf_counter()
        rows.append(dict(K=TE.element_count, nref=config.nref, iterations=report.iterations,
                         glsqr_seconds=t2 - t1, load_seconds=t1 - t0, cn_seconds=t3 - t2,
                         max_discrepancy=nodal_discrepancy(problem.spatial.Mx, u, u_cn)))
    if out_path is not None:
        _write_csv(Path(out_path), COMPARE_HEADER, [[_fmt(r[k]) for k in COMPARE_HEADER] for r in rows])
    return rows


def nodal_discrepancy(Mx, u: np.ndarray, u_ref: np.ndarray) -> float:
    def mx_norms(w):
        return np.sqrt(np.maximum(np.einsum("ik,ik->k", w, Mx @ w), 0.0))

    scale = mx_norms(u_ref).max()
    diff = mx_norms(u - u_ref).max()
    return float(diff / scale) if scale > 0 else float(diff)


def run_diag(config: ProblemConfig, out_path=None, cap: int = 5000, lanczos: bool = False) -> dict:
    problem = Problem.from_config(config)
    system = problem.system(config.temporal_mesh(), config.nref)
    diag = system.diagnostics(cap=cap, lanczos=lanczos)
    row = dict(K=config.K, nref=config.nref, spatial_dofs=system.nS, cond=diag.cond,
               lambda_min=diag.lambda_min, lambda_max=diag.lambda_max,
               kappa_h=diag.kappa_h, cfl_h=diag.cfl_h)
    if out_path is not None:
        _write_csv(Path(out_path), list(row), [[_fmt(v) for v in row.values()]])
    return row
