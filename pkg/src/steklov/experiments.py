"""Benchmark problems, the adaptive solve loop, and convergence reporting.

Two sloshing-type benchmarks are built in.  On the unit square with the
spectral boundary on the top edge the eigenvalues are known in closed form,
lambda_n = n*pi*tanh(n*pi).  On the square with an equilateral notch cut into
the bottom edge (one reentrant corner of interior angle 5*pi/3) there is no
closed form; the reference value is extrapolated from a fine adaptive ladder
by fitting lambda_h = lambda + c * N**(-p).
"""

from __future__ import annotations

import csv
import functools
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .adaptivity import MarkSet, mark, normalize_refinement_edges, refine_fem, refine_uniform, refine_vem
from .eigensolver import SolverOptions, solve_smallest_positive
from .estimator import element_indicators, global_estimate
from .mesh import PolygonalMesh, build_topology, save_mesh
from .render import mesh_to_svg
from .vem import assemble, dump_matrix

__all__ = [
    "TESTS",
    "METHODS",
    "ExperimentConfig",
    "ConvergenceRecord",
    "ExperimentResult",
    "RateFit",
    "exact_eigenvalue_square",
    "initial_mesh",
    "notched_reference_eigenvalue",
    "run_experiment",
    "emit_outputs",
    "fit_rate",
    "rate_from_records",
    "read_results_csv",
    "RESULTS_HEADER",
]

TESTS = ("square", "notched")
METHODS = ("uniform-fem", "adaptive-fem", "adaptive-vem")

RESULTS_HEADER = ["step", "N", "lambda_h", "error", "theta2", "jump2", "eta2", "effectivity"]


def exact_eigenvalue_square(n: int = 1) -> float:
    """Closed-form sloshing eigenvalues of the unit square, spectral side on top."""
    if n < 1:
        raise ValueError("mode index must be a positive integer")
    return n * math.pi * math.tanh(n * math.pi)


def _top_edge_rule(p0: np.ndarray, p1: np.ndarray) -> str:
    on_top = abs(p0[1] - 1.0) <= 1e-12 and abs(p1[1] - 1.0) <= 1e-12
    return "gamma0" if on_top else "gamma1"


def _square_mesh(blocks: int = 4) -> PolygonalMesh:
    """Structured crossed-triangle mesh: each grid square split at its center."""
    pts: list[list[float]] = []
    gid: dict[tuple[int, int], int] = {}
    for j in range(blocks + 1):
        for i in range(blocks + 1):
            gid[(i, j)] = len(pts)
            pts.append([i / blocks, j / blocks])
    cells: list[list[int]] = []
    for j in range(blocks):
        for i in range(blocks):
            center = len(pts)
            pts.append([(i + 0.5) / blocks, (j + 0.5) / blocks])
            a, b = gid[(i, j)], gid[(i + 1, j)]
            c, d = gid[(i + 1, j + 1)], gid[(i, j + 1)]
            cells.extend([[a, b, center], [b, c, center], [c, d, center], [d, a, center]])
    return build_topology(pts, cells, _top_edge_rule)


def _notched_mesh() -> PolygonalMesh:
    """Unit square minus an equilateral notch on the bottom edge.

    The notch has base (1/3, 0)-(2/3, 0) and apex (1/2, sqrt(3)/6); the apex
    is the single reentrant corner, interior angle 5*pi/3.
    """
    pts: list[list[float]] = []
    gid: dict[tuple[int, int], int] = {}
    for j in range(4):
        for i in range(4):
            gid[(i, j)] = len(pts)
            pts.append([i / 3.0, j / 3.0])
    apex = len(pts)
    pts.append([0.5, math.sqrt(3.0) / 6.0])

    cells: list[list[int]] = []
    for j in range(3):
        for i in range(3):
            if (i, j) == (1, 0):
                continue
            a, b = gid[(i, j)], gid[(i + 1, j)]
            c, d = gid[(i + 1, j + 1)], gid[(i, j + 1)]
            cells.extend([[a, b, c], [a, c, d]])
    # the notched block: fan the pentagon around the apex
    a, b = gid[(1, 0)], gid[(2, 0)]
    c, d = gid[(2, 1)], gid[(1, 1)]
    cells.extend([[apex, b, c], [apex, c, d], [apex, d, a]])
    return build_topology(pts, cells, _top_edge_rule)


def initial_mesh(test: str) -> PolygonalMesh:
    """Starting triangulation of one benchmark, bisection edges normalized."""
    if test == "square":
        mesh = _square_mesh(4)
    elif test == "notched":
        mesh = _notched_mesh()
    else:
        raise ValueError(f"unknown test {test!r}; expected one of {TESTS}")
    return normalize_refinement_edges(mesh)


@dataclass(frozen=True)
class ExperimentConfig:
    test: str = "square"
    method: str = "adaptive-vem"
    steps: int = 8
    mark_fraction: float = 0.5
    count: int = 1
    tol: float = 1e-10
    max_iterations: int = 500
    seed: int = 0
    reference: float | None = None
    out_dir: str | None = None
    dump_indicators: bool = False
    dump_matrices: bool = False

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            count=self.count,
            tol=self.tol,
            max_iterations=self.max_iterations,
            seed=self.seed,
        )


@dataclass(frozen=True)
class ConvergenceRecord:
    step: int
    n_dofs: int
    lambda_h: float
    error: float | None
    theta2: float
    jump2: float
    eta2: float
    effectivity: float | None
    wall_time: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reference: float | None
    records: list[ConvergenceRecord]
    meshes: list[PolygonalMesh]
    marks: list[MarkSet | None] = field(default_factory=list)


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(error) against log(N)."""

    slope: float
    points: int


def fit_rate(n_dofs: Sequence[float], errors: Sequence[float | None], last: int = 5) -> RateFit:
    """Fit the convergence order over the trailing ``last`` usable data points.

    Points with missing or non-positive error are skipped; fewer than three
    usable points raise ValueError.
    """
    usable = [
        (float(n), float(e))
        for n, e in zip(n_dofs, errors)
        if e is not None and e > 0.0 and n > 0
    ]
    usable = usable[-last:]
    if len(usable) < 3:
        raise ValueError(f"rate fit needs at least 3 usable points, got {len(usable)}")
    log_n = np.log([n for n, _ in usable])
    log_e = np.log([e for _, e in usable])
    slope = float(np.polyfit(log_n, log_e, 1)[0])
    return RateFit(slope=slope, points=len(usable))


def rate_from_records(records: Sequence[ConvergenceRecord], last: int = 5) -> RateFit:
    return fit_rate([r.n_dofs for r in records], [r.error for r in records], last=last)


def _extrapolate(n_dofs: np.ndarray, lambdas: np.ndarray) -> float:
    """Fit lambda_h = lambda + c * N**(-p) by least squares over a grid of p."""
    best = (np.inf, float(lambdas[-1]))
    for p in np.arange(0.5, 1.61, 0.01):
        basis = np.column_stack([np.ones_like(n_dofs), n_dofs ** (-p)])
        coef, *_ = np.linalg.lstsq(basis, lambdas, rcond=None)
        resid = float(np.linalg.norm(basis @ coef - lambdas))
        if resid < best[0]:
            best = (resid, float(coef[0]))
    return best[1]


@functools.lru_cache(maxsize=8)
def notched_reference_eigenvalue(
    tol: float = 1e-11,
    seed: int = 0,
    target_dofs: int = 150000,
    max_steps: int = 40,
) -> float:
    """Reference eigenvalue of the notched benchmark by fine-mesh extrapolation.

    Runs an adaptive polygonal ladder until ``target_dofs`` and extrapolates
    the eigenvalue sequence to N -> infinity.  Deterministic and cached.
    """
    mesh = initial_mesh("notched")
    options = SolverOptions(count=1, tol=tol, seed=seed)
    ns: list[float] = []
    lams: list[float] = []
    for _ in range(max_steps):
        system = assemble(mesh)
        pair = solve_smallest_positive(system, options)[0]
        ns.append(system.n_dofs)
        lams.append(pair.value)
        if system.n_dofs >= target_dofs:
            break
        indicators = element_indicators(system, pair)
        marks = mark(indicators, 0.5)
        if not marks.cells:
            break
        mesh, _ = refine_vem(mesh, marks)
    tail = max(6, len(ns) // 2)
    return _extrapolate(np.array(ns[-tail:]), np.array(lams[-tail:]))


def _resolve_reference(config: ExperimentConfig) -> float | None:
    if config.reference is not None:
        return config.reference
    if config.test == "square":
        return exact_eigenvalue_square(1)
    return notched_reference_eigenvalue(seed=config.seed)


def run_experiment(
    config: ExperimentConfig,
    progress: Callable[[ConvergenceRecord], None] | None = None,
) -> ExperimentResult:
    """Run the solve/estimate/mark/refine loop for one configuration.

    Returns per-step convergence records together with every mesh in the
    hierarchy (initial mesh included) and the mark sets that drove each
    refinement.  If a step fails midway the records collected so far are
    flushed to ``results.csv`` before the exception propagates.
    """
    if config.test not in TESTS:
        raise ValueError(f"unknown test {config.test!r}; expected one of {TESTS}")
    if config.method not in METHODS:
        raise ValueError(f"unknown method {config.method!r}; expected one of {METHODS}")
    if config.steps < 1:
        raise ValueError("need at least one step")

    reference = _resolve_reference(config)
    mesh = initial_mesh(config.test)
    options = config.solver_options()
    out_dir = Path(config.out_dir) if config.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    result = ExperimentResult(
        config=config, reference=reference, records=[], meshes=[mesh], marks=[]
    )
    try:
        for step in range(config.steps):
            start = time.perf_counter()
            system = assemble(mesh)
            pair = solve_smallest_positive(system, options)[0]
            indicators = element_indicators(system, pair)
            estimate = global_estimate(indicators, lambda_h=pair.value, reference=reference)
            error = abs(pair.value - reference) if reference is not None else None
            record = ConvergenceRecord(
                step=step,
                n_dofs=system.n_dofs,
                lambda_h=pair.value,
                error=error,
                theta2=estimate.theta2_total,
                jump2=estimate.jump2_total,
                eta2=estimate.eta2,
                effectivity=estimate.effectivity,
                wall_time=time.perf_counter() - start,
            )
            result.records.append(record)
            if progress is not None:
                progress(record)

            if out_dir is not None and config.dump_indicators:
                with open(out_dir / f"indicators_step_{step}.csv", "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["cell", "theta2", "jump2", "eta2"])
                    for ind in indicators:
                        writer.writerow([ind.cell, repr(ind.theta2), repr(ind.jump2), repr(ind.eta2)])
            if out_dir is not None and config.dump_matrices:
                dump_matrix(system.stiffness, out_dir / f"stiffness_step_{step}.txt")
                dump_matrix(system.boundary_mass, out_dir / f"boundary_mass_step_{step}.txt")

            # refine after every step, the last one included: the mesh list
            # ends with the next (unsolved) mesh of the hierarchy
            if config.method == "uniform-fem":
                result.marks.append(None)
                mesh = refine_uniform(mesh)
            else:
                marks = mark(indicators, config.mark_fraction)
                result.marks.append(marks)
                if not marks.cells:
                    break
                if config.method == "adaptive-fem":
                    mesh = refine_fem(mesh, marks)
                else:
                    mesh, _ = refine_vem(mesh, marks)
            result.meshes.append(mesh)
    except Exception:
        if out_dir is not None:
            _write_results_csv(result.records, out_dir / "results.csv")
        raise
    return result


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _write_results_csv(records: Sequence[ConvergenceRecord], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.step,
                    r.n_dofs,
                    repr(r.lambda_h),
                    _fmt(r.error),
                    repr(r.theta2),
                    repr(r.jump2),
                    repr(r.eta2),
                    _fmt(r.effectivity),
                ]
            )


def read_results_csv(path: str | Path) -> tuple[list[int], list[float], list[float | None]]:
    """Read back (N, lambda_h, error) columns of a results.csv file."""
    ns: list[int] = []
    lams: list[float] = []
    errs: list[float | None] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames != RESULTS_HEADER:
            raise ValueError(f"{path} does not look like a results.csv file")
        for row in reader:
            ns.append(int(row["N"]))
            lams.append(float(row["lambda_h"]))
            errs.append(float(row["error"]) if row["error"] else None)
    return ns, lams, errs


def emit_outputs(result: ExperimentResult) -> list[Path]:
    """Write results.csv, curves.csv and per-step mesh JSON/SVG files."""
    if result.config.out_dir is None:
        raise ValueError("config.out_dir is not set")
    out_dir = Path(result.config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = out_dir / "results.csv"
    _write_results_csv(result.records, csv_path)
    written.append(csv_path)

    curves_path = out_dir / "curves.csv"
    with open(curves_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "error", "eta2"])
        for r in result.records:
            writer.writerow([r.n_dofs, _fmt(r.error), _fmt(r.eta2)])
    written.append(curves_path)

    for k, mesh in enumerate(result.meshes):
        json_path = out_dir / f"mesh_step_{k}.json"
        save_mesh(mesh, json_path)
        written.append(json_path)
        marked: tuple[int, ...] = ()
        if k < len(result.marks) and result.marks[k] is not None:
            marked = result.marks[k].cells
        svg_path = out_dir / f"mesh_step_{k}.svg"
        mesh_to_svg(mesh, svg_path, marked=marked)
        written.append(svg_path)
    return written
