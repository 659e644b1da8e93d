"""Bulk marking and the solve-estimate-mark-refine loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assembly import FormConfig
from .estimator import LocalEstimates, error_report, local_estimates
from .mesh import Mesh, create_structured, refine_nvb
from .spaces import DofMap
from .vi_solver import NonConvergenceError, SolverOptions, solve_problem


@dataclass(frozen=True)
class LevelRecord:
    """Per-level metrics of one refinement run."""

    nE: int
    nDof: int
    est: float
    eta: float
    estContact: float
    oscF: float
    iters: int
    errNormU: Optional[float] = None
    errNormV: Optional[float] = None
    errU: Optional[float] = None
    errSigma: Optional[float] = None
    errDivSigmaLambda: Optional[float] = None

    @property
    def has_errors(self) -> bool:
        return self.errNormU is not None


def doerfler_mark(local_est2: np.ndarray, theta: float) -> np.ndarray:
    """Smallest prefix of elements (by decreasing indicator, ties by id)
    whose indicators sum to at least theta times the total."""
    local_est2 = np.asarray(local_est2, dtype=float)
    if local_est2.size == 0:
        raise ValueError("empty indicator list")
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    order = np.lexsort((np.arange(local_est2.size), -local_est2))
    csum = np.cumsum(local_est2[order])
    total = csum[-1]
    if total <= 0.0:
        return np.array([], dtype=np.int64)
    k = int(np.searchsorted(csum, theta * total)) + 1
    k = min(k, int(np.count_nonzero(local_est2)))
    return np.sort(order[:k]).astype(np.int64)


def fit_rate(n_elements, values, tail: int = 3) -> float:
    """Least-squares slope of log(value) vs log(nE) over the last `tail`
    levels, sign-flipped so decaying quantities report positive rates."""
    n = np.asarray(n_elements, dtype=float)[-tail:]
    v = np.asarray(values, dtype=float)[-tail:]
    if len(n) < 2:
        raise ValueError("need at least two levels to fit a rate")
    if v.max() == v.min():
        return 0.0
    if np.any(v <= 0.0):
        return float("nan")
    slope = np.polyfit(np.log(n), np.log(v), 1)[0]
    return float(-slope)


def run_adaptive(problem, form: str, set_kind: str, *,
                 theta: float = 0.25,
                 mode: str = "adaptive",
                 beta: float | None = None,
                 max_dofs: int = 200_000,
                 max_levels: int | None = None,
                 initial_subdivisions: int = 2,
                 solver_options: SolverOptions = SolverOptions(),
                 on_level: Callable | None = None) -> list[LevelRecord]:
    """Run the refinement loop and collect one record per level.

    ``mode="uniform"`` marks every element; adaptive runs use bulk
    marking with parameter ``theta``.  The loop stops once the dof count
    would exceed ``max_dofs`` (the budget caps recorded levels) or after
    ``max_levels`` records.  A non-converging solve aborts the run with
    the completed records attached to the exception.
    """
    if mode not in ("uniform", "adaptive"):
        raise ValueError(f"unknown refinement mode {mode!r}")
    config = FormConfig(form=form, problem=problem, beta=beta)
    mesh = create_structured(problem.domain, initial_subdivisions)
    records: list[LevelRecord] = []

    while True:
        dofmap = DofMap.build(mesh)
        if records and dofmap.n_total > max_dofs:
            break
        try:
            report = solve_problem(mesh, dofmap, config, set_kind,
                                   solver_options)
        except NonConvergenceError as exc:
            raise NonConvergenceError(str(exc), records=records) from exc
        local = local_estimates(report.solution, problem)
        record = _make_record(mesh, dofmap, report, local, problem)
        records.append(record)
        if on_level is not None:
            on_level(len(records) - 1, mesh, dofmap, report, local, record)
        if max_levels is not None and len(records) >= max_levels:
            break
        if mode == "uniform":
            marked = np.arange(mesh.n_elements)
        else:
            marked = doerfler_mark(local.est2, theta)
            if marked.size == 0:
                break
        mesh = refine_nvb(mesh, marked)
    return records


def _make_record(mesh: Mesh, dofmap: DofMap, report, local: LocalEstimates,
                 problem) -> LevelRecord:
    eta2 = local.total_eta2
    rho2 = local.total_rho2
    osc2 = local.total_osc2
    fields = dict(
        nE=mesh.n_elements,
        nDof=dofmap.n_total,
        est=float(np.sqrt(eta2 + rho2 + osc2)),
        eta=float(np.sqrt(eta2)),
        estContact=float(np.sqrt(rho2)),
        oscF=float(np.sqrt(osc2)),
        iters=report.iterations,
    )
    if problem.has_exact:
        err = error_report(report.solution, problem)
        fields.update(
            errNormU=err.err_U,
            errNormV=err.err_V,
            errU=err.err_grad,
            errSigma=err.err_sigma,
            errDivSigmaLambda=err.err_divlam,
        )
    return LevelRecord(**fields)
