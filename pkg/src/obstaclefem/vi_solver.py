"""Primal-dual active-set solution of the discrete variational inequalities.

The constrained dofs carry lower bounds (vertex values of the obstacle for
the displacement block, zero for the multiplier block).  The discrete
variational inequality with a coercive operator is equivalent to the
complementarity system

    A x - F - B' m = 0,   m >= 0,   B x - c >= 0,   m . (B x - c) = 0,

where B selects the constrained dofs.  Each active-set iteration enforces
``x = c`` on the current guess of the active set, solves the reduced
linear system with a sparse direct factorization, reads the multipliers
off the residual, and updates the guess from ``m + c_pdas (c - x) > 0``.
The iteration starts from the empty active set and stops when the set is
stable and the KKT residual is below the scaled tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FormConfig, SparseOperator, assemble_form, assemble_load
from .mesh import Mesh
from .spaces import DofMap, FirstOrderSolution, eval_data

_FUNCTIONAL_OF_FORM = {"A": "F", "B": "G", "C": "H"}

# admissible (form, constraint set) pairs and the obstacle assumptions
# they need: (continuity for vertex constraints, zero boundary trace for
# the multiplier/obstacle pairing)
_ADMISSIBLE = {
    ("A", "Ks"): (True, True),
    ("B", "K0"): (True, False),
    ("B", "Ks"): (True, False),
    ("C", "K1"): (False, True),
    ("C", "Ks"): (True, True),
}


class FormulationError(ValueError):
    """Form/constraint-set pairing outside the supported compatibility table."""


class NonConvergenceError(RuntimeError):
    """Active-set iteration cycled or hit the iteration cap."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = records


class SingularSubsystemError(RuntimeError):
    """The reduced linear system could not be factorized."""


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 100
    tolerance: float = 1e-9
    c_pdas: float = 1.0


@dataclass(frozen=True)
class ConstraintSet:
    """Lower bounds on a subset of dofs of one dof map."""

    kind: str                 # Ks | K0 | K1
    dof_index: np.ndarray     # (m,) constrained dof ids, strictly increasing
    lower_bound: np.ndarray   # (m,)

    @property
    def n_constraints(self) -> int:
        return len(self.dof_index)


@dataclass
class VISolveReport:
    x: np.ndarray
    multipliers: np.ndarray
    iterations: int
    active_set_size: int
    kkt_residual: float
    tolerance_scale: float = float("nan")
    solution: FirstOrderSolution | None = field(default=None, compare=False)


def validate_config(form: str, set_kind: str, obstacle_traits) -> None:
    """Reject configurations outside the supported compatibility table."""
    if form not in ("A", "B", "C"):
        raise FormulationError(f"unknown form {form!r}")
    if set_kind not in ("Ks", "K0", "K1"):
        raise FormulationError(f"unknown constraint set {set_kind!r}")
    key = (form, set_kind)
    if key not in _ADMISSIBLE:
        allowed = ", ".join(f"{f}+{s}" for f, s in sorted(_ADMISSIBLE))
        raise FormulationError(
            f"form {form} cannot be solved over constraint set {set_kind}; "
            f"supported pairs are {allowed}")
    needs_continuity, needs_zero_trace = _ADMISSIBLE[key]
    if needs_continuity and not obstacle_traits.continuous:
        raise FormulationError(
            f"pair {form}+{set_kind} imposes vertex constraints and needs a "
            "continuous obstacle")
    if needs_zero_trace and not obstacle_traits.vanishes_on_boundary:
        raise FormulationError(
            f"pair {form}+{set_kind} pairs the obstacle with the multiplier "
            "and needs an obstacle vanishing on the boundary")


def build_constraints(mesh: Mesh, dofmap: DofMap, set_kind: str, g) -> ConstraintSet:
    """Lower bounds: obstacle values at interior vertices and/or zero
    multipliers.  Boundary vertices carry no displacement dof; their
    constraints are dropped (the obstacle is nonpositive on the boundary).
    """
    if set_kind not in ("Ks", "K0", "K1"):
        raise FormulationError(f"unknown constraint set {set_kind!r}")
    idx_parts = []
    bound_parts = []
    if set_kind in ("Ks", "K0"):
        interior = ~mesh.boundary_vertex
        x, y = mesh.vertices[interior, 0], mesh.vertices[interior, 1]
        idx_parts.append(np.arange(dofmap.n_u))
        bound_parts.append(eval_data(g, x, y))
    if set_kind in ("Ks", "K1"):
        idx_parts.append(dofmap.lambda_dof(np.arange(dofmap.n_lambda)))
        bound_parts.append(np.zeros(dofmap.n_lambda))
    return ConstraintSet(
        kind=set_kind,
        dof_index=np.concatenate(idx_parts).astype(np.int64),
        lower_bound=np.concatenate(bound_parts),
    )


def kkt_residual(operator: SparseOperator, load: np.ndarray,
                 constraints: ConstraintSet, x: np.ndarray,
                 multipliers: np.ndarray) -> float:
    """max of the dual-residual and complementarity infinity norms."""
    dual = operator @ x - load
    dual[constraints.dof_index] -= multipliers
    comp = np.minimum(multipliers, x[constraints.dof_index]
                      - constraints.lower_bound)
    return float(max(np.abs(dual).max(initial=0.0),
                     np.abs(comp).max(initial=0.0)))


def _solve_reduced(matrix: sp.csr_matrix, load: np.ndarray,
                   fixed_dofs: np.ndarray, fixed_values: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    x = np.zeros(n)
    free = np.ones(n, dtype=bool)
    free[fixed_dofs] = False
    x[fixed_dofs] = fixed_values
    if not free.any():
        return x
    rows = matrix[free]
    rhs = load[free] - rows[:, fixed_dofs] @ fixed_values
    sub = rows[:, free].tocsc()
    try:
        lu = spla.splu(sub)
        x[free] = lu.solve(rhs)
    except RuntimeError as exc:
        raise SingularSubsystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSubsystemError("non-finite solution of reduced system")
    return x


def solve_vi(operator: SparseOperator, load: np.ndarray,
             constraints: ConstraintSet,
             opts: SolverOptions = SolverOptions()) -> VISolveReport:
    """Solve the lower-bounded variational inequality by active-set iteration."""
    idx = constraints.dof_index
    lb = constraints.lower_bound
    matrix = operator.matrix
    scale = opts.tolerance * (1.0 + float(np.abs(load).max(initial=0.0)))

    active = np.zeros(constraints.n_constraints, dtype=bool)
    seen = {active.tobytes()}
    report = None
    for iteration in range(1, max(opts.max_iterations, 1) + 1):
        x = _solve_reduced(matrix, load, idx[active], lb[active])
        mu = np.zeros(constraints.n_constraints)
        resid = matrix @ x - load
        mu[active] = resid[idx[active]]
        res = kkt_residual(operator, load, constraints, x, mu)
        new_active = (mu + opts.c_pdas * (lb - x[idx])) > 0.0
        report = VISolveReport(x=x, multipliers=mu, iterations=iteration,
                               active_set_size=int(active.sum()),
                               kkt_residual=res, tolerance_scale=scale)
        if np.array_equal(new_active, active):
            if res <= scale:
                return report
            raise NonConvergenceError(
                f"active set is stable but the KKT residual {res:.3e} "
                f"exceeds the tolerance {scale:.3e}")
        key = new_active.tobytes()
        if key in seen:
            raise NonConvergenceError(
                f"active-set iteration cycled after {iteration} iterations")
        seen.add(key)
        active = new_active
    raise NonConvergenceError(
        f"no convergence within {opts.max_iterations} active-set iterations "
        f"(last KKT residual {report.kkt_residual:.3e})")


def solve_problem(mesh: Mesh, dofmap: DofMap, config: FormConfig, set_kind: str,
                  opts: SolverOptions = SolverOptions()) -> VISolveReport:
    """Assemble and solve one discrete variational inequality."""
    problem = config.problem
    validate_config(config.form, set_kind, problem.traits)
    operator = assemble_form(mesh, dofmap, config)
    load = assemble_load(mesh, dofmap, config,
                         _FUNCTIONAL_OF_FORM[config.form])
    constraints = build_constraints(mesh, dofmap, set_kind, problem.g)
    report = solve_vi(operator, load, constraints, opts)
    report.solution = FirstOrderSolution(dofmap, report.x)
    return report
