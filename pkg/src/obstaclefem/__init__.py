"""Adaptive first-order least-squares finite elements for the obstacle
problem: displacement, flux and reaction force are approximated together,
the constrained systems are solved by a primal-dual active-set method and
the built-in estimator drives newest-vertex bisection."""

from ._kernels import BACKEND as kernel_backend
from .adaptivity import LevelRecord, doerfler_mark, fit_rate, run_adaptive
from .assembly import (FormConfig, ObstacleError, SparseOperator,
                       assemble_form, assemble_load, assemble_u_gram,
                       default_beta, evaluate_J, norm_u)
from .estimator import (ErrorReport, LocalEstimates, discrete_h_minus1_norm,
                        error_report, error_U, local_estimates,
                        multiplier_dual_error)
from .mesh import (ElementGeometry, Mesh, MeshError, audit_conforming,
                   create_structured, element_geometry, refine_nvb)
from .problems import (ObstacleTraits, ProblemSpec, example_lshape,
                       example_pyramid, example_smooth, get_problem,
                       problem_names)
from .spaces import (DofMap, FirstOrderSolution, evaluate, nodal_interpolate,
                     project_p0, q_h_project, rt_interpolate)
from .vi_solver import (ConstraintSet, FormulationError, NonConvergenceError,
                        SingularSubsystemError, SolverOptions, VISolveReport,
                        build_constraints, kkt_residual, solve_problem,
                        solve_vi, validate_config)

__version__ = "0.1.0"
