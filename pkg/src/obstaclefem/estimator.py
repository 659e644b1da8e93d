"""A posteriori error estimation and exact-error evaluation.

The local estimator of one element combines five squared contributions:
the flux residual against the projected load, the gradient-flux mismatch,
the multiplier weighted excess of the displacement over the obstacle, the
gradient of the penetration part, and the load oscillation.  The sum over
all elements is the squared total estimator.

Errors against a known exact solution are reported in the graph norm
(gradient, flux and flux-residual components) and in the weaker norm
whose multiplier part is measured by a discrete dual-norm surrogate: the
mesh-weighted L2 norm combined with the energy norm of the discrete
Poisson lift.

Positive/negative parts of the obstacle gap are integrated with the
degree-5 rule without resolving the free boundary inside elements; the
committed quadrature error is absorbed by the oscillation terms.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import quadrature, _kernels
from .mesh import Mesh
from .spaces import (DofMap, FirstOrderSolution, eval_data,
                     kernel_mesh_arrays, p1_load, p1_stiffness_matrix)


@dataclass(frozen=True)
class LocalEstimates:
    """Per-element squared estimator contributions."""

    eta2_div: np.ndarray
    eta2_grad: np.ndarray
    rho2_contact: np.ndarray
    rho2_penetration: np.ndarray
    osc2: np.ndarray

    @property
    def est2(self) -> np.ndarray:
        return (self.eta2_div + self.eta2_grad + self.rho2_contact
                + self.rho2_penetration + self.osc2)

    @property
    def total_eta2(self) -> float:
        return float(self.eta2_div.sum() + self.eta2_grad.sum())

    @property
    def total_rho2(self) -> float:
        return float(self.rho2_contact.sum() + self.rho2_penetration.sum())

    @property
    def total_osc2(self) -> float:
        return float(self.osc2.sum())

    @property
    def total_est2(self) -> float:
        return self.total_eta2 + self.total_rho2 + self.total_osc2


@dataclass(frozen=True)
class ErrorReport:
    """Exact errors of one discrete solution."""

    err_grad: float        # gradient component
    err_sigma: float       # flux component
    err_divlam: float      # flux residual (equals the dual-pair defect)
    lam_dual: float | None = None

    @property
    def err_U(self) -> float:
        return float(np.sqrt(self.err_grad**2 + self.err_sigma**2
                             + self.err_divlam**2))

    @property
    def err_V(self) -> float | None:
        if self.lam_dual is None:
            return None
        return float(np.sqrt(self.err_grad**2 + self.err_sigma**2
                             + self.lam_dual**2))


def _num_threads() -> int:
    try:
        return max(int(os.environ.get("OBSTACLEFEM_NUM_THREADS", "1")), 1)
    except ValueError:
        return 1


def _chunked(kernel, n_elem, per_element, shared):
    """Run an element kernel, optionally split over a thread pool."""
    threads = _num_threads()
    if threads <= 1 or n_elem < 4 * threads:
        return kernel(*per_element, *shared)
    bounds = np.linspace(0, n_elem, threads + 1).astype(int)

    def run(span):
        lo, hi = span
        return kernel(*[a[lo:hi] for a in per_element], *shared)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, zip(bounds[:-1], bounds[1:])))
    return np.vstack(parts)


def _data_at_quad(mesh: Mesh, func):
    bary, w = quadrature.triangle_rule(5)
    pts = quadrature.physical_points(mesh.element_coords, bary)
    cells = np.broadcast_to(np.arange(mesh.n_elements)[:, None], pts.shape[:2])
    return eval_data(func, pts[..., 0], pts[..., 1], cells), pts, cells, bary, w


def local_estimates(solution: FirstOrderSolution, problem) -> LocalEstimates:
    mesh = solution.mesh
    u_cell, s_cell, lam = solution.dofmap.gather_cells(solution.coefficients)
    if lam.size and lam.min() < -1e-12:
        warnings.warn("negative multiplier values; the contact indicator is "
                      "clamped at zero", stacklevel=2)

    f5, pts, cells, bary, w = _data_at_quad(mesh, problem.f)
    g5 = eval_data(problem.g, pts[..., 0], pts[..., 1], cells)
    ggx5, ggy5 = problem.grad_g(pts[..., 0], pts[..., 1])
    ggx5 = np.ascontiguousarray(np.broadcast_to(np.asarray(ggx5, float), f5.shape))
    ggy5 = np.ascontiguousarray(np.broadcast_to(np.asarray(ggy5, float), f5.shape))

    per_element = (*kernel_mesh_arrays(mesh),
                   u_cell, s_cell, lam, f5, g5, ggx5, ggy5)
    out = _chunked(_kernels.estimator_cells, mesh.n_elements,
                   per_element, (bary, w))
    return LocalEstimates(
        eta2_div=out[:, 0],
        eta2_grad=out[:, 1],
        rho2_contact=np.maximum(out[:, 2], 0.0),
        rho2_penetration=out[:, 3],
        osc2=out[:, 4],
    )


def error_U(solution: FirstOrderSolution, problem) -> ErrorReport:
    """Graph-norm error components against the exact solution."""
    if problem.exact_grad_u is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    mesh = solution.mesh
    u_cell, s_cell, lam = solution.dofmap.gather_cells(solution.coefficients)

    f5, pts, cells, bary, w = _data_at_quad(mesh, problem.f)
    gux5, guy5 = problem.exact_grad_u(pts[..., 0], pts[..., 1])
    gux5 = np.ascontiguousarray(np.broadcast_to(np.asarray(gux5, float), f5.shape))
    guy5 = np.ascontiguousarray(np.broadcast_to(np.asarray(guy5, float), f5.shape))

    per_element = (*kernel_mesh_arrays(mesh),
                   u_cell, s_cell, lam, f5, gux5, guy5, gux5, guy5)
    out = _chunked(_kernels.error_cells, mesh.n_elements, per_element, (bary, w))
    return ErrorReport(err_grad=float(np.sqrt(out[:, 0].sum())),
                       err_sigma=float(np.sqrt(out[:, 1].sum())),
                       err_divlam=float(np.sqrt(out[:, 2].sum())))


def discrete_h_minus1_norm(mesh: Mesh, dofmap: DofMap, mu) -> float:
    """Dual-norm surrogate: sqrt(|h mu|^2 + |grad lift(mu)|^2).

    The lift solves the discrete Poisson problem in the affine space; its
    energy equals the duality product with the load vector.
    """
    bary, w = quadrature.triangle_rule(5)
    pts = quadrature.physical_points(mesh.element_coords, bary)
    cells = np.broadcast_to(np.arange(mesh.n_elements)[:, None], pts.shape[:2])
    vals = eval_data(mu, pts[..., 0], pts[..., 1], cells)
    h_term = float(((mesh.diameters**2 * mesh.areas) * ((vals**2) @ w)).sum())

    lift_term = 0.0
    if dofmap.n_u:
        load = p1_load(dofmap, mu)
        stiff = p1_stiffness_matrix(dofmap)
        q = spla.spsolve(stiff.tocsc(), load)
        lift_term = float(q @ load)
    return float(np.sqrt(h_term + max(lift_term, 0.0)))


def multiplier_dual_error(solution: FirstOrderSolution, problem) -> float:
    """Dual-norm surrogate of the multiplier error."""
    if problem.exact_lambda is None:
        raise ValueError(f"problem {problem.name!r} has no exact multiplier")
    lam = solution.lam
    exact = problem.exact_lambda

    def defect(x, y, cell):
        return np.asarray(exact(x, y), dtype=float) - lam[cell]

    return discrete_h_minus1_norm(solution.mesh, solution.dofmap, defect)


def error_report(solution: FirstOrderSolution, problem) -> ErrorReport:
    """Full error report; the weak-norm part is present when the exact
    multiplier is available."""
    base = error_U(solution, problem)
    if problem.exact_lambda is None:
        return base
    return ErrorReport(err_grad=base.err_grad, err_sigma=base.err_sigma,
                       err_divlam=base.err_divlam,
                       lam_dual=multiplier_dual_error(solution, problem))
