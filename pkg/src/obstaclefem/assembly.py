"""Assembly of the coupled operators, load functionals and norm Gram matrix.

All three bilinear forms share the weighted flux-residual term
``beta * <div sigma + lam, div tau + mu>`` and the gradient mismatch term
``<grad u - sigma, grad v - tau>``; they differ only in how the duality
coupling between multiplier and displacement enters:

* form ``A``: symmetric, ``(<mu, u> + <lam, v>) / 2``
* form ``B``: ``<lam, v>``
* form ``C``: ``<mu, u>``

For the discrete triple the dualities are plain L2 products.  Loads pair
the data with the flux residual of the test function; the obstacle enters
the multiplier block of functionals ``F`` (factor 1/2) and ``H``
(factor 1).  Element contributions are accumulated in element order, so
assembled matrices are reproducible bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import quadrature, _kernels
from .mesh import Mesh
from .spaces import (DofMap, FirstOrderSolution, eval_data,
                     kernel_mesh_arrays, rt_basis_values)

_FORM_MODE = {"A": 0, "B": 1, "C": 2}
_G_FACTOR = {"F": 0.5, "G": 0.0, "H": 1.0}


class ObstacleError(ValueError):
    """Raised when data/obstacle assumptions of a functional are violated."""


@dataclass(frozen=True)
class SparseOperator:
    """Assembled operator on the combined dof space."""

    matrix: sp.csr_matrix
    symmetric: bool

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, x):
        return self.matrix @ x


@dataclass(frozen=True)
class FormConfig:
    """Which variational inequality to assemble, and its weight.

    ``beta`` defaults to ``1 + diam(domain)^2``, which certifies coercivity
    through the Friedrichs bound; smaller explicit values are accepted
    (the benchmark on the large L-shaped domain uses beta = 3).
    """

    form: str
    problem: object
    beta: float | None = None

    def __post_init__(self):
        if self.form not in _FORM_MODE:
            raise ValueError(f"form must be one of A, B, C, not {self.form!r}")
        if self.beta is None:
            object.__setattr__(self, "beta", default_beta(self.problem))
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")


def default_beta(problem) -> float:
    return 1.0 + float(problem.diameter) ** 2


def _scatter_cells(cell_mats, cell_dofs, n) -> sp.csr_matrix:
    rows = np.repeat(cell_dofs, 7, axis=1).reshape(-1)
    cols = np.tile(cell_dofs, (1, 7)).reshape(-1)
    vals = cell_mats.reshape(-1)
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix((vals[keep], (rows[keep], cols[keep])),
                         shape=(n, n)).tocsr()


def assemble_form(mesh: Mesh, dofmap: DofMap, config: FormConfig) -> SparseOperator:
    """Galerkin matrix of the selected bilinear form."""
    if dofmap.mesh is not mesh:
        raise ValueError("dof map belongs to a different mesh")
    cell = _kernels.cell_matrices(*kernel_mesh_arrays(mesh),
                                  float(config.beta), _FORM_MODE[config.form])
    mat = _scatter_cells(cell, dofmap.cell_dofs, dofmap.n_total)
    return SparseOperator(matrix=mat, symmetric=config.form == "A")


def assemble_u_gram(mesh: Mesh, dofmap: DofMap) -> SparseOperator:
    """Gram matrix of the graph norm (gradient, flux, flux-residual blocks)."""
    cell = _kernels.cell_matrices(*kernel_mesh_arrays(mesh), 1.0, 3)
    mat = _scatter_cells(cell, dofmap.cell_dofs, dofmap.n_total)
    return SparseOperator(matrix=mat, symmetric=True)


def assemble_load(mesh: Mesh, dofmap: DofMap, config: FormConfig,
                  functional: str) -> np.ndarray:
    """Load vector of functional F, G or H for the configured problem."""
    if functional not in _G_FACTOR:
        raise ValueError(f"functional must be one of F, G, H, not {functional!r}")
    problem = config.problem
    g_factor = _G_FACTOR[functional]
    if g_factor and not problem.traits.vanishes_on_boundary:
        raise ObstacleError(
            f"functional {functional} pairs the obstacle with the multiplier "
            "and requires an obstacle vanishing on the boundary")

    bary, w = quadrature.triangle_rule(5)
    pts = quadrature.physical_points(mesh.element_coords, bary)
    cells = np.broadcast_to(np.arange(mesh.n_elements)[:, None], pts.shape[:2])
    f_int = mesh.areas * (eval_data(problem.f, pts[..., 0], pts[..., 1], cells) @ w)

    out = np.zeros(dofmap.n_total)
    div_basis = (mesh.element_edge_sign * mesh.element_edge_lengths
                 / mesh.areas[:, None])
    sig_cell = -config.beta * div_basis * f_int[:, None]
    np.add.at(out, dofmap.sigma_dof(mesh.element_edges).reshape(-1),
              sig_cell.reshape(-1))
    lam_entries = -config.beta * f_int
    if g_factor:
        g_int = mesh.areas * (
            eval_data(problem.g, pts[..., 0], pts[..., 1], cells) @ w)
        lam_entries = lam_entries + g_factor * g_int
    out[dofmap.lambda_dof(np.arange(mesh.n_elements))] = lam_entries
    return out


def norm_u(dofmap: DofMap, coefficients: np.ndarray,
           gram: SparseOperator | None = None) -> float:
    """Graph norm of a coefficient vector."""
    if gram is None:
        gram = assemble_u_gram(dofmap.mesh, dofmap)
    return float(np.sqrt(max(coefficients @ (gram @ coefficients), 0.0)))


def evaluate_J(solution: FirstOrderSolution, problem) -> float:
    """Least-squares functional: flux residual, gradient mismatch and
    multiplier duality, evaluated with the same quadrature as the loads.
    """
    if not problem.traits.vanishes_on_boundary:
        raise ObstacleError("the least-squares functional needs an obstacle "
                            "vanishing on the boundary")
    mesh = solution.mesh
    dofmap = solution.dofmap
    u_cell, s_cell, lam = dofmap.gather_cells(solution.coefficients)

    bary, w = quadrature.triangle_rule(5)
    pts = quadrature.physical_points(mesh.element_coords, bary)
    cells = np.broadcast_to(np.arange(mesh.n_elements)[:, None], pts.shape[:2])
    f5 = eval_data(problem.f, pts[..., 0], pts[..., 1], cells)
    g5 = eval_data(problem.g, pts[..., 0], pts[..., 1], cells)

    div_s = np.einsum("ej,ej->e", s_cell,
                      mesh.element_edge_sign * mesh.element_edge_lengths) / mesh.areas
    resid = div_s[:, None] + lam[:, None] + f5
    term_div = float(mesh.areas @ ((resid**2) @ w))

    grad_u = np.einsum("ej,ejd->ed", u_cell, mesh.bary_gradients)
    mid, wm = quadrature.triangle_rule(2)
    phi = rt_basis_values(mesh, mid)
    sig = np.einsum("ej,eqjd->eqd", s_cell, phi)
    diff = grad_u[:, None, :] - sig
    term_grad = float(mesh.areas @ (np.einsum("eqd,eqd->eq", diff, diff) @ wm))

    u5 = u_cell @ bary.T
    term_dual = float((lam * mesh.areas) @ ((u5 - g5) @ w))
    return term_div + term_grad + term_dual


def coercivity_ratio(operator: SparseOperator, gram: SparseOperator,
                     w: np.ndarray) -> float:
    """Rayleigh-type ratio w'Aw / w'Gw used as a coercivity witness."""
    den = w @ (gram @ w)
    if den <= 0.0:
        warnings.warn("degenerate sample vector in coercivity check")
        return np.inf
    return float((w @ (operator @ w)) / den)
