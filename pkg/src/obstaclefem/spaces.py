"""Degrees of freedom and interpolation for the lowest-order triple.

The discrete space couples continuous piecewise-affine functions
vanishing on the boundary (one dof per interior vertex), lowest-order
Raviart-Thomas fields (one dof per edge, the mean normal flux with
respect to the global low-to-high edge orientation) and piecewise
constants (one dof per element).  The combined coefficient vector is laid
out in blocks ``[u | sigma | lambda]``.

Scalar data callables are evaluated as ``f(x, y)`` on NumPy arrays; an
optional third positional argument receives the element index array for
elementwise-defined data.  Vector fields return an ``(gx, gy)`` pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import quadrature
from .mesh import Mesh


def eval_data(func, x, y, cell=None):
    """Evaluate a data callable, passing the element ids when accepted."""
    if cell is not None:
        try:
            return np.broadcast_to(np.asarray(func(x, y, cell), dtype=float),
                                   x.shape).copy()
        except TypeError:
            pass
    return np.broadcast_to(np.asarray(func(x, y), dtype=float), x.shape).copy()


@dataclass(frozen=True, eq=False)
class DofMap:
    """Block layout of the combined dof vector on one mesh."""

    mesh: Mesh
    vertex_dof: np.ndarray    # (nV,) dof id of interior vertices, -1 on boundary
    n_u: int
    n_sigma: int
    n_lambda: int

    @staticmethod
    def build(mesh: Mesh) -> "DofMap":
        interior = ~mesh.boundary_vertex
        vertex_dof = np.full(mesh.n_vertices, -1, dtype=np.int64)
        vertex_dof[interior] = np.arange(interior.sum())
        return DofMap(mesh=mesh, vertex_dof=vertex_dof,
                      n_u=int(interior.sum()), n_sigma=mesh.n_edges,
                      n_lambda=mesh.n_elements)

    @property
    def n_total(self) -> int:
        return self.n_u + self.n_sigma + self.n_lambda

    def sigma_dof(self, edge_ids):
        return self.n_u + np.asarray(edge_ids)

    def lambda_dof(self, elem_ids):
        return self.n_u + self.n_sigma + np.asarray(elem_ids)

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """(nE, 7) global dof per local dof; -1 for suppressed boundary dofs."""
        mesh = self.mesh
        out = np.empty((mesh.n_elements, 7), dtype=np.int64)
        out[:, :3] = self.vertex_dof[mesh.triangles]
        out[:, 3:6] = self.n_u + mesh.element_edges
        out[:, 6] = self.n_u + self.n_sigma + np.arange(mesh.n_elements)
        return out

    def split(self, coefficients: np.ndarray):
        """Views (u, sigma, lam) of a combined vector."""
        u = coefficients[:self.n_u]
        s = coefficients[self.n_u:self.n_u + self.n_sigma]
        lam = coefficients[self.n_u + self.n_sigma:]
        return u, s, lam

    def gather_cells(self, coefficients: np.ndarray):
        """Per-element arrays (u_cell (nE,3), s_cell (nE,3), lam (nE,))."""
        u, s, lam = self.split(coefficients)
        vdof = self.vertex_dof[self.mesh.triangles]
        if self.n_u:
            u_cell = np.where(vdof >= 0, u[np.clip(vdof, 0, None)], 0.0)
        else:
            u_cell = np.zeros(vdof.shape)
        return (np.ascontiguousarray(u_cell),
                np.ascontiguousarray(s[self.mesh.element_edges]),
                np.ascontiguousarray(lam))


@dataclass(frozen=True, eq=False)
class FirstOrderSolution:
    """Coefficients of one (displacement, flux, multiplier) triple."""

    dofmap: DofMap
    coefficients: np.ndarray

    def __post_init__(self):
        if len(self.coefficients) != self.dofmap.n_total:
            raise ValueError("coefficient length does not match dof map")

    @property
    def mesh(self) -> Mesh:
        return self.dofmap.mesh

    @property
    def u(self) -> np.ndarray:
        return self.dofmap.split(self.coefficients)[0]

    @property
    def sigma(self) -> np.ndarray:
        return self.dofmap.split(self.coefficients)[1]

    @property
    def lam(self) -> np.ndarray:
        return self.dofmap.split(self.coefficients)[2]

    @staticmethod
    def zeros(dofmap: DofMap) -> "FirstOrderSolution":
        return FirstOrderSolution(dofmap, np.zeros(dofmap.n_total))


# -- interpolation and projection operators --------------------------------

def nodal_interpolate(dofmap: DofMap, v) -> np.ndarray:
    """Vertex interpolation onto the boundary-constrained affine space."""
    mesh = dofmap.mesh
    interior = ~mesh.boundary_vertex
    x, y = mesh.vertices[interior, 0], mesh.vertices[interior, 1]
    return eval_data(v, x, y)


def rt_interpolate(dofmap: DofMap, tau) -> np.ndarray:
    """Edgewise mean normal flux of a vector field (3-point Gauss)."""
    mesh = dofmap.mesh
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    t = b - a
    normal = np.column_stack([t[:, 1], -t[:, 0]]) / mesh.edge_lengths[:, None]
    pts, wts = quadrature.segment_rule()
    coeff = np.zeros(mesh.n_edges)
    for s, w in zip(pts, wts):
        p = a + s * t
        tx, ty = tau(p[:, 0], p[:, 1])
        coeff += w * (np.asarray(tx) * normal[:, 0] + np.asarray(ty) * normal[:, 1])
    return coeff


def project_p0(dofmap: DofMap, mu) -> np.ndarray:
    """Elementwise mean values (degree-5 quadrature)."""
    mesh = dofmap.mesh
    bary, w = quadrature.triangle_rule(5)
    pts = quadrature.physical_points(mesh.element_coords, bary)
    cells = np.broadcast_to(np.arange(mesh.n_elements)[:, None],
                            pts.shape[:2])
    vals = eval_data(mu, pts[..., 0], pts[..., 1], cells)
    return vals @ w


def p1_mass_matrix(dofmap: DofMap) -> sp.csr_matrix:
    """Mass matrix of the boundary-constrained affine space (exact)."""
    mesh = dofmap.mesh
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    cell = mesh.areas[:, None, None] * local
    dofs = dofmap.vertex_dof[mesh.triangles]
    return _scatter(cell, dofs, dofmap.n_u)


def p1_stiffness_matrix(dofmap: DofMap) -> sp.csr_matrix:
    mesh = dofmap.mesh
    g = mesh.bary_gradients
    cell = mesh.areas[:, None, None] * np.einsum("eid,ejd->eij", g, g)
    dofs = dofmap.vertex_dof[mesh.triangles]
    return _scatter(cell, dofs, dofmap.n_u)


def p1_load(dofmap: DofMap, mu) -> np.ndarray:
    """Load vector <mu, hat_i> with the degree-5 rule."""
    mesh = dofmap.mesh
    bary, w = quadrature.triangle_rule(5)
    pts = quadrature.physical_points(mesh.element_coords, bary)
    cells = np.broadcast_to(np.arange(mesh.n_elements)[:, None], pts.shape[:2])
    vals = eval_data(mu, pts[..., 0], pts[..., 1], cells)        # (nE, nq)
    cell_load = mesh.areas[:, None] * ((vals[:, :, None] * bary[None]) * w[None, :, None]).sum(axis=1)
    out = np.zeros(dofmap.n_u)
    dofs = dofmap.vertex_dof[mesh.triangles]
    keep = dofs >= 0
    np.add.at(out, dofs[keep], cell_load[keep])
    return out


def q_h_project(dofmap: DofMap, mu) -> np.ndarray:
    """L2 projection onto the boundary-constrained affine space."""
    mass = p1_mass_matrix(dofmap)
    rhs = p1_load(dofmap, mu)
    if dofmap.n_u == 0:
        return rhs
    return spla.spsolve(mass.tocsc(), rhs)


def _scatter(cell_mats, cell_dofs, n) -> sp.csr_matrix:
    rows = np.repeat(cell_dofs, cell_dofs.shape[1], axis=1).reshape(-1)
    cols = np.tile(cell_dofs, (1, cell_dofs.shape[1])).reshape(-1)
    vals = cell_mats.reshape(-1)
    keep = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    return mat.tocsr()


def rt_basis_values(mesh: Mesh, bary: np.ndarray) -> np.ndarray:
    """Local Raviart-Thomas basis values at barycentric points, (nE, nq, 3, 2)."""
    from ._kernels.pykernels import _rt_basis_at
    return _rt_basis_at(mesh.element_coords, mesh.areas,
                        mesh.element_edge_lengths,
                        mesh.element_edge_sign.astype(np.float64), bary)


def kernel_mesh_arrays(mesh: Mesh):
    """Contiguous per-element geometry arrays in kernel argument order."""
    return (np.ascontiguousarray(mesh.element_coords),
            np.ascontiguousarray(mesh.areas),
            mesh.bary_gradients,
            np.ascontiguousarray(mesh.element_edge_lengths),
            np.ascontiguousarray(mesh.element_edge_sign, dtype=np.float64))


# -- pointwise evaluation ---------------------------------------------------

def evaluate(solution: FirstOrderSolution, t: int, bary) -> tuple:
    """Values (u, grad u, sigma, div sigma, lam) at one barycentric point."""
    mesh = solution.mesh
    if not 0 <= t < mesh.n_elements:
        raise ValueError(f"element id {t} out of range")
    bary = np.asarray(bary, dtype=float)
    if bary.shape != (3,) or np.any(bary < -1e-12) or abs(bary.sum() - 1.0) > 1e-12:
        raise ValueError("barycentric point must be inside the reference simplex")

    u_cell, s_cell, lam = solution.dofmap.gather_cells(solution.coefficients)
    u_cell, s_cell, lam = u_cell[t], s_cell[t], lam[t]
    grads = mesh.bary_gradients[t]
    coords = mesh.element_coords[t]
    area = mesh.areas[t]
    elen = mesh.element_edge_lengths[t]
    sign = mesh.element_edge_sign[t]

    point = bary @ coords
    u_val = float(u_cell @ bary)
    grad_u = u_cell @ grads
    scale = sign * elen / (2.0 * area)
    sigma = (s_cell * scale) @ (point[None, :] - coords)
    div_sigma = float(np.sum(s_cell * sign * elen) / area)
    return u_val, grad_u, sigma, div_sigma, float(lam)
