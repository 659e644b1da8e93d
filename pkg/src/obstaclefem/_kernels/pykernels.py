"""Vectorized NumPy implementation of the per-element kernels.

This backend defines the reference semantics; the compiled Cython twin in
``_ckernels.pyx`` must produce identical results (up to floating-point
round-off of re-associated sums).

Local degree-of-freedom order inside every element is
``[u0, u1, u2, s0, s1, s2, lam]``: three vertex values of the continuous
piecewise-affine component, three Raviart-Thomas edge coefficients (local
edge i opposite vertex i) and one elementwise constant.  The local
Raviart-Thomas basis is ``sign * len/(2*area) * (x - P_opp)`` whose
divergence is ``sign * len/area``; coefficients are mean normal fluxes
with respect to the global low-to-high edge orientation.

Matrix entries follow the row = test, column = trial convention.
"""

import numpy as np


def _rt_basis_at(coords, areas, elen, esign, bary):
    """RT basis values at quadrature points: (nE, nq, 3, 2)."""
    pts = np.einsum("qj,ejd->eqd", bary, coords)
    scale = esign * elen / (2.0 * areas[:, None])            # (nE, 3)
    return scale[:, None, :, None] * (pts[:, :, None, :] - coords[:, None, :, :])


def cell_matrices(coords, areas, grads, elen, esign, beta, mode):
    """Local 7x7 matrices of the bilinear forms.

    mode 0/1/2 select the symmetric, multiplier-tested and
    primal-tested couplings; mode 3 builds the norm Gram matrix
    (no coupling, no gradient/flux cross terms, unit weight).
    """
    n_elem = len(areas)
    out = np.zeros((n_elem, 7, 7))

    # weighted divergence block over [s0, s1, s2, lam]
    c = np.empty((n_elem, 4))
    c[:, :3] = esign * elen / areas[:, None]
    c[:, 3] = 1.0
    w = beta if mode != 3 else 1.0
    out[:, 3:, 3:] = (w * areas)[:, None, None] * c[:, :, None] * c[:, None, :]

    out[:, :3, :3] = areas[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)

    mid = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
    phi = _rt_basis_at(coords, areas, elen, esign, mid)
    out[:, 3:6, 3:6] += (areas / 3.0)[:, None, None] * np.einsum(
        "eqid,eqjd->eij", phi, phi)

    if mode != 3:
        centroid = coords.mean(axis=1)
        int_phi = (esign * elen)[:, :, None] * (centroid[:, None, :] - coords) / 2.0
        cross = -np.einsum("eid,ejd->eij", grads, int_phi)
        out[:, :3, 3:6] += cross
        out[:, 3:6, :3] += cross.transpose(0, 2, 1)

        third = areas / 3.0
        if mode == 0:
            out[:, :3, 6] += 0.5 * third[:, None]
            out[:, 6, :3] += 0.5 * third[:, None]
        elif mode == 1:
            out[:, :3, 6] += third[:, None]
        elif mode == 2:
            out[:, 6, :3] += third[:, None]
        else:
            raise ValueError(f"unknown kernel mode {mode}")
    return out


def estimator_cells(coords, areas, grads, elen, esign, u_cell, s_cell, lam,
                    f5, g5, ggx5, ggy5, bary5, w5):
    """Five local squared estimator contributions, shape (nE, 5).

    Columns: flux-residual vs. projected load, gradient-flux mismatch,
    multiplier-weighted excess over the obstacle, penetration gradient,
    load oscillation.
    """
    n_elem = len(areas)
    out = np.empty((n_elem, 5))

    div_s = np.einsum("ej,ej->e", s_cell, esign * elen) / areas
    dl = div_s + lam
    fbar = f5 @ w5
    out[:, 0] = areas * (dl + fbar) ** 2

    grad_u = np.einsum("ej,ejd->ed", u_cell, grads)
    mid = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
    phi = _rt_basis_at(coords, areas, elen, esign, mid)
    sig2 = np.einsum("ej,eqjd->eqd", s_cell, phi)
    diff = grad_u[:, None, :] - sig2
    out[:, 1] = (areas / 3.0) * np.einsum("eqd,eqd->e", diff, diff)

    u5 = u_cell @ bary5.T                                     # (nE, nq5)
    excess = np.maximum(u5 - g5, 0.0)
    out[:, 2] = lam * areas * (excess @ w5)

    pen = (g5 > u5)
    dgx = ggx5 - grad_u[:, 0][:, None]
    dgy = ggy5 - grad_u[:, 1][:, None]
    out[:, 3] = areas * ((pen * (dgx**2 + dgy**2)) @ w5)

    out[:, 4] = areas * (((f5 - fbar[:, None]) ** 2) @ w5)
    return out


def error_cells(coords, areas, grads, elen, esign, u_cell, s_cell, lam,
                f5, gux5, guy5, sx5, sy5, bary5, w5):
    """Squared element errors: gradient, flux, flux-residual. Shape (nE, 3)."""
    n_elem = len(areas)
    out = np.empty((n_elem, 3))

    grad_u = np.einsum("ej,ejd->ed", u_cell, grads)
    ex = gux5 - grad_u[:, 0][:, None]
    ey = guy5 - grad_u[:, 1][:, None]
    out[:, 0] = areas * ((ex**2 + ey**2) @ w5)

    phi = _rt_basis_at(coords, areas, elen, esign, bary5)
    sig = np.einsum("ej,eqjd->eqd", s_cell, phi)
    dx = sx5 - sig[:, :, 0]
    dy = sy5 - sig[:, :, 1]
    out[:, 1] = areas * ((dx**2 + dy**2) @ w5)

    div_s = np.einsum("ej,ej->e", s_cell, esign * elen) / areas
    dl = (div_s + lam)[:, None]
    out[:, 2] = areas * (((dl + f5) ** 2) @ w5)
    return out
