"""Fixed quadrature rules on the reference triangle and the unit segment.

Two triangle rules are used throughout the package: a 3-point rule of
degree 2 for products of discrete functions (which are at most quadratic)
and a 7-point rule of degree 5 for data terms (loads, obstacle integrals,
error integrands).  Edge moments use 3-point Gauss-Legendre.

Barycentric coordinates are returned as (nq, 3) arrays; reference weights
sum to 1 so that physical weights are ``area * weight``.
"""

import numpy as np

# degree-2 rule: edge midpoints of the reference triangle
_MID = np.array([
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
])
_MID_W = np.full(3, 1.0 / 3.0)

# degree-5 symmetric 7-point rule (centroid + two 3-orbits)
_A1 = (6.0 - np.sqrt(15.0)) / 21.0
_A2 = (6.0 + np.sqrt(15.0)) / 21.0
_W1 = (155.0 - np.sqrt(15.0)) / 1200.0
_W2 = (155.0 + np.sqrt(15.0)) / 1200.0
_D5 = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [1.0 - 2.0 * _A1, _A1, _A1],
    [_A1, 1.0 - 2.0 * _A1, _A1],
    [_A1, _A1, 1.0 - 2.0 * _A1],
    [1.0 - 2.0 * _A2, _A2, _A2],
    [_A2, 1.0 - 2.0 * _A2, _A2],
    [_A2, _A2, 1.0 - 2.0 * _A2],
])
_D5_W = np.array([9.0 / 40.0, _W1, _W1, _W1, _W2, _W2, _W2])

# 3-point Gauss-Legendre on [0, 1], weights summing to 1
_G = np.sqrt(3.0 / 5.0)
_SEG = 0.5 * (1.0 + np.array([-_G, 0.0, _G]))
_SEG_W = np.array([5.0, 8.0, 5.0]) / 18.0


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (barycentric points, reference weights) exact up to `degree`."""
    if degree <= 2:
        return _MID.copy(), _MID_W.copy()
    if degree <= 5:
        return _D5.copy(), _D5_W.copy()
    raise ValueError(f"no triangle rule of degree {degree}")


def segment_rule() -> tuple[np.ndarray, np.ndarray]:
    """3-point Gauss rule on [0, 1]: (points, weights summing to 1)."""
    return _SEG.copy(), _SEG_W.copy()


def physical_points(coords: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Map barycentric points into every element.

    coords: (nE, 3, 2) vertex coordinates, bary: (nq, 3).
    Returns (nE, nq, 2).
    """
    return np.einsum("qj,ejd->eqd", bary, coords)
