import numpy as np
import pytest

from obstaclefem.mesh import Mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def reference_triangle_mesh(scale=1.0):
    """Single-element mesh on the scaled reference triangle."""
    verts = scale * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Mesh.from_arrays(verts, np.array([[0, 1, 2]]))


def locate_point(mesh, x, y):
    """(element id, barycentric coords) of the element containing (x, y)."""
    def cross(a, b):
        return a[0] * b[1] - a[1] * b[0]

    coords = mesh.element_coords
    for t in range(mesh.n_elements):
        p = coords[t]
        area = 2.0 * mesh.areas[t]
        b0 = cross(p[1] - (x, y), p[2] - (x, y)) / area
        b1 = cross(p[2] - (x, y), p[0] - (x, y)) / area
        b2 = 1.0 - b0 - b1
        if min(b0, b1, b2) >= -1e-12:
            return t, np.array([b0, b1, b2])
    raise ValueError(f"point ({x}, {y}) outside the mesh")


def p1_function(mesh, vertex_values):
    """Callable evaluating a continuous piecewise-affine function given by
    vertex values (vectorized via per-point location; test-sized meshes)."""
    vertex_values = np.asarray(vertex_values, dtype=float)

    def func(x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        shape = np.broadcast(x, y).shape
        xf = np.broadcast_to(x, shape).ravel()
        yf = np.broadcast_to(y, shape).ravel()
        out = np.empty(xf.shape)
        for k, (xi, yi) in enumerate(zip(xf, yf)):
            t, bary = locate_point(mesh, xi, yi)
            out[k] = vertex_values[mesh.triangles[t]] @ bary
        return out.reshape(shape)

    return func
