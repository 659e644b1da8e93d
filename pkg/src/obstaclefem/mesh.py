"""Conforming triangulations with newest-vertex bisection.

A :class:`Mesh` is immutable: refinement produces a new mesh.  Triangles
are stored counterclockwise; local edge ``i`` is the edge opposite local
vertex ``i``.  Every triangle carries the local index of its refinement
edge.  Global edges are oriented from the lower to the higher vertex
index, which fixes the sign convention of the lowest-order Raviart-Thomas
degrees of freedom.

Newest-vertex bisection splits a triangle at the midpoint of its
refinement edge; the midpoint becomes the newest vertex of both children,
whose refinement edges are the edges opposite it.  Conformity is restored
by the usual closure iteration (an element whose edge is scheduled for
bisection schedules its own refinement edge too).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

_DOMAIN_BLOCKS = {
    # domain tag -> list of square (x0, y0, x1, y1) blocks; n subdivides a block
    "unit_square": [(0.0, 0.0, 1.0, 1.0)],
    "square2": [(-2.0, -2.0, 2.0, 2.0)],
    "lshape_bartels": [(-2.0, -2.0, 0.0, 0.0), (-2.0, 0.0, 0.0, 2.0),
                       (0.0, -2.0, 2.0, 0.0)],
    "lshape_small": [(-1.0, 0.0, 0.0, 1.0), (0.0, 0.0, 1.0, 1.0),
                     (0.0, -1.0, 1.0, 0.0)],
}


class MeshError(ValueError):
    """Raised for invalid mesh input."""


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class ElementGeometry:
    """Exact geometry of one affine triangle."""

    area: float
    diameter: float
    barycentric_gradients: np.ndarray  # (3, 2)
    edge_lengths: np.ndarray           # (3,) local edge i opposite vertex i
    edge_signs: np.ndarray             # (3,) +1 if global normal points outward


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray           # (nV, 2) float64
    triangles: np.ndarray          # (nE, 3) int64, CCW
    refinement_edge: np.ndarray    # (nE,) int64 in {0,1,2}
    boundary_vertex: np.ndarray    # (nV,) bool
    edges: np.ndarray              # (nEd, 2) int64, v0 < v1
    element_edges: np.ndarray      # (nE, 3) int64, edge id opposite vertex i
    element_edge_sign: np.ndarray  # (nE, 3) int64 (+1/-1)
    edge_elements: np.ndarray      # (nEd, 2) int64, -1 marks a boundary slot
    generation: np.ndarray         # (nE,) int64 bisection depth
    parent: np.ndarray | None = field(default=None, compare=False)

    # -- construction ---------------------------------------------------

    @staticmethod
    def from_arrays(vertices, triangles, refinement_edge=None,
                    generation=None, parent=None) -> "Mesh":
        """Build a mesh (and all derived connectivity) from raw arrays.

        Triangles with negative orientation are flipped; the refinement
        edge, when not given, is the longest edge (ties broken by the
        smallest opposite-vertex index).
        """
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be (nV, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be (nE, 3)")
        n_elem = len(triangles)

        p = vertices[triangles]                      # (nE, 3, 2)
        area2 = _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if np.any(area2 == 0.0):
            raise MeshError("degenerate triangle (zero area)")
        flip = area2 < 0.0
        if refinement_edge is None:
            refinement_edge = _longest_edge(vertices, triangles)
        refinement_edge = np.array(refinement_edge, dtype=np.int64, copy=True)
        if np.any(flip):
            triangles = triangles.copy()
            triangles[flip] = triangles[flip][:, [0, 2, 1]]
            # swapping local vertices 1 and 2 swaps local edges 1 and 2
            sel = flip & (refinement_edge > 0)
            refinement_edge[sel] = 3 - refinement_edge[sel]
        if refinement_edge.shape != (n_elem,) or np.any(
                (refinement_edge < 0) | (refinement_edge > 2)):
            raise MeshError("refinement_edge must be a (nE,) array of 0..2")

        edges, element_edges, sign = _edge_tables(triangles, len(vertices))
        edge_elements = _edge_adjacency(element_edges, len(edges))
        counts = np.sum(edge_elements >= 0, axis=1)
        if np.any(counts == 0) or np.any(counts > 2):
            raise MeshError("non-manifold edge adjacency")
        boundary_edge = counts == 1
        boundary_vertex = np.zeros(len(vertices), dtype=bool)
        boundary_vertex[edges[boundary_edge].ravel()] = True

        if generation is None:
            generation = np.zeros(n_elem, dtype=np.int64)
        else:
            generation = np.asarray(generation, dtype=np.int64)

        return Mesh(
            vertices=vertices,
            triangles=triangles,
            refinement_edge=refinement_edge,
            boundary_vertex=boundary_vertex,
            edges=edges,
            element_edges=element_edges,
            element_edge_sign=sign,
            edge_elements=edge_elements,
            generation=generation,
            parent=None if parent is None else np.asarray(parent, dtype=np.int64),
        )

    # -- sizes and cached geometry --------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def element_coords(self) -> np.ndarray:
        """(nE, 3, 2) vertex coordinates per element."""
        return self.vertices[self.triangles]

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.element_coords
        return 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def element_edge_lengths(self) -> np.ndarray:
        """(nE, 3) lengths of the local edges."""
        return self.edge_lengths[self.element_edges]

    @cached_property
    def diameters(self) -> np.ndarray:
        return self.element_edge_lengths.max(axis=1)

    @cached_property
    def bary_gradients(self) -> np.ndarray:
        """(nE, 3, 2) gradients of the barycentric coordinate functions."""
        p = self.element_coords
        opp = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]          # edge vector opposite vertex i
        rot = np.stack([-opp[..., 1], opp[..., 0]], axis=-1)
        return np.ascontiguousarray(rot / (2.0 * self.areas)[:, None, None])

    @cached_property
    def domain_area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def shape_regularity(self) -> float:
        """max over elements of diam(T)^2 / |T|."""
        return float((self.diameters**2 / self.areas).max())

    @cached_property
    def interior_edge(self) -> np.ndarray:
        return np.sum(self.edge_elements >= 0, axis=1) == 2

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.interior_edge)

    # -- serialization ---------------------------------------------------

    def dump_text(self) -> str:
        """Plain-text dump: header ``V E``, vertex lines, element lines."""
        lines = [f"{self.n_vertices} {self.n_elements}"]
        for (x, y), b in zip(self.vertices, self.boundary_vertex):
            lines.append(f"{float(x)!r} {float(y)!r} {int(b)}")
        for (a, b, c), r in zip(self.triangles, self.refinement_edge):
            lines.append(f"{a} {b} {c} {r}")
        return "\n".join(lines) + "\n"


def _longest_edge(vertices, triangles):
    p = vertices[triangles]
    lengths = np.linalg.norm(p[:, [2, 0, 1]] - p[:, [1, 2, 0]], axis=2)  # (nE, 3)
    near_max = lengths >= lengths.max(axis=1, keepdims=True) * (1.0 - 1e-12)
    opp = np.where(near_max, triangles, np.iinfo(np.int64).max)
    return np.argmin(opp, axis=1).astype(np.int64)


def _edge_tables(triangles, n_vertices):
    ends = triangles[:, [[1, 2], [2, 0], [0, 1]]]        # (nE, 3, 2), CCW directed
    lo = ends.min(axis=2)
    hi = ends.max(axis=2)
    key = lo.astype(np.int64) * n_vertices + hi
    uniq, inverse = np.unique(key, return_inverse=True)
    edges = np.column_stack([uniq // n_vertices, uniq % n_vertices])
    element_edges = inverse.reshape(-1, 3).astype(np.int64)
    # +1 when the CCW traversal agrees with the global low->high orientation,
    # i.e. when the global edge normal is the outward normal of the element
    sign = np.ascontiguousarray(
        np.where(ends[..., 0] < ends[..., 1], 1, -1), dtype=np.int64)
    return edges, element_edges, sign


def _edge_adjacency(element_edges, n_edges):
    adj = np.full((n_edges, 2), -1, dtype=np.int64)
    order = np.argsort(element_edges.ravel(), kind="stable")
    elems = order // 3
    eids = element_edges.ravel()[order]
    first = np.ones(len(eids), dtype=bool)
    first[1:] = eids[1:] != eids[:-1]
    slot = np.where(first, 0, 1)
    if np.any(~first & ~np.r_[True, first[:-1]]):
        raise MeshError("edge shared by more than two elements")
    adj[eids, slot] = elems
    return adj


# -- structured generators ------------------------------------------------

def create_structured(domain: str, n: int) -> Mesh:
    """Structured triangulation of a named domain.

    Each square cell is split along its lower-left/upper-right diagonal;
    the diagonal is the longest edge and becomes the refinement edge of
    both triangles, which makes the initial assignment compatible for
    newest-vertex bisection.
    """
    if domain not in _DOMAIN_BLOCKS:
        raise MeshError(f"unknown domain {domain!r}; expected one of "
                        f"{sorted(_DOMAIN_BLOCKS)}")
    if n < 1:
        raise MeshError("subdivision count must be >= 1")
    blocks = _DOMAIN_BLOCKS[domain]

    x0 = min(b[0] for b in blocks)
    y0 = min(b[1] for b in blocks)
    x1 = max(b[2] for b in blocks)
    y1 = max(b[3] for b in blocks)
    h = (blocks[0][2] - blocks[0][0]) / n    # blocks are congruent squares
    nx = round((x1 - x0) / h)
    ny = round((y1 - y0) / h)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)

    def vid(i, j):
        return j * (nx + 1) + i

    def covered(i, j):
        cx = x0 + (i + 0.5) * h
        cy = y0 + (j + 0.5) * h
        return any(bx0 < cx < bx1 and by0 < cy < by1
                   for bx0, by0, bx1, by1 in blocks)

    tris = []
    for j in range(ny):
        for i in range(nx):
            if not covered(i, j):
                continue
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.array(tris, dtype=np.int64)

    grid = np.column_stack([np.tile(xs, ny + 1), np.repeat(ys, nx + 1)])
    used = np.unique(tris)
    remap = np.full(len(grid), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh.from_arrays(grid[used], remap[tris])


# -- refinement -----------------------------------------------------------

def refine_nvb(mesh: Mesh, marked) -> Mesh:
    """Bisect every marked element at least once; close to conformity.

    Returns a new conforming mesh; with an empty marked set the input mesh
    is returned unchanged.
    """
    marked = np.asarray(sorted(set(int(m) for m in marked)), dtype=np.int64)
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.n_elements:
        raise MeshError("marked set contains invalid element ids")

    ref_edge_of = mesh.element_edges[np.arange(mesh.n_elements),
                                     mesh.refinement_edge]
    edge_marked = np.zeros(mesh.n_edges, dtype=bool)
    edge_marked[ref_edge_of[marked]] = True
    # closure: an element with any marked edge must bisect its refinement edge
    while True:
        has_marked = edge_marked[mesh.element_edges].any(axis=1)
        need = has_marked & ~edge_marked[ref_edge_of]
        if not need.any():
            break
        edge_marked[ref_edge_of[need]] = True

    split_edges = np.flatnonzero(edge_marked)
    midpoint_id = {}
    new_vertices = [mesh.vertices]
    next_id = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[split_edges, 0]]
                  + mesh.vertices[mesh.edges[split_edges, 1]])
    new_vertices.append(mids)
    for k, e in enumerate(split_edges):
        a, b = mesh.edges[e]
        midpoint_id[(int(a), int(b))] = next_id + k
    vertices = np.vstack(new_vertices)

    def mid_of(a, b):
        return midpoint_id.get((a, b) if a < b else (b, a))

    tris: list[tuple[int, int, int]] = []
    refs: list[int] = []
    gens: list[int] = []
    parents: list[int] = []

    def emit(p, a, b, gen, parent):
        """Triangle (p, a, b) CCW whose refinement edge is (a, b).

        Midpoints exist only for edges of the input mesh scheduled for
        bisection, so the recursion stops after at most two levels: the
        halves of a bisected edge and the interior edges to the newest
        vertex carry no midpoint.
        """
        m = mid_of(a, b)
        if m is None:
            tris.append((p, a, b))
            refs.append(0)      # edge (a, b) is opposite local vertex 0
            gens.append(gen)
            parents.append(parent)
            return
        emit(m, p, a, gen + 1, parent)
        emit(m, b, p, gen + 1, parent)

    elem_has = edge_marked[mesh.element_edges]
    for t in range(mesh.n_elements):
        tri = mesh.triangles[t]
        gen = int(mesh.generation[t])
        if not elem_has[t].any():
            tris.append((int(tri[0]), int(tri[1]), int(tri[2])))
            refs.append(int(mesh.refinement_edge[t]))
            gens.append(gen)
            parents.append(t)
        else:
            r = int(mesh.refinement_edge[t])
            p, a, b = int(tri[r]), int(tri[(r + 1) % 3]), int(tri[(r + 2) % 3])
            emit(p, a, b, gen, t)

    return Mesh.from_arrays(vertices, np.array(tris, dtype=np.int64),
                            refinement_edge=np.array(refs, dtype=np.int64),
                            generation=np.array(gens, dtype=np.int64),
                            parent=np.array(parents, dtype=np.int64))


def element_geometry(mesh: Mesh, t: int) -> ElementGeometry:
    """Exact area, diameter, barycentric gradients and edge data of element t."""
    if not 0 <= t < mesh.n_elements:
        raise MeshError(f"element id {t} out of range")
    return ElementGeometry(
        area=float(mesh.areas[t]),
        diameter=float(mesh.diameters[t]),
        barycentric_gradients=mesh.bary_gradients[t].copy(),
        edge_lengths=mesh.element_edge_lengths[t].copy(),
        edge_signs=mesh.element_edge_sign[t].astype(np.float64),
    )


def audit_conforming(mesh: Mesh) -> None:
    """Raise AssertionError unless the edge-adjacency invariants hold."""
    assert np.all(mesh.areas > 0.0), "negative or zero element area"
    counts = np.sum(mesh.edge_elements >= 0, axis=1)
    assert np.all((counts == 1) | (counts == 2)), "broken edge adjacency"
    # the two traversals of an interior edge must have opposite orientation
    net = np.bincount(mesh.element_edges.ravel(),
                      weights=mesh.element_edge_sign.ravel(),
                      minlength=mesh.n_edges)
    assert np.all(net[counts == 2] == 0), "inconsistent interior edge signs"
    assert np.all(np.abs(net[counts == 1]) == 1)
    # every boundary vertex lies on exactly two boundary edges
    bnd = mesh.edges[counts == 1]
    deg = np.bincount(bnd.ravel(), minlength=mesh.n_vertices)
    assert np.all(deg[deg > 0] == 2), "boundary is not a closed polygon"
    assert np.array_equal(np.flatnonzero(deg > 0),
                          np.flatnonzero(mesh.boundary_vertex))
    assert np.all((mesh.refinement_edge >= 0) & (mesh.refinement_edge <= 2))
