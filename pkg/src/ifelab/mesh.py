"""Uniform unfitted triangular and rectangular meshes with edge-based DOFs.

The triangular mesh cuts each grid cell along the diagonal from its top-left
to its bottom-right corner, so a straight interface along x1 = x2 crosses the
diagonals transversally (the configuration the straight-interface benchmark
needs). One degree of freedom lives on each edge (its mean value); boundary
edges are the constrained set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cutting
from .geometry import LevelSet


@dataclass
class DofMap:
    """Edge-mean degrees of freedom: one per edge, boundary edges constrained."""

    n_dofs: int
    boundary: np.ndarray  # bool mask over dofs

    @property
    def free(self) -> np.ndarray:
        return ~self.boundary


@dataclass
class UnfittedMesh:
    kind: str                 # 'tri' or 'rect'
    nodes: np.ndarray         # (n_nodes, 2)
    elements: np.ndarray      # (n_elem, 3|4) CCW vertex indices
    edges: np.ndarray         # (n_edges, 2) node indices
    edge_elems: np.ndarray    # (n_edges, 2) adjacent elements, T2 = -1 on boundary
    elem_edges: np.ndarray    # (n_elem, 3|4) global edge id of local edge (v_i, v_{i+1})
    edge_normals: np.ndarray  # (n_edges, 2) unit normal pointing out of T1
    edge_lengths: np.ndarray  # (n_edges,)
    boundary_edges: np.ndarray  # bool mask
    N: int
    box: tuple                # (x0, x1, y0, y1)
    h: float                  # max element diameter
    kappa: float = 1.0        # |e1|/|e2| for rectangular cells

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def dof_map(self) -> DofMap:
        return DofMap(self.n_edges, self.boundary_edges.copy())

    def element_vertices(self, e: int) -> np.ndarray:
        return self.nodes[self.elements[e]]

    def element_centroids(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[self.edges[:, 0]] + self.nodes[self.edges[:, 1]])

    def congruence_classes(self):
        """Element ids grouped by congruent shape (tri: 2 groups, rect: 1)."""
        ids = np.arange(self.n_elements)
        if self.kind == "tri":
            return [ids[ids % 2 == 0], ids[ids % 2 == 1]]
        return [ids]


def _connect(nodes: np.ndarray, elements: np.ndarray):
    """Edge table, element adjacency and outward normals from connectivity."""
    n_elem, nv = elements.shape
    edge_ids: dict = {}
    edges = []
    edge_elems = []
    elem_edges = np.empty((n_elem, nv), dtype=np.int64)
    for e in range(n_elem):
        conn = elements[e]
        for i in range(nv):
            a, b = int(conn[i]), int(conn[(i + 1) % nv])
            key = (a, b) if a < b else (b, a)
            eid = edge_ids.get(key)
            if eid is None:
                eid = len(edges)
                edge_ids[key] = eid
                edges.append((a, b))
                edge_elems.append([e, -1])
            else:
                edge_elems[eid][1] = e
            elem_edges[e, i] = eid
    edges = np.array(edges, dtype=np.int64)
    edge_elems = np.array(edge_elems, dtype=np.int64)

    vec = nodes[edges[:, 1]] - nodes[edges[:, 0]]
    lengths = np.linalg.norm(vec, axis=1)
    normals = np.column_stack([vec[:, 1], -vec[:, 0]]) / lengths[:, None]
    # orient out of T1 (the element with the smaller id, which registered first)
    c1 = nodes[elements[edge_elems[:, 0]]].mean(axis=1)
    mid = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])
    flip = np.einsum("ij,ij->i", normals, mid - c1) < 0
    normals[flip] *= -1.0
    boundary = edge_elems[:, 1] < 0
    return edges, edge_elems, elem_edges, normals, lengths, boundary


def build_uniform_tri(N: int, box=(-1.0, 1.0, -1.0, 1.0)) -> UnfittedMesh:
    """N x N grid of congruent cells, each split along its top-left/bottom-right
    diagonal; 2*N^2 right triangles, 3*N^2 + 2*N edges."""
    if N < 1:
        raise ValueError("N must be >= 1")
    x0, x1, y0, y1 = box
    xs = np.linspace(x0, x1, N + 1)
    ys = np.linspace(y0, y1, N + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (N + 1) + i

    elements = []
    for j in range(N):
        for i in range(N):
            p00, p10 = nid(i, j), nid(i + 1, j)
            p01, p11 = nid(i, j + 1), nid(i + 1, j + 1)
            elements.append((p00, p10, p01))   # below the p10-p01 diagonal
            elements.append((p10, p11, p01))   # above it
    elements = np.array(elements, dtype=np.int64)
    edges, edge_elems, elem_edges, normals, lengths, boundary = _connect(nodes, elements)
    hx = (x1 - x0) / N
    hy = (y1 - y0) / N
    return UnfittedMesh("tri", nodes, elements, edges, edge_elems, elem_edges,
                        normals, lengths, boundary, N, tuple(box),
                        h=float(np.hypot(hx, hy)))


def build_uniform_rect(N: int, box=(-1.0, 1.0, -1.0, 1.0)) -> UnfittedMesh:
    """N x N congruent axis-aligned rectangles, 2*N*(N+1) edges."""
    if N < 1:
        raise ValueError("N must be >= 1")
    x0, x1, y0, y1 = box
    xs = np.linspace(x0, x1, N + 1)
    ys = np.linspace(y0, y1, N + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (N + 1) + i

    elements = []
    for j in range(N):
        for i in range(N):
            elements.append((nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)))
    elements = np.array(elements, dtype=np.int64)
    edges, edge_elems, elem_edges, normals, lengths, boundary = _connect(nodes, elements)
    hx = (x1 - x0) / N
    hy = (y1 - y0) / N
    return UnfittedMesh("rect", nodes, elements, edges, edge_elems, elem_edges,
                        normals, lengths, boundary, N, tuple(box),
                        h=float(np.hypot(hx, hy)), kappa=hx / hy)


def interface_edges(mesh: UnfittedMesh, ls: LevelSet) -> np.ndarray:
    """Edge ids whose open segment carries a non-snapped interface crossing."""
    return cutting.build_layout(mesh, ls).interface_edges
