"""Triangulated surfaces, their edge graphs and per-vertex areas."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import EmptyDomainError, MeshError, ParameterError


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Vertex positions (mm) and 0-based triangle index triples.

    Construction checks that every index is in range and that no triangle
    repeats a vertex.  Vertices not referenced by any triangle are allowed;
    see :func:`isolated_vertices`.
    """

    vertices: np.ndarray
    triangles: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=np.int64))

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        n = len(vertices)
        if triangles.size:
            bad = np.flatnonzero(((triangles < 0) | (triangles >= n)).any(axis=1))
            if bad.size:
                t = bad[0]
                raise MeshError(
                    f"triangle {t} {tuple(triangles[t])} references a vertex outside [0, {n})"
                )
            degenerate = np.flatnonzero(
                (triangles[:, 0] == triangles[:, 1])
                | (triangles[:, 1] == triangles[:, 2])
                | (triangles[:, 0] == triangles[:, 2])
            )
            if degenerate.size:
                t = degenerate[0]
                raise MeshError(f"triangle {t} {tuple(triangles[t])} repeats a vertex")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


@dataclass(frozen=True, eq=False)
class AdjacencyGraph:
    """Undirected simple graph in compressed sparse row form.

    ``indices[indptr[i]:indptr[i + 1]]`` are the sorted neighbors of ``i``.
    """

    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n_vertices: int, edges) -> "AdjacencyGraph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n_vertices):
            raise MeshError(f"edge endpoint outside [0, {n_vertices})")
        edges = edges[edges[:, 0] != edges[:, 1]]
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        m = sparse.coo_matrix(
            (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n_vertices, n_vertices)
        ).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr.astype(np.int64), m.indices.astype(np.int64))

    @classmethod
    def complete(cls, n_vertices: int) -> "AdjacencyGraph":
        i, j = np.triu_indices(n_vertices, k=1)
        return cls.from_edges(n_vertices, np.column_stack([i, j]))

    @property
    def n_vertices(self) -> int:
        return len(self.indptr) - 1

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def neighbor_lists(self) -> list[list[int]]:
        """Plain Python lists, for the merge loops that walk neighbors one by one."""
        idx = self.indices.tolist()
        ptr = self.indptr.tolist()
        return [idx[ptr[i] : ptr[i + 1]] for i in range(self.n_vertices)]

    def edges(self) -> np.ndarray:
        """Each undirected edge once, as ``(i, j)`` with ``i < j``."""
        rows = np.repeat(np.arange(self.n_vertices), self.degree())
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    def to_sparse(self) -> sparse.csr_matrix:
        n = self.n_vertices
        data = np.ones(len(self.indices), dtype=np.int8)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def connected_components(self) -> tuple[int, np.ndarray]:
        return csgraph.connected_components(self.to_sparse(), directed=False)

    def subgraph(self, mask) -> "AdjacencyGraph":
        """Graph induced on the vertices where ``mask`` is true, renumbered in order."""
        mask = _as_mask(mask, self.n_vertices)
        old_to_new = np.full(self.n_vertices, -1, dtype=np.int64)
        old_to_new[mask] = np.arange(mask.sum())
        e = self.edges()
        e = e[mask[e[:, 0]] & mask[e[:, 1]]]
        return AdjacencyGraph.from_edges(int(mask.sum()), old_to_new[e])


def build_adjacency(mesh: SurfaceMesh) -> AdjacencyGraph:
    """Edge graph of the triangulation: two vertices are neighbors when they share a triangle edge."""
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    return AdjacencyGraph.from_edges(mesh.n_vertices, edges)


def triangle_areas(mesh: SurfaceMesh) -> np.ndarray:
    v = mesh.vertices
    t = mesh.triangles
    cross = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    return 0.5 * np.linalg.norm(cross, axis=1)


def vertex_areas(mesh: SurfaceMesh) -> np.ndarray:
    """Per-vertex area: one third of the area of every incident triangle.

    The result sums to the total surface area.  Isolated vertices get zero.
    """
    thirds = triangle_areas(mesh) / 3.0
    areas = np.zeros(mesh.n_vertices)
    for corner in range(3):
        np.add.at(areas, mesh.triangles[:, corner], thirds)
    return areas


def isolated_vertices(mesh: SurfaceMesh, warn: bool = True) -> np.ndarray:
    """Indices of vertices no triangle references; optionally emits a warning."""
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    isolated = np.flatnonzero(~used)
    if warn and isolated.size:
        warnings.warn(
            f"mesh has {isolated.size} isolated vertices (first: {isolated[0]})",
            stacklevel=2,
        )
    return isolated


def _as_mask(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (n,):
        raise ParameterError(f"mask has shape {mask.shape}, expected ({n},)")
    return mask.astype(bool)


def induced_submesh(mesh: SurfaceMesh, mask) -> tuple[SurfaceMesh, np.ndarray]:
    """Restrict a mesh to the masked vertices.

    Only triangles whose three corners are all kept survive.

    Returns
    -------
    submesh : SurfaceMesh
    old_to_new : ndarray of int
        New index of every original vertex, -1 for dropped ones.
    """
    mask = _as_mask(mask, mesh.n_vertices)
    if not mask.any():
        raise EmptyDomainError("mask excludes every vertex")
    old_to_new = np.full(mesh.n_vertices, -1, dtype=np.int64)
    old_to_new[mask] = np.arange(mask.sum())
    t = mesh.triangles
    keep = mask[t].all(axis=1) if len(t) else np.zeros(0, dtype=bool)
    return SurfaceMesh(mesh.vertices[mask], old_to_new[t[keep]]), old_to_new
