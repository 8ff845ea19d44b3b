"""Criss-cross triangulations of the unit square.

Level L has n = 2**(L-1) macro-squares per side; each square is split by
both diagonals into 4 triangles meeting at a center vertex.  Vertices are
numbered corners first (row-major), then centers (row-major), so that all
derived orderings are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "Point2",
    "Mesh",
    "build_crisscross_mesh",
    "edge_gauss_points",
    "triangle_gauss_points",
    "mesh_to_text",
]

# 2-point Gauss-Legendre parameters on [0, 1]
_GAUSS_T1 = 0.5 * (1.0 - 1.0 / math.sqrt(3.0))
_GAUSS_T2 = 0.5 * (1.0 + 1.0 / math.sqrt(3.0))


class Point2(NamedTuple):
    x: float
    y: float


@dataclass
class Mesh:
    """Immutable criss-cross mesh of the unit square.

    Triangles of each macro-square appear consecutively in cyclic order
    (bottom, right, top, left); every triangle lists its center vertex last.
    """

    level: int
    n: int
    h: float
    vertices: np.ndarray          # (V, 2) float
    vertex_boundary: np.ndarray   # (V,) bool
    edges: np.ndarray             # (E, 2) int, sorted vertex pairs
    edge_tris: np.ndarray         # (E, 2) int, -1 where absent
    edge_boundary: np.ndarray     # (E,) bool
    triangles: np.ndarray         # (T, 3) int, positively oriented
    tri_macro: np.ndarray         # (T,) int parent macro-square
    macro_corners: np.ndarray     # (M, 4) int  (SW, SE, NE, NW)
    macro_centers: np.ndarray     # (M,) int
    macro_side_mids: np.ndarray   # (M, 4, 2) float (bottom, right, top, left)
    macro_side_edges: np.ndarray  # (M, 4) int edge ids of the square sides
    perturbation: float = 0.0
    _edge_index: dict = field(default_factory=dict, repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_macros(self) -> int:
        return len(self.macro_corners)

    def edge_id(self, v0: int, v1: int) -> int:
        """Edge id for a vertex pair (order-insensitive)."""
        key = (v0, v1) if v0 < v1 else (v1, v0)
        return self._edge_index[key]

    def _freeze(self) -> None:
        for a in (self.vertices, self.vertex_boundary, self.edges,
                  self.edge_tris, self.edge_boundary, self.triangles,
                  self.tri_macro, self.macro_corners, self.macro_centers,
                  self.macro_side_mids, self.macro_side_edges):
            a.setflags(write=False)


def build_crisscross_mesh(level: int, perturb: float = 0.0) -> Mesh:
    """Build the level-`level` criss-cross mesh (n = 2**(level-1) squares per side).

    `perturb` > 0 displaces interior lattice vertices by at most perturb*h
    (deterministic), leaving boundary vertices and square centers in place.
    Raises ValueError if the displacement would flip a triangle.
    """
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if not (0.0 <= perturb < 0.3):
        raise ValueError(f"perturb must be in [0, 0.3), got {perturb}")

    n = 2 ** (level - 1)
    h = 1.0 / n

    # corners row-major, then centers row-major
    corner_id = lambda i, j: j * (n + 1) + i
    center_id = lambda i, j: (n + 1) ** 2 + j * n + i

    nv = (n + 1) ** 2 + n * n
    verts = np.zeros((nv, 2))
    vbnd = np.zeros(nv, dtype=bool)
    for j in range(n + 1):
        for i in range(n + 1):
            verts[corner_id(i, j)] = (i * h, j * h)
            vbnd[corner_id(i, j)] = i == 0 or i == n or j == 0 or j == n
    for j in range(n):
        for i in range(n):
            verts[center_id(i, j)] = ((i + 0.5) * h, (j + 0.5) * h)

    if perturb > 0.0:
        rng = np.random.default_rng(abs(hash(("crisscross", level, round(perturb, 12)))) % 2 ** 32)
        interior = ~vbnd
        interior[(n + 1) ** 2:] = False  # centers stay put
        shift = rng.uniform(-1.0, 1.0, size=(nv, 2)) * (perturb * h)
        verts[interior] += shift[interior]

    tris = []
    tri_macro = []
    macro_corners = np.zeros((n * n, 4), dtype=int)
    macro_centers = np.zeros(n * n, dtype=int)
    macro_side_mids = np.zeros((n * n, 4, 2))
    for j in range(n):
        for i in range(n):
            m = j * n + i
            sw, se = corner_id(i, j), corner_id(i + 1, j)
            ne, nw = corner_id(i + 1, j + 1), corner_id(i, j + 1)
            c = center_id(i, j)
            macro_corners[m] = (sw, se, ne, nw)
            macro_centers[m] = c
            macro_side_mids[m, 0] = 0.5 * (verts[sw] + verts[se])
            macro_side_mids[m, 1] = 0.5 * (verts[se] + verts[ne])
            macro_side_mids[m, 2] = 0.5 * (verts[ne] + verts[nw])
            macro_side_mids[m, 3] = 0.5 * (verts[nw] + verts[sw])
            # cyclic: bottom, right, top, left; center last in each triangle
            for a, b in ((sw, se), (se, ne), (ne, nw), (nw, sw)):
                tris.append((a, b, c))
                tri_macro.append(m)
    tris = np.array(tris, dtype=int)
    tri_macro = np.array(tri_macro, dtype=int)

    # orientation check (also guards perturbation flips)
    v0, v1, v2 = (verts[tris[:, k]] for k in range(3))
    signed = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - \
             (v1[:, 1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0])
    if np.any(signed <= 0.0):
        raise ValueError("perturbation produced a non-positive triangle area")

    # edges from triangles, deterministic order
    edge_index: dict[tuple, int] = {}
    edge_list: list[tuple] = []
    edge_tris: list[list[int]] = []
    for t, (a, b, c) in enumerate(tris):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            e = edge_index.get(key)
            if e is None:
                e = len(edge_list)
                edge_index[key] = e
                edge_list.append(key)
                edge_tris.append([t, -1])
            else:
                edge_tris[e][1] = t
    edges = np.array(edge_list, dtype=int)
    edge_tris = np.array(edge_tris, dtype=int)
    edge_boundary = edge_tris[:, 1] < 0

    macro_side_edges = np.zeros((n * n, 4), dtype=int)
    for m in range(n * n):
        sw, se, ne, nw = macro_corners[m]
        for s, (u, v) in enumerate(((sw, se), (se, ne), (ne, nw), (nw, sw))):
            key = (u, v) if u < v else (v, u)
            macro_side_edges[m, s] = edge_index[key]

    mesh = Mesh(level=level, n=n, h=h, vertices=verts, vertex_boundary=vbnd,
                edges=edges, edge_tris=edge_tris, edge_boundary=edge_boundary,
                triangles=tris, tri_macro=tri_macro,
                macro_corners=macro_corners, macro_centers=macro_centers,
                macro_side_mids=macro_side_mids, macro_side_edges=macro_side_edges,
                perturbation=perturb, _edge_index=edge_index)
    mesh._freeze()
    return mesh


def edge_gauss_points(p0: Point2, p1: Point2) -> tuple[Point2, Point2]:
    """The two 2-point Gauss-Legendre nodes of segment p0-p1, in parameter order."""
    p0 = Point2(*p0)
    p1 = Point2(*p1)
    dx, dy = p1.x - p0.x, p1.y - p0.y
    if dx * dx + dy * dy == 0.0:
        raise ValueError("degenerate edge: endpoints coincide")
    g1 = Point2(p0.x + _GAUSS_T1 * dx, p0.y + _GAUSS_T1 * dy)
    g2 = Point2(p0.x + _GAUSS_T2 * dx, p0.y + _GAUSS_T2 * dy)
    return g1, g2


def triangle_gauss_points(verts: np.ndarray) -> np.ndarray:
    """The six edge Gauss points of a triangle, (6, 2), edges in order (01, 12, 20)."""
    verts = np.asarray(verts, dtype=float)
    pts = []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        g1, g2 = edge_gauss_points(Point2(*verts[i]), Point2(*verts[j]))
        pts.append(g1)
        pts.append(g2)
    return np.array(pts)


def mesh_to_text(mesh: Mesh) -> str:
    """Plain-text dump: header `V E T`, then vertex lines, then triangle lines."""
    lines = [f"{mesh.num_vertices} {mesh.num_edges} {mesh.num_triangles}"]
    for v, (x, y) in enumerate(mesh.vertices):
        lines.append(f"v {float(x)!r} {float(y)!r} {int(mesh.vertex_boundary[v])}")
    for t, (i, j, k) in enumerate(mesh.triangles):
        lines.append(f"t {i} {j} {k} {mesh.tri_macro[t]}")
    return "\n".join(lines) + "\n"
