import math

import numpy as np
import pytest

from igfem.mesh import (Point2, build_crisscross_mesh, edge_gauss_points,
                        mesh_to_text, triangle_gauss_points)


@pytest.mark.parametrize("level,nv,nt,ne,nb", [
    (1, 5, 4, 8, 4),        # 4 corners + 1 center
    (2, 13, 16, 28, 8),     # hand enumeration of the 2x2 grid
    (3, 41, 64, 104, 16),   # (n+1)^2 + n^2 and 4 n^2 with n = 4
])
def test_counts(level, nv, nt, ne, nb):
    m = build_crisscross_mesh(level)
    assert m.num_vertices == nv
    assert m.num_triangles == nt
    assert m.num_edges == ne
    assert int(m.edge_boundary.sum()) == nb
    assert m.num_macros == m.n ** 2
    assert m.h == pytest.approx(1.0 / m.n)


@pytest.mark.parametrize("level", [1, 2, 3, 4, 5])
def test_euler_characteristic(level):
    m = build_crisscross_mesh(level)
    assert m.num_vertices - m.num_edges + m.num_triangles == 1


@pytest.mark.parametrize("level", [1, 2, 3])
def test_topology_invariants(level):
    m = build_crisscross_mesh(level)
    v = m.vertices
    t = m.triangles
    signed = ((v[t[:, 1], 0] - v[t[:, 0], 0]) * (v[t[:, 2], 1] - v[t[:, 0], 1])
              - (v[t[:, 1], 1] - v[t[:, 0], 1]) * (v[t[:, 2], 0] - v[t[:, 0], 0]))
    assert np.all(signed > 0)
    # interior edges have 2 adjacent triangles, boundary edges 1
    n_adjacent = (m.edge_tris >= 0).sum(axis=1)
    assert np.all(n_adjacent[m.edge_boundary] == 1)
    assert np.all(n_adjacent[~m.edge_boundary] == 2)
    # each triangle contains exactly one macro-square center
    centers = set(m.macro_centers.tolist())
    for tri in m.triangles:
        assert sum(1 for vid in tri if int(vid) in centers) == 1


def test_level_and_perturb_validation():
    with pytest.raises(ValueError):
        build_crisscross_mesh(0)
    with pytest.raises(ValueError):
        build_crisscross_mesh(2, perturb=0.3)
    with pytest.raises(ValueError):
        build_crisscross_mesh(2, perturb=-0.1)


def test_gauss_points_unit_edge():
    g1, g2 = edge_gauss_points(Point2(0, 0), Point2(1, 0))
    assert g1.x == pytest.approx(0.2113248654, abs=1e-10)
    assert g2.x == pytest.approx(0.7886751346, abs=1e-10)
    assert g1.y == g2.y == 0.0


def test_gauss_points_scaled_edge():
    g1, g2 = edge_gauss_points(Point2(0, 0), Point2(0, 2))
    assert g1.y == pytest.approx(0.4226497308, abs=1e-10)
    assert g2.y == pytest.approx(1.5773502692, abs=1e-10)


def test_gauss_points_average_is_midpoint():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a, b = rng.normal(size=2), rng.normal(size=2)
        g1, g2 = edge_gauss_points(Point2(*a), Point2(*b))
        mid = 0.5 * (a + b)
        assert 0.5 * (g1.x + g2.x) == pytest.approx(mid[0], abs=1e-14)
        assert 0.5 * (g1.y + g2.y) == pytest.approx(mid[1], abs=1e-14)


def test_gauss_points_degenerate_edge():
    with pytest.raises(ValueError):
        edge_gauss_points(Point2(0.3, 0.4), Point2(0.3, 0.4))


def _conic_residual(pts):
    """Fit a conic through 5 points, evaluate at the 6th (scaled coordinates)."""
    c = pts.mean(axis=0)
    scale = np.abs(pts - c).max()
    q = (pts - c) / scale
    monos = np.column_stack([np.ones(6), q[:, 0], q[:, 1],
                             q[:, 0] ** 2, q[:, 0] * q[:, 1], q[:, 1] ** 2])
    _, _, vt = np.linalg.svd(monos[:5])
    coef = vt[-1]
    return abs(monos[5] @ coef) / np.linalg.norm(coef)


@pytest.mark.parametrize("perturb", [0.0, 0.2])
def test_six_gauss_points_on_a_conic(perturb):
    m = build_crisscross_mesh(3, perturb=perturb)
    rng = np.random.default_rng(11)
    for t in rng.choice(m.num_triangles, size=12, replace=False):
        pts = triangle_gauss_points(m.vertices[m.triangles[t]])
        assert _conic_residual(pts) < 1e-12


def test_perturbation_bounds_and_fixed_vertices():
    level = 3
    base = build_crisscross_mesh(level)
    m = build_crisscross_mesh(level, perturb=0.2)
    moved = np.linalg.norm(m.vertices - base.vertices, axis=1)
    assert moved.max() <= 0.2 * base.h * math.sqrt(2.0) + 1e-15
    # boundary vertices and centers stay put
    assert np.all(moved[base.vertex_boundary] == 0.0)
    assert np.all(moved[(base.n + 1) ** 2:] == 0.0)
    # deterministic
    m2 = build_crisscross_mesh(level, perturb=0.2)
    assert np.array_equal(m.vertices, m2.vertices)


@pytest.mark.parametrize("level,perturb", [(2, 0.05), (3, 0.15), (3, 0.29)])
def test_perturbed_mesh_valid_or_rejected(level, perturb):
    try:
        m = build_crisscross_mesh(level, perturb=perturb)
    except ValueError:
        return  # a flip was rejected, which is the documented behavior
    v, t = m.vertices, m.triangles
    signed = ((v[t[:, 1], 0] - v[t[:, 0], 0]) * (v[t[:, 2], 1] - v[t[:, 0], 1])
              - (v[t[:, 1], 1] - v[t[:, 0], 1]) * (v[t[:, 2], 0] - v[t[:, 0], 0]))
    assert np.all(signed > 0)


def test_mesh_dump_format():
    m = build_crisscross_mesh(1)
    text = mesh_to_text(m)
    lines = text.strip().split("\n")
    assert lines[0] == "5 8 4"
    vlines = [l for l in lines[1:] if l.startswith("v ")]
    tlines = [l for l in lines[1:] if l.startswith("t ")]
    assert len(vlines) == 5 and len(tlines) == 4
    # vertex lines: v x y flag; triangle lines: t i j k macro
    x, y, flag = vlines[0].split()[1:]
    assert float(x) == 0.0 and float(y) == 0.0 and flag == "1"
    assert all(len(l.split()) == 5 for l in tlines)


def test_mesh_immutable():
    m = build_crisscross_mesh(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 3.0
