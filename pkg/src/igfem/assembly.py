"""Global DOF numbering, f-interpolated interior coefficients, and assembly
of the reduced symmetric Galerkin system.

Free unknowns live on mesh entities (vertices, edge nodes); interior slots
are either interpolated directly from f (interpolated families) or kept as
ordinary unknowns (Lagrange and the standard nonconforming baseline).
Homogeneous Dirichlet DOFs are eliminated by row/column deletion.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import elements as el
from .mesh import Mesh
from .poly import TriGeom, bpoly_eval, make_quad_rule, MAX_QUAD_DEGREE
from .solver import CsrMatrix

__all__ = [
    "FAMILIES",
    "INTERPOLATED_FAMILIES",
    "Space",
    "DofMap",
    "SparseSystem",
    "resolve_degree",
    "build_local_element",
    "build_space",
    "build_dof_map",
    "interior_coefficients",
    "assemble_system",
    "load_rule_degree",
    "stiffness_rule_degree",
]

FAMILIES = ("p2c_interp", "p2nc_interp", "p2nc_std", "p3_interp",
            "pk_interp", "pk_lagrange")
INTERPOLATED_FAMILIES = ("p2c_interp", "p2nc_interp", "p3_interp", "pk_interp")
_FIXED_DEGREE = {"p2c_interp": 2, "p2nc_interp": 2, "p2nc_std": 2, "p3_interp": 3}


def resolve_degree(family: str, k: int | None = None) -> int:
    """Validate family/degree and return the effective polynomial degree."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    fixed = _FIXED_DEGREE.get(family)
    if fixed is not None:
        if k is not None and k != fixed:
            raise ValueError(f"family {family} has degree {fixed}, got k={k}")
        return fixed
    if k is None:
        raise ValueError(f"family {family} needs an explicit degree")
    if family == "pk_interp" and k < 4:
        raise ValueError(f"pk_interp needs k >= 4, got {k}")
    if family == "pk_lagrange" and k < 1:
        raise ValueError(f"pk_lagrange needs k >= 1, got {k}")
    if k > 8:
        raise ValueError(f"degree {k} exceeds the supported quadrature range (k <= 8)")
    return k


def stiffness_rule_degree(k: int) -> int:
    return min(max(2 * k - 2, 0), MAX_QUAD_DEGREE)


def load_rule_degree(k: int) -> int:
    return min(2 * k + 2, MAX_QUAD_DEGREE)


def norm_rule_degree(k: int) -> int:
    return min(2 * k + 4, MAX_QUAD_DEGREE)


def build_local_element(mesh: Mesh, family: str, k: int, eid: int) -> el.LocalElement:
    """Build the local basis for element `eid` (triangle id, or macro id for p2c)."""
    if family == "p2c_interp":
        corners = mesh.vertices[mesh.macro_corners[eid]]
        center = mesh.vertices[mesh.macro_centers[eid]]
        return el.build_p2c_macro_basis(corners, center)
    geom = TriGeom.from_vertices(mesh.vertices[mesh.triangles[eid]])
    if family == "p2nc_interp":
        return el.build_p2nc_element(geom)
    if family == "p2nc_std":
        return el.build_p2nc_element(geom, standard=True)
    if family == "p3_interp":
        return el.build_p3_basis(geom)
    if family == "pk_interp":
        return el.build_pk_basis(geom, k)
    return el.build_lagrange_basis(geom, k)


@dataclass
class DofMap:
    """Partition of all local DOFs into free, interpolated, and boundary."""

    family: str
    k: int
    n_free: int
    n_interp: int
    n_boundary: int
    slots: list            # per element: list of ('free', g) | ('interp', j) | ('bc', None)
    free_keys: list        # sorted entity keys, index = global free number
    local_free_slots: int  # non-interpolated local slots per element

    @property
    def n_elements(self) -> int:
        return len(self.slots)


def _simplex_slot_layout(family: str, k: int):
    """Local slot descriptors as (kind, alpha-or-None) in local basis order."""
    if family in ("p2nc_interp", "p2nc_std"):
        return [("node", a) for a in el.multi_indices(2)] + [("lap", None)]
    if family == "p3_interp":
        return [("node", a) for a in el.boundary_multi_indices(3)] + [("lap", None)]
    if family == "pk_interp":
        d = (k - 2) * (k - 1) // 2
        return ([("node", a) for a in el.boundary_multi_indices(k)]
                + [("lap", j) for j in range(d)])
    return [("node", a) for a in el.multi_indices(k)]


def build_dof_map(mesh: Mesh, family: str, k: int | None = None) -> DofMap:
    """Number global DOFs: shared entities identified, boundary DOFs constrained.

    Interior slots are interpolated for the interpolated families; for
    pk_lagrange and p2nc_std they are ordinary free unknowns.
    """
    k = resolve_degree(family, k)
    if family == "p2c_interp" and mesh.perturbation != 0.0:
        raise ValueError("p2c_interp requires an unperturbed criss-cross mesh")

    interpolated = family in INTERPOLATED_FAMILIES
    raw_slots: list[list] = []   # per element: ('key', key, boundary) | ('interp', j)
    free_keys: set = set()
    bc_keys: set = set()

    def node_key(tri, alpha):
        nz = [i for i in range(3) if alpha[i] > 0]
        if len(nz) == 1:
            v = int(tri[nz[0]])
            return (0, v, 0), bool(mesh.vertex_boundary[v])
        if len(nz) == 2:
            i, j = nz
            vi, vj = int(tri[i]), int(tri[j])
            eid = mesh.edge_id(vi, vj)
            pos = alpha[j] if vi < vj else alpha[i]
            return (1, eid, pos), bool(mesh.edge_boundary[eid])
        return None, False  # interior lattice node

    if family == "p2c_interp":
        for m in range(mesh.num_macros):
            slots = []
            for c in mesh.macro_corners[m]:
                key = (0, int(c), 0)
                slots.append(("key", key, bool(mesh.vertex_boundary[c])))
            for e in mesh.macro_side_edges[m]:
                key = (1, int(e), 0)
                slots.append(("key", key, bool(mesh.edge_boundary[e])))
            slots.append(("interp", 0))
            raw_slots.append(slots)
    else:
        layout = _simplex_slot_layout(family, k)
        for t in range(mesh.num_triangles):
            tri = mesh.triangles[t]
            slots = []
            j_interp = 0
            for kind, alpha in layout:
                if kind == "lap":
                    if interpolated:
                        slots.append(("interp", j_interp))
                        j_interp += 1
                    else:
                        slots.append(("key", (2, t, alpha if alpha is not None else 0), False))
                    continue
                key, bnd = node_key(tri, alpha)
                if key is None:
                    slots.append(("key", (3, t) + tuple(alpha), False))
                else:
                    slots.append(("key", key, bnd))
            raw_slots.append(slots)

    for slots in raw_slots:
        for s in slots:
            if s[0] == "key":
                (bc_keys if s[2] else free_keys).add(s[1])
    free_sorted = sorted(free_keys)
    index = {key: g for g, key in enumerate(free_sorted)}

    final = []
    n_interp = 0
    for slots in raw_slots:
        out = []
        for s in slots:
            if s[0] == "interp":
                out.append(("interp", s[1]))
                n_interp += 1
            elif s[2]:
                out.append(("bc", None))
            else:
                out.append(("free", index[s[1]]))
        final.append(out)

    n_local = len(final[0])
    n_interior_slots = sum(1 for s in final[0] if s[0] == "interp")
    return DofMap(family=family, k=k, n_free=len(free_sorted), n_interp=n_interp,
                  n_boundary=len(bc_keys), slots=final, free_keys=free_sorted,
                  local_free_slots=n_local - n_interior_slots)


@dataclass
class Space:
    """Mesh + family + per-element local bases + global DOF map."""

    mesh: Mesh
    family: str
    k: int
    elements: list
    dof_map: DofMap

    @property
    def n_elements(self) -> int:
        return len(self.elements)


def build_space(mesh: Mesh, family: str, k: int | None = None,
                workers: int = 1) -> Space:
    k = resolve_degree(family, k)
    dof_map = build_dof_map(mesh, family, k)
    n = mesh.num_macros if family == "p2c_interp" else mesh.num_triangles
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            elems = list(pool.map(lambda e: build_local_element(mesh, family, k, e),
                                  range(n)))
    else:
        elems = [build_local_element(mesh, family, k, e) for e in range(n)]
    return Space(mesh=mesh, family=family, k=k, elements=elems, dof_map=dof_map)


def interior_coefficients(element: el.LocalElement, f) -> np.ndarray:
    """Coefficients of the interpolated interior basis functions.

    Pointwise families take f at the Laplacian point (the -1 normalization
    makes the coefficient +f); the moment element takes c_j = -int p_j b f,
    the value the moment functional assumes on the exact solution.
    """
    if element.family == "pk_interp":
        k = element.degree
        geom = element.geoms[0]
        rule = make_quad_rule(load_rule_degree(k))
        xy = rule.points @ geom.vertices
        fv = f(xy[:, 0], xy[:, 1])
        w = rule.weights * geom.area
        bv = bpoly_eval(element.bubble, rule.points)
        return np.array([-(w * bv * bpoly_eval(pj, rule.points)) @ fv
                         for pj in element.moment_basis])
    if element.family in ("p2c_interp", "p2nc_interp", "p3_interp"):
        x, y = element.dofs[-1].point
        return np.array([f(x, y)], dtype=float)
    return np.zeros(0)


@dataclass
class SparseSystem:
    """Reduced Galerkin system: A x = F over the free DOFs."""

    A: CsrMatrix
    F: np.ndarray
    interp_coeffs: list          # per element, empty arrays for baselines
    space: Space


def _element_contribution(space: Space, f, eid: int):
    """(local stiffness, local load, interior coefficients) for one element."""
    element = space.elements[eid]
    k = space.k
    stiff_rule = make_quad_rule(stiffness_rule_degree(k))
    load_rule = make_quad_rule(load_rule_degree(k))
    nb = element.n_basis
    S = np.zeros((nb, nb))
    L = np.zeros(nb)
    for part, geom in enumerate(element.geoms):
        grads = element.basis_gradients(stiff_rule.points, part)      # (nb, P, 2)
        S += geom.area * np.einsum("npd,mpd,p->nm", grads, grads, stiff_rule.weights)
        vals = element.basis_values(load_rule.points, part)           # (nb, P)
        xy = load_rule.points @ geom.vertices
        fv = f(xy[:, 0], xy[:, 1])
        L += geom.area * vals @ (load_rule.weights * fv)
    c = interior_coefficients(element, f)
    return S, L, c


def assemble_system(mesh_or_space, family: str | None = None, k: int | None = None,
                    f=None, workers: int = 1) -> SparseSystem:
    """Assemble the reduced system for right-hand side f.

    Accepts either a Mesh (family/k required) or a prebuilt Space.
    Stiffness uses elementwise (broken) gradients; the known interpolated
    interior part is moved to the right-hand side.
    """
    if isinstance(mesh_or_space, Space):
        space = mesh_or_space
    else:
        space = build_space(mesh_or_space, family, k, workers=workers)
    if f is None:
        raise ValueError("assemble_system needs a right-hand side f(x, y)")
    dm = space.dof_map

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            contribs = list(pool.map(lambda e: _element_contribution(space, f, e),
                                     range(space.n_elements)))
    else:
        contribs = [_element_contribution(space, f, e) for e in range(space.n_elements)]

    rows, cols, vals = [], [], []
    F = np.zeros(dm.n_free)
    interp_coeffs = []
    for eid, (S, L, c) in enumerate(contribs):
        slots = dm.slots[eid]
        interp_coeffs.append(c)
        free = [(loc, g) for loc, (tag, g) in enumerate(slots) if tag == "free"]
        interp = [(loc, j) for loc, (tag, j) in enumerate(slots) if tag == "interp"]
        for loc_m, g_m in free:
            F[g_m] += L[loc_m]
            for loc_n, g_n in free:
                rows.append(g_m)
                cols.append(g_n)
                vals.append(S[loc_m, loc_n])
            for loc_j, j in interp:
                F[g_m] -= S[loc_m, loc_j] * c[j]
    A = CsrMatrix.from_coo(dm.n_free, rows, cols, vals)
    return SparseSystem(A=A, F=F, interp_coeffs=interp_coeffs, space=space)
