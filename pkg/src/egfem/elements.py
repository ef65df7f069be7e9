"""Reference bases, Dunavant rules and function spaces on triangles.

Points on the reference triangle are given in barycentric coordinates
``(l0, l1, l2)`` with ``l1 = xi`` and ``l2 = eta``. Quadrature weights are
normalized to sum to one; the physical weight is ``weight * |K|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations

import numpy as np

from .mesh import DIRICHLET, LOCAL_EDGES, Mesh


@dataclass(frozen=True)
class ElementFamily:
    """``kind`` is ``"lagrange"`` (degree 0-3) or ``"quadrature"`` (exactness degree)."""

    kind: str
    degree: int

    def __post_init__(self):
        if self.kind == "lagrange":
            if self.degree not in (0, 1, 2, 3):
                raise ValueError(f"Lagrange degree {self.degree} not supported")
        elif self.kind == "quadrature":
            if self.degree not in DUNAVANT:
                raise ValueError(f"no Dunavant rule of degree {self.degree}")
        else:
            raise ValueError(f"unknown element kind {self.kind!r}")

    @property
    def is_lagrange(self) -> bool:
        return self.kind == "lagrange"

    @property
    def is_quadrature(self) -> bool:
        return self.kind == "quadrature"

    @property
    def label(self) -> str:
        return f"P{self.degree}" if self.is_lagrange else f"I{self.degree}"

    @property
    def n_local(self) -> int:
        if self.is_quadrature:
            return len(DUNAVANT[self.degree][1])
        return (self.degree + 1) * (self.degree + 2) // 2

    @classmethod
    def parse(cls, label: str) -> "ElementFamily":
        """``"P2"`` -> Lagrange P2, ``"I3"`` -> quadrature-embedded degree 3."""
        head, deg = label[0].upper(), int(label[1:])
        if head == "P":
            return cls("lagrange", deg)
        if head == "I":
            return cls("quadrature", deg)
        raise ValueError(f"cannot parse element family {label!r}")

    def __str__(self):
        return self.label


P0 = ElementFamily("lagrange", 0)
P1 = ElementFamily("lagrange", 1)
P2 = ElementFamily("lagrange", 2)
P3 = ElementFamily("lagrange", 3)


def QuadratureEmbedded(exactness_degree: int) -> ElementFamily:
    return ElementFamily("quadrature", exactness_degree)


# --- Dunavant rules -------------------------------------------------------
# Orbits: ("c", w) centroid; ("a", w, a) -> (1-2a, a, a) and permutations;
# ("b", w, a, b) -> all permutations of (a, b, 1-a-b).  Values refined to
# double precision against the monomial moment equations.
_ORBITS = {
    1: [("c", 1.0)],
    2: [("a", 1.0 / 3.0, 1.0 / 6.0)],
    3: [("c", -27.0 / 48.0), ("a", 25.0 / 48.0, 0.2)],
    4: [
        ("a", 0.22338158967801146570, 0.44594849091596488632),
        ("a", 0.10995174365532186764, 0.091576213509770743460),
    ],
    5: [
        ("c", 0.225),
        ("a", (155.0 - np.sqrt(15.0)) / 1200.0, (6.0 - np.sqrt(15.0)) / 21.0),
        ("a", (155.0 + np.sqrt(15.0)) / 1200.0, (6.0 + np.sqrt(15.0)) / 21.0),
    ],
    6: [
        ("a", 0.11678627572637936603, 0.24928674517091042129),
        ("a", 0.050844906370206816921, 0.063089014491502228340),
        ("b", 0.082851075618373575194, 0.053145049844816947353, 0.31035245103378440542),
    ],
}


def _expand(orbits):
    pts, wts = [], []
    for kind, w, *p in orbits:
        if kind == "c":
            group = [(1 / 3, 1 / 3, 1 / 3)]
        elif kind == "a":
            a = p[0]
            group = [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]
        else:
            a, b = p
            group = sorted(set(permutations((a, b, 1 - a - b))))
        pts += group
        wts += [w] * len(group)
    return np.array(pts), np.array(wts)


DUNAVANT = {deg: _expand(orb) for deg, orb in _ORBITS.items()}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (N_q, 3) barycentric
    weights: np.ndarray  # (N_q,), sum 1
    exactness_degree: int

    @property
    def n_points(self) -> int:
        return len(self.weights)


def dunavant_rule(exactness_degree: int) -> QuadratureRule:
    """Symmetric Gaussian rule on triangles exact up to ``exactness_degree`` (1..6)."""
    if exactness_degree not in DUNAVANT:
        raise ValueError(f"no Dunavant rule of degree {exactness_degree}; supported 1..6")
    pts, wts = DUNAVANT[exactness_degree]
    return QuadratureRule(pts.copy(), wts.copy(), exactness_degree)


# --- Lagrange bases ----------------------------------------------------------
def reference_nodes(family: ElementFamily) -> np.ndarray:
    """Barycentric coordinates of the local degrees of freedom."""
    if family.is_quadrature:
        return DUNAVANT[family.degree][0].copy()
    k = family.degree
    if k == 0:
        return np.array([[1 / 3, 1 / 3, 1 / 3]])
    nodes = list(np.eye(3))
    if k == 2:
        for a, b in LOCAL_EDGES:
            nodes.append((np.eye(3)[a] + np.eye(3)[b]) / 2)
    elif k == 3:
        for a, b in LOCAL_EDGES:
            nodes.append((2 * np.eye(3)[a] + np.eye(3)[b]) / 3)
            nodes.append((np.eye(3)[a] + 2 * np.eye(3)[b]) / 3)
        nodes.append(np.full(3, 1 / 3))
    return np.array(nodes)


def _lagrange_bary(degree: int, lam: np.ndarray):
    """Values ``(Nq, n)`` and barycentric derivatives ``(Nq, n, 3)``."""
    nq = lam.shape[0]
    L = [lam[:, i] for i in range(3)]
    one, zero = np.ones(nq), np.zeros(nq)

    def unit(i, s):
        d = [zero, zero, zero]
        d[i] = s
        return d

    vals, ders = [], []
    if degree == 0:
        vals.append(one)
        ders.append([zero, zero, zero])
    elif degree == 1:
        for i in range(3):
            vals.append(L[i])
            ders.append(unit(i, one))
    elif degree == 2:
        for i in range(3):
            vals.append(L[i] * (2 * L[i] - 1))
            ders.append(unit(i, 4 * L[i] - 1))
        for a, b in LOCAL_EDGES:
            vals.append(4 * L[a] * L[b])
            d = [zero, zero, zero]
            d[a], d[b] = 4 * L[b], 4 * L[a]
            ders.append(d)
    elif degree == 3:
        for i in range(3):
            li = L[i]
            vals.append(0.5 * li * (3 * li - 1) * (3 * li - 2))
            ders.append(unit(i, 0.5 * (27 * li**2 - 18 * li + 2)))
        for a, b in LOCAL_EDGES:
            for near, far in ((a, b), (b, a)):
                ln, lf = L[near], L[far]
                vals.append(4.5 * ln * lf * (3 * ln - 1))
                d = [zero, zero, zero]
                d[near] = 4.5 * lf * (6 * ln - 1)
                d[far] = 4.5 * ln * (3 * ln - 1)
                ders.append(d)
        vals.append(27 * L[0] * L[1] * L[2])
        ders.append([27 * L[1] * L[2], 27 * L[0] * L[2], 27 * L[0] * L[1]])
    else:
        raise ValueError(f"Lagrange degree {degree} not supported")
    values = np.stack(vals, axis=1)
    dlam = np.stack([np.stack(d, axis=1) for d in ders], axis=1)
    return values, dlam


def lagrange_tables(family: ElementFamily, points: np.ndarray):
    """Basis values ``(Nq, n)`` and reference gradients ``(Nq, n, 2)`` at many points."""
    if not family.is_lagrange:
        raise ValueError("quadrature-embedded bases are never evaluated pointwise")
    lam = np.atleast_2d(np.asarray(points, dtype=float))
    values, dlam = _lagrange_bary(family.degree, lam)
    grads = np.stack([dlam[..., 1] - dlam[..., 0], dlam[..., 2] - dlam[..., 0]], axis=-1)
    return values, grads


def eval_basis(family: ElementFamily, ref_point):
    """Values ``(n,)`` and reference gradients ``(2, n)`` at one barycentric point."""
    values, grads = lagrange_tables(family, np.asarray(ref_point, dtype=float)[None, :])
    return values[0], grads[0].T


# --- function spaces ---------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FunctionSpace:
    mesh: Mesh
    family: ElementFamily
    dof_coords: np.ndarray
    cell_dofs: np.ndarray
    dirichlet_dofs: np.ndarray

    @property
    def n_dofs(self) -> int:
        return len(self.dof_coords)

    @property
    def n_local(self) -> int:
        return self.cell_dofs.shape[1]

    @cached_property
    def local_nodes(self) -> np.ndarray:
        return reference_nodes(self.family)

    @cached_property
    def owner(self):
        """Lowest-index cell containing each DOF and the DOF's local slot there."""
        cells = np.repeat(np.arange(len(self.cell_dofs)), self.n_local)
        slots = np.tile(np.arange(self.n_local), len(self.cell_dofs))
        flat = self.cell_dofs.ravel()
        order = np.lexsort((cells, flat))
        first = np.ones(len(order), dtype=bool)
        first[1:] = flat[order][1:] != flat[order][:-1]
        pick = order[first]
        cell = np.empty(self.n_dofs, dtype=np.int64)
        slot = np.empty(self.n_dofs, dtype=np.int64)
        cell[flat[pick]] = cells[pick]
        slot[flat[pick]] = slots[pick]
        return cell, slot

    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolant coefficients of ``f(x)`` with ``x`` of shape ``(..., 2)``."""
        if self.family.is_quadrature:
            raise ValueError("quadrature-embedded spaces have no nodal interpolant")
        return np.asarray(f(self.dof_coords), dtype=float) * np.ones(self.n_dofs)


def build_space(mesh: Mesh, family: ElementFamily) -> FunctionSpace:
    """DOF layout: vertices, then edge DOFs by global edge index, then cell interiors."""
    tri = mesh.triangles
    nel = len(tri)
    pts = mesh.vertices[tri]  # (N_el, 3, 2)

    def mapped(bary):
        return np.einsum("qa,mad->mqd", bary, pts).reshape(-1, 2)

    if family.is_quadrature or family.degree == 0:
        nodes = reference_nodes(family)
        cell_dofs = np.arange(nel * len(nodes)).reshape(nel, len(nodes))
        coords = mapped(nodes)
        return FunctionSpace(mesh, family, coords, cell_dofs, np.empty(0, dtype=np.int64))

    nv, ne = mesh.n_vertices, mesh.n_edges
    blocks = [tri]
    coords = [mesh.vertices]
    bnd_edges = mesh.edge_index(mesh.tagged_edges(DIRICHLET))
    dirichlet = [np.unique(mesh.tagged_edges(DIRICHLET))]
    edge_verts = mesh.edges
    if family.degree == 2:
        blocks.append(mesh.cell_edges + nv)
        coords.append(0.5 * (mesh.vertices[edge_verts[:, 0]] + mesh.vertices[edge_verts[:, 1]]))
        dirichlet.append(bnd_edges + nv)
    elif family.degree == 3:
        cols = []
        for le, (a, b) in enumerate(LOCAL_EDGES):
            e = mesh.cell_edges[:, le]
            forward = tri[:, a] < tri[:, b]  # local a is the lower global vertex
            near_a = nv + 2 * e + np.where(forward, 0, 1)
            near_b = nv + 2 * e + np.where(forward, 1, 0)
            cols += [near_a, near_b]
        blocks.append(np.column_stack(cols))
        blocks.append((nv + 2 * ne + np.arange(nel))[:, None])
        p0 = mesh.vertices[edge_verts[:, 0]]
        p1 = mesh.vertices[edge_verts[:, 1]]
        edge_pts = np.stack([(2 * p0 + p1) / 3, (p0 + 2 * p1) / 3], axis=1).reshape(-1, 2)
        coords += [edge_pts, pts.mean(axis=1)]
        dirichlet.append(np.sort(np.concatenate([nv + 2 * bnd_edges, nv + 2 * bnd_edges + 1])))
    cell_dofs = np.hstack(blocks)
    return FunctionSpace(
        mesh,
        family,
        np.vstack(coords),
        cell_dofs,
        np.unique(np.concatenate(dirichlet)).astype(np.int64),
    )
