"""Conforming triangulations of the unit square and the unit disk.

Meshes are immutable: refinement and projection return new objects.
Boundary edges carry a tag, either ``DIRICHLET`` or ``NEUMANN``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

# local edges of a triangle, in the order used by every edge-based numbering
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


class MeshError(ValueError):
    """Invalid mesh topology or geometry."""


class MshParseError(MeshError):
    """Base class for Gmsh file problems."""


class MshVersionError(MshParseError):
    pass


class MshElementError(MshParseError):
    pass


class MshReferenceError(MshParseError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """2D triangulation with tagged boundary edges.

    Parameters
    ----------
    vertices
        ``(N_v, 2)`` coordinates.
    triangles
        ``(N_el, 3)`` vertex indices, counter-clockwise.
    boundary_edges
        ``(N_b, 2)`` vertex index pairs.
    boundary_tags
        ``(N_b,)`` array of ``DIRICHLET`` / ``NEUMANN``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    n_dim: int = 2

    def __post_init__(self):
        spec = {
            "vertices": (float, (-1, 2)),
            "triangles": (np.int64, (-1, 3)),
            "boundary_edges": (np.int64, (-1, 2)),
            "boundary_tags": (str, (-1,)),
        }
        for name, (dtype, shape) in spec.items():
            arr = np.array(getattr(self, name), dtype=dtype).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """``(N_el, 2, 2)`` affine maps from the reference triangle."""
        p = self.vertices[self.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    @cached_property
    def inv_jacobians_t(self) -> np.ndarray:
        J = self.jacobians
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv_t = np.empty_like(J)
        inv_t[:, 0, 0] = J[:, 1, 1]
        inv_t[:, 0, 1] = -J[:, 1, 0]
        inv_t[:, 1, 0] = -J[:, 0, 1]
        inv_t[:, 1, 1] = J[:, 0, 0]
        return inv_t / det[:, None, None]

    @cached_property
    def _edge_data(self):
        local = self.triangles[:, LOCAL_EDGES]  # (N_el, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, in lexicographic order."""
        return self._edge_data[0]

    @property
    def cell_edges(self) -> np.ndarray:
        """``(N_el, 3)`` global edge index of each local edge."""
        return self._edge_data[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_cells(self) -> list[list[int]]:
        owners: list[list[int]] = [[] for _ in range(self.n_edges)]
        for cell, row in enumerate(self.cell_edges):
            for e in row:
                owners[e].append(cell)
        return owners

    @cached_property
    def topological_boundary(self) -> np.ndarray:
        counts = np.bincount(self.cell_edges.ravel(), minlength=self.n_edges)
        return self.edges[counts == 1]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def edge_index(self, pairs: np.ndarray) -> np.ndarray:
        """Global edge index of each vertex pair (any orientation)."""
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        n = self.n_vertices
        keys = self.edges[:, 0] * n + self.edges[:, 1]
        q = pairs[:, 0] * n + pairs[:, 1]
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, len(keys) - 1)
        if len(q) and not np.all(keys[pos] == q):
            raise MeshError("vertex pair is not an edge of the mesh")
        return pos

    def tagged_edges(self, tag: str) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == tag]

    def with_tags(self, tags) -> "Mesh":
        return Mesh(self.vertices, self.triangles, self.boundary_edges, np.asarray(tags))

    def total_area(self) -> float:
        return float(self.areas.sum())


def check_mesh(m: Mesh) -> None:
    """Raise :class:`MeshError` unless ``m`` satisfies every mesh invariant."""
    if m.triangles.size and (m.triangles.min() < 0 or m.triangles.max() >= m.n_vertices):
        raise MeshError("triangle vertex index out of range")
    if np.any(m.signed_areas <= 0):
        raise MeshError("triangle with non-positive signed area")
    counts = np.bincount(m.cell_edges.ravel(), minlength=m.n_edges)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    topo = {tuple(e) for e in m.topological_boundary}
    tagged = [tuple(sorted(e)) for e in m.boundary_edges]
    if len(set(tagged)) != len(tagged):
        raise MeshError("duplicate boundary edge")
    if set(tagged) != topo:
        raise MeshError("boundary edges do not match the topological boundary")
    if not set(np.unique(m.boundary_tags)) <= {DIRICHLET, NEUMANN}:
        raise MeshError("unknown boundary tag")


def generate_unit_square(n: int, diagonal: str = "main") -> Mesh:
    """Structured mesh of [0,1]^2 with n x n cells.

    Cells are split bottom-left to top-right (``diagonal="main"``) or
    bottom-right to top-left (``"anti"``).
    """
    if diagonal not in ("main", "anti"):
        raise ValueError(f"diagonal must be 'main' or 'anti', got {diagonal!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    if diagonal == "main":
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
    else:
        lower = np.column_stack([v00, v10, v01])
        upper = np.column_stack([v10, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    k = np.arange(n)
    bottom = np.column_stack([k, k + 1])
    right = np.column_stack([k * (n + 1) + n, (k + 1) * (n + 1) + n])
    top = np.column_stack([n * (n + 1) + k + 1, n * (n + 1) + k])
    left = np.column_stack([(k + 1) * (n + 1), k * (n + 1)])
    bnd = np.vstack([bottom, right, top, left])
    return Mesh(vertices, triangles, bnd, np.full(len(bnd), DIRICHLET))


def refine_uniform(m: Mesh) -> Mesh:
    """Split every triangle into four via its edge midpoints."""
    nv = m.n_vertices
    edges = m.edges
    mid = 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])
    vertices = np.vstack([m.vertices, mid])

    t = m.triangles
    e = m.cell_edges + nv  # midpoint of local edge (0,1), (1,2), (2,0)
    m01, m12, m20 = e[:, 0], e[:, 1], e[:, 2]
    children = np.stack(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([t[:, 1], m12, m01]),
            np.column_stack([t[:, 2], m20, m12]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)

    if len(m.boundary_edges):
        bmid = m.edge_index(m.boundary_edges) + nv
        a, b = m.boundary_edges[:, 0], m.boundary_edges[:, 1]
        bnd = np.stack([np.column_stack([a, bmid]), np.column_stack([bmid, b])], axis=1)
        bnd = bnd.reshape(-1, 2)
        tags = np.repeat(m.boundary_tags, 2)
    else:
        bnd = np.empty((0, 2), dtype=np.int64)
        tags = np.empty(0, dtype=str)
    return Mesh(vertices, children, bnd, tags)


def _project_boundary(m: Mesh) -> Mesh:
    v = m.vertices.copy()
    idx = m.boundary_vertices
    v[idx] /= np.linalg.norm(v[idx], axis=1)[:, None]
    return Mesh(v, m.triangles, m.boundary_edges, m.boundary_tags)


def generate_unit_disk(refinement_level: int) -> Mesh:
    """Hexagon fan around the origin, refined and projected onto the unit circle."""
    if int(refinement_level) != refinement_level or refinement_level < 0:
        raise ValueError("refinement_level must be a nonnegative integer")
    ang = np.arange(6) * np.pi / 3
    vertices = np.vstack([[0.0, 0.0], np.column_stack([np.cos(ang), np.sin(ang)])])
    k = np.arange(6)
    triangles = np.column_stack([np.zeros(6, dtype=int), k + 1, (k + 1) % 6 + 1])
    bnd = np.column_stack([k + 1, (k + 1) % 6 + 1])
    m = Mesh(vertices, triangles, bnd, np.full(6, DIRICHLET))
    for _ in range(int(refinement_level)):
        m = _project_boundary(refine_uniform(m))
    return m


def read_msh(path, neumann_groups=(), default_tag: str = DIRICHLET) -> Mesh:
    """Read a Gmsh MSH 2.2 ASCII file with line (type 1) and triangle (type 2) elements.

    Line elements whose physical group is in ``neumann_groups`` are tagged
    Neumann, all others ``default_tag``. Boundary edges missing from the file
    get ``default_tag``. Nodes not used by any triangle are dropped.
    """
    lines = Path(path).read_text().splitlines()
    sections: dict[str, list[str]] = {}
    i = 0
    while i < len(lines):
        head = lines[i].strip()
        if head.startswith("$") and not head.startswith("$End"):
            name = head[1:]
            j = i + 1
            while j < len(lines) and lines[j].strip() != f"$End{name}":
                j += 1
            if j == len(lines):
                raise MshParseError(f"unterminated section ${name}")
            sections[name] = lines[i + 1 : j]
            i = j
        i += 1

    if "MeshFormat" not in sections or not sections["MeshFormat"]:
        raise MshVersionError("missing $MeshFormat section")
    fmt = sections["MeshFormat"][0].split()
    if fmt[0] != "2.2":
        raise MshVersionError(f"unsupported MSH version {fmt[0]} (need 2.2)")
    if len(fmt) > 1 and fmt[1] != "0":
        raise MshVersionError("binary MSH files are not supported")
    for name in ("Nodes", "Elements"):
        if name not in sections:
            raise MshParseError(f"missing ${name} section")

    node_lines = sections["Nodes"]
    n_nodes = int(node_lines[0])
    ids = np.empty(n_nodes, dtype=np.int64)
    coords = np.empty((n_nodes, 2))
    for r, line in enumerate(node_lines[1 : n_nodes + 1]):
        parts = line.split()
        ids[r] = int(parts[0])
        coords[r] = float(parts[1]), float(parts[2])
    index_of = {nid: r for r, nid in enumerate(ids)}

    tris, segs, seg_groups = [], [], []
    elem_lines = sections["Elements"]
    for line in elem_lines[1 : int(elem_lines[0]) + 1]:
        parts = [int(p) for p in line.split()]
        etype, ntags = parts[1], parts[2]
        tags = parts[3 : 3 + ntags]
        nodes = parts[3 + ntags :]
        if etype == 15:
            continue
        if etype not in (1, 2):
            raise MshElementError(f"unsupported element type {etype}")
        try:
            local = [index_of[nid] for nid in nodes]
        except KeyError as exc:
            raise MshReferenceError(f"element references unknown node {exc.args[0]}") from None
        if etype == 2:
            tris.append(local)
        else:
            segs.append(local)
            seg_groups.append(tags[0] if tags else 0)

    if not tris:
        raise MshElementError("no triangles in file")
    tris = np.array(tris, dtype=np.int64)
    used = np.unique(tris)
    renum = -np.ones(n_nodes, dtype=np.int64)
    renum[used] = np.arange(len(used))
    vertices = coords[used]
    tris = renum[tris]
    p = vertices[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    flip = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    skeleton = Mesh(vertices, tris, np.empty((0, 2)), np.empty(0))
    boundary = {tuple(e): default_tag for e in skeleton.topological_boundary}
    neumann_groups = set(neumann_groups)
    for seg, group in zip(segs, seg_groups):
        a, b = renum[seg[0]], renum[seg[1]]
        key = (min(a, b), max(a, b))
        if a < 0 or b < 0 or key not in boundary:
            raise MeshError(f"line element {seg} is not a boundary edge")
        boundary[key] = NEUMANN if group in neumann_groups else default_tag

    # orient boundary edges as they appear in their (counter-clockwise) triangle
    bnd, tags = [], []
    for cell in tris:
        for a, b in zip(cell, np.roll(cell, -1)):
            key = (min(a, b), max(a, b))
            if key in boundary:
                bnd.append((a, b))
                tags.append(boundary[key])
    return Mesh(vertices, tris, np.array(bnd).reshape(-1, 2), np.array(tags))
