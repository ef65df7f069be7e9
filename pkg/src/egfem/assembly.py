"""Assembly of bilinear/trilinear forms, interpolation operators and loads.

Every routine that runs a quadrature loop over the mesh increments a global
counter (:func:`quadrature_calls`), which lets callers assert that an
iteration loop never integrates.

A quadrature-embedded space ``I_k`` is handled exactly: its basis function
``eta_l^K = w_l^K delta_{x_l^K}`` contributes ``w_l |K| F(x_l)`` to any
integral ``int eta_l F``, so forms involving ``I_k`` are integrated with the
degree-``k`` rule and an identity value table, whatever ``quad_degree`` says.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .elements import FunctionSpace, QuadratureRule, dunavant_rule, lagrange_tables
from .mesh import LOCAL_EDGES, NEUMANN
from .tensor import SparseTensor3, csr

_QUAD_CALLS = [0]


def quadrature_calls() -> int:
    """Number of quadrature-based assembly calls made so far in this process."""
    return _QUAD_CALLS[0]


@dataclass(frozen=True)
class PointwiseFn:
    """Coefficient ``f(u, grad_u, x)`` evaluated on arrays.

    ``u`` has shape ``(...)``, ``grad_u`` and ``x`` shape ``(..., 2)``.
    ``du`` and ``dgrad`` are the partial derivatives with respect to ``u`` and
    ``grad_u`` (the latter returns shape ``(..., 2)``). ``poly`` lists the
    coefficients of ``f`` as a polynomial in ``u`` alone, when it is one.
    """

    value: Callable
    du: Optional[Callable] = None
    dgrad: Optional[Callable] = None
    poly: Optional[tuple] = None
    uses_grad: bool = False

    def __call__(self, u, g, x):
        return np.broadcast_to(self.value(u, g, x), np.shape(u)).astype(float)

    def d_u(self, u, g, x):
        if self.du is None:
            return np.zeros(np.shape(u))
        return np.broadcast_to(self.du(u, g, x), np.shape(u)).astype(float)

    def d_grad(self, u, g, x):
        if self.dgrad is None:
            return np.zeros(np.shape(g))
        return np.broadcast_to(self.dgrad(u, g, x), np.shape(g)).astype(float)


def constant_fn(value: float) -> PointwiseFn:
    return PointwiseFn(lambda u, g, x: np.full(np.shape(u), float(value)), poly=(float(value),))


@dataclass(frozen=True, eq=False)
class DirichletBC:
    dofs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dofs = np.asarray(self.dofs, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=float).ravel() * np.ones(len(dofs))
        if len(np.unique(dofs)) != len(dofs):
            raise ValueError("duplicate Dirichlet DOF")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite Dirichlet value")
        object.__setattr__(self, "dofs", dofs)
        object.__setattr__(self, "values", values)


def dirichlet_bc(V: FunctionSpace, u_D: Callable) -> DirichletBC:
    idx = V.dirichlet_dofs
    return DirichletBC(idx, np.asarray(u_D(V.dof_coords[idx]), dtype=float) * np.ones(len(idx)))


# --- internals -----------------------------------------------------------------
def _same_mesh(*spaces):
    mesh = spaces[0].mesh
    if any(s.mesh is not mesh for s in spaces[1:]):
        raise ValueError("function spaces live on different meshes")
    return mesh


def _rule(quad_degree, *spaces) -> QuadratureRule:
    embedded = {s.family.degree for s in spaces if s.family.is_quadrature}
    if len(embedded) > 1:
        raise ValueError("forms may involve at most one quadrature-embedded degree")
    # a degree-0 integrand is still integrated by the one-point rule
    degree = embedded.pop() if embedded else max(int(quad_degree), 1)
    _QUAD_CALLS[0] += 1
    return dunavant_rule(degree)


def _values(space: FunctionSpace, rule: QuadratureRule) -> np.ndarray:
    if space.family.is_quadrature:
        return np.eye(rule.n_points)
    return lagrange_tables(space.family, rule.points)[0]


def _grads(space: FunctionSpace, rule: QuadratureRule) -> np.ndarray:
    """Physical gradients ``(N_el, Nq, n, 2)``."""
    fam = space.family
    if fam.is_quadrature or fam.degree == 0:
        raise ValueError(f"{fam.label} has no usable gradient")
    ref = lagrange_tables(fam, rule.points)[1]
    return np.einsum("mab,qnb->mqna", space.mesh.inv_jacobians_t, ref)


def _weights(space: FunctionSpace, rule: QuadratureRule) -> np.ndarray:
    return space.mesh.areas[:, None] * rule.weights[None, :]


def _points(space: FunctionSpace, rule: QuadratureRule) -> np.ndarray:
    mesh = space.mesh
    return np.einsum("qa,mad->mqd", rule.points, mesh.vertices[mesh.triangles])


def _require_lagrange(V: FunctionSpace, what: str):
    if not V.family.is_lagrange:
        raise ValueError(f"{what}: test space must be Lagrange, got {V.family.label}")


def _scatter_matrix(local, rows_space, cols_space) -> sp.csr_matrix:
    r = rows_space.cell_dofs[:, :, None]
    c = cols_space.cell_dofs[:, None, :]
    r, c = np.broadcast_arrays(r, c)
    return csr(local, r, c, (rows_space.n_dofs, cols_space.n_dofs))


def _scatter_tensor(local, s1, s2, s3) -> SparseTensor3:
    i = s1.cell_dofs[:, :, None, None]
    j = s2.cell_dofs[:, None, :, None]
    k = s3.cell_dofs[:, None, None, :]
    i, j, k = np.broadcast_arrays(i, j, k)
    return SparseTensor3.from_coo((s1.n_dofs, s2.n_dofs, s3.n_dofs), i, j, k, local)


def _scatter_vector(local, space) -> np.ndarray:
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs)


def _solution_at_points(V, rule, u):
    """``u_h``, ``grad u_h``, ``x`` at all quadrature points, plus basis tables."""
    u = np.asarray(u, dtype=float)
    if len(u) != V.n_dofs:
        raise ValueError(f"coefficient vector has length {len(u)}, expected {V.n_dofs}")
    phi = _values(V, rule)
    G = _grads(V, rule)
    loc = u[V.cell_dofs]
    uq = loc @ phi.T
    gq = np.einsum("mqia,mi->mqa", G, loc)
    return uq, gq, _points(V, rule), phi, G


# --- linear and multilinear forms -----------------------------------------------
def assemble_stiffness(V: FunctionSpace, quad_degree: int = 2) -> sp.csr_matrix:
    """``K_ij = int grad phi_j . grad phi_i``."""
    _require_lagrange(V, "stiffness")
    rule = _rule(quad_degree, V)
    G = _grads(V, rule)
    local = np.einsum("mq,mqia,mqja->mij", _weights(V, rule), G, G, optimize=True)
    return _scatter_matrix(local, V, V)


def assemble_mass(V: FunctionSpace, W: FunctionSpace, quad_degree: int = 2) -> sp.csr_matrix:
    """``M_ij = int eta_j phi_i`` (``N_u x N_W``)."""
    _require_lagrange(V, "mass")
    _same_mesh(V, W)
    rule = _rule(quad_degree, V, W)
    local = np.einsum(
        "mq,qi,qj->mij", _weights(V, rule), _values(V, rule), _values(W, rule), optimize=True
    )
    return _scatter_matrix(local, V, W)


def assemble_trilinear_stiffness(
    V: FunctionSpace, W_b: FunctionSpace, W_a: FunctionSpace, quad_degree: int = 2
) -> SparseTensor3:
    """``T_ijk = int eta^a_k grad eta^b_j . grad phi_i``."""
    _require_lagrange(V, "trilinear stiffness")
    _same_mesh(V, W_b, W_a)
    if not W_b.family.is_lagrange or W_b.family.degree == 0:
        raise ValueError(f"W_b = {W_b.family.label} has no usable gradient")
    rule = _rule(quad_degree, V, W_b, W_a)
    GV = _grads(V, rule)
    GB = GV if W_b is V else _grads(W_b, rule)
    local = np.einsum(
        "mq,qk,mqja,mqia->mijk", _weights(V, rule), _values(W_a, rule), GB, GV, optimize=True
    )
    return _scatter_tensor(local, V, W_b, W_a)


def assemble_weighted_stiffness_tensor(
    V: FunctionSpace, W_a: FunctionSpace, quad_degree: int = 2
) -> SparseTensor3:
    """``(K_a)_ijk = int eta_k grad phi_j . grad phi_i``."""
    return assemble_trilinear_stiffness(V, V, W_a, quad_degree)


def assemble_mass_trilinear(V: FunctionSpace, W: FunctionSpace, quad_degree: int = 3) -> SparseTensor3:
    """``T_ijk = int eta_k phi_j phi_i`` (dims ``N_u, N_u, N_W``)."""
    _require_lagrange(V, "trilinear mass")
    _same_mesh(V, W)
    rule = _rule(quad_degree, V, W)
    phi = _values(V, rule)
    local = np.einsum(
        "mq,qi,qj,qk->mijk", _weights(V, rule), phi, phi, _values(W, rule), optimize=True
    )
    return _scatter_tensor(local, V, V, W)


def assemble_directional_derivative(
    V: FunctionSpace, W: FunctionSpace, quad_degree: int = 2
) -> sp.csr_matrix:
    """``N_ij = int eta_j (d1 phi_i + d2 phi_i)``."""
    _require_lagrange(V, "directional derivative")
    _same_mesh(V, W)
    rule = _rule(quad_degree, V, W)
    G = _grads(V, rule)
    local = np.einsum(
        "mq,mqi,qj->mij", _weights(V, rule), G.sum(axis=3), _values(W, rule), optimize=True
    )
    return _scatter_matrix(local, V, W)


def assemble_directional_tensor(
    V: FunctionSpace, W: FunctionSpace, quad_degree: int = 3
) -> SparseTensor3:
    """``N_ijk = int eta_k phi_j (d1 phi_i + d2 phi_i)``."""
    _require_lagrange(V, "directional tensor")
    _same_mesh(V, W)
    rule = _rule(quad_degree, V, W)
    G = _grads(V, rule)
    local = np.einsum(
        "mq,mqi,qj,qk->mijk",
        _weights(V, rule),
        G.sum(axis=3),
        _values(V, rule),
        _values(W, rule),
        optimize=True,
    )
    return _scatter_tensor(local, V, V, W)


def assemble_boundary_mass(
    V: FunctionSpace, W_g: FunctionSpace, tag: str = NEUMANN, quad_degree: int = 4
) -> sp.csr_matrix:
    """``G_ij = int_{Gamma_tag} eta_j phi_i`` by Gauss-Legendre on each tagged edge."""
    _require_lagrange(V, "boundary mass")
    mesh = _same_mesh(V, W_g)
    if not W_g.family.is_lagrange:
        raise ValueError("boundary forms need a Lagrange space for the boundary coefficient")
    shape = (V.n_dofs, W_g.n_dofs)
    edges = mesh.tagged_edges(tag)
    if len(edges) == 0:
        return sp.csr_matrix(shape)
    _QUAD_CALLS[0] += 1
    s, w = np.polynomial.legendre.leggauss(quad_degree // 2 + 1)
    s, w = 0.5 * (s + 1.0), 0.5 * w
    eid = mesh.edge_index(edges)
    cells = np.array([mesh.edge_cells[e][0] for e in eid])
    local_edge = np.argmax(mesh.cell_edges[cells] == eid[:, None], axis=1)
    p = mesh.vertices
    length = np.linalg.norm(p[edges[:, 1]] - p[edges[:, 0]], axis=1)

    blocks, rows, cols = [], [], []
    for le, (a, b) in enumerate(LOCAL_EDGES):
        sel = local_edge == le
        if not np.any(sel):
            continue
        bary = np.zeros((len(s), 3))
        bary[:, a], bary[:, b] = 1.0 - s, s
        phi = lagrange_tables(V.family, bary)[0]
        eta = lagrange_tables(W_g.family, bary)[0]
        ref = np.einsum("q,qi,qj->ij", w, phi, eta)
        blocks.append(length[sel, None, None] * ref[None])
        r, c = np.broadcast_arrays(
            V.cell_dofs[cells[sel]][:, :, None], W_g.cell_dofs[cells[sel]][:, None, :]
        )
        rows.append(r)
        cols.append(c)
    return csr(
        np.concatenate([b.ravel() for b in blocks]),
        np.concatenate([r.ravel() for r in rows]),
        np.concatenate([c.ravel() for c in cols]),
        shape,
    )


def assemble_load(V: FunctionSpace, f: Callable, quad_degree: int = 6) -> np.ndarray:
    """``d_i = int f phi_i`` with ``f(x)``, ``x`` of shape ``(..., 2)``."""
    _require_lagrange(V, "load")
    rule = _rule(quad_degree, V)
    fx = np.broadcast_to(f(_points(V, rule)), (V.mesh.n_triangles, rule.n_points))
    local = (_weights(V, rule) * fx) @ _values(V, rule)
    return _scatter_vector(local, V)


# --- interpolation operators -------------------------------------------------------
def _dof_evaluation(V: FunctionSpace, W: FunctionSpace):
    _require_lagrange(V, "interpolation")
    mesh = _same_mesh(V, W)
    cell, slot = W.owner
    bary = W.local_nodes[slot]
    values, ref_grads = lagrange_tables(V.family, bary)  # (N_f, n), (N_f, n, 2)
    grads = np.einsum("fab,fnb->fna", mesh.inv_jacobians_t[cell], ref_grads)
    return V.cell_dofs[cell], values, grads


def interp_matrix(V: FunctionSpace, W: FunctionSpace) -> sp.csr_matrix:
    """``Pi_ij = phi_j(x_i^W)``: evaluates ``u_h`` at every DOF of ``W``."""
    cols, values, _ = _dof_evaluation(V, W)
    rows = np.broadcast_to(np.arange(W.n_dofs)[:, None], cols.shape)
    P = csr(values, rows, cols, (W.n_dofs, V.n_dofs))
    P.eliminate_zeros()
    return P


def interp_grad_tensor(V: FunctionSpace, W: FunctionSpace) -> SparseTensor3:
    """``T_djk = (grad phi_j(x_k^W))_d``; ``T ._2 u`` is the ``2 x N_f`` matrix of gradients.

    DOFs of ``W`` shared by several cells are evaluated in the lowest-index cell.
    """
    cols, _, grads = _dof_evaluation(V, W)
    nf, n = cols.shape
    d = np.broadcast_to(np.arange(2)[None, None, :], (nf, n, 2))
    j = np.broadcast_to(cols[:, :, None], (nf, n, 2))
    k = np.broadcast_to(np.arange(nf)[:, None, None], (nf, n, 2))
    return SparseTensor3.from_coo((2, V.n_dofs, W.n_dofs), d, j, k, grads)


# --- per-iteration (standard Galerkin) assembly ---------------------------------------
def sga_weighted_stiffness(V: FunctionSpace, a_fn, u, quad_degree: int) -> sp.csr_matrix:
    """``K(a, u)_ij = int a(u_h, grad u_h, x) grad phi_j . grad phi_i``."""
    _require_lagrange(V, "weighted stiffness")
    rule = _rule(quad_degree, V)
    uq, gq, xq, _, G = _solution_at_points(V, rule, u)
    coef = _weights(V, rule) * a_fn(uq, gq, xq)
    local = np.einsum("mq,mqia,mqja->mij", coef, G, G, optimize=True)
    return _scatter_matrix(local, V, V)


def sga_weighted_mass(V: FunctionSpace, c_fn, u, quad_degree: int) -> sp.csr_matrix:
    """``M(c, u)_ij = int c(u_h, grad u_h, x) phi_j phi_i``."""
    _require_lagrange(V, "weighted mass")
    rule = _rule(quad_degree, V)
    uq, gq, xq, phi, _ = _solution_at_points(V, rule, u)
    coef = _weights(V, rule) * c_fn(uq, gq, xq)
    local = np.einsum("mq,qi,qj->mij", coef, phi, phi, optimize=True)
    return _scatter_matrix(local, V, V)


def sga_nonlinear_vector(V: FunctionSpace, c_fn, u, quad_degree: int) -> np.ndarray:
    """``M(c, u)_i = int c(u_h, grad u_h, x) phi_i``."""
    _require_lagrange(V, "nonlinear vector")
    rule = _rule(quad_degree, V)
    uq, gq, xq, phi, _ = _solution_at_points(V, rule, u)
    local = (_weights(V, rule) * c_fn(uq, gq, xq)) @ phi
    return _scatter_vector(local, V)


def sga_directional_vector(V: FunctionSpace, f_fn, u, quad_degree: int) -> np.ndarray:
    """``N(u)_i = int f(u_h, grad u_h, x) (d1 phi_i + d2 phi_i)``."""
    _require_lagrange(V, "directional vector")
    rule = _rule(quad_degree, V)
    uq, gq, xq, _, G = _solution_at_points(V, rule, u)
    coef = _weights(V, rule) * f_fn(uq, gq, xq)
    local = np.einsum("mq,mqi->mi", coef, G.sum(axis=3))
    return _scatter_vector(local, V)


# --- boundary conditions ------------------------------------------------------------------
def apply_dirichlet(A, rhs, bc: DirichletBC):
    """Symmetric elimination: known values move to the right-hand side and
    constrained rows/columns become identity rows."""
    A = sp.csr_matrix(A)
    rhs = np.array(rhs, dtype=float)
    n = A.shape[0]
    if A.shape[0] != A.shape[1] or len(rhs) != n:
        raise ValueError("apply_dirichlet needs a square system")
    if len(bc.dofs) == 0:
        return A.copy(), rhs
    if bc.dofs.min() < 0 or bc.dofs.max() >= n:
        raise IndexError("Dirichlet DOF out of range")
    fixed = np.zeros(n, dtype=bool)
    fixed[bc.dofs] = True
    known = np.zeros(n)
    known[bc.dofs] = bc.values
    rhs = rhs - A @ known
    rhs[bc.dofs] = bc.values
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    data = np.where(fixed[rows] | fixed[A.indices], 0.0, A.data)
    B = sp.csr_matrix((data, A.indices.copy(), A.indptr.copy()), shape=A.shape)
    B = (B + sp.diags(fixed.astype(float))).tocsr()
    B.eliminate_zeros()
    return B, rhs
