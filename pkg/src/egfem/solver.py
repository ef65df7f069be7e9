"""Picard and Newton iterations for the standard, tensor, group and extended
group Galerkin formulations, plus semi-implicit time stepping for Burgers.

Every formulation is a "forms" object built once (the offline phase) that
exposes ``lagged_system(u) -> (A, rhs)``. The Picard driver only solves and
checks the update, so iterate sequences of different formulations can be
compared one step at a time.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    apply_dirichlet,
    assemble_directional_derivative,
    assemble_directional_tensor,
    assemble_load,
    assemble_mass,
    assemble_mass_trilinear,
    assemble_stiffness,
    assemble_weighted_stiffness_tensor,
    dirichlet_bc,
    interp_grad_tensor,
    interp_matrix,
    sga_directional_vector,
    sga_nonlinear_vector,
    sga_weighted_mass,
    sga_weighted_stiffness,
)
try:  # CHOLMOD ships with cvxopt
    import cvxopt
    from cvxopt import cholmod

    cholmod.options["supernodal"] = 2
    HAVE_CHOLMOD = True
except ImportError:  # pragma: no cover
    HAVE_CHOLMOD = False

from .elements import ElementFamily, FunctionSpace, build_space
from .problems import DomainError, ProblemSpec

_EPS = np.finfo(float).tiny


class Status(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


class SingularSystemError(RuntimeError):
    """The sparse factorization found a singular (or non-finite) system."""


class TimeSteppingError(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class IterOptions:
    tol: float = 1e-12
    max_iter: int = 500
    divergence_norm_cap: float = 1e8
    log_path: Optional[str] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.divergence_norm_cap > 0:
            raise ValueError("divergence_norm_cap must be positive")


@dataclass(frozen=True, eq=False)
class SolveResult:
    u: np.ndarray
    status: Status
    iterations: int
    aux: Mapping[str, np.ndarray] = field(default_factory=dict)
    history: tuple = ()
    timings: Mapping[str, float] = field(default_factory=dict)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


# --- linear algebra ------------------------------------------------------------------
# Picard and time-stepping matrices are symmetric after symmetric Dirichlet
# elimination; without symmetric mode SuperLU's row pivoting destroys the
# minimum-degree ordering and fill grows by an order of magnitude.
SYMMETRIC_LU = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.01,
                    options=dict(SymmetricMode=True))


def _factorize(A, permc_spec="COLAMD", **kw):
    A = sp.csc_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if not np.all(np.isfinite(A.data)):
        raise SingularSystemError("matrix has non-finite entries")
    try:
        return spla.splu(A, permc_spec=permc_spec, **kw)
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc


def _checked(x):
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("solve produced non-finite values")
    return x


def solve_linear(A, b, permc_spec: str = "COLAMD") -> np.ndarray:
    """Sparse LU solve; raises :class:`SingularSystemError` instead of returning NaN."""
    b = np.asarray(b, dtype=float)
    if b.shape != (A.shape[0],):
        raise ValueError(f"rhs has shape {b.shape}, expected ({A.shape[0]},)")
    return _checked(_factorize(A, permc_spec).solve(b))


class _CholmodFactor:
    """Sparse Cholesky through CHOLMOD; the symbolic analysis is kept while the pattern repeats."""

    def __init__(self):
        self._pattern = None
        self._symbolic = None

    def factor(self, A):
        A = sp.csr_matrix(A)
        if (
            self._pattern is None
            or not np.array_equal(self._pattern[0], A.indptr)
            or not np.array_equal(self._pattern[1], A.indices)
        ):
            rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
            # upper triangle by rows = lower triangle by columns, already column-major
            self._select = np.flatnonzero(A.indices >= rows)
            I = cvxopt.matrix(A.indices[self._select].astype(int))
            J = cvxopt.matrix(rows[self._select].astype(int))
            self._S = cvxopt.spmatrix(cvxopt.matrix(A.data[self._select]), I, J, A.shape)
            # the selection is already in column-major order of the lower triangle
            if not np.array_equal(np.array(self._S.I).ravel(), np.array(I).ravel()):
                raise AssertionError("unexpected CHOLMOD storage order")
            self._pattern = (A.indptr.copy(), A.indices.copy())
            self._symbolic = cholmod.symbolic(self._S)
        S = self._S
        S.V = cvxopt.matrix(A.data[self._select])
        F = self._symbolic
        cholmod.numeric(S, F)  # ArithmeticError when A is not positive definite
        return _CholmodSolve(F)


class _CholmodSolve:
    def __init__(self, F):
        self.F = F

    def solve(self, b):
        x = cvxopt.matrix(np.asarray(b, dtype=float))
        cholmod.solve(self.F, x)
        return np.array(x).ravel()


class _DirichletSolver:
    """Solves ``A u = rhs`` under Dirichlet constraints, optionally reusing one factorization.

    Systems are tried as symmetric positive definite first (Cholesky), with a
    sparse LU fallback.
    """

    def __init__(self, bc, reuse: bool, lu_options: Optional[dict] = None):
        self.bc, self.reuse = bc, reuse
        self.lu_options = SYMMETRIC_LU if lu_options is None else lu_options
        self._chol = _CholmodFactor() if HAVE_CHOLMOD else None
        self._lu = None
        self._A = None

    def _eliminate(self, A, rhs):
        """Symmetric Dirichlet elimination with the reduced sparsity pattern cached per input pattern."""
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        cache = getattr(self, "_elim", None)
        if cache is None or not (
            np.array_equal(cache[0], A.indptr) and np.array_equal(cache[1], A.indices)
        ):
            n = A.shape[0]
            fixed = np.zeros(n, dtype=bool)
            fixed[self.bc.dofs] = True
            rows = np.repeat(np.arange(n), np.diff(A.indptr))
            is_diag = rows == A.indices
            keep = ~(fixed[rows] | fixed[A.indices]) | (is_diag & fixed[rows])
            if np.count_nonzero(is_diag & fixed[rows]) != len(self.bc.dofs):
                return apply_dirichlet(A, rhs, self.bc)
            kept = np.flatnonzero(keep)
            indptr = np.concatenate([[0], np.cumsum(np.bincount(rows[kept], minlength=n))])
            unit = np.flatnonzero((is_diag & fixed[rows])[kept])
            cache = (A.indptr.copy(), A.indices.copy(), kept, A.indices[kept], indptr, unit)
            self._elim = cache
        _, _, kept, indices, indptr, unit = cache
        known = np.zeros(A.shape[0])
        known[self.bc.dofs] = self.bc.values
        b = rhs - A @ known
        b[self.bc.dofs] = self.bc.values
        data = A.data[kept]
        data[unit] = 1.0
        return sp.csr_matrix((data, indices, indptr), shape=A.shape), b

    def _factor(self, Abc):
        if self._chol is not None:
            try:
                return self._chol.factor(Abc)
            except ArithmeticError:
                pass
        return _factorize(Abc, **self.lu_options)

    def solve(self, A, rhs):
        if self.reuse and self._lu is not None:
            known = np.zeros(len(rhs))
            known[self.bc.dofs] = self.bc.values
            b = rhs - self._A @ known
            b[self.bc.dofs] = self.bc.values
            return _checked(self._lu.solve(b))
        Abc, b = self._eliminate(A, rhs)
        lu = self._factor(Abc)
        if self.reuse:
            self._lu, self._A = lu, sp.csr_matrix(A)
        return _checked(lu.solve(b))


# --- formulations ----------------------------------------------------------------------
class _Forms:
    """Common state: trial space, boundary data and the constant linear parts."""

    method = "base"

    def __init__(self, problem: ProblemSpec, V: FunctionSpace, quad_degree: Optional[int]):
        if not (V.family.is_lagrange and V.family.degree >= 1):
            raise ValueError("trial space must be continuous Lagrange")
        self.problem, self.V = problem, V
        self.quad_degree = problem.quad_degree if quad_degree is None else int(quad_degree)
        self.bc = dirichlet_bc(V, problem.u_D if not problem.time_dependent
                               else (lambda x: problem.u_D(x, 0.0)))
        p = V.family.degree
        self.K = assemble_stiffness(V, 2 * (p - 1)) if problem.a is None else None
        self.M = assemble_mass(V, V, 2 * p) if problem.mass else None
        self.d = None if problem.time_dependent else assemble_load(V, problem.d, problem.load_degree)

    @property
    def is_linear(self) -> bool:
        return self.problem.is_linear

    @property
    def constant_matrix(self) -> bool:
        return self.problem.a is None and self.problem.cw is None

    @property
    def size(self) -> int:
        return self.V.n_dofs

    def initial(self) -> np.ndarray:
        u = np.zeros(self.V.n_dofs)
        u[self.bc.dofs] = self.bc.values
        return u

    def _linear_part(self):
        A = None
        if self.K is not None:
            A = self.problem.a_const * self.K
        if self.M is not None:
            A = self.problem.mass * self.M if A is None else A + self.problem.mass * self.M
        return A

    def evaluate_aux(self, u) -> dict:
        return {}


class SGAForms(_Forms):
    """Reassembles every lagged term by quadrature on each call."""

    method = "sga"

    def lagged_system(self, u):
        pr, V, q = self.problem, self.V, self.quad_degree
        A = self._linear_part()
        if pr.a is not None:
            A = sga_weighted_stiffness(V, pr.a, u, q) if A is None else A + sga_weighted_stiffness(V, pr.a, u, q)
        if pr.cw is not None:
            A = A + sga_weighted_mass(V, pr.cw, u, q)
        rhs = self.d.copy()
        if pr.c is not None:
            rhs -= sga_nonlinear_vector(V, pr.c, u, q)
        if pr.conv is not None:
            rhs += 0.5 * sga_directional_vector(V, pr.conv, u, q)
        return A, rhs

    def residual(self, u):
        """Full SGA residual ``F(u)`` (Dirichlet rows hold ``u - u_D``)."""
        A, rhs = self.lagged_system(u)
        F = A @ u - rhs
        F[self.bc.dofs] = u[self.bc.dofs] - self.bc.values
        return F


def _poly(fn, max_degree, term):
    if fn is None:
        return ()
    if fn.poly is None or fn.uses_grad or len(fn.poly) - 1 > max_degree:
        raise ValueError(
            f"tensor-sga needs term {term!r} as a polynomial in u of degree <= {max_degree}"
        )
    return tuple(fn.poly) + (0.0,) * (max_degree + 1 - len(fn.poly))


class TensorSGAForms(_Forms):
    """Exact precomputed tensors for polynomial nonlinearities in ``u``."""

    method = "tensor-sga"

    def __init__(self, problem, V, quad_degree=None):
        super().__init__(problem, V, quad_degree)
        if problem.a is not None:
            raise ValueError("tensor-sga does not support a solution-dependent diffusion")
        p = V.family.degree
        self.cw = _poly(problem.cw, 1, "cw")
        self.c = _poly(problem.c, 2, "c")
        self.conv = _poly(problem.conv, 2, "conv")
        need_M = (self.cw and self.cw[0]) or (self.c and self.c[1])
        need_M3 = (self.cw and self.cw[1]) or (self.c and self.c[2])
        self.MV = assemble_mass(V, V, 2 * p) if need_M else None
        self.M3 = assemble_mass_trilinear(V, V, 3 * p) if need_M3 else None
        self.ones = assemble_load(V, lambda x: np.ones(np.shape(x)[:-1]), p) if self.c and self.c[0] else None
        self.NV = assemble_directional_derivative(V, V, 2 * p - 1) if self.conv and self.conv[1] else None
        self.N3 = assemble_directional_tensor(V, V, 3 * p - 1) if self.conv and self.conv[2] else None
        self.Nvec = None
        if self.conv and self.conv[0]:
            self.Nvec = np.asarray(assemble_directional_derivative(V, V, p - 1).sum(axis=1)).ravel()

    def lagged_system(self, u):
        A = self._linear_part()
        if self.cw:
            c0, c1 = self.cw
            if c0:
                A = A + c0 * self.MV
            if c1:
                A = A + c1 * self.M3.contract_mode3(u)
        rhs = self.d.copy()
        if self.c:
            c0, c1, c2 = self.c
            if c0:
                rhs -= c0 * self.ones
            if c1:
                rhs -= c1 * (self.MV @ u)
            if c2:
                rhs -= c2 * self.M3.double_contract(u, u)
        if self.conv:
            rhs += 0.5 * self.convective(u)
        return A, rhs

    def convective(self, u):
        r0, r1, r2 = self.conv
        out = np.zeros(self.V.n_dofs)
        if r0:
            out += r0 * self.Nvec
        if r1:
            out += r1 * (self.NV @ u)
        if r2:
            out += r2 * self.N3.double_contract(u, u)
        return out


def _exact_degree(term: str, p: int, W: FunctionSpace) -> int:
    w = W.family.degree if W.family.is_lagrange else 0
    return {"a": 2 * (p - 1) + w, "cw": 2 * p + w, "c": p + w, "conv": p - 1 + w}[term]


WMapLike = Union[ElementFamily, str, Mapping[str, Union[ElementFamily, str, FunctionSpace]]]


class EGFEMForms(_Forms):
    """Precomputed forms with every nonlinear group interpolated onto its own space ``W``.

    With ``W = V`` for every term this is the group finite element method.
    """

    method = "egfem"

    def __init__(self, problem: ProblemSpec, V: FunctionSpace, W_map: WMapLike, quad_degree=None):
        super().__init__(problem, V, quad_degree)
        terms = problem.terms()
        if isinstance(W_map, (ElementFamily, str)):
            W_map = {t: W_map for t in terms}
        missing = set(terms) - set(W_map)
        if missing:
            raise ValueError(f"no approximation space given for {sorted(missing)}")
        p = V.family.degree
        self.spaces, self.Pu, self.Pg, self.Pg_rows = {}, {}, {}, {}
        for t in terms:
            W = W_map[t]
            if isinstance(W, str):
                W = ElementFamily.parse(W)
            if isinstance(W, ElementFamily):
                W = V if W == V.family else build_space(V.mesh, W)
            self.spaces[t] = W
            self.Pu[t] = interp_matrix(V, W)
            if terms[t].uses_grad:
                self.Pg[t] = interp_grad_tensor(V, W)
                self.Pg_rows[t] = [self.Pg[t].slice_first(dd).T.tocsr() for dd in range(2)]
        deg = {t: _exact_degree(t, p, self.spaces[t]) for t in terms}
        self.Ka = assemble_weighted_stiffness_tensor(V, self.spaces["a"], deg["a"]) if "a" in terms else None
        self.Mcw = assemble_mass_trilinear(V, self.spaces["cw"], deg["cw"]) if "cw" in terms else None
        self.Mc = assemble_mass(V, self.spaces["c"], deg["c"]) if "c" in terms else None
        self.Nf = (
            assemble_directional_derivative(V, self.spaces["conv"], deg["conv"]) if "conv" in terms else None
        )
        self.terms = terms

    @property
    def size(self) -> int:
        return self.V.n_dofs + sum(W.n_dofs for W in self.spaces.values())

    def _arguments(self, t, u):
        W = self.spaces[t]
        uw = self.Pu[t] @ u
        if t in self.Pg:
            gw = self.Pg[t].contract_mode2(u).toarray().T
        else:
            gw = np.zeros((W.n_dofs, 2))
        return uw, gw, W.dof_coords

    def evaluate_aux(self, u) -> dict:
        return {t: fn(*self._arguments(t, u)) for t, fn in self.terms.items()}

    def system_from_aux(self, aux):
        """Operator and load of the ``u``-rows for fixed coefficient vectors."""
        A = self._linear_part()
        if self.Ka is not None:
            Aa = self.Ka.contract_mode3(aux["a"])
            A = Aa if A is None else A + Aa
        if self.Mcw is not None:
            A = A + self.Mcw.contract_mode3(aux["cw"])
        rhs = self.d.copy()
        if self.Mc is not None:
            rhs -= self.Mc @ aux["c"]
        if self.Nf is not None:
            rhs += 0.5 * (self.Nf @ aux["conv"])
        return A, rhs

    def lagged_system(self, u):
        return self.system_from_aux(self.evaluate_aux(u))

    # --- Newton on the extended unknown z = (u, aux in term order) ---
    def pack(self, u, aux) -> np.ndarray:
        return np.concatenate([u] + [aux[t] for t in self.terms])

    def unpack(self, z):
        z = np.asarray(z, dtype=float)
        if len(z) != self.size:
            raise ValueError(f"state has length {len(z)}, expected {self.size}")
        n = self.V.n_dofs
        u, aux, off = z[:n], {}, n
        for t in self.terms:
            m = self.spaces[t].n_dofs
            aux[t] = z[off:off + m]
            off += m
        return u, aux

    def residual(self, z) -> np.ndarray:
        u, aux = self.unpack(z)
        A, rhs = self.system_from_aux(aux)
        Fu = A @ u - rhs
        Fu[self.bc.dofs] = u[self.bc.dofs] - self.bc.values
        parts = [Fu] + [aux[t] - fn(*self._arguments(t, u)) for t, fn in self.terms.items()]
        return np.concatenate(parts)

    def jacobian(self, z) -> sp.csr_matrix:
        u, aux = self.unpack(z)
        n = self.V.n_dofs
        free = np.ones(n)
        free[self.bc.dofs] = 0.0
        Dfree = sp.diags(free)
        A, _ = self.system_from_aux(aux)
        Juu = (Dfree @ A + sp.diags(1.0 - free)).tocsr()
        coupling = {
            "a": lambda: self.Ka.contract_mode2(u),
            "cw": lambda: self.Mcw.contract_mode2(u),
            "c": lambda: self.Mc,
            "conv": lambda: -0.5 * self.Nf,
        }
        top = [Juu] + [(Dfree @ coupling[t]()).tocsr() for t in self.terms]
        blocks = [top]
        for r, (t, fn) in enumerate(self.terms.items()):
            uw, gw, x = self._arguments(t, u)
            D = sp.diags(fn.d_u(uw, gw, x)) @ self.Pu[t]
            if t in self.Pg:
                dg = fn.d_grad(uw, gw, x)
                for dd in range(2):
                    D = D + sp.diags(dg[:, dd]) @ self.Pg_rows[t][dd]
            row = [-D] + [None] * len(self.terms)
            row[r + 1] = sp.identity(self.spaces[t].n_dofs, format="csr")
            blocks.append(row)
        return sp.bmat(blocks, format="csr")


def build_forms(problem: ProblemSpec, V: FunctionSpace, method: str, quad_degree=None) -> _Forms:
    """Forms object for a method id: ``sga``, ``tensor-sga``, ``gfem``, ``egfem-p0`` ... ``egfem-i4``."""
    method = method.lower()
    if method == "sga":
        return SGAForms(problem, V, quad_degree)
    if method == "tensor-sga":
        return TensorSGAForms(problem, V, quad_degree)
    if method == "gfem":
        if not problem.gfem_applicable:
            raise ValueError(f"gfem is not applicable to {problem.name}")
        return EGFEMForms(problem, V, V.family, quad_degree)
    if method.startswith("egfem-"):
        return EGFEMForms(problem, V, ElementFamily.parse(method[6:].upper()), quad_degree)
    raise ValueError(f"unknown method {method!r}")


# --- drivers --------------------------------------------------------------------------------
def _write_log(path, history):
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "relative_update"])
        for i, r in enumerate(history, 1):
            w.writerow([i, format(r, ".17g")])


def picard(forms: _Forms, opts: Optional[IterOptions] = None,
           callback: Optional[Callable[[int, np.ndarray], None]] = None) -> SolveResult:
    """Fixed-point iteration ``A(u^n) u^{n+1} = rhs(u^n)`` on prebuilt forms."""
    opts = opts or IterOptions()
    solver = _DirichletSolver(forms.bc, reuse=forms.constant_matrix)
    u = forms.initial()
    history, status, message, it = [], Status.MAX_ITER, "", 0
    t0 = time.perf_counter()
    for it in range(1, opts.max_iter + 1):
        try:
            A, rhs = forms.lagged_system(u)
            u_new = solver.solve(A, rhs)
        except (SingularSystemError, DomainError, FloatingPointError) as exc:
            status, message = Status.DIVERGED, str(exc)
            break
        diff = float(np.linalg.norm(u_new - u))
        if not np.isfinite(diff) or diff > opts.divergence_norm_cap:
            status, message = Status.DIVERGED, f"update norm {diff:.3g} at iteration {it}"
            break
        rel = diff / max(float(np.linalg.norm(u_new)), _EPS)
        u = u_new
        history.append(rel)
        if callback is not None:
            callback(it, u)
        if rel <= opts.tol or forms.is_linear:
            status = Status.CONVERGED
            break
    online = time.perf_counter() - t0
    try:
        aux = forms.evaluate_aux(u)
    except DomainError:
        aux = {}
    _write_log(opts.log_path, history)
    return SolveResult(u, status, it,
                       aux, tuple(history), {"online": online}, message)


def _timed(build):
    t0 = time.perf_counter()
    forms = build()
    return forms, time.perf_counter() - t0


def _with_offline(result: SolveResult, offline: float) -> SolveResult:
    timings = dict(result.timings, offline=offline)
    timings["total"] = offline + timings["online"]
    return SolveResult(result.u, result.status, result.iterations, result.aux, result.history,
                       timings, result.message)


def picard_sga(problem: ProblemSpec, V: FunctionSpace, opts: Optional[IterOptions] = None,
               quad_degree: Optional[int] = None, callback=None) -> SolveResult:
    forms, offline = _timed(lambda: SGAForms(problem, V, quad_degree))
    return _with_offline(picard(forms, opts, callback), offline)


def picard_tensor_sga(problem: ProblemSpec, V: FunctionSpace, opts: Optional[IterOptions] = None,
                      callback=None) -> SolveResult:
    forms, offline = _timed(lambda: TensorSGAForms(problem, V))
    return _with_offline(picard(forms, opts, callback), offline)


def picard_egfem(problem: ProblemSpec, V: FunctionSpace, W_map: WMapLike,
                 forms: Optional[EGFEMForms] = None, opts: Optional[IterOptions] = None,
                 callback=None) -> SolveResult:
    offline = 0.0
    if forms is None:
        forms, offline = _timed(lambda: EGFEMForms(problem, V, W_map))
    return _with_offline(picard(forms, opts, callback), offline)


def newton_egfem(problem: ProblemSpec, V: FunctionSpace, W_map: WMapLike,
                 forms: Optional[EGFEMForms] = None, opts: Optional[IterOptions] = None) -> SolveResult:
    """Undamped Newton on the extended system; the Jacobian uses only precomputed forms."""
    opts = opts or IterOptions()
    offline = 0.0
    if forms is None:
        forms, offline = _timed(lambda: EGFEMForms(problem, V, W_map))
    n = V.n_dofs
    t0 = time.perf_counter()
    status, message, history, it = Status.MAX_ITER, "", [], 0
    u = forms.initial()
    try:
        z = forms.pack(u, forms.evaluate_aux(u))
    except DomainError as exc:
        z, status, message = forms.pack(u, {t: np.zeros(W.n_dofs) for t, W in forms.spaces.items()}), \
            Status.DIVERGED, str(exc)
    if status is not Status.DIVERGED:
        for it in range(1, opts.max_iter + 1):
            try:
                dz = solve_linear(forms.jacobian(z), -forms.residual(z))
            except (SingularSystemError, DomainError) as exc:
                status, message = Status.DIVERGED, str(exc)
                break
            diff = float(np.linalg.norm(dz[:n]))
            if not np.isfinite(diff) or diff > opts.divergence_norm_cap:
                status, message = Status.DIVERGED, f"update norm {diff:.3g} at iteration {it}"
                break
            z = z + dz
            rel = diff / max(float(np.linalg.norm(z[:n])), _EPS)
            history.append(rel)
            if rel <= opts.tol or problem.is_linear:
                status = Status.CONVERGED
                break
    u = z[:n].copy()
    try:
        aux = forms.evaluate_aux(u)
    except DomainError:
        aux = {}
    online = time.perf_counter() - t0
    _write_log(opts.log_path, history)
    return SolveResult(u, status, it, aux, tuple(history),
                       {"offline": offline, "online": online, "total": offline + online}, message)


def newton_sga_fd(problem: ProblemSpec, V: FunctionSpace, opts: Optional[IterOptions] = None,
                  quad_degree: Optional[int] = None, h: float = 1e-7) -> SolveResult:
    """Reference Newton for the standard formulation with a dense finite-difference Jacobian."""
    if V.n_dofs > 17 * 17 * 4:
        raise ValueError("finite-difference Newton is a small-mesh reference only")
    opts = opts or IterOptions()
    forms = SGAForms(problem, V, quad_degree)
    u = forms.initial()
    status, history, it = Status.MAX_ITER, [], 0
    for it in range(1, opts.max_iter + 1):
        F = forms.residual(u)
        J = np.empty((len(u), len(u)))
        for j in range(len(u)):
            e = np.zeros(len(u))
            e[j] = h
            J[:, j] = (forms.residual(u + e) - forms.residual(u - e)) / (2 * h)
        du = np.linalg.solve(J, -F)
        diff = float(np.linalg.norm(du))
        if not np.isfinite(diff) or diff > opts.divergence_norm_cap:
            status = Status.DIVERGED
            break
        u = u + du
        rel = diff / max(float(np.linalg.norm(u)), _EPS)
        history.append(rel)
        if rel <= opts.tol:
            status = Status.CONVERGED
            break
    return SolveResult(u, status, it, {}, tuple(history))


# --- Burgers ------------------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: tuple
    timings: Mapping[str, float]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


BURGERS_VARIANTS = ("sga", "tensor-sga", "gfem", "egfem")


def semi_implicit_burgers(variant: str, problem: ProblemSpec, V: FunctionSpace,
                          W: Optional[Union[ElementFamily, str]] = None,
                          nu: Optional[float] = None, dt: Optional[float] = None,
                          T: Optional[float] = None, u0: Optional[Callable] = None,
                          quad_degree: Optional[int] = None, keep_states: bool = False) -> Trajectory:
    """``(M + dt nu K) u^{n+1} = M u^n + dt (1/2 N(u^n) + d^{n+1})`` with zero Dirichlet data."""
    variant = variant.lower()
    if variant not in BURGERS_VARIANTS:
        raise ValueError(f"unknown Burgers variant {variant!r}")
    if not problem.time_dependent:
        raise ValueError("semi-implicit stepping needs a time-dependent problem")
    nu = problem.params["nu"] if nu is None else nu
    dt = problem.params["dt"] if dt is None else dt
    T = problem.params["T"] if T is None else T
    if dt <= 0 or nu <= 0:
        raise ValueError("dt and nu must be positive")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a positive multiple of dt")
    q = problem.quad_degree if quad_degree is None else quad_degree
    t0 = time.perf_counter()
    if variant == "sga":
        forms = SGAForms(problem, V, q)
        conv = lambda u: sga_directional_vector(V, problem.conv, u, q)  # noqa: E731
    elif variant == "tensor-sga":
        forms = TensorSGAForms(problem, V, q)
        conv = forms.convective
    else:
        fam = V.family if variant == "gfem" else W
        if fam is None:
            raise ValueError("egfem variant needs an approximation space W")
        forms = EGFEMForms(problem, V, {"conv": fam}, q)
        conv = lambda u: forms.Nf @ forms.evaluate_aux(u)["conv"]  # noqa: E731
    p = V.family.degree
    M = assemble_mass(V, V, 2 * p)
    K = forms.K if forms.K is not None else assemble_stiffness(V, 2 * (p - 1))
    bc = dirichlet_bc(V, lambda x: np.zeros(len(x)))
    solver = _DirichletSolver(bc, reuse=True)
    A = (M + dt * nu * K).tocsr()
    offline = time.perf_counter() - t0
    init = u0 if u0 is not None else (lambda x: problem.exact(x, 0.0))
    u = np.asarray(init(V.dof_coords), dtype=float) * np.ones(V.n_dofs)
    states = [u.copy()]
    t1 = time.perf_counter()
    for n in range(1, steps + 1):
        t = n * dt
        d = assemble_load(V, lambda x: problem.d(x, t), problem.load_degree)
        rhs = M @ u + dt * (0.5 * conv(u) + d)
        try:
            u = solver.solve(A, rhs)
        except SingularSystemError as exc:
            raise TimeSteppingError(n, str(exc)) from exc
        if not np.all(np.isfinite(u)):
            raise TimeSteppingError(n, "non-finite state")
        if keep_states or n == steps:
            states.append(u.copy())
    online = time.perf_counter() - t1
    times = dt * np.arange(steps + 1) if keep_states else np.array([0.0, steps * dt])
    return Trajectory(times, tuple(states), {"offline": offline, "online": online,
                                             "total": offline + online})


__all__ = [
    "Status",
    "IterOptions",
    "SolveResult",
    "SingularSystemError",
    "TimeSteppingError",
    "solve_linear",
    "SGAForms",
    "TensorSGAForms",
    "EGFEMForms",
    "build_forms",
    "picard",
    "picard_sga",
    "picard_tensor_sga",
    "picard_egfem",
    "newton_egfem",
    "newton_sga_fd",
    "semi_implicit_burgers",
    "Trajectory",
    "BURGERS_VARIANTS",
]
