"""Independent oracle checks, runnable from the command line.

Each check returns a :class:`CheckResult`. Oracles use a different route from
the code under test: dense arrays for tensor kernels, exact symbolic
integration for element matrices, central finite differences for Jacobians
and strong-form residuals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .assembly import (
    assemble_directional_derivative,
    assemble_directional_tensor,
    assemble_mass,
    assemble_mass_trilinear,
    assemble_stiffness,
    assemble_weighted_stiffness_tensor,
)
from .elements import P0, P1, P2, P3, build_space, dunavant_rule, reference_nodes
from .mesh import Mesh
from .problems import ProblemSpec, get_problem
from .solver import build_forms
from .tensor import SparseTensor3


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name}: {self.value:.3e} (tol {self.tolerance:.0e}) {self.detail}".rstrip()


def _result(name, value, tol, detail=""):
    return CheckResult(name, bool(value <= tol), float(value), tol, detail)


# --- tensor identities ------------------------------------------------------------------
def random_tensor(rng, shape=None, density=None) -> SparseTensor3:
    shape = shape or tuple(int(s) for s in rng.integers(1, 9, size=3))
    nnz = int(rng.integers(0, 3 * int(np.prod(shape)) + 1)) if density is None else \
        int(density * np.prod(shape))
    idx = [rng.integers(0, s, size=nnz) for s in shape]
    return SparseTensor3.from_coo(shape, *idx, rng.standard_normal(nnz))


def check_tensor_identities(n_instances: int = 200, seed: int = 0, tol: float = 1e-14) -> CheckResult:
    """``T:(w (x) v) = (T.v) w = (T._2 w) v`` and agreement with dense einsum."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        T = random_tensor(rng)
        n1, n2, n3 = T.shape
        w, v = rng.standard_normal(n2), rng.standard_normal(n3)
        D = T.to_dense()
        ref = np.einsum("ijk,j,k->i", D, w, v)
        scale = max(1.0, float(np.abs(np.abs(D).sum(axis=(1, 2)) * np.abs(w).max() * np.abs(v).max()).max()))
        for got in (T.double_contract(w, v), T.contract_mode3(v) @ w, T.contract_mode2(w) @ v):
            worst = max(worst, float(np.abs(got - ref).max(initial=0.0)) / scale)
        worst = max(worst, float(np.abs(T.contract_mode3(v).toarray() - D @ v).max(initial=0.0)) / scale)
        worst = max(worst, float(np.abs(T.contract_mode2(w).toarray()
                                        - np.einsum("ijk,j->ik", D, w)).max(initial=0.0)) / scale)
    return _result("tensor contraction identities", worst, tol, f"({n_instances} instances)")


# --- quadrature ------------------------------------------------------------------------
def monomial_integral(a: int, b: int) -> Fraction:
    """Exact ``int x^a y^b`` over the reference triangle."""
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


def check_quadrature(tol: float = 1e-14) -> CheckResult:
    worst = 0.0
    for k in range(1, 7):
        rule = dunavant_rule(k)
        pts = rule.points[:, 1:]  # (x, y) = (lambda1, lambda2) on the reference triangle
        for a in range(k + 1):
            for b in range(k + 1 - a):
                q = 0.5 * float(np.sum(rule.weights * pts[:, 0] ** a * pts[:, 1] ** b))
                worst = max(worst, abs(q - float(monomial_integral(a, b))))
    return _result("Dunavant rules integrate monomials exactly", worst, tol)


# --- element matrices vs exact symbolic integration -------------------------------------------
def _single_triangle(vertices) -> Mesh:
    return Mesh(np.asarray(vertices, dtype=float), np.array([[0, 1, 2]]),
                np.array([[0, 1], [1, 2], [2, 0]]), np.array(["dirichlet"] * 3))


def symbolic_element_matrices(degree: int, vertices, w_degree: int):
    """Exact element forms for Lagrange basis of ``degree`` (trial) and ``w_degree`` (coefficient)."""
    import sympy as s

    x, y = s.symbols("x y")
    verts = [[s.Rational(str(c)) if not isinstance(c, Fraction) else s.Rational(c.numerator, c.denominator)
              for c in v] for v in vertices]

    def basis(deg):
        if deg == 0:
            return [s.Integer(1)]
        lam_nodes = reference_nodes({1: P1, 2: P2, 3: P3}[deg])
        nodes = []
        for lam in lam_nodes:
            fr = [s.nsimplify(float(v), rational=True, tolerance=1e-12) for v in lam]
            nodes.append((fr[1], fr[2]))
        monos = [x**i * y**j for i in range(deg + 1) for j in range(deg + 1 - i)]
        Vm = s.Matrix([[m.subs({x: px, y: py}) for m in monos] for px, py in nodes])
        C = Vm.inv()
        return [sum(C[r, c] * monos[r] for r in range(len(monos))) for c in range(len(nodes))]

    (x0, y0), (x1, y1), (x2, y2) = verts
    J = s.Matrix([[x1 - x0, x2 - x0], [y1 - y0, y2 - y0]])
    det = J.det()
    JinvT = J.inv().T
    phi = basis(degree)
    eta = basis(w_degree)

    def grad(f):
        return JinvT * s.Matrix([s.diff(f, x), s.diff(f, y)])

    def integrate(f):
        poly = s.Poly(s.expand(f), x, y)
        total = sum(
            c * s.Rational(factorial(a) * factorial(b), factorial(a + b + 2))
            for (a, b), c in poly.terms()
        )
        return total * abs(det)

    n, m = len(phi), len(eta)
    gphi = [grad(p) for p in phi]
    K = [[integrate((gphi[i].T * gphi[j])[0]) for j in range(n)] for i in range(n)]
    M = [[integrate(phi[i] * eta[j]) for j in range(m)] for i in range(n)]
    N = [[integrate(eta[j] * (gphi[i][0] + gphi[i][1])) for j in range(m)] for i in range(n)]
    T = [[[integrate(eta[k] * phi[j] * phi[i]) for k in range(m)] for j in range(n)] for i in range(n)]
    Ka = [[[integrate(eta[k] * (gphi[j].T * gphi[i])[0]) for k in range(m)] for j in range(n)]
          for i in range(n)]
    D = [[[integrate(eta[k] * phi[j] * (gphi[i][0] + gphi[i][1])) for k in range(m)] for j in range(n)]
         for i in range(n)]
    f = lambda a: np.array(a, dtype=float)  # noqa: E731
    return {"K": f(K), "M": f(M), "N": f(N), "T": f(T), "Ka": f(Ka), "D": f(D)}


ORACLE_TRIANGLE = ((0, 0), (2, Fraction(1, 2)), (Fraction(1, 3), Fraction(3, 2)))


def element_matrix_errors(degree: int, w_degree: int, vertices=ORACLE_TRIANGLE) -> dict:
    """Max absolute error of assembled element forms against the symbolic oracle."""
    exact = symbolic_element_matrices(degree, vertices, w_degree)
    mesh = _single_triangle([[float(c) for c in v] for v in vertices])
    fam = {1: P1, 2: P2, 3: P3}
    V = build_space(mesh, fam[degree])
    W = build_space(mesh, P0 if w_degree == 0 else fam[w_degree])
    pv, pw = V.cell_dofs[0], W.cell_dofs[0]
    q = 6
    got = {
        "K": assemble_stiffness(V, q).toarray()[np.ix_(pv, pv)],
        "M": assemble_mass(V, W, q).toarray()[np.ix_(pv, pw)],
        "N": assemble_directional_derivative(V, W, q).toarray()[np.ix_(pv, pw)],
        "T": assemble_mass_trilinear(V, W, q).to_dense()[np.ix_(pv, pv, pw)],
        "Ka": assemble_weighted_stiffness_tensor(V, W, q).to_dense()[np.ix_(pv, pv, pw)],
        "D": assemble_directional_tensor(V, W, q).to_dense()[np.ix_(pv, pv, pw)],
    }
    return {k: float(np.abs(got[k] - exact[k]).max()) for k in exact}


def check_element_matrices(tol: float = 1e-13) -> CheckResult:
    worst, where = 0.0, ""
    for degree, w_degree in ((1, 0), (1, 1), (1, 2), (1, 3), (2, 1)):
        for form, err in element_matrix_errors(degree, w_degree).items():
            if err >= worst:
                worst, where = err, f"P{degree}/P{w_degree} {form}"
    return _result("element forms vs exact symbolic integration", worst, tol, f"(worst {where})")


# --- Jacobians ------------------------------------------------------------------------------
JACOBIAN_CASES = (
    ("quadratic", {}, "egfem-p2"),
    ("burgers", {}, "egfem-p2"),
    ("superconductivity", {"formulation": "a"}, "egfem-p2"),
    ("superconductivity", {"formulation": "b"}, "egfem-p3"),
    ("superconductivity", {"formulation": "c"}, "egfem-i4"),
    ("biochemical", {}, "egfem-p0"),
    ("plaplace", {}, "egfem-p0"),
    ("minimal-surface", {}, "egfem-i1"),
)


def stationary(problem: ProblemSpec, t: float = 0.5, mass: float = 100.0) -> ProblemSpec:
    """Time-dependent problems are frozen into one implicit step for Jacobian checks."""
    return problem.freeze_time(t, mass) if problem.time_dependent else problem


def jacobian_fd_error(problem: ProblemSpec, method: str, level: int = 3, n_cols: int = 40,
                      seed: int = 0, h: float = 1e-6) -> float:
    """Max relative column error of the block Jacobian against central differences of the residual."""
    rng = np.random.default_rng(seed)
    problem = stationary(problem)
    mesh = problem.mesh(level if problem.domain == "square" else max(level - 1, 1))
    forms = build_forms(problem, build_space(mesh, P1), method)
    u = forms.V.interpolate(problem.exact) + 0.05 * rng.standard_normal(forms.V.n_dofs)
    z = forms.pack(u, forms.evaluate_aux(u)) + 0.01 * rng.standard_normal(forms.size)
    J = forms.jacobian(z).tocsc()
    worst = 0.0
    cols = rng.choice(forms.size, size=min(n_cols, forms.size), replace=False)
    for j in cols:
        e = np.zeros(forms.size)
        e[j] = h
        fd = (forms.residual(z + e) - forms.residual(z - e)) / (2 * h)
        col = J[:, j].toarray().ravel()
        worst = max(worst, float(np.linalg.norm(fd - col) / max(np.linalg.norm(col), 1e-300)))
    return worst


def check_jacobians(tol: float = 1e-6) -> CheckResult:
    worst, where = 0.0, ""
    for name, kw, method in JACOBIAN_CASES:
        err = jacobian_fd_error(get_problem(name, **kw), method)
        if err >= worst:
            worst, where = err, f"{name}{kw or ''} {method}"
    return _result("Newton block Jacobian vs finite differences", worst, tol, f"(worst {where})")


# --- strong-form residual of manufactured solutions -------------------------------------------
_FD4 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_FD4_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])


def _fd_derivative(f, x, axis, h):
    e = np.zeros(2)
    e[axis] = h
    return sum(c * f(x + s * e) for c, s in zip(_FD4, _FD4_OFFSETS)) / h


def strong_residual(problem: ProblemSpec, x: np.ndarray, t: float = 0.5, h: float = 1e-3) -> np.ndarray:
    """Residual of the strong form at points ``x`` using only the exact solution and finite differences."""
    if problem.time_dependent:
        u = lambda p: problem.exact(p, t)  # noqa: E731
        ut = sum(c * problem.exact(x, t + s * h) for c, s in zip(_FD4, _FD4_OFFSETS)) / h
        d = problem.d(x, t)
    else:
        u = problem.exact
        ut = 0.0
        d = problem.d(x)

    def grad(p):
        return np.stack([_fd_derivative(u, p, 0, h), _fd_derivative(u, p, 1, h)], axis=-1)

    def flux(p, axis):
        g = grad(p)
        coef = problem.a(u(p), g, p) if problem.a is not None else problem.a_const
        return coef * g[..., axis]

    div = _fd_derivative(lambda p: flux(p, 0), x, 0, h) + _fd_derivative(lambda p: flux(p, 1), x, 1, h)
    ux, g0 = u(x), grad(x)
    r = ut - div + problem.mass * ux - d
    if problem.cw is not None:
        r = r + problem.cw(ux, g0, x) * ux
    if problem.c is not None:
        r = r + problem.c(ux, g0, x)
    if problem.conv is not None:
        f = problem.conv
        r = r + 0.5 * sum(_fd_derivative(lambda p: f(u(p), grad(p), p), x, ax, h) for ax in range(2))
    return r


RESIDUAL_PROBLEMS = (
    ("quadratic", {}),
    ("quadratic-trig", {}),
    ("burgers", {}),
    ("superconductivity", {"formulation": "a"}),
    ("superconductivity", {"formulation": "b", "nu": 1e-2}),
    ("superconductivity", {"formulation": "c", "nu": 1e-3}),
    ("biochemical", {"sigma": 2.0, "k": 0.5}),
    ("plaplace", {}),
    ("plaplace", {"p": 3.0}),
    ("minimal-surface", {}),
)


def sample_interior(problem: ProblemSpec, n: int, rng, margin: float = 0.05) -> np.ndarray:
    if problem.domain == "disk":
        # stay away from the origin, where the p-Laplace flux is singular
        r = rng.uniform(0.2, 1 - margin, n)
        th = rng.uniform(0, 2 * np.pi, n)
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    return rng.uniform(margin, 1 - margin, size=(n, 2))


def residual_oracle_error(problem: ProblemSpec, n: int = 50, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    x = sample_interior(problem, n, rng)
    r = np.array([strong_residual(problem, xi) for xi in x])
    d = np.array([problem.d(xi, 0.5) if problem.time_dependent else problem.d(xi) for xi in x])
    return float(np.abs(r).max() / max(1.0, np.abs(d).max()))


def check_residuals(tol: float = 1e-6) -> CheckResult:
    worst, where = 0.0, ""
    for name, kw in RESIDUAL_PROBLEMS:
        err = residual_oracle_error(get_problem(name, **kw))
        if err >= worst:
            worst, where = err, f"{name}{kw or ''}"
    return _result("manufactured sources vs strong-form residual", worst, tol, f"(worst {where})")


CHECKS = {
    "tensor": check_tensor_identities,
    "quadrature": check_quadrature,
    "elements": check_element_matrices,
    "jacobian": check_jacobians,
    "residual": check_residuals,
}


def run_all(names=None) -> list:
    names = list(CHECKS) if not names else list(names)
    return [CHECKS[n]() for n in names]
