"""Benchmark problems of the form

    -div(a(x, u, grad u) grad u) + cw(u) u + mass * u + c(x, u, grad u)
        + 1/2 (d1 + d2) conv(u) = d       in Omega,    u = u_D on the boundary,

plus a time derivative for Burgers' equation. ``cw`` is a coefficient lagged
inside a weighted mass matrix, ``c`` a term lagged as a whole vector, and
``conv`` a convective group integrated by parts.

Manufactured sources are hand-derived closed forms; the test suite checks
each of them against a finite-difference residual of the exact solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .assembly import PointwiseFn
from .elements import P0, P1, P2, P3, ElementFamily, QuadratureEmbedded
from .mesh import Mesh, generate_unit_disk, generate_unit_square

TERMS = ("a", "cw", "c", "conv")


class DomainError(ValueError):
    """A coefficient was evaluated outside its domain of definition."""


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    d: Callable
    u_D: Callable
    exact: Optional[Callable] = None
    a: Optional[PointwiseFn] = None
    a_const: float = 1.0
    cw: Optional[PointwiseFn] = None
    mass: float = 0.0
    c: Optional[PointwiseFn] = None
    conv: Optional[PointwiseFn] = None
    domain: str = "square"
    params: dict = field(default_factory=dict)
    recommended: dict = field(default_factory=dict)
    gfem_applicable: bool = True
    quad_degree: int = 3
    load_degree: int = 6
    time_dependent: bool = False
    variants: tuple = ()

    def terms(self) -> dict:
        """Active nonlinear terms, in the fixed order ``a, cw, c, conv``."""
        return {t: getattr(self, t) for t in TERMS if getattr(self, t) is not None}

    @property
    def is_linear(self) -> bool:
        return not self.terms()

    def mesh(self, level: int, diagonal: str = "main") -> Mesh:
        """Unit square with ``2**level`` cells per side, or the disk at refinement ``level``."""
        if self.domain == "disk":
            return generate_unit_disk(level)
        return generate_unit_square(2**level, diagonal)

    def freeze_time(self, t: float, mass: float = 0.0) -> "ProblemSpec":
        """Stationary problem with data frozen at time ``t`` and an added reaction term."""
        if not self.time_dependent:
            raise ValueError(f"{self.name} is already stationary")
        d, u_D, exact = self.d, self.u_D, self.exact
        return replace(
            self,
            name=f"{self.name}@t={t:g}",
            d=lambda x: d(x, t),
            u_D=lambda x: u_D(x, t),
            exact=None if exact is None else (lambda x: exact(x, t)),
            mass=self.mass + mass,
            time_dependent=False,
        )


def _xy(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def _u(u, g, x):
    return np.asarray(u, dtype=float)


def _norm2(g):
    g = np.asarray(g, dtype=float)
    return g[..., 0] ** 2 + g[..., 1] ** 2


# --- shared manufactured solution x1 x2 (x1 + x2) -------------------------------------------
def _cubic(x):
    x1, x2 = _xy(x)
    return x1 * x2 * (x1 + x2)


def _cubic_grad(x):
    x1, x2 = _xy(x)
    return np.stack([2 * x1 * x2 + x2**2, x1**2 + 2 * x1 * x2], axis=-1)


def _cubic_laplacian(x):
    x1, x2 = _xy(x)
    return 2 * (x1 + x2)


def quadratic_problem(bc_variant: str = "polynomial") -> ProblemSpec:
    """-Laplace u + u^2 = d on the unit square."""
    c = PointwiseFn(lambda u, g, x: _u(u, g, x) ** 2, du=lambda u, g, x: 2 * _u(u, g, x),
                    poly=(0.0, 0.0, 1.0))
    if bc_variant == "polynomial":
        exact = _cubic

        def d(x):
            x1, x2 = _xy(x)
            return -2 * (x1 + x2) + x1**2 * x2**2 * (x1 + x2) ** 2

        name = "quadratic"
    elif bc_variant == "trig":
        def exact(x):
            x1, x2 = _xy(x)
            return np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)

        def d(x):
            s = exact(x)
            return 8 * np.pi**2 * s + s**2

        name = "quadratic-trig"
    else:
        raise ValueError(f"unknown boundary variant {bc_variant!r}")
    return ProblemSpec(
        name=name,
        d=d,
        u_D=exact,
        exact=exact,
        c=c,
        params={"bc_variant": bc_variant},
        recommended={"c": (P1, P2, QuadratureEmbedded(3))},
        quad_degree=3,
    )


# --- Burgers -----------------------------------------------------------------------------------
def _burgers_parts(x, t):
    x1, x2 = _xy(x)
    e1, e2, e3 = np.exp(-0.5 * t), np.exp(-0.25 * t), np.exp(-t)
    P = 10 * (x1**2 - x1) * (x2**2 - x2)
    Px = 10 * (2 * x1 - 1) * (x2**2 - x2)
    Py = 10 * (x1**2 - x1) * (2 * x2 - 1)
    Pxx = 20 * (x2**2 - x2)
    Pyy = 20 * (x1**2 - x1)
    s1, c1 = np.sin(2 * x1 * t), np.cos(2 * x1 * t)
    s2, c2 = np.sin(x2 * t), np.cos(x2 * t)
    s3, c3 = np.sin(x1 * x2 * t), np.cos(x1 * x2 * t)
    S = s1 * e1 + c2 * e2 + s3 * e3
    Sx = 2 * t * c1 * e1 + x2 * t * c3 * e3
    Sy = -t * s2 * e2 + x1 * t * c3 * e3
    Sxx = -4 * t**2 * s1 * e1 - x2**2 * t**2 * s3 * e3
    Syy = -(t**2) * c2 * e2 - x1**2 * t**2 * s3 * e3
    St = (2 * x1 * c1 - 0.5 * s1) * e1 + (-x2 * s2 - 0.25 * c2) * e2 + (x1 * x2 * c3 - s3) * e3
    u = P * S
    ux = Px * S + P * Sx
    uy = Py * S + P * Sy
    lap = Pxx * S + 2 * Px * Sx + P * Sxx + Pyy * S + 2 * Py * Sy + P * Syy
    return u, ux, uy, lap, P * St


def burgers_exact(x, t):
    return _burgers_parts(x, t)[0]


def burgers_problem(nu: float = 1.0, T: float = 1.0, dt: float = 1e-2) -> ProblemSpec:
    """u_t - nu Laplace u + u d1 u + u d2 u = d, conservative convective group u^2."""
    if nu <= 0 or T <= 0 or dt <= 0:
        raise ValueError("nu, T and dt must be positive")

    def d(x, t):
        u, ux, uy, lap, ut = _burgers_parts(x, t)
        return ut - nu * lap + u * (ux + uy)

    conv = PointwiseFn(lambda u, g, x: _u(u, g, x) ** 2, du=lambda u, g, x: 2 * _u(u, g, x),
                       poly=(0.0, 0.0, 1.0))
    return ProblemSpec(
        name="burgers",
        d=d,
        u_D=lambda x, t=0.0: np.zeros(np.shape(x)[:-1]),
        exact=burgers_exact,
        a_const=nu,
        conv=conv,
        params={"nu": nu, "T": T, "dt": dt},
        recommended={"conv": (P1, P2, QuadratureEmbedded(3))},
        quad_degree=3,
        time_dependent=True,
    )


# --- superconductivity -------------------------------------------------------------------------
def _gl_exact(x):
    x1, x2 = _xy(x)
    return np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2) * np.exp(2 * x1) / 6


def _gl_laplacian(x):
    x1, x2 = _xy(x)
    s, c = np.sin(2 * np.pi * x1), np.cos(2 * np.pi * x1)
    sy = np.sin(2 * np.pi * x2)
    return sy * np.exp(2 * x1) * (8 * np.pi * c + (4 - 8 * np.pi**2) * s) / 6


def superconductivity_problem(nu: float = 1.0, formulation: str = "a") -> ProblemSpec:
    """-nu Laplace u + u^3 + u = d, with the reaction split three ways.

    ``a``: weighted mass with ``u^2 + 1``; ``b``: plain mass plus vector ``u^3``;
    ``c``: vector ``u^3 + u``.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")

    def d(x):
        u = _gl_exact(x)
        return -nu * _gl_laplacian(x) + u**3 + u

    base = dict(
        name="superconductivity",
        d=d,
        u_D=_gl_exact,
        exact=_gl_exact,
        a_const=nu,
        params={"nu": nu, "formulation": formulation},
        quad_degree=4,
        variants=("a", "b", "c"),
    )
    if formulation == "a":
        cw = PointwiseFn(lambda u, g, x: _u(u, g, x) ** 2 + 1, du=lambda u, g, x: 2 * _u(u, g, x),
                         poly=(1.0, 0.0, 1.0))
        return ProblemSpec(cw=cw, recommended={"cw": (P1, P2, QuadratureEmbedded(4))}, **base)
    if formulation == "b":
        c = PointwiseFn(lambda u, g, x: _u(u, g, x) ** 3, du=lambda u, g, x: 3 * _u(u, g, x) ** 2,
                        poly=(0.0, 0.0, 0.0, 1.0))
        return ProblemSpec(mass=1.0, c=c, recommended={"c": (P1, P3, QuadratureEmbedded(4))},
                           **base)
    if formulation == "c":
        c = PointwiseFn(lambda u, g, x: _u(u, g, x) ** 3 + _u(u, g, x),
                        du=lambda u, g, x: 3 * _u(u, g, x) ** 2 + 1, poly=(0.0, 1.0, 0.0, 1.0))
        return ProblemSpec(c=c, recommended={"c": (P1, P3, QuadratureEmbedded(4))}, **base)
    raise ValueError(f"unknown formulation {formulation!r}")


# --- biochemical reaction ----------------------------------------------------------------------
def biochemical_problem(sigma: float = 1.0, k: float = 1.0) -> ProblemSpec:
    """-Laplace u + sigma u / (k + u) = d, reaction as weighted mass ``sigma / (k + u)``."""
    if sigma <= 0 or k <= 0:
        raise ValueError("sigma and k must be positive")

    def denom(u):
        q = k + np.asarray(u, dtype=float)
        if np.any(q <= 0):
            raise DomainError("k + u <= 0 in the biochemical reaction term")
        return q

    cw = PointwiseFn(lambda u, g, x: sigma / denom(u), du=lambda u, g, x: -sigma / denom(u) ** 2)

    def d(x):
        u = _cubic(x)
        return -_cubic_laplacian(x) + sigma * u / (k + u)

    return ProblemSpec(
        name="biochemical",
        d=d,
        u_D=_cubic,
        exact=_cubic,
        cw=cw,
        params={"sigma": sigma, "k": k},
        recommended={"cw": (P0, P1, P2, QuadratureEmbedded(2))},
        quad_degree=6,
    )


# --- p-Laplace ---------------------------------------------------------------------------------
PLAPLACE_EPS = 1e-10


def plaplace_exact(x, p: float = 1.5):
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return 2 ** (-1 / (p - 1)) * (p - 1) / p * (1 - r ** (p / (p - 1)))


def plaplace_problem(p: float = 1.5) -> ProblemSpec:
    """-div(|grad u|^(p-2) grad u) = 1 on the unit disk, u = 0 on the circle."""
    if not p > 1:
        raise ValueError("p must lie in (1, inf)")
    eps2 = PLAPLACE_EPS**2 if p < 2 else 0.0
    e = (p - 2) / 2

    def a(u, g, x):
        return (_norm2(g) + eps2) ** e

    def da(u, g, x):
        return ((p - 2) * (_norm2(g) + eps2) ** (e - 1))[..., None] * np.asarray(g)

    return ProblemSpec(
        name="plaplace",
        d=lambda x: np.ones(np.shape(x)[:-1]),
        u_D=lambda x: np.zeros(np.shape(x)[:-1]),
        exact=lambda x: plaplace_exact(x, p),
        a=PointwiseFn(a, dgrad=da, uses_grad=True),
        domain="disk",
        params={"p": p},
        recommended={"a": (P0, QuadratureEmbedded(1))},
        gfem_applicable=False,
        quad_degree=1,
    )


# --- minimal surface ------------------------------------------------------------------------------
def minimal_surface_problem() -> ProblemSpec:
    """-div(grad u / sqrt(1 + |grad u|^2)) = d on the unit square."""

    def a(u, g, x):
        return 1 / np.sqrt(1 + _norm2(g))

    def da(u, g, x):
        return (-((1 + _norm2(g)) ** -1.5))[..., None] * np.asarray(g)

    def d(x):
        x1, x2 = _xy(x)
        g = _cubic_grad(x)
        q = 1 + _norm2(g)
        hxx, hxy, hyy = 2 * x2, 2 * (x1 + x2), 2 * x1
        ghg = g[..., 0] ** 2 * hxx + 2 * g[..., 0] * g[..., 1] * hxy + g[..., 1] ** 2 * hyy
        return -(_cubic_laplacian(x) / np.sqrt(q) - ghg / q**1.5)

    return ProblemSpec(
        name="minimal-surface",
        d=d,
        u_D=_cubic,
        exact=_cubic,
        a=PointwiseFn(a, dgrad=da, uses_grad=True),
        recommended={"a": (P0, QuadratureEmbedded(1))},
        gfem_applicable=False,
        quad_degree=1,
    )


def linear_problem() -> ProblemSpec:
    """-Laplace u = -2(x1 + x2) with exact solution x1 x2 (x1 + x2); sanity baseline."""
    return ProblemSpec(name="linear", d=lambda x: -_cubic_laplacian(x), u_D=_cubic, exact=_cubic,
                       quad_degree=2)


PROBLEMS = {
    "linear": linear_problem,
    "quadratic": lambda **kw: quadratic_problem("polynomial"),
    "quadratic-trig": lambda **kw: quadratic_problem("trig"),
    "burgers": lambda nu=1.0, T=1.0, dt=1e-2, **kw: burgers_problem(nu, T, dt),
    "superconductivity": lambda nu=1.0, formulation="a", **kw: superconductivity_problem(
        nu, formulation
    ),
    "biochemical": lambda sigma=1.0, k=1.0, **kw: biochemical_problem(sigma, k),
    "plaplace": lambda p=1.5, **kw: plaplace_problem(p),
    "minimal-surface": lambda **kw: minimal_surface_problem(),
}


def get_problem(problem_id: str, **params) -> ProblemSpec:
    try:
        factory = PROBLEMS[problem_id]
    except KeyError:
        raise ValueError(f"unknown problem {problem_id!r}; choose from {sorted(PROBLEMS)}") from None
    params = {k: v for k, v in params.items() if v is not None}
    return factory(**params) if params else factory()


__all__ = [
    "ProblemSpec",
    "DomainError",
    "ElementFamily",
    "quadratic_problem",
    "burgers_problem",
    "burgers_exact",
    "superconductivity_problem",
    "biochemical_problem",
    "plaplace_problem",
    "plaplace_exact",
    "minimal_surface_problem",
    "linear_problem",
    "get_problem",
    "PROBLEMS",
]
