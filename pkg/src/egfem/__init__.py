"""Triangular P1 finite elements with precomputed group and extended group formulations."""
from .elements import P0, P1, P2, P3, ElementFamily, QuadratureEmbedded, build_space
from .mesh import Mesh, generate_unit_disk, generate_unit_square, read_msh, refine_uniform
from .problems import ProblemSpec, get_problem
from .solver import (
    EGFEMForms,
    IterOptions,
    SGAForms,
    SolveResult,
    Status,
    TensorSGAForms,
    build_forms,
    newton_egfem,
    picard,
    picard_egfem,
    picard_sga,
    semi_implicit_burgers,
    solve_linear,
)

__version__ = "0.1.0"
