from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from egfem.elements import (
    P0,
    P1,
    P2,
    P3,
    ElementFamily,
    QuadratureEmbedded,
    build_space,
    dunavant_rule,
    eval_basis,
    lagrange_tables,
    reference_nodes,
)
from egfem.mesh import generate_unit_disk, generate_unit_square

LAGRANGE = [P1, P2, P3]


def exact_monomial(a, b):
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


@pytest.mark.parametrize("k", range(1, 7))
def test_dunavant_exact_for_all_monomials(k):
    rule = dunavant_rule(k)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)
    assert np.all(rule.points >= 0)
    x, y = rule.points[:, 1], rule.points[:, 2]
    for a in range(k + 1):
        for b in range(k + 1 - a):
            q = 0.5 * np.sum(rule.weights * x**a * y**b)
            assert q == pytest.approx(float(exact_monomial(a, b)), abs=1e-15)


def test_dunavant_degree3_not_exact_for_quartic():
    rule = dunavant_rule(3)
    x = rule.points[:, 1]
    assert abs(0.5 * np.sum(rule.weights * x**4) - float(exact_monomial(4, 0))) > 1e-6


@pytest.mark.parametrize("bad", [0, 7])
def test_dunavant_unsupported(bad):
    with pytest.raises(ValueError):
        dunavant_rule(bad)


@pytest.mark.parametrize("label", ["P0", "P1", "P2", "P3", "I1", "I4"])
def test_parse_round_trip(label):
    assert ElementFamily.parse(label).label == label


def test_quadrature_embedded_sizes():
    assert [QuadratureEmbedded(k).n_local for k in range(1, 7)] == [1, 3, 4, 6, 7, 12]


@pytest.mark.parametrize("fam", LAGRANGE)
def test_nodal_basis(fam):
    nodes = reference_nodes(fam)
    values, _ = lagrange_tables(fam, nodes)
    assert np.allclose(values, np.eye(len(nodes)), atol=1e-14)


def test_p2_edge_midpoint_value():
    vals, _ = eval_basis(P2, np.array([0.5, 0.5, 0.0]))
    assert np.allclose(vals, np.eye(6)[3], atol=1e-15)


def _bary(xy):
    x, y = xy
    return np.array([1 - x - y, x, y])


bary = st.tuples(st.floats(0, 1), st.floats(0, 1)).filter(lambda p: p[0] + p[1] <= 1)


@pytest.mark.parametrize("fam", LAGRANGE)
@given(p=bary)
def test_partition_of_unity(fam, p):
    vals, grads = eval_basis(fam, _bary(p))
    assert vals.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("fam", LAGRANGE)
@given(p=bary)
def test_gradients_match_finite_differences(fam, p):
    h = 1e-6
    x = np.array(p) * (1 - 4 * h) + h
    _, grads = eval_basis(fam, _bary(x))
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (eval_basis(fam, _bary(x + e))[0] - eval_basis(fam, _bary(x - e))[0]) / (2 * h)
        assert np.allclose(grads[d], fd, atol=1e-7)


@pytest.mark.parametrize("fam", LAGRANGE)
def test_reproduces_polynomials_of_its_degree(fam, rng):
    m = generate_unit_square(3)
    V = build_space(m, fam)
    c = rng.standard_normal(10)

    def poly(x):
        X, Y = x[..., 0], x[..., 1]
        terms = [np.ones_like(X), X, Y, X * X, X * Y, Y * Y, X**3, X * X * Y, X * Y * Y, Y**3]
        n = {1: 3, 2: 6, 3: 10}[fam.degree]
        return sum(ci * t for ci, t in zip(c[:n], terms[:n]))

    coef = V.interpolate(poly)
    pts = rng.dirichlet(np.ones(3), size=5)
    vals, _ = lagrange_tables(fam, pts)
    for cell in range(m.n_triangles):
        xs = pts @ m.vertices[m.triangles[cell]]
        assert np.allclose(vals @ coef[V.cell_dofs[cell]], poly(xs), atol=1e-12)


@pytest.mark.parametrize(
    "fam, n", [(P0, 8192), (P1, 4225), (P2, 16641), (P3, 37249), (QuadratureEmbedded(4), 49152)]
)
def test_dof_counts_64(fam, n):
    assert build_space(generate_unit_square(64), fam).n_dofs == n


@pytest.mark.parametrize("fam", [P1, P2, P3])
def test_shared_dofs_have_unique_coordinates(fam):
    V = build_space(generate_unit_disk(2), fam)
    coords = np.round(V.dof_coords, 12)
    assert len(np.unique(coords, axis=0)) == V.n_dofs
    # every cell's local DOF coordinates match the mapped reference nodes
    mapped = np.einsum("qa,mad->mqd", reference_nodes(fam), V.mesh.vertices[V.mesh.triangles])
    assert np.allclose(V.dof_coords[V.cell_dofs], mapped, atol=1e-14)


@pytest.mark.parametrize("fam", [P1, P2, P3])
def test_dirichlet_dofs_on_boundary(fam):
    V = build_space(generate_unit_square(4), fam)
    x = V.dof_coords[V.dirichlet_dofs]
    on = np.isclose(x, 0) | np.isclose(x, 1)
    assert np.all(on.any(axis=1))
    expected = 4 * 4 * fam.degree
    assert len(V.dirichlet_dofs) == expected


def test_discontinuous_spaces_have_no_dirichlet_dofs():
    m = generate_unit_square(2)
    assert len(build_space(m, P0).dirichlet_dofs) == 0
    assert len(build_space(m, QuadratureEmbedded(2)).dirichlet_dofs) == 0


def test_owner_is_lowest_cell():
    V = build_space(generate_unit_square(3), P2)
    cell, slot = V.owner
    for dof in range(V.n_dofs):
        cells = np.flatnonzero((V.cell_dofs == dof).any(axis=1))
        assert cell[dof] == cells.min()
        assert V.cell_dofs[cell[dof], slot[dof]] == dof
