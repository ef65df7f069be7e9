import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from egfem.mesh import (
    DIRICHLET,
    NEUMANN,
    Mesh,
    MeshError,
    MshElementError,
    MshReferenceError,
    MshVersionError,
    check_mesh,
    generate_unit_disk,
    generate_unit_square,
    read_msh,
    refine_uniform,
)


def _sorted_rows(a):
    a = np.round(np.asarray(a), 12)
    return a[np.lexsort(a.T[::-1])]


@pytest.mark.parametrize("n, nv, nt", [(1, 4, 2), (2, 9, 8), (64, 4225, 8192)])
def test_square_counts(n, nv, nt):
    m = generate_unit_square(n)
    assert (m.n_vertices, m.n_triangles) == (nv, nt)
    assert np.all(m.boundary_tags == DIRICHLET)
    check_mesh(m)


def test_square_rejects_zero():
    with pytest.raises(ValueError):
        generate_unit_square(0)


@given(st.integers(1, 128), st.sampled_from(["main", "anti"]))
def test_square_area_is_one(n, diagonal):
    m = generate_unit_square(n, diagonal)
    assert abs(m.total_area() - 1.0) <= 1e-14
    assert np.all(m.signed_areas > 0)


def test_square_main_diagonal_direction():
    m = generate_unit_square(1)
    # both cells contain the bottom-left and top-right corners
    for tri in m.triangles:
        corners = {tuple(m.vertices[v]) for v in tri}
        assert (0.0, 0.0) in corners and (1.0, 1.0) in corners


def test_refine_counts_and_vertices():
    m1 = generate_unit_square(1)
    r = refine_uniform(m1)
    assert (r.n_vertices, r.n_triangles) == (9, 8)
    assert np.array_equal(_sorted_rows(r.vertices), _sorted_rows(generate_unit_square(2).vertices))
    check_mesh(r)


@given(st.integers(1, 6))
def test_refine_preserves_area_and_quadruples(n):
    m = generate_unit_square(n)
    r = refine_uniform(m)
    assert r.n_triangles == 4 * m.n_triangles
    assert r.n_vertices == m.n_vertices + m.n_edges
    assert abs(r.total_area() - m.total_area()) <= 1e-14
    # children sum to their parent: child 4p..4p+3 belongs to parent p
    per_parent = r.areas.reshape(-1, 4).sum(axis=1)
    assert np.allclose(per_parent, m.areas, rtol=0, atol=1e-15)


def test_refine_inherits_tags():
    m = generate_unit_square(2)
    tags = np.where(m.boundary_edges.min(axis=1) < 3, NEUMANN, DIRICHLET)
    m = m.with_tags(tags)
    r = refine_uniform(m)
    assert np.count_nonzero(r.boundary_tags == NEUMANN) == 2 * np.count_nonzero(tags == NEUMANN)
    check_mesh(r)


def test_disk_levels():
    m0 = generate_unit_disk(0)
    assert (m0.n_vertices, m0.n_triangles) == (7, 6)
    m1 = generate_unit_disk(1)
    assert m1.n_triangles == 24
    bv = m1.boundary_vertices
    assert len(bv) == 12
    assert np.all(np.abs(np.linalg.norm(m1.vertices[bv], axis=1) - 1) <= 1e-12)
    m4 = generate_unit_disk(4)
    assert abs(m4.total_area() - np.pi) / np.pi < 5e-3
    # the area of an inscribed regular polygon with 6 * 2^4 sides
    k = 6 * 2**4
    assert m4.total_area() == pytest.approx(0.5 * k * np.sin(2 * np.pi / k), rel=1e-12)
    check_mesh(m4)


def test_checker_rejects_clockwise():
    m = generate_unit_square(1)
    bad = Mesh(m.vertices, m.triangles[:, ::-1], m.boundary_edges, m.boundary_tags)
    with pytest.raises(MeshError):
        check_mesh(bad)


def test_checker_rejects_missing_boundary():
    m = generate_unit_square(2)
    bad = Mesh(m.vertices, m.triangles, m.boundary_edges[:-1], m.boundary_tags[:-1])
    with pytest.raises(MeshError):
        check_mesh(bad)


def test_mesh_is_immutable():
    m = generate_unit_square(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


MSH_ONE_TRIANGLE = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
4
1 1 2 7 1 1 2
2 1 2 7 1 2 3
3 1 2 8 1 3 1
4 2 2 1 1 1 2 3
$EndElements
"""


def test_read_msh_one_triangle(tmp_path):
    p = tmp_path / "tri.msh"
    p.write_text(MSH_ONE_TRIANGLE)
    m = read_msh(p)
    assert (m.n_vertices, m.n_triangles, len(m.boundary_edges)) == (3, 1, 3)
    assert np.all(m.boundary_tags == DIRICHLET)
    m2 = read_msh(p, neumann_groups=(8,))
    assert np.count_nonzero(m2.boundary_tags == NEUMANN) == 1
    check_mesh(m2)


def test_read_msh_version_error(tmp_path):
    p = tmp_path / "v4.msh"
    p.write_text(MSH_ONE_TRIANGLE.replace("2.2 0 8", "4.1 0 8"))
    with pytest.raises(MshVersionError):
        read_msh(p)


def test_read_msh_reference_error(tmp_path):
    p = tmp_path / "ref.msh"
    p.write_text(MSH_ONE_TRIANGLE.replace("4 2 2 1 1 1 2 3", "4 2 2 1 1 1 2 9"))
    with pytest.raises(MshReferenceError):
        read_msh(p)


def test_read_msh_quad_element_error(tmp_path):
    p = tmp_path / "quad.msh"
    p.write_text(MSH_ONE_TRIANGLE.replace("4 2 2 1 1 1 2 3", "4 3 2 1 1 1 2 3 3"))
    with pytest.raises(MshElementError):
        read_msh(p)


def test_read_msh_round_trip_of_square(tmp_path):
    m = generate_unit_square(3)
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(m.n_vertices)]
    lines += [f"{i + 1} {x:.17g} {y:.17g} 0" for i, (x, y) in enumerate(m.vertices)]
    lines += ["$EndNodes", "$Elements", str(len(m.boundary_edges) + m.n_triangles)]
    k = 1
    for a, b in m.boundary_edges:
        lines.append(f"{k} 1 2 1 1 {a + 1} {b + 1}")
        k += 1
    for t in m.triangles:
        lines.append(f"{k} 2 2 2 1 {t[0] + 1} {t[1] + 1} {t[2] + 1}")
        k += 1
    lines.append("$EndElements")
    p = tmp_path / "sq.msh"
    p.write_text("\n".join(lines) + "\n")
    r = read_msh(p)
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert r.total_area() == pytest.approx(1.0, abs=1e-14)
