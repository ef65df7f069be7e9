import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from egfem.tensor import SparseTensor3, csr, hadamard

dims = st.tuples(st.integers(1, 7), st.integers(1, 7), st.integers(1, 7))


@st.composite
def tensors(draw):
    shape = draw(dims)
    nnz = draw(st.integers(0, 40))
    idx = [draw(arrays(np.int64, nnz, elements=st.integers(0, n - 1))) for n in shape]
    vals = draw(arrays(np.float64, nnz, elements=st.floats(-10, 10)))
    return SparseTensor3.from_coo(shape, *idx, vals), idx, vals


def _vec(n, seed):
    return np.random.default_rng(seed).standard_normal(n)


@given(tensors())
def test_from_coo_sums_duplicates(data):
    T, (i, j, k), vals = data
    dense = np.zeros(T.shape)
    np.add.at(dense, (i, j, k), vals)
    assert np.allclose(T.to_dense(), dense, atol=1e-12)
    keys = (T.i * T.shape[1] + T.j) * T.shape[2] + T.k
    assert np.all(np.diff(keys) > 0)
    assert np.all(T.vals != 0)


@given(tensors(), st.integers(0, 2**31))
def test_contractions_match_dense(data, seed):
    T, _, _ = data
    D = T.to_dense()
    n1, n2, n3 = T.shape
    v3, v2 = _vec(n3, seed), _vec(n2, seed + 1)
    C3 = T.contract_mode3(v3)
    C2 = T.contract_mode2(v2)
    assert C3.shape == (n1, n2) and C2.shape == (n1, n3)
    assert np.allclose(C3.toarray(), np.einsum("ijk,k->ij", D, v3), atol=1e-12)
    assert np.allclose(C2.toarray(), np.einsum("ijk,j->ik", D, v2), atol=1e-12)
    assert np.allclose(T.double_contract(v2, v3), np.einsum("ijk,j,k->i", D, v2, v3), atol=1e-12)
    for idx in range(n1):
        assert np.allclose(T.slice_first(idx).toarray(), D[idx])


@given(tensors(), st.integers(0, 2**31))
def test_double_contraction_consistent_with_single(data, seed):
    T, _, _ = data
    v2, v3 = _vec(T.shape[1], seed), _vec(T.shape[2], seed + 7)
    ref = T.double_contract(v2, v3)
    assert np.allclose(T.contract_mode3(v3) @ v2, ref, atol=1e-12)
    assert np.allclose(T.contract_mode2(v2) @ v3, ref, atol=1e-12)


@given(tensors(), st.floats(-3, 3), st.integers(0, 2**31))
def test_mode3_is_linear(data, alpha, seed):
    T, _, _ = data
    v, w = _vec(T.shape[2], seed), _vec(T.shape[2], seed + 3)
    lhs = T.contract_mode3(alpha * v + w).toarray()
    rhs = alpha * T.contract_mode3(v).toarray() + T.contract_mode3(w).toarray()
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_contraction_output_is_canonical_csr():
    T = SparseTensor3.from_coo((3, 3, 2), [2, 0, 0, 1], [1, 2, 0, 1], [0, 1, 1, 0], [1, 2, 3, 4])
    A = T.contract_mode3(np.ones(2))
    assert A.has_sorted_indices
    assert A.nnz == 4


def test_repeat_contraction_is_deterministic(rng):
    i, j, k = (rng.integers(0, 30, 2000) for _ in range(3))
    T = SparseTensor3.from_coo((30, 30, 30), i, j, k, rng.standard_normal(2000))
    v = rng.standard_normal(30)
    a, b = T.contract_mode3(v), T.contract_mode3(v)
    assert np.array_equal(a.data, b.data)


def test_dimension_mismatch_raises():
    T = SparseTensor3.from_coo((2, 3, 4), [0], [0], [0], [1.0])
    with pytest.raises(ValueError):
        T.contract_mode3(np.ones(3))
    with pytest.raises(ValueError):
        T.contract_mode2(np.ones(4))
    with pytest.raises(ValueError):
        T.double_contract(np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        SparseTensor3.from_coo((2, 2, 2), [2], [0], [0], [1.0])


def test_csr_sums_duplicates():
    A = csr([1.0, 2.0, 5.0], [0, 0, 1], [1, 1, 0], (2, 2))
    assert A.nnz == 2 and A[0, 1] == 3.0


def test_hadamard():
    assert np.array_equal(hadamard([1, 2], [3, 4]), [3.0, 8.0])
    with pytest.raises(ValueError):
        hadamard([1], [1, 2])
