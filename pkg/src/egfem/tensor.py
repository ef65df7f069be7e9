"""Sparse third-order tensors and their contractions.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted, unique
column indices). Tensors stay in coordinate format. Each single-mode contraction is
precompiled into a sparse "gather" matrix whose product with the vector
yields the output data in canonical CSR order, so results are
deterministic for fixed input.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


def _check_len(v, n, what):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or len(v) != n:
        raise ValueError(f"{what}: expected vector of length {n}, got shape {v.shape}")
    return v


def csr(data, rows, cols, shape) -> sp.csr_matrix:
    """Canonical CSR matrix from (possibly duplicated) coordinates."""
    A = sp.coo_matrix(
        (np.ravel(data), (np.ravel(rows), np.ravel(cols))), shape=shape
    ).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class SparseTensor3:
    """Coordinate-format tensor with sorted, merged ``(i, j, k)`` entries."""

    shape: tuple
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    vals: np.ndarray

    @classmethod
    def from_coo(cls, shape, i, j, k, vals, drop_zeros=True) -> "SparseTensor3":
        n1, n2, n3 = (int(s) for s in shape)
        i, j, k = (np.asarray(a, dtype=np.int64).ravel() for a in (i, j, k))
        vals = np.asarray(vals, dtype=float).ravel()
        if not (len(i) == len(j) == len(k) == len(vals)):
            raise ValueError("coordinate arrays differ in length")
        if len(i) and (
            i.min() < 0 or j.min() < 0 or k.min() < 0
            or i.max() >= n1 or j.max() >= n2 or k.max() >= n3
        ):
            raise ValueError("tensor index out of range")
        key = (i * n2 + j) * n3 + k
        # stable sort: duplicates are summed in insertion order
        order = np.argsort(key, kind="stable")
        key = key[order]
        start = np.ones(len(key), dtype=bool)
        start[1:] = key[1:] != key[:-1]
        group = np.cumsum(start) - 1
        merged = np.bincount(group, weights=vals[order], minlength=int(start.sum()))
        ukey = key[start]
        if drop_zeros:
            keep = merged != 0.0
            ukey, merged = ukey[keep], merged[keep]
        ij, kk = np.divmod(ukey, n3)
        ii, jj = np.divmod(ij, n2)
        return cls((n1, n2, n3), ii, jj, kk, merged)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def to_dense(self) -> np.ndarray:
        T = np.zeros(self.shape)
        np.add.at(T, (self.i, self.j, self.k), self.vals)
        return T

    @cached_property
    def _mode3_plan(self):
        # entries are sorted by (i, j), so output pairs come out in CSR order;
        # the gather matrix maps v to the output data in that same summation order
        n1, n2, n3 = self.shape
        key = self.i * n2 + self.j
        start = np.ones(len(key), dtype=bool)
        start[1:] = key[1:] != key[:-1]
        slot = np.cumsum(start) - 1
        rows = self.i[start]
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n1))])
        gather = sp.csr_matrix((self.vals, self.k, np.searchsorted(slot, np.arange(len(rows) + 1))),
                               shape=(len(rows), n3))
        return gather, self.j[start], indptr

    @cached_property
    def _mode2_plan(self):
        n1, n2, n3 = self.shape
        key = self.i * n3 + self.k
        ukey, slot = np.unique(key, return_inverse=True)
        rows, cols = np.divmod(ukey, n3)
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n1))])
        gather = csr(self.vals, slot.ravel(), self.j, (len(ukey), n2))
        return gather, cols, indptr

    def contract_mode3(self, v) -> sp.csr_matrix:
        """``(T . v)_ij = sum_k T_ijk v_k``."""
        v = _check_len(v, self.shape[2], "mode-3 contraction")
        gather, cols, indptr = self._mode3_plan
        return sp.csr_matrix((gather @ v, cols, indptr), shape=self.shape[:2])

    def contract_mode2(self, v) -> sp.csr_matrix:
        """``(T ._2 v)_ik = sum_j T_ijk v_j``."""
        v = _check_len(v, self.shape[1], "mode-2 contraction")
        gather, cols, indptr = self._mode2_plan
        return sp.csr_matrix((gather @ v, cols, indptr), shape=(self.shape[0], self.shape[2]))

    def double_contract(self, w, v) -> np.ndarray:
        """``(T : (w (x) v))_i = sum_jk T_ijk w_j v_k`` without forming ``w (x) v``."""
        w = _check_len(w, self.shape[1], "double contraction (w)")
        v = _check_len(v, self.shape[2], "double contraction (v)")
        return np.bincount(
            self.i, weights=self.vals * w[self.j] * v[self.k], minlength=self.shape[0]
        )

    def slice_first(self, index: int) -> sp.csr_matrix:
        """Matrix ``T[index, :, :]``."""
        sel = self.i == index
        return csr(self.vals[sel], self.j[sel], self.k[sel], self.shape[1:])


def t3_contract_mode3(T: SparseTensor3, v) -> sp.csr_matrix:
    return T.contract_mode3(v)


def t3_contract_mode2(T: SparseTensor3, v) -> sp.csr_matrix:
    return T.contract_mode2(v)


def t3_double_contract(T: SparseTensor3, w, v) -> np.ndarray:
    return T.double_contract(w, v)


def hadamard(v, w) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != w.shape:
        raise ValueError(f"hadamard: length mismatch {v.shape} vs {w.shape}")
    return v * w
