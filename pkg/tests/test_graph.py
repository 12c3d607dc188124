import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.csgraph import shortest_path

from conftest import random_graph
from ncgcn.errors import ConfigError, InputError
from ncgcn.graph import (CsrMatrix, apply_mask, build_csr, check_partition, identity_csr, khop_index,
                         spmm, symmetric_normalize, zeros_csr)


def path3():
    return build_csr([(0, 1), (1, 2)], 3)


# -- build_csr ------------------------------------------------------------------

def test_single_edge_symmetrized():
    A = build_csr([(0, 1)], 2)
    assert A.to_dense().tolist() == [[0, 1], [1, 0]]


def test_duplicates_collapse():
    A = build_csr([(0, 1), (1, 0), (0, 1)], 2)
    assert A.nnz == 2
    assert A.to_dense().tolist() == [[0, 1], [1, 0]]


def test_path_layout():
    A = path3()
    assert A.row_ptr.tolist() == [0, 1, 3, 4]
    assert A.col_idx.tolist() == [1, 0, 2, 1]


def test_self_loops_dropped():
    A = build_csr([(0, 0), (0, 1)], 2)
    assert A.to_dense().diagonal().tolist() == [0, 0]


def test_empty_edge_list_is_isolated_graph():
    A = build_csr([], 4)
    assert A.shape == (4, 4) and A.nnz == 0


def test_out_of_range_id():
    with pytest.raises(InputError, match="outside"):
        build_csr([(0, 3)], 3)
    with pytest.raises(InputError):
        build_csr([(-1, 0)], 3)


def test_unsymmetrized_keeps_direction():
    A = build_csr([(0, 1)], 2, symmetrize=False)
    assert A.to_dense().tolist() == [[0, 1], [0, 0]]


def test_arrays_read_only():
    A = path3()
    with pytest.raises(ValueError):
        A.values[0] = 5.0


def test_csr_check_catches_unsorted_columns():
    bad = CsrMatrix(1, 3, [0, 2], [2, 1], [1.0, 1.0])
    with pytest.raises(InputError, match="strictly increasing"):
        bad.check()


def test_csr_constructor_rejects_bad_row_ptr():
    with pytest.raises(InputError):
        CsrMatrix(2, 2, [0, 1], [0], [1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_build_csr_invariants(n, p, seed):
    A = random_graph(np.random.default_rng(seed), n, p)
    A.check()
    D = A.to_dense()
    assert np.array_equal(D, D.T)
    assert set(np.unique(D)) <= {0.0, 1.0}
    assert np.allclose(A.degrees(), D.sum(axis=1))


# -- symmetric_normalize ----------------------------------------------------------

def test_normalize_unit_degrees_is_identity_map():
    A = build_csr([(0, 1)], 2)
    S = symmetric_normalize(A, add_self_loop=False)
    assert np.array_equal(S.to_dense(), A.to_dense())


def test_normalize_with_self_loop_two_nodes():
    S = symmetric_normalize(build_csr([(0, 1)], 2), add_self_loop=True)
    assert np.allclose(S.to_dense(), 0.5)


def test_isolated_node_without_self_loop_is_zero():
    S = symmetric_normalize(build_csr([(0, 1)], 3), add_self_loop=False)
    D = S.to_dense()
    assert not D[2].any() and not D[:, 2].any()
    assert np.all(np.isfinite(D))


def test_normalize_requires_square():
    with pytest.raises(InputError, match="square"):
        symmetric_normalize(zeros_csr(2, 3))


def dense_normalize(A, self_loop):
    A_hat = A + np.eye(len(A)) if self_loop else A.copy()
    d = A_hat.sum(axis=1)
    out = np.zeros_like(A_hat)
    for i in range(len(A)):
        for j in range(len(A)):
            if A_hat[i, j]:
                out[i, j] = A_hat[i, j] / np.sqrt(d[i] * d[j])
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.floats(0.0, 0.6), st.booleans(), st.integers(0, 2**31))
def test_normalize_matches_dense_oracle(n, p, self_loop, seed):
    A = random_graph(np.random.default_rng(seed), n, p)
    S = symmetric_normalize(A, self_loop)
    S.check()
    D = S.to_dense()
    assert np.allclose(D, dense_normalize(A.to_dense(), self_loop), rtol=1e-12, atol=1e-15)
    assert np.allclose(D, D.T, atol=1e-15)
    if self_loop:
        nz = D[D != 0]
        assert np.all((nz > 0) & (nz <= 1.0))


# -- apply_mask -------------------------------------------------------------------

def test_mask_all_ones_identity():
    S = symmetric_normalize(path3())
    out = apply_mask(S, np.ones(3, bool))
    assert np.array_equal(out.to_dense(), S.to_dense())


def test_mask_all_zeros():
    S = symmetric_normalize(path3())
    for side in ("rows", "cols"):
        assert apply_mask(S, np.zeros(3, bool), side).nnz == 0


def test_mask_rows_path():
    S = symmetric_normalize(path3())
    out = apply_mask(S, np.array([1, 0, 1], bool), "rows")
    D, ref = out.to_dense(), S.to_dense()
    assert not D[1].any()
    assert np.array_equal(D[[0, 2]], ref[[0, 2]])
    assert out.row(1)[0].size == 0  # entries dropped, not stored as zero
    out.check()


def test_mask_cols_is_source_masking():
    S = symmetric_normalize(path3())
    D = apply_mask(S, np.array([1, 0, 1], bool), "cols").to_dense()
    ref = S.to_dense()
    assert not D[:, 1].any()
    assert np.array_equal(D[:, [0, 2]], ref[:, [0, 2]])


def test_mask_length_mismatch():
    S = symmetric_normalize(path3())
    with pytest.raises(InputError):
        apply_mask(S, np.ones(4, bool))
    with pytest.raises(InputError):
        apply_mask(S, np.ones(3, bool), side="diag")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31))
def test_mask_idempotent_and_additive(n, seed):
    rng = np.random.default_rng(seed)
    S = symmetric_normalize(random_graph(rng, n, 0.3))
    m = rng.random(n) < 0.5
    once = apply_mask(S, m)
    twice = apply_mask(once, m)
    assert np.array_equal(once.to_dense(), twice.to_dense())
    total = apply_mask(S, m).to_dense() + apply_mask(S, ~m).to_dense()
    assert np.array_equal(total, S.to_dense())
    assert check_partition(m, ~m)


def test_check_partition():
    assert check_partition(np.array([1, 0], bool), np.array([0, 1], bool))
    assert not check_partition(np.array([1, 1], bool), np.array([0, 1], bool))
    assert not check_partition(np.array([0, 0], bool), np.array([0, 1], bool))


# -- khop_index -------------------------------------------------------------------

def test_khop_path():
    A = path3()
    k1 = khop_index(A, 1)
    assert k1.neighbors(1).tolist() == [0, 2]
    assert k1.neighbors(0).tolist() == [1]
    assert khop_index(A, 2).neighbors(0).tolist() == [1, 2]


def test_khop_triangle_no_duplicates():
    A = build_csr([(0, 1), (1, 2), (0, 2)], 3)
    idx = khop_index(A, 2)
    for i in range(3):
        assert idx.neighbors(i).tolist() == [j for j in range(3) if j != i]


def test_khop_bad_k():
    with pytest.raises(ConfigError):
        khop_index(path3(), 3)
    with pytest.raises(ConfigError):
        khop_index(path3(), 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 100), st.floats(0.0, 0.15), st.integers(0, 2**31))
def test_khop_matches_shortest_paths(n, p, seed):
    A = random_graph(np.random.default_rng(seed), n, p)
    dist = shortest_path(sp.csr_matrix(A.to_dense()), unweighted=True)
    k1, k2 = khop_index(A, 1), khop_index(A, 2)
    for i in range(n):
        for k, idx in ((1, k1), (2, k2)):
            expect = np.flatnonzero((dist[i] >= 1) & (dist[i] <= k))
            got = idx.neighbors(i)
            assert got.tolist() == expect.tolist()
            assert i not in got
        assert set(k1.neighbors(i)) <= set(k2.neighbors(i))
    assert np.array_equal(k1.indices, A.col_idx)


# -- spmm ---------------------------------------------------------------------------

def test_spmm_identity_and_zero(rng):
    X = rng.normal(size=(5, 3))
    assert np.array_equal(spmm(identity_csr(5), X), X)
    assert not spmm(zeros_csr(5, 5), X).any()


def test_spmm_two_node_example():
    S = symmetric_normalize(build_csr([(0, 1)], 2))
    assert np.allclose(spmm(S, np.array([[2.0], [4.0]])), [[3.0], [3.0]])


def test_spmm_shape_mismatch():
    with pytest.raises(InputError):
        spmm(identity_csr(3), np.ones((4, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 64), st.integers(1, 8), st.integers(0, 2**31))
def test_spmm_matches_dense(n, d, seed):
    rng = np.random.default_rng(seed)
    S = symmetric_normalize(random_graph(rng, n, 0.2))
    X = rng.normal(size=(n, d))
    ref = S.to_dense() @ X
    got = spmm(S, X)
    scale = np.maximum(np.abs(ref), 1e-300)
    assert np.all(np.abs(got - ref) <= 1e-12 * np.maximum(scale, np.abs(X).max()))
    assert np.array_equal(got, spmm(S, X))


def test_transpose(rng):
    A = random_graph(rng, 10)
    P = apply_mask(symmetric_normalize(A), rng.random(10) < 0.5)
    assert np.array_equal(P.transpose().to_dense(), P.to_dense().T)
