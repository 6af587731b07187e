import gzip

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from minrescg.errors import (
    DimensionError,
    IndexOutOfRangeError,
    MalformedHeaderError,
    NotSymmetricError,
    UnsupportedFieldError,
)
from minrescg.sparse import (
    SparseSymMatrix,
    dense_block_apply,
    load_matrix_market,
    load_matrix_market_general,
    matvec,
    save_matrix_market,
)


def write(tmp_path, text, name="a.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestMatvec:
    def test_identity(self):
        assert np.array_equal(matvec(SparseSymMatrix.identity(3), np.array([1.0, 2, 3])), [1, 2, 3])

    def test_diagonal(self):
        A = SparseSymMatrix.from_scipy(sp.diags([1.0, -2.0]))
        assert np.array_equal(matvec(A, np.ones(2)), [1, -2])

    def test_permutation(self):
        A = SparseSymMatrix.from_scipy(np.array([[0.0, 1], [1, 0]]))
        assert np.array_equal(matvec(A, np.array([3.0, 4])), [4, 3])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            matvec(SparseSymMatrix.identity(3), np.ones(2))

    def test_deterministic(self, rng):
        M = sp.random(50, 50, density=0.2, random_state=1)
        A = SparseSymMatrix.from_scipy(M + M.T)
        x = rng.standard_normal(50)
        assert np.array_equal(matvec(A, x), matvec(A, x))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 40), st.integers(0, 2**31 - 1))
    def test_symmetry_of_bilinear_form(self, n, seed):
        r = np.random.default_rng(seed)
        M = sp.random(n, n, density=0.3, random_state=seed, data_rvs=lambda s: r.standard_normal(s))
        A = SparseSymMatrix.from_scipy(M + M.T)
        x, y = r.standard_normal(n), r.standard_normal(n)
        lhs, rhs = x @ matvec(A, y), y @ matvec(A, x)
        scale = A.frobenius_norm() * np.linalg.norm(x) * np.linalg.norm(y)
        assert abs(lhs - rhs) <= 1e-13 * max(scale, 1e-300)


class TestStorage:
    def test_csr_invariants(self):
        M = sp.random(30, 30, density=0.2, random_state=3)
        A = SparseSymMatrix.from_scipy(M + M.T)
        ro, ci = A.row_offsets, A.col_indices
        assert ro[0] == 0 and ro[-1] == A.nnz and np.all(np.diff(ro) >= 0)
        for i in range(A.n):
            assert np.all(np.diff(ci[ro[i]:ro[i + 1]]) > 0)
        assert A.is_symmetric()

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            SparseSymMatrix.from_scipy(np.array([[1.0, 2], [0, 1]]))

    def test_arrays_read_only(self):
        A = SparseSymMatrix.identity(2)
        with pytest.raises(ValueError):
            A.values[0] = 3.0

    def test_shifted(self):
        A = SparseSymMatrix.from_scipy(sp.diags([1.0, 2.0]))
        assert np.allclose(A.shifted(0.5).toarray(), np.diag([0.5, 1.5]))


class TestMatrixMarket:
    HEADER = "%%MatrixMarket matrix coordinate real symmetric\n"

    def test_mirror_expansion(self, tmp_path):
        p = write(tmp_path, self.HEADER + "% comment\n2 2 3\n1 1 2.0\n2 1 1.0\n2 2 3.0\n")
        A = load_matrix_market(p)
        assert np.array_equal(A.toarray(), [[2, 1], [1, 3]])
        assert A.nnz == 4

    def test_one_by_one(self, tmp_path):
        A = load_matrix_market(write(tmp_path, self.HEADER + "1 1 1\n1 1 -5.0\n"))
        assert A.toarray().tolist() == [[-5.0]] and A.nnz == 1

    def test_gzip(self, tmp_path):
        p = tmp_path / "a.mtx.gz"
        with gzip.open(p, "wt") as fh:
            fh.write(self.HEADER + "2 2 2\n1 1 1.5\n2 2 2.5\n")
        assert np.array_equal(load_matrix_market(p).diagonal(), [1.5, 2.5])

    def test_malformed_header(self, tmp_path):
        with pytest.raises(MalformedHeaderError):
            load_matrix_market(write(tmp_path, "%%MatrixMarket matrix\n1 1 1\n1 1 1\n"))

    def test_complex_field_rejected(self, tmp_path):
        p = write(tmp_path, "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n")
        with pytest.raises(UnsupportedFieldError):
            load_matrix_market(p)

    def test_general_rejected(self, tmp_path):
        p = write(tmp_path, "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n")
        with pytest.raises(NotSymmetricError):
            load_matrix_market(p)

    def test_index_out_of_range(self, tmp_path):
        with pytest.raises(IndexOutOfRangeError):
            load_matrix_market(write(tmp_path, self.HEADER + "2 2 1\n3 1 1.0\n"))

    def test_general_loader(self, tmp_path):
        p = write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 3.0\n2 1 -1.0\n")
        assert np.array_equal(load_matrix_market_general(p).toarray(), [[0, 3], [-1, 0]])

    @pytest.mark.parametrize("suffix", [".mtx", ".mtx.gz"])
    def test_round_trip_bit_identical(self, tmp_path, rng, suffix):
        M = sp.random(40, 40, density=0.15, random_state=7, data_rvs=lambda s: rng.standard_normal(s) * 1e3)
        A = SparseSymMatrix.from_scipy(M + M.T + sp.identity(40) * np.pi)
        p = tmp_path / f"r{suffix}"
        save_matrix_market(A, p)
        B = load_matrix_market(p)
        assert np.array_equal(A.row_offsets, B.row_offsets)
        assert np.array_equal(A.col_indices, B.col_indices)
        assert np.array_equal(A.values, B.values)
        assert A.content_hash() == B.content_hash()


class TestDenseBlockApply:
    def test_examples(self):
        assert np.allclose(dense_block_apply(np.array([[0.0], [1.0]]), [2.0], np.ones(2)), [0, 2])
        assert np.allclose(dense_block_apply(np.eye(2), [1.0, 1.0], np.array([3.0, 4])), [3, 4])
        v = np.array([[1.0], [1.0]]) / np.sqrt(2)
        assert np.allclose(dense_block_apply(v, [4.0], np.array([1.0, 0])), [2, 2])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            dense_block_apply(np.eye(3), np.ones(3), np.ones(2))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 200), st.integers(0, 20), st.integers(0, 2**31 - 1))
    def test_matches_dense(self, n, k, seed):
        k = min(k, n)
        r = np.random.default_rng(seed)
        V, s, x = r.standard_normal((n, k)), r.standard_normal(k), r.standard_normal(n)
        ref = V @ np.diag(s) @ V.T @ x
        got = dense_block_apply(V, s, x)
        # relative to the magnitude of the summed terms, so cancellation does not count as error
        scale = np.linalg.norm(np.abs(V) @ (np.abs(s) * (np.abs(V).T @ np.abs(x))))
        assert np.linalg.norm(got - ref) <= 1e-13 * max(scale, 1e-300)
