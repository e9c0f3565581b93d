# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.

from __future__ import annotations

import logging
import os
import pickle

import numpy as np
import pytest

from rqilab import _matio
from rqilab import _synthetic
from rqilab import exceptions
from rqilab.tests import base


SYMMETRIC_2X2 = """%%MatrixMarket matrix coordinate real symmetric
% a comment
2 2 2
1 1 2
2 1 1
"""


class TestLoadMatrixMarket(base.TestCase):
    def test_symmetric_lower_triangle_is_mirrored(self) -> None:
        A = _matio.load_matrix_market(self.write_file("a.mtx", SYMMETRIC_2X2))
        np.testing.assert_array_equal(A.to_dense(), [[2, 1], [1, 0]])
        assert A.one_norm == 3.0
        assert A.nnz == 3
        assert A.comments == ("a comment",)
        assert A.is_real
        assert not A.symmetrized

    def test_identity(self) -> None:
        path = self.write_file(
            "i.mtx",
            "%%MatrixMarket matrix coordinate real general\n"
            "3 3 3\n1 1 1\n2 2 1\n3 3 1\n",
        )
        A = _matio.load_matrix_market(path)
        assert A.n == 3
        assert A.one_norm == 1.0
        np.testing.assert_array_equal(A.to_dense(), np.eye(3))

    def test_hermitian_conjugate_is_materialized(self) -> None:
        path = self.write_file(
            "h.mtx",
            "%%MatrixMarket matrix coordinate complex hermitian\n2 2 1\n1 2 1 1\n",
        )
        A = _matio.load_matrix_market(path)
        dense = A.to_dense()
        assert dense[0, 1] == 1 + 1j
        assert dense[1, 0] == 1 - 1j
        assert not A.is_real

    def test_duplicates_summed_and_zeros_dropped(self) -> None:
        path = self.write_file(
            "d.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "3 3 4\n1 1 1\n1 1 2\n2 1 0\n3 3 5\n",
        )
        A = _matio.load_matrix_market(path)
        assert A.nnz == 2
        np.testing.assert_array_equal(A.diagonal(), [3, 0, 5])

    def test_csr_structure(self) -> None:
        A = _synthetic.laplacian_2d(3)
        assert np.all(np.diff(A.row_ptr) >= 0)
        for i in range(A.n):
            cols = A.col_idx[A.row_ptr[i] : A.row_ptr[i + 1]]
            assert np.all(np.diff(cols) > 0)
        assert A.one_norm == 8.0

    def test_array_layout(self) -> None:
        path = self.write_file(
            "arr.mtx",
            "%%MatrixMarket matrix array real symmetric\n2 2\n4\n1\n3\n",
        )
        A = _matio.load_matrix_market(path)
        np.testing.assert_array_equal(A.to_dense(), [[4, 1], [1, 3]])

    def test_pattern_field(self) -> None:
        path = self.write_file(
            "p.mtx",
            "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 2\n1 1\n2 1\n",
        )
        A = _matio.load_matrix_market(path)
        np.testing.assert_array_equal(A.to_dense(), [[1, 1], [1, 0]])

    def test_general_file_is_symmetrized(self) -> None:
        path = self.write_file(
            "g.mtx",
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 4\n1 1 1\n1 2 0.5\n2 1 0.50000000000000011\n2 2 1\n",
        )
        A = _matio.load_matrix_market(path)
        assert A.symmetrized
        dense = A.to_dense()
        assert dense[0, 1] == dense[1, 0]

    def test_exactly_symmetric_general_file_is_flagged(self) -> None:
        path = self.write_file(
            "sg.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1\n2 1 1\n",
        )
        with self.assertLogs("rqilab._matio", logging.WARNING) as logs:
            A = _matio.load_matrix_market(path)
        assert A.symmetrized
        assert "Symmetrized general matrix" in logs.output[0]
        np.testing.assert_array_equal(A.to_dense(), [[0, 1], [1, 0]])

    def test_general_file_not_hermitian(self) -> None:
        path = self.write_file(
            "ng.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1\n2 1 2\n",
        )
        with pytest.raises(exceptions.HermitianError):
            _matio.load_matrix_market(path)

    def test_hermitian_file_with_complex_diagonal(self) -> None:
        path = self.write_file(
            "cd.mtx",
            "%%MatrixMarket matrix coordinate complex hermitian\n1 1 1\n1 1 1 1\n",
        )
        with pytest.raises(exceptions.HermitianError):
            _matio.load_matrix_market(path)

    def test_skew_symmetric_rejected(self) -> None:
        path = self.write_file(
            "s.mtx",
            "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 1\n",
        )
        self.assert_raises_msg(
            exceptions.HermitianError,
            "skew-symmetric matrices are not Hermitian",
            _matio.load_matrix_market,
            path,
        )

    def test_parse_error_has_line_number(self) -> None:
        path = self.write_file(
            "bad.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 1\n1 x 2\n",
        )
        with pytest.raises(exceptions.MatrixFormatError) as exc_info:
            _matio.load_matrix_market(path)
        assert exc_info.value.lineno == 4
        assert str(exc_info.value) == "line 4: invalid integer in '1 x'"

    def test_non_square(self) -> None:
        path = self.write_file(
            "ns.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 3 0\n",
        )
        self.assert_raises_msg(
            exceptions.MatrixFormatError,
            "line 2: matrix must be square, got 2x3",
            _matio.load_matrix_market,
            path,
        )

    def test_index_out_of_range(self) -> None:
        path = self.write_file(
            "oor.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n",
        )
        self.assert_raises_msg(
            exceptions.MatrixFormatError,
            "line 3: index (3, 1) out of range for order 2",
            _matio.load_matrix_market,
            path,
        )

    def test_missing_entries(self) -> None:
        path = self.write_file(
            "short.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n",
        )
        with pytest.raises(exceptions.MatrixFormatError) as exc_info:
            _matio.load_matrix_market(path)
        assert "expected 2 entries, found 1" in str(exc_info.value)

    def test_bad_banner(self) -> None:
        path = self.write_file("b.mtx", "hello\n1 1 1\n")
        self.assert_raises_msg(
            exceptions.MatrixFormatError,
            "line 1: missing '%%MatrixMarket matrix' banner",
            _matio.load_matrix_market,
            path,
        )

    def test_missing_file(self) -> None:
        with pytest.raises(exceptions.MatrixIOError) as exc_info:
            _matio.load_matrix_market(os.path.join(self.tmpdir, "nope.mtx"))
        assert exc_info.value.exit_code == 3


class TestSparseHermitianMatrix(base.TestCase):
    def test_not_hermitian(self) -> None:
        self.assert_raises_msg(
            exceptions.HermitianError,
            "matrix is not Hermitian (2 mismatched entries)",
            _matio.SparseHermitianMatrix,
            np.array([[1.0, 2.0], [3.0, 1.0]]),
        )

    def test_not_square(self) -> None:
        with pytest.raises(exceptions.DimensionError):
            _matio.SparseHermitianMatrix(np.ones((2, 3)))

    def test_storage_is_read_only(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0])
        with pytest.raises(ValueError, match="read-only"):
            A.values[0] = 5.0

    def test_pickle(self) -> None:
        A = _synthetic.random_hermitian(12, seed=3)
        B = pickle.loads(pickle.dumps(A))
        np.testing.assert_array_equal(A.to_dense(), B.to_dense())
        assert A.one_norm == B.one_norm


class TestMatvec(base.TestCase):
    def test_identity(self) -> None:
        A = _synthetic.diagonal([1.0, 1.0, 1.0])
        v = np.array([1.0, -2.0j, 3.0])
        np.testing.assert_array_equal(_matio.matvec(A, v), v)

    def test_diagonal(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(_matio.matvec(A, np.ones(3)), [1, 2, 3])

    def test_against_dense_product(self) -> None:
        A = base.hermitian_with_spectrum(np.linspace(-3.0, 5.0, 8), seed=7)
        rng = np.random.default_rng(1)
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        np.testing.assert_allclose(
            _matio.matvec(A, v), A.to_dense() @ v, rtol=1e-13, atol=1e-14
        )

    def test_shifted(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(
            _matio.shifted_matvec(A, 2.0, np.ones(3)), [-1, 0, 1]
        )

    def test_dimension_mismatch(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0, 3.0])
        self.assert_raises_msg(
            exceptions.DimensionError,
            "dimension mismatch: matrix is 3x3, vector has 2 entries",
            _matio.matvec,
            A,
            np.ones(2),
        )


class TestWriteMatrixMarket(base.TestCase):
    def test_written_file_loads_back(self) -> None:
        A = _synthetic.random_hermitian(9, density=0.4, seed=2)
        path = os.path.join(self.tmpdir, "out.mtx")
        _matio.write_matrix_market(path, A, comment="random")
        B = _matio.load_matrix_market(path)
        np.testing.assert_allclose(B.to_dense(), A.to_dense(), rtol=1e-15, atol=0)
        assert os.listdir(self.tmpdir) == ["out.mtx"]
