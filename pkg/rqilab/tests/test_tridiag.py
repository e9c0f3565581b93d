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

import numpy as np

from rqilab import _tridiag
from rqilab import exceptions
from rqilab.tests import base


class TestTridiagonalQL(base.TestCase):
    def test_two_by_two(self) -> None:
        values, vectors = _tridiag.tridiagonal_ql(np.array([2.0, 2.0]), np.array([1.0]))
        np.testing.assert_allclose(np.sort(values), [1.0, 3.0], atol=1e-14)
        T = np.array([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(T @ vectors, vectors * values, atol=1e-14)

    def test_already_diagonal(self) -> None:
        diag = np.array([3.0, -1.0, 2.0])
        values, vectors = _tridiag.tridiagonal_ql(diag, np.zeros(2))
        np.testing.assert_array_equal(values, [3.0, -1.0, 2.0])
        np.testing.assert_array_equal(vectors, np.eye(3))

    def test_second_difference(self) -> None:
        n = 30
        values, vectors = _tridiag.tridiagonal_ql(np.full(n, 2.0), np.full(n - 1, -1.0))
        expected = 2.0 - 2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
        np.testing.assert_allclose(np.sort(values), expected, atol=1e-12)
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(n), atol=1e-12)


class TestDenseEigh(base.TestCase):
    def test_matches_lapack(self) -> None:
        rng = np.random.default_rng(5)
        b = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
        H = (b + b.conj().T) / 2
        result = _tridiag.dense_eigh(H)
        expected = np.linalg.eigvalsh(H)
        np.testing.assert_allclose(result.eigenvalues, expected, atol=1e-10)
        assert np.all(np.diff(result.eigenvalues) >= 0.0)
        V = result.eigenvectors
        np.testing.assert_allclose(V.conj().T @ V, np.eye(50), atol=1e-10)
        np.testing.assert_allclose(H @ V, V * result.eigenvalues, atol=1e-10)

    def test_real_symmetric(self) -> None:
        H = base.hermitian_with_spectrum(
            [-2.0, 0.5, 1.0, 7.0], seed=1, complex_entries=False
        )
        result = _tridiag.dense_eigh(H.to_dense())
        np.testing.assert_allclose(
            result.eigenvalues, [-2.0, 0.5, 1.0, 7.0], atol=1e-12
        )

    def test_order_one(self) -> None:
        result = _tridiag.dense_eigh(np.array([[4.0]]))
        np.testing.assert_array_equal(result.eigenvalues, [4.0])
        np.testing.assert_allclose(np.abs(result.eigenvectors), [[1.0]])

    def test_not_square(self) -> None:
        self.assert_raises_msg(
            exceptions.DimensionError,
            "expected a square matrix, got shape (2, 3)",
            _tridiag.dense_eigh,
            np.zeros((2, 3)),
        )
