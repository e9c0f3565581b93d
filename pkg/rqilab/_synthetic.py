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
"""Synthetic test matrices and the public collection targets."""

from __future__ import annotations

import typing

import numpy as np
import scipy.sparse

from rqilab import _matio


if typing.TYPE_CHECKING:
    from collections.abc import Sequence


class CollectionMatrix(typing.NamedTuple):
    """A matrix from the public sparse matrix collection used in experiments."""

    name: str
    order: int
    target: str
    sin_phi0: float
    beta: float
    stop_tol: float
    c1: float
    c2: float
    url: str


_COLLECTION = "https://sparse.tamu.edu/MM/HB/{}.tar.gz"

COLLECTION_MATRICES: tuple[CollectionMatrix, ...] = (
    CollectionMatrix(
        "BCSPWR08", 1624, "smallest", 0.1134, 40.19, 1e-14, 1000.0, 1000.0,
        _COLLECTION.format("bcspwr08"),
    ),
    CollectionMatrix(
        "CAN1054", 1054, "index:10", 0.1137, 88.28, 1e-14, 1000.0, 1000.0,
        _COLLECTION.format("can_1054"),
    ),
    CollectionMatrix(
        "DWT2680", 2680, "largest", 0.1133, 2295.6, 1e-12, 10000.0, 1000.0,
        _COLLECTION.format("dwt_2680"),
    ),
    CollectionMatrix(
        "LSHP3466", 3466, "index:20", 0.1011, 2613.1, 1e-13, 1000.0, 1000.0,
        _COLLECTION.format("lshp3466"),
    ),
)  # fmt: skip


def diagonal(eigenvalues: Sequence[float]) -> _matio.SparseHermitianMatrix:
    """Diagonal matrix with the given spectrum."""
    values = np.asarray(eigenvalues, dtype=np.float64)
    return _matio.SparseHermitianMatrix(scipy.sparse.diags_array(values))


def spectrum_with_beta(n: int, beta: float) -> list[float]:
    """Spectrum of order ``n`` whose smallest eigenvalue has ``beta``.

    The smallest eigenvalue is 0, the next is 1 and the rest spread evenly up
    to ``beta``, so ``(lambda_max - lambda_min) / gap == beta``.
    """
    if n < 3:
        msg = f"'n' must be >= 3, not: {n}"
        raise ValueError(msg)
    if beta <= 1.0:
        msg = f"'beta' must be > 1, not: {beta}"
        raise ValueError(msg)
    return [0.0, *np.linspace(1.0, beta, n - 1).tolist()]


def diagonal_with_beta(n: int, beta: float) -> _matio.SparseHermitianMatrix:
    return diagonal(spectrum_with_beta(n, beta))


def laplacian_2d(nx: int, ny: int | None = None) -> _matio.SparseHermitianMatrix:
    """Five-point finite difference Laplacian on an ``nx`` by ``ny`` grid."""
    ny = nx if ny is None else ny

    def second_difference(m: int) -> scipy.sparse.csr_array:
        return scipy.sparse.diags_array(
            [-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)],
            offsets=[-1, 0, 1],
            format="csr",
        )

    lap = scipy.sparse.kron(
        scipy.sparse.eye_array(ny),
        second_difference(nx),
    ) + scipy.sparse.kron(second_difference(ny), scipy.sparse.eye_array(nx))
    return _matio.SparseHermitianMatrix(lap)


def random_hermitian(
    n: int,
    density: float = 0.2,
    seed: int = 0,
    complex_entries: bool = True,
) -> _matio.SparseHermitianMatrix:
    """Sparse random Hermitian ``(B + B*) / 2`` with a nonzero diagonal."""
    rng = np.random.default_rng(seed)
    pattern = scipy.sparse.random(n, n, density=density, format="coo", random_state=rng)
    vals = rng.standard_normal(pattern.nnz)
    if complex_entries:
        vals = vals + 1j * rng.standard_normal(pattern.nnz)
    b = scipy.sparse.coo_array((vals, (pattern.row, pattern.col)), shape=(n, n))
    b = scipy.sparse.csr_array(b) + scipy.sparse.diags_array(rng.standard_normal(n))
    return _matio.SparseHermitianMatrix((b + b.conj().T) * 0.5)
