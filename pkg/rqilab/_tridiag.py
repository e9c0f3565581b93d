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
"""Dense Hermitian eigensolver used as ground truth.

The matrix is reduced to tridiagonal form, the subdiagonal is made real by
a diagonal phase scaling and the real tridiagonal is diagonalized by the
implicit-shift QL iteration.
"""

from __future__ import annotations

import math
import typing

import numpy as np
import scipy.linalg
from scipy.linalg import blas

from rqilab import exceptions


if typing.TYPE_CHECKING:
    from rqilab import types


MAX_QL_SWEEPS = 60


class DenseEigh(typing.NamedTuple):
    eigenvalues: types.RealVector
    eigenvectors: types.ComplexMatrix


def _real_tridiagonal(
    H: types.ComplexMatrix,
) -> tuple[
    types.RealVector, types.RealVector, types.ComplexVector, types.ComplexMatrix
]:
    T, Q = scipy.linalg.hessenberg(H, calc_q=True)
    n = H.shape[0]
    d = np.real(np.diag(T)).copy()
    sub = np.diag(T, -1)
    phases = np.ones(n, dtype=np.complex128)
    e = np.abs(sub).astype(np.float64)
    for i in range(n - 1):
        phases[i + 1] = phases[i] * (sub[i] / e[i] if e[i] else 1.0)
    return d, e, phases, Q


def tridiagonal_ql(
    d: types.RealVector,
    e: types.RealVector,
) -> tuple[types.RealVector, types.RealMatrix]:
    """Eigenvalues and eigenvectors of a real symmetric tridiagonal matrix.

    ``d`` is the diagonal and ``e[i]`` couples rows ``i`` and ``i + 1``.
    Returns the unsorted eigenvalues and the eigenvectors as columns.
    """
    n = d.shape[0]
    d = np.array(d, dtype=np.float64)
    e = np.append(np.asarray(e, dtype=np.float64), 0.0)
    # Rows of ZT are the eigenvector components being rotated.
    ZT = np.eye(n)
    eps = np.finfo(np.float64).eps
    for l in range(n):  # noqa: E741
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > MAX_QL_SWEEPS:
                msg = f"QL iteration did not converge for eigenvalue {l}"
                raise exceptions.OracleError(msg)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                ZT[i + 1], ZT[i] = blas.drot(ZT[i + 1], ZT[i], c, s)
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, ZT.T


def dense_eigh(H: types.ComplexMatrix) -> DenseEigh:
    """Full eigendecomposition of a dense Hermitian matrix, ascending order."""
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        msg = f"expected a square matrix, got shape {H.shape}"
        raise exceptions.DimensionError(msg)
    d, e, phases, Q = _real_tridiagonal(H)
    values, Z = tridiagonal_ql(d, e)
    order = np.argsort(values, kind="stable")
    vectors = Q @ (phases[:, None] * Z[:, order])
    return DenseEigh(values[order], vectors)
