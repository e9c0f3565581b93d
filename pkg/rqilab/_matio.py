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
"""Matrix Market ingestion and the sparse Hermitian storage type."""

from __future__ import annotations

import logging
import os
import typing

import numpy as np
import scipy.io
import scipy.sparse

from rqilab import _utils
from rqilab import exceptions


if typing.TYPE_CHECKING:
    from collections.abc import Iterable
    from collections.abc import Sequence

    import numpy.typing as npt

    from rqilab import types


LOG = logging.getLogger(__name__)

SYMMETRIZE_TOLERANCE = 1e-12

_FIELDS = ("real", "complex", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric", "hermitian", "skew-symmetric")


class SparseHermitianMatrix:
    """Immutable compressed sparse row storage of a Hermitian matrix.

    Real symmetric matrices are stored with zero imaginary parts. The
    structure is checked to be exactly Hermitian when the object is built.

    :param csr: the matrix, any scipy sparse type or dense array
    :param comments: comment lines carried over from the source file
    :param symmetrized: set when the source was a ``general`` file averaged
                        into Hermitian form
    """

    __slots__ = ("_csr", "comments", "one_norm", "symmetrized")

    def __init__(
        self,
        csr: typing.Any,  # noqa: ANN401
        comments: Sequence[str] = (),
        symmetrized: bool = False,
    ) -> None:
        mat = scipy.sparse.csr_array(csr, dtype=np.complex128, copy=True)
        if mat.shape[0] != mat.shape[1]:
            msg = f"matrix must be square, got shape {mat.shape}"
            raise exceptions.DimensionError(msg)
        if mat.shape[0] == 0:
            msg = "matrix must have at least one row"
            raise exceptions.DimensionError(msg)
        mat.sum_duplicates()
        mat.eliminate_zeros()
        mat.sort_indices()
        if not bool(np.all(np.isfinite(mat.data))):
            msg = "matrix has non-finite entries"
            raise exceptions.MatrixIOError(msg)

        defect = mat - mat.conj().T
        defect.eliminate_zeros()
        if defect.nnz:
            msg = f"matrix is not Hermitian ({defect.nnz} mismatched entries)"
            raise exceptions.HermitianError(msg)

        mat.data.setflags(write=False)
        mat.indices.setflags(write=False)
        mat.indptr.setflags(write=False)
        self._csr = mat
        self.comments = tuple(comments)
        self.symmetrized = symmetrized
        self.one_norm = _one_norm(mat)

    @property
    def n(self) -> int:
        return int(self._csr.shape[0])

    @property
    def row_ptr(self) -> npt.NDArray[np.int32]:
        return self._csr.indptr  # type: ignore[no-any-return]

    @property
    def col_idx(self) -> npt.NDArray[np.int32]:
        return self._csr.indices  # type: ignore[no-any-return]

    @property
    def values(self) -> types.ComplexVector:
        return self._csr.data  # type: ignore[no-any-return]

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    @property
    def csr(self) -> scipy.sparse.csr_array:
        return self._csr

    @property
    def is_real(self) -> bool:
        return not bool(np.any(self._csr.data.imag))

    def diagonal(self) -> types.RealVector:
        return self._csr.diagonal().real.copy()  # type: ignore[no-any-return]

    def to_dense(self) -> types.ComplexMatrix:
        return self._csr.toarray()  # type: ignore[no-any-return]

    def __repr__(self) -> str:
        return (
            f"<SparseHermitianMatrix n={self.n} nnz={self.nnz} "
            f"one_norm={self.one_norm:.6g}>"
        )

    def __reduce__(self) -> tuple[typing.Any, ...]:
        return (
            type(self),
            (self._csr.copy(), self.comments, self.symmetrized),
        )


def _one_norm(mat: scipy.sparse.csr_array) -> float:
    return float(np.max(abs(mat).sum(axis=0)))


def from_triplets(
    n: int,
    rows: Iterable[int],
    cols: Iterable[int],
    vals: Iterable[complex],
    comments: Sequence[str] = (),
) -> SparseHermitianMatrix:
    """Build a matrix from coordinate triplets, duplicates summed."""
    coo = scipy.sparse.coo_array(
        (
            np.fromiter(vals, dtype=np.complex128),
            (np.fromiter(rows, dtype=np.int64), np.fromiter(cols, dtype=np.int64)),
        ),
        shape=(n, n),
    )
    return SparseHermitianMatrix(coo, comments=comments)


def matvec(A: SparseHermitianMatrix, v: types.ComplexVector) -> types.ComplexVector:
    """Return ``A v`` computed as the CSR product."""
    v = _utils.as_complex_vector(v)
    if v.shape[0] != A.n:
        msg = (
            f"dimension mismatch: matrix is {A.n}x{A.n}, "
            f"vector has {v.shape[0]} entries"
        )
        raise exceptions.DimensionError(msg)
    return A.csr @ v  # type: ignore[no-any-return]


def shifted_matvec(
    A: SparseHermitianMatrix,
    shift: float,
    v: types.ComplexVector,
) -> types.ComplexVector:
    """Return ``(A - shift I) v``."""
    v = _utils.as_complex_vector(v)
    out = matvec(A, v)
    if shift:
        out -= shift * v
    return out


class _Header(typing.NamedTuple):
    layout: str
    field: str
    symmetry: str


def _parse_header(line: str) -> _Header:
    tokens = line.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        msg = "missing '%%MatrixMarket matrix' banner"
        raise exceptions.MatrixFormatError(msg, 1)
    layout, field, symmetry = tokens[2:]
    if layout not in {"coordinate", "array"}:
        msg = f"unsupported layout {layout!r}"
        raise exceptions.MatrixFormatError(msg, 1)
    if field not in _FIELDS:
        msg = f"unsupported field {field!r}"
        raise exceptions.MatrixFormatError(msg, 1)
    if symmetry not in _SYMMETRIES:
        msg = f"unsupported symmetry qualifier {symmetry!r}"
        raise exceptions.MatrixFormatError(msg, 1)
    if symmetry == "skew-symmetric":
        msg = "skew-symmetric matrices are not Hermitian"
        raise exceptions.HermitianError(msg)
    if layout == "array" and field == "pattern":
        msg = "pattern field requires the coordinate layout"
        raise exceptions.MatrixFormatError(msg, 1)
    return _Header(layout, field, symmetry)


def _parse_value(tokens: list[str], field: str, lineno: int) -> complex:
    expected = {"pattern": 0, "complex": 2}.get(field, 1)
    if len(tokens) != expected:
        msg = f"expected {expected} value token(s) for field {field!r}, got {len(tokens)}"
        raise exceptions.MatrixFormatError(msg, lineno)
    try:
        if field == "pattern":
            return 1.0
        if field == "complex":
            return complex(float(tokens[0]), float(tokens[1]))
        return float(tokens[0])
    except ValueError:
        msg = f"invalid number in {' '.join(tokens)!r}"
        raise exceptions.MatrixFormatError(msg, lineno) from None


def _parse_ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        msg = f"invalid integer in {' '.join(tokens)!r}"
        raise exceptions.MatrixFormatError(msg, lineno) from None


def _read_entries(
    lines: Iterable[tuple[int, str]],
    header: _Header,
) -> tuple[int, list[int], list[int], list[complex], list[str]]:
    comments: list[str] = []
    size: list[int] | None = None
    size_lineno = 0
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    expected = 0
    lineno = 1
    for lineno, raw in lines:
        line = raw.strip()
        if line.startswith("%"):
            if size is None:
                comments.append(line[1:].strip())
            continue
        if not line:
            continue
        tokens = line.split()
        if size is None:
            size = _parse_ints(tokens, lineno)
            size_lineno = lineno
            if len(size) != (3 if header.layout == "coordinate" else 2):
                msg = f"malformed size line {line!r}"
                raise exceptions.MatrixFormatError(msg, lineno)
            if size[0] != size[1]:
                msg = f"matrix must be square, got {size[0]}x{size[1]}"
                raise exceptions.MatrixFormatError(msg, lineno)
            if size[0] <= 0:
                msg = f"matrix order must be positive, got {size[0]}"
                raise exceptions.MatrixFormatError(msg, lineno)
            n = size[0]
            if header.layout == "coordinate":
                expected = size[2]
            elif header.symmetry == "general":
                expected = n * n
            else:
                expected = n * (n + 1) // 2
            continue

        n = size[0]
        if len(vals) >= expected:
            msg = f"more than the {expected} declared entries"
            raise exceptions.MatrixFormatError(msg, lineno)
        if header.layout == "coordinate":
            i, j = _parse_ints(tokens[:2], lineno)
            value = _parse_value(tokens[2:], header.field, lineno)
            if not (1 <= i <= n and 1 <= j <= n):
                msg = f"index ({i}, {j}) out of range for order {n}"
                raise exceptions.MatrixFormatError(msg, lineno)
            i -= 1
            j -= 1
        else:
            i, j = _array_position(len(vals), n, header.symmetry)
            value = _parse_value(tokens, header.field, lineno)
        rows.append(i)
        cols.append(j)
        vals.append(value)

    if size is None:
        msg = "missing size line"
        raise exceptions.MatrixFormatError(msg, lineno)
    if len(vals) != expected:
        msg = f"expected {expected} entries, found {len(vals)} (size line {size_lineno})"
        raise exceptions.MatrixFormatError(msg, lineno)
    return size[0], rows, cols, vals, comments


def _array_position(index: int, n: int, symmetry: str) -> tuple[int, int]:
    # Column-major; symmetric variants list the lower triangle only.
    if symmetry == "general":
        return index % n, index // n
    j = 0
    remaining = index
    while remaining >= n - j:
        remaining -= n - j
        j += 1
    return j + remaining, j


def _mirror(
    rows: list[int],
    cols: list[int],
    vals: list[complex],
    conjugate: bool,
) -> None:
    for k in range(len(vals)):
        i, j = rows[k], cols[k]
        if i != j:
            rows.append(j)
            cols.append(i)
            vals.append(vals[k].conjugate() if conjugate else vals[k])


def load_matrix_market(path: str | os.PathLike[str]) -> SparseHermitianMatrix:
    """Read a Matrix Market file into a :py:class:`SparseHermitianMatrix`.

    ``symmetric`` and ``hermitian`` files are mirrored, duplicates are summed
    and explicit zeros dropped. A ``general`` file is accepted when its
    relative asymmetry ``||A - A*||_1 / ||A||_1`` is at most ``1e-12``; it is
    then replaced by ``(A + A*) / 2`` and ``symmetrized`` is set.

    :raises MatrixFormatError: on a parse error, with the line number
    :raises HermitianError: when the matrix is not Hermitian
    :raises MatrixIOError: when the file cannot be read
    """
    try:
        with open(path, encoding="utf-8") as f:
            content = f.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        msg = f"cannot read matrix file {os.fspath(path)!r}: {exc}"
        raise exceptions.MatrixIOError(msg) from exc

    if not content:
        msg = "empty file"
        raise exceptions.MatrixFormatError(msg, 1)
    header = _parse_header(content[0])
    n, rows, cols, vals, comments = _read_entries(
        enumerate(content[1:], start=2),
        header,
    )

    if header.symmetry in {"symmetric", "hermitian"}:
        _mirror(rows, cols, vals, conjugate=header.symmetry == "hermitian")
        LOG.debug(
            "Loaded %(path)s: order %(n)d, %(symmetry)s, %(count)d stored entries",
            {"path": path, "n": n, "symmetry": header.symmetry, "count": len(vals)},
        )
        return from_triplets(n, rows, cols, vals, comments)

    return _symmetrize(n, rows, cols, vals, comments, os.fspath(path))


def _symmetrize(
    n: int,
    rows: list[int],
    cols: list[int],
    vals: list[complex],
    comments: list[str],
    path: str,
) -> SparseHermitianMatrix:
    coo = scipy.sparse.coo_array(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)),
        shape=(n, n),
    )
    mat = scipy.sparse.csr_array(coo)
    mat.sum_duplicates()
    norm = _one_norm(mat)
    asymmetry = _one_norm(mat - mat.conj().T) if mat.nnz else 0.0
    if asymmetry > SYMMETRIZE_TOLERANCE * norm:
        msg = (
            f"general matrix {path!r} is not Hermitian: relative asymmetry "
            f"{asymmetry / norm:.3e} exceeds {SYMMETRIZE_TOLERANCE:g}"
        )
        raise exceptions.HermitianError(msg)
    LOG.warning(
        "Symmetrized general matrix %(path)s (relative asymmetry %(asym).3e)",
        {"path": path, "asym": asymmetry / norm if norm else 0.0},
    )
    return SparseHermitianMatrix(
        (mat + mat.conj().T) * 0.5,
        comments=comments,
        symmetrized=True,
    )


def write_matrix_market(
    path: str | os.PathLike[str],
    A: SparseHermitianMatrix,
    comment: str = "",
) -> None:
    """Write ``A`` as a coordinate Matrix Market file, atomically."""
    if A.is_real:
        data: typing.Any = scipy.sparse.csr_array(A.csr.real)
        symmetry = "symmetric"
    else:
        data = A.csr
        symmetry = "hermitian"
    with _utils.atomic_open(os.fspath(path), suffix=".mtx") as tmp:
        scipy.io.mmwrite(tmp, data, comment=comment, symmetry=symmetry)
