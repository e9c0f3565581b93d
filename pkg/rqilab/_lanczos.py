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
"""Lanczos process with full reorthogonalization."""

from __future__ import annotations

import logging
import typing

import numpy as np

from rqilab import _matio
from rqilab import _utils
from rqilab import exceptions


if typing.TYPE_CHECKING:
    from rqilab import types


LOG = logging.getLogger(__name__)

BREAKDOWN_TOLERANCE = 1e-14
REORTHOGONALIZATION_PASSES = 2


class Operator(typing.Protocol):
    """A Hermitian operator the Lanczos process can run on."""

    @property
    def n(self) -> int: ...

    @property
    def scale(self) -> float:
        """Norm estimate the breakdown tolerance is relative to."""
        ...

    def apply(self, v: types.ComplexVector) -> types.ComplexVector: ...


class ShiftedOperator(typing.NamedTuple):
    """``A - shift I``."""

    A: _matio.SparseHermitianMatrix
    shift: float

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def scale(self) -> float:
        return self.A.one_norm + abs(self.shift)

    def apply(self, v: types.ComplexVector) -> types.ComplexVector:
        return _matio.shifted_matvec(self.A, self.shift, v)


class LanczosDecomposition:
    """State of an m-step Lanczos process.

    ``V`` holds ``m + 1`` orthonormal vectors, or ``m`` after a breakdown,
    ``alpha`` the diagonal and ``beta`` the subdiagonal of the projected
    tridiagonal matrix, ``beta[m - 1]`` coupling step ``m`` to ``V[m]``.
    """

    def __init__(self, operator: Operator, start: types.ComplexVector) -> None:
        self.operator = operator
        self.V: list[types.ComplexVector] = [start]
        self.alpha: list[float] = []
        self.beta: list[float] = []
        self.breakdown = False
        self.contamination = 0.0
        self._scale = operator.scale

    @property
    def shift(self) -> float | None:
        return getattr(self.operator, "shift", None)

    @property
    def steps(self) -> int:
        return len(self.alpha)

    def basis(self, columns: int | None = None) -> types.ComplexMatrix:
        """Return the first ``columns`` basis vectors as matrix columns."""
        vectors = self.V if columns is None else self.V[:columns]
        return np.column_stack(vectors)

    def tridiagonal(self) -> types.RealMatrix:
        """The ``(m + 1) x m`` matrix of the recurrence."""
        m = self.steps
        t = np.zeros((m + 1, m))
        for j in range(m):
            t[j, j] = self.alpha[j]
            t[j + 1, j] = self.beta[j]
            if j:
                t[j - 1, j] = self.beta[j - 1]
        return t

    def extend(self, steps: int = 1) -> LanczosDecomposition:
        for _ in range(steps):
            if self.breakdown:
                break
            self._step()
        return self

    def _step(self) -> None:
        v = self.V[-1]
        w = self.operator.apply(v)
        if not _utils.is_finite(w):
            msg = f"non-finite vector at Lanczos step {self.steps + 1}"
            raise exceptions.SolverError(msg)
        h = np.vdot(v, w)
        self.contamination = max(self.contamination, abs(h.imag))
        self.alpha.append(float(h.real))

        for _ in range(REORTHOGONALIZATION_PASSES):
            for q in self.V:
                w -= np.vdot(q, w) * q

        b = float(np.linalg.norm(w))
        self.beta.append(b)
        self._scale = max(self._scale, abs(h.real), b)
        if b <= BREAKDOWN_TOLERANCE * self._scale:
            LOG.debug(
                "Lanczos breakdown at step %(step)d (beta=%(beta).3e)",
                {"step": self.steps, "beta": b},
            )
            self.breakdown = True
            return
        self.V.append(w / b)


def start(operator: Operator, v: types.ComplexVector) -> LanczosDecomposition:
    v = _utils.as_complex_vector(v)
    if v.shape[0] != operator.n:
        msg = (
            f"dimension mismatch: operator is order {operator.n}, "
            f"start has {v.shape[0]} entries"
        )
        raise exceptions.DimensionError(msg)
    _utils.check_unit(v, "start")
    return LanczosDecomposition(operator, v.copy())


def lanczos_extend(
    A: _matio.SparseHermitianMatrix,
    shift: float,
    start_vector: types.ComplexVector | None,
    steps: int,
    existing: LanczosDecomposition | None = None,
) -> LanczosDecomposition:
    """Run ``steps`` more Lanczos steps on ``A - shift I``.

    A new process starts from ``start_vector``; when ``existing`` is given the
    start vector is ignored and that process is continued in place. The
    extension stops early on breakdown, when ``beta`` falls below
    ``1e-14 (||A||_1 + |shift|)``.
    """
    _utils.check_count(steps, "steps", 1)
    if existing is None:
        if start_vector is None:
            msg = "'start_vector' is required without an existing decomposition"
            raise ValueError(msg)
        existing = start(ShiftedOperator(A, shift), start_vector)
    return existing.extend(steps)
