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
"""Tuned preconditioner and the preconditioned inner solve."""

from __future__ import annotations

import enum
import logging
import math
import typing

import numpy as np
import scipy.linalg

from rqilab import _matio
from rqilab import _minres
from rqilab import _utils
from rqilab import exceptions


if typing.TYPE_CHECKING:
    from collections.abc import Callable

    import numpy.typing as npt
    from typing_extensions import Self

    from rqilab import types


LOG = logging.getLogger(__name__)

MAX_ORDER = 5000
TUNING_THRESHOLD = 1e-14
ALPHA_START = 2.0**-20


class PrecondMode(str, enum.Enum):
    DIAGONAL = "diagonal"
    INCOMPLETE_CHOLESKY = "incomplete-cholesky"
    DENSE_CHOLESKY = "dense-cholesky"

    @classmethod
    def parse(cls, value: str) -> PrecondMode:
        aliases = {
            "diag": "diagonal",
            "ic": "incomplete-cholesky",
            "dense": "dense-cholesky",
        }
        try:
            return cls(aliases.get(value, value))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            msg = f"unknown preconditioner mode {value!r}, expected one of: {choices}"
            raise ValueError(msg) from None


class TuningKind(str, enum.Enum):
    UNTUNED = "untuned"
    NONE = "none"
    RANK_ONE = "rank-one"
    RANK_TWO = "rank-two"
    FAILED = "failed"


class _FactorizationFailed(Exception):
    pass


def cholesky_rank_one(
    L: types.ComplexMatrix,
    x: types.ComplexVector,
    sign: int = 1,
) -> None:
    """Overwrite ``L`` with the factor of ``L L* + sign x x*``.

    :raises PreconditionerError: when a downdate loses definiteness; ``L`` is
                                 then left partially updated
    """
    x = np.array(x, dtype=np.complex128)
    nonzero = np.flatnonzero(x)
    if not nonzero.size:
        return
    for k in range(int(nonzero[0]), L.shape[0]):
        lkk = L[k, k].real
        r2 = lkk * lkk + sign * abs(x[k]) ** 2
        if not r2 > 0.0:
            msg = f"Cholesky downdate lost definiteness at column {k}"
            raise exceptions.PreconditionerError(msg)
        r = math.sqrt(r2)
        c = r / lkk
        s = x[k] / lkk
        column = L[k + 1 :, k].copy()
        L[k, k] = r
        L[k + 1 :, k] = (column + sign * np.conj(s) * x[k + 1 :]) / c
        x[k + 1 :] = (x[k + 1 :] - s * column) / c


def _dense_cholesky(q: types.ComplexMatrix) -> types.ComplexMatrix:
    try:
        return scipy.linalg.cholesky(q, lower=True, check_finite=False)  # type: ignore[no-any-return]
    except scipy.linalg.LinAlgError as exc:
        raise _FactorizationFailed from exc


def _diagonal_factor(diag: types.RealVector) -> types.ComplexMatrix:
    if np.any(diag <= 0.0):
        raise _FactorizationFailed
    return np.diag(np.sqrt(diag)).astype(np.complex128)


def _incomplete_cholesky(
    q: types.ComplexMatrix,
    mask: npt.NDArray[np.bool_],
) -> types.ComplexMatrix:
    # IC(0): fill is dropped outside the sparsity pattern of q.
    n = q.shape[0]
    work = np.where(mask, q, 0.0)
    L = np.zeros_like(work)
    for k in range(n):
        pivot = work[k, k].real
        if pivot <= 0.0:
            raise _FactorizationFailed
        lkk = math.sqrt(pivot)
        L[k, k] = lkk
        rows = k + 1 + np.flatnonzero(work[k + 1 :, k])
        if not rows.size:
            continue
        col = work[rows, k] / lkk
        L[rows, k] = col
        block = np.ix_(rows, rows)
        work[block] -= np.where(mask[block], np.outer(col, np.conj(col)), 0.0)
    return L


class TunedPreconditioner:
    """Hermitian positive definite preconditioner ``Q = L L*`` and its tuning.

    ``L`` factors the base ``Q`` approximating ``A - sigma I``. After
    :py:meth:`tune` the matrix ``Q + update`` satisfies ``Q_tuned u = A u``
    and is factored by ``L_tuned``.
    """

    def __init__(
        self,
        L: types.ComplexMatrix,
        sigma: float,
        mode: PrecondMode | None,
        alpha: float,
    ) -> None:
        self.L = L
        self.sigma = sigma
        self.mode = mode
        self.alpha = alpha
        self.L_tuned: types.ComplexMatrix | None = None
        self.tuning_vector: types.ComplexVector | None = None
        self.tuning_scalar = 0.0
        self.tuning_kind = TuningKind.UNTUNED
        self.tuning_defect = 0.0
        self.spd_ok = True
        self.events: list[str] = []

    @classmethod
    def identity(cls, n: int) -> Self:
        return cls(np.eye(n, dtype=np.complex128), 0.0, None, 0.0)

    @property
    def n(self) -> int:
        return int(self.L.shape[0])

    @property
    def factor(self) -> types.ComplexMatrix:
        """The factor in use: tuned when available, the base otherwise."""
        return self.L if self.L_tuned is None else self.L_tuned

    def apply_base(self, v: types.ComplexVector) -> types.ComplexVector:
        return self.L @ (self.L.conj().T @ v)  # type: ignore[no-any-return]

    def apply(self, v: types.ComplexVector) -> types.ComplexVector:
        """``Q_tuned v``, or ``Q v`` when untuned."""
        L = self.factor
        return L @ (L.conj().T @ v)  # type: ignore[no-any-return]

    def tune(
        self,
        A: _matio.SparseHermitianMatrix,
        u: types.ComplexVector,
    ) -> Self:
        """Refresh the low-rank update so that the tuned matrix maps ``u`` to ``A u``.

        With ``z = (A - Q) u`` and ``gamma = z* u`` the rank-one form
        ``Q + z z* / gamma`` is used when ``gamma > 1e-14 ||z||``. Otherwise
        ``Q + z u* + u z* - gamma u u*`` is applied as a Cholesky update
        followed by a downdate. When that downdate fails ``spd_ok`` is
        cleared and the event recorded.
        """
        u = _utils.as_complex_vector(u)
        _utils.check_unit(u, "u")
        au = _matio.matvec(A, u)
        z = au - self.apply_base(u)
        gamma = float(np.vdot(z, u).real)
        znorm = float(np.linalg.norm(z))
        self.tuning_vector = z
        self.tuning_scalar = gamma
        self.spd_ok = True

        if znorm <= TUNING_THRESHOLD * max(float(np.linalg.norm(au)), 1.0):
            self.L_tuned = self.L.copy()
            self.tuning_kind = TuningKind.NONE
        elif gamma > TUNING_THRESHOLD * znorm:
            L = self.L.copy()
            cholesky_rank_one(L, z / math.sqrt(gamma))
            self.L_tuned = L
            self.tuning_kind = TuningKind.RANK_ONE
        else:
            self._tune_rank_two(u, z, gamma)

        if self.spd_ok:
            qu = self.apply(u)
            scale = max(float(np.linalg.norm(au)), np.finfo(float).tiny)
            self.tuning_defect = float(np.linalg.norm(qu - au) / scale)
        else:
            self.tuning_defect = math.inf
        LOG.debug(
            "Tuned preconditioner: %(kind)s gamma=%(gamma).3e defect=%(defect).3e",
            {
                "kind": self.tuning_kind.value,
                "gamma": gamma,
                "defect": self.tuning_defect,
            },
        )
        return self

    def _tune_rank_two(
        self,
        u: types.ComplexVector,
        z: types.ComplexVector,
        gamma: float,
    ) -> None:
        # z u* + u z* - gamma u u* = p p* - q q*
        y = z - 0.5 * gamma * u
        t = math.sqrt(float(np.linalg.norm(y)))
        p = (t * u + y / t) / math.sqrt(2.0)
        q = (t * u - y / t) / math.sqrt(2.0)
        L = self.L.copy()
        cholesky_rank_one(L, p, sign=1)
        try:
            cholesky_rank_one(L, q, sign=-1)
        except exceptions.PreconditionerError as exc:
            event = f"rank-two tuning failed, gamma={gamma:.3e}: {exc}"
            LOG.warning("Tuning skipped: %s", event)
            self.events.append(event)
            self.L_tuned = None
            self.tuning_kind = TuningKind.FAILED
            self.spd_ok = False
            return
        self.L_tuned = L
        self.tuning_kind = TuningKind.RANK_TWO


def _alpha_ladder(
    A: _matio.SparseHermitianMatrix, sigma: float
) -> typing.Iterator[float]:
    unit = A.one_norm if A.one_norm > 0.0 else max(abs(sigma), 1.0)
    cap = 4.0 * (A.one_norm + abs(sigma)) + unit
    yield 0.0
    alpha = ALPHA_START * unit
    while alpha <= cap:
        yield alpha
        alpha *= 2.0


def _factorizer(
    A: _matio.SparseHermitianMatrix,
    sigma: float,
    mode: PrecondMode,
) -> Callable[[float], types.ComplexMatrix]:
    n = A.n
    if mode is PrecondMode.DIAGONAL:
        diag = A.diagonal() - sigma
        return lambda alpha: _diagonal_factor(diag + alpha)

    dense = A.to_dense()
    dense[np.diag_indices(n)] -= sigma
    if mode is PrecondMode.DENSE_CHOLESKY:
        return lambda alpha: _dense_cholesky(dense + alpha * np.eye(n))

    mask = (dense != 0) | np.eye(n, dtype=bool)
    return lambda alpha: _incomplete_cholesky(dense + alpha * np.eye(n), mask)


def build_base(
    A: _matio.SparseHermitianMatrix,
    sigma: float,
    mode: PrecondMode | str,
) -> TunedPreconditioner:
    """Factor a positive definite ``Q`` approximating ``A - sigma I``.

    ``Q`` is built from ``A - sigma I + alpha I`` with the smallest ``alpha``
    in ``0, 2^-20 ||A||_1, 2^-19 ||A||_1, ...`` for which the factorization
    in the requested mode succeeds.

    :raises PreconditionerError: when ``A`` is larger than the dense cap or no
                                 ``alpha`` up to the cap works
    """
    mode = PrecondMode.parse(mode) if isinstance(mode, str) else mode
    n = A.n
    if n > MAX_ORDER:
        msg = f"preconditioner needs a dense factor, order {n} exceeds {MAX_ORDER}"
        raise exceptions.PreconditionerError(msg)

    factorize = _factorizer(A, sigma, mode)
    for alpha in _alpha_ladder(A, sigma):
        try:
            L = factorize(alpha)
        except _FactorizationFailed:
            continue
        LOG.info(
            "Built %(mode)s preconditioner for sigma=%(sigma).6g "
            "with alpha=%(alpha).3e",
            {"mode": mode.value, "sigma": sigma, "alpha": alpha},
        )
        return TunedPreconditioner(L, sigma, mode, alpha)

    msg = f"{mode.value} factorization of A - {sigma:g} I failed for every shift up to the cap"
    raise exceptions.PreconditionerError(msg)


def tune(
    p: TunedPreconditioner,
    A: _matio.SparseHermitianMatrix,
    u: types.ComplexVector,
) -> TunedPreconditioner:
    return p.tune(A, u)


class PreconditionedOperator(typing.NamedTuple):
    """``L^-1 (A - shift I) L^-*`` for a lower triangular ``L``."""

    A: _matio.SparseHermitianMatrix
    shift: float
    L: types.ComplexMatrix

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def scale(self) -> float:
        # Unknown up front; the Lanczos process tracks the largest entries.
        return 0.0

    def apply(self, v: types.ComplexVector) -> types.ComplexVector:
        y = scipy.linalg.solve_triangular(self.L, v, lower=True, trans="C")
        y = _matio.shifted_matvec(self.A, self.shift, y)
        return scipy.linalg.solve_triangular(self.L, y, lower=True)  # type: ignore[no-any-return]


def preconditioned_minres_solve(
    A: _matio.SparseHermitianMatrix,
    shift: float,
    u: types.ComplexVector,
    p: TunedPreconditioner,
    tol: float,
    max_steps: int,
) -> _minres.InnerSolveResult:
    """MINRES on ``L^-1 (A - shift I) L^-* w_hat = L^-1 u``.

    The stopping test applies to the residual of the original system,
    ``xi = ||L^-1 u|| ||L r_hat||``, so the returned ``w = ||L^-1 u|| L^-* w_hat``
    meets ``tol`` in the original variables. ``residual_history`` holds
    those mapped values, which need not decrease monotonically.

    :raises PreconditionerError: when the tuned factor is not positive definite
    """
    if not p.spd_ok:
        msg = "preconditioner is not positive definite after tuning"
        raise exceptions.PreconditionerError(msg)
    _minres.check_tol(tol)
    _utils.check_count(max_steps, "max_steps", _minres.MIN_STEPS)
    u = _utils.as_complex_vector(u)
    _utils.check_unit(u, "u")
    if p.n != A.n:
        msg = f"dimension mismatch: preconditioner is order {p.n}, matrix {A.n}"
        raise exceptions.DimensionError(msg)

    L = p.factor
    b = scipy.linalg.solve_triangular(L, u, lower=True)
    nb = float(np.linalg.norm(b))
    iteration = _minres.MinresIteration(PreconditionedOperator(A, shift, L), b / nb)

    def mapped(it: _minres.MinresIteration) -> float:
        return nb * float(np.linalg.norm(L @ it.residual))

    history, rule = _minres.run_iteration(iteration, tol, max_steps, mapped)
    w = nb * scipy.linalg.solve_triangular(
        L, iteration.solution(), lower=True, trans="C"
    )
    residual = u - _matio.shifted_matvec(A, shift, w)
    xi, d = _minres.direction(residual)
    LOG.debug(
        "Preconditioned MINRES shift=%(shift).6g steps=%(steps)d xi=%(xi).3e",
        {"shift": shift, "steps": iteration.steps, "xi": xi},
    )
    return _minres.InnerSolveResult(
        w=w,
        xi=xi,
        d=d,
        steps=iteration.steps,
        residual_history=tuple(history),
        converged=rule.converged,
        stagnated=rule.stagnated,
        breakdown=iteration.breakdown,
    )

