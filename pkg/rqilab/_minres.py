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
"""MINRES for the shifted inner systems of the Rayleigh quotient iteration."""

from __future__ import annotations

import logging
import math
import typing

import numpy as np
import scipy.linalg
from scipy.linalg import blas

from rqilab import _lanczos
from rqilab import _matio
from rqilab import _utils
from rqilab import exceptions


if typing.TYPE_CHECKING:
    from collections.abc import Callable

    from rqilab import types


LOG = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-14
STAGNATION_FACTOR = 1e-14
STAGNATION_STEPS = 3
MIN_STEPS = 2


class InnerSolveResult(typing.NamedTuple):
    """Outcome of one inner solve ``(A - theta I) w = u``.

    ``d`` is the unit direction with ``(A - theta I) w - u = xi d``; it is
    the zero vector when ``xi == 0``. ``residual_history`` has one relative
    residual norm per Lanczos step.
    """

    w: types.ComplexVector
    xi: float
    d: types.ComplexVector
    steps: int
    residual_history: tuple[float, ...]
    converged: bool
    stagnated: bool
    breakdown: bool = False


class DirectionDiagnostics(typing.NamedTuple):
    orth_defect: float
    cos_psi: float


class MinresIteration:
    """MINRES recurrence over a Lanczos process.

    The projected least squares problem ``min ||e_1 - T y||`` is solved by
    Givens rotations as the tridiagonal grows. ``residual`` follows the
    residual vector of the operator system through the recurrence
    ``r_j = s_j^2 r_{j-1} + c_j g_{j+1} v_{j+1}``.
    """

    def __init__(self, operator: _lanczos.Operator, rhs: types.ComplexVector) -> None:
        self.lanczos = _lanczos.start(operator, rhs)
        self.residual: types.ComplexVector = self.lanczos.V[0].copy()
        self.history: list[float] = []
        self._r_band: list[tuple[float, float, float]] = []
        self._g: list[float] = [1.0]
        self._rotations: list[tuple[float, float]] = []

    @property
    def steps(self) -> int:
        return self.lanczos.steps

    @property
    def breakdown(self) -> bool:
        return self.lanczos.breakdown

    def step(self) -> float:
        lanczos = self.lanczos
        lanczos.extend(1)
        j = lanczos.steps - 1
        alpha = lanczos.alpha[j]
        beta = lanczos.beta[j]

        # Column j of the tridiagonal: rows j-1, j, j+1.
        upper2 = 0.0
        upper1 = lanczos.beta[j - 1] if j else 0.0
        diag = alpha
        if j >= 2:
            c, s = self._rotations[j - 2]
            upper2, upper1 = s * upper1, c * upper1
        if j >= 1:
            c, s = self._rotations[j - 1]
            upper1, diag = c * upper1 + s * diag, -s * upper1 + c * diag

        if diag == 0.0 and beta == 0.0:
            # Singular projection: the step cannot reduce the residual.
            c, s = 0.0, 1.0
        else:
            c, s = blas.drotg(diag, beta)
            c, s = float(c), float(s)
        self._rotations.append((c, s))
        self._r_band.append((upper2, upper1, c * diag + s * beta))

        g = self._g[j]
        self._g[j] = c * g
        self._g.append(-s * g)

        self.residual *= s * s
        if not lanczos.breakdown:
            self.residual += (c * self._g[j + 1]) * lanczos.V[j + 1]

        estimate = abs(self._g[j + 1])
        if math.isnan(estimate):
            msg = f"MINRES produced NaN at step {j + 1}"
            raise exceptions.SolverError(msg)
        self.history.append(estimate)
        return estimate

    def coefficients(self) -> types.RealVector:
        """Solve the triangular system for the current step count."""
        m = self.steps
        band = np.array(self._r_band).T
        ab = np.zeros((3, m))
        ab[0, :] = band[0]
        ab[1, :] = band[1]
        ab[2, :] = band[2]
        g = np.array(self._g[:m])
        # A singular projected matrix leaves a zero pivot in the last column.
        scale = max(float(np.max(np.abs(ab[2]))), 1.0)
        while m and abs(ab[2, m - 1]) <= 1e-300 * scale:
            m -= 1
        if m == 0:
            return np.zeros(0)
        y: types.RealVector = scipy.linalg.solve_banded(
            (0, 2), ab[:, :m], g[:m], check_finite=False
        )
        return y

    def solution(self) -> types.ComplexVector:
        y = self.coefficients()
        if not y.size:
            return np.zeros_like(self.lanczos.V[0])
        return self.lanczos.basis(y.size) @ y


class StopRule:
    def __init__(self, tol: float, max_steps: int) -> None:
        self.tol = EXACT_TOLERANCE if tol == 0 else tol
        self.max_steps = max_steps
        self.stalled = 0
        self.stagnated = False
        self.converged = False

    def __call__(self, history: list[float], breakdown: bool) -> bool:
        current = history[-1]
        if len(history) >= 2:
            previous = history[-2]
            if previous > 0 and (previous - current) < STAGNATION_FACTOR * previous:
                self.stalled += 1
            else:
                self.stalled = 0
        self.converged = current <= self.tol
        if breakdown:
            return True
        if len(history) < MIN_STEPS:
            return False
        if self.converged:
            return True
        # Shifted systems near an eigenvalue plateau at a residual of about
        # one until the Krylov space resolves the shift, so stalls only count
        # once the step limit is reached.
        if len(history) >= self.max_steps:
            self.stagnated = self.stalled >= STAGNATION_STEPS
            return True
        return False


def check_tol(tol: float, name: str = "tol") -> None:
    if not 0.0 <= tol < 1.0:
        msg = f"'{name}' must be in [0, 1), not: {tol}"
        raise ValueError(msg)


def run_iteration(
    iteration: MinresIteration,
    tol: float,
    max_steps: int,
    measure: Callable[[MinresIteration], float] | None = None,
) -> tuple[list[float], StopRule]:
    """Step ``iteration`` until the stop rule fires.

    ``measure`` maps the iteration state to the residual norm the tolerance
    applies to; by default the Givens estimate is used.
    """
    rule = StopRule(tol, max_steps)
    history: list[float] = []
    while True:
        estimate = iteration.step()
        value = estimate if measure is None else measure(iteration)
        if math.isnan(value):
            msg = f"MINRES produced NaN at step {iteration.steps}"
            raise exceptions.SolverError(msg)
        history.append(value)
        if rule(history, iteration.breakdown):
            break
    if rule.stagnated:
        LOG.warning(
            "MINRES stagnated at step %(steps)d with residual %(res).3e "
            "above %(tol).3e",
            {"steps": iteration.steps, "res": history[-1], "tol": rule.tol},
        )
    return history, rule


def minres_solve(
    A: _matio.SparseHermitianMatrix,
    shift: float,
    rhs: types.ComplexVector,
    tol: float,
    max_steps: int,
) -> InnerSolveResult:
    """Solve ``(A - shift I) w = rhs`` by MINRES from the zero guess.

    The iteration stops at the first step ``m >= 2`` whose residual norm is at
    most ``tol``, at ``max_steps`` or on Lanczos breakdown. A solve that reaches
    ``max_steps`` after three steps without relative improvement is reported
    as stagnated. ``tol == 0`` asks for an exact solve, which
    ends at breakdown or at a residual of ``1e-14``.

    :raises ValueError: on a non-unit ``rhs``, ``max_steps < 2`` or ``tol``
                        outside ``[0, 1)``
    :raises SolverError: when NaN appears
    """
    check_tol(tol)
    _utils.check_count(max_steps, "max_steps", MIN_STEPS)
    rhs = _utils.as_complex_vector(rhs)
    iteration = MinresIteration(_lanczos.ShiftedOperator(A, shift), rhs)
    history, rule = run_iteration(iteration, tol, max_steps)

    w = iteration.solution()
    residual = rhs - _matio.shifted_matvec(A, shift, w)
    xi, d = direction(residual)
    if not _utils.is_finite(w):
        msg = "MINRES returned a non-finite solution"
        raise exceptions.SolverError(msg)
    LOG.debug(
        "MINRES shift=%(shift).6g steps=%(steps)d xi=%(xi).3e",
        {"shift": shift, "steps": iteration.steps, "xi": xi},
    )
    return InnerSolveResult(
        w=w,
        xi=xi,
        d=d,
        steps=iteration.steps,
        residual_history=tuple(history),
        converged=rule.converged,
        stagnated=rule.stagnated,
        breakdown=iteration.breakdown,
    )


def direction(residual: types.ComplexVector) -> tuple[float, types.ComplexVector]:
    # residual = u - (A - theta I) w = -xi d
    xi = float(np.linalg.norm(residual))
    if xi == 0.0:
        return 0.0, np.zeros_like(residual)
    return xi, -residual / xi


def residual_identity_check(
    result: InnerSolveResult,
    A: _matio.SparseHermitianMatrix,
    shift: float,
    rhs: types.ComplexVector,
) -> float:
    """Return ``|xi^2 + ||(A - shift I) w||^2 - ||rhs||^2|``."""
    aw = _matio.shifted_matvec(A, shift, result.w)
    return abs(
        result.xi**2
        + float(np.vdot(aw, aw).real)
        - float(np.vdot(rhs, rhs).real),
    )


def residual_direction_diagnostics(
    result: InnerSolveResult,
    A: _matio.SparseHermitianMatrix,
    shift: float,
    rhs: types.ComplexVector,
    x: types.ComplexVector,
) -> DirectionDiagnostics:
    """Orthogonality defect and eigenvector alignment of ``d``.

    ``orth_defect`` is ``|d* (A - shift I) rhs| / ||(A - shift I) rhs||``.
    ``cos_psi`` is ``Re(x* d)`` after rotating ``x`` so that ``x* rhs`` is
    real positive.

    :raises ValueError: when ``result.xi == 0`` and the direction is undefined
    """
    if result.xi == 0.0:
        msg = "residual direction is undefined for an exact solve (xi == 0)"
        raise ValueError(msg)
    ar = _matio.shifted_matvec(A, shift, rhs)
    norm = float(np.linalg.norm(ar))
    orth_defect = abs(np.vdot(result.d, ar)) / norm if norm else 0.0
    return DirectionDiagnostics(
        orth_defect=float(orth_defect),
        cos_psi=phase_aligned_cosine(x, rhs, result.d),
    )


def phase_aligned_cosine(
    x: types.ComplexVector,
    u: types.ComplexVector,
    d: types.ComplexVector,
) -> float:
    """``Re(x* d)`` with the phase of ``x`` fixed by ``x* u`` real positive."""
    xu = np.vdot(x, u)
    phase = xu / abs(xu) if abs(xu) else 1.0
    return float((np.vdot(x * phase, d)).real)
