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
"""Outer Rayleigh quotient iteration with inexact inner solves."""

from __future__ import annotations

import enum
import logging
import math
import typing

import numpy as np

from rqilab import _matio
from rqilab import _minres
from rqilab import _policies
from rqilab import _tuned_precond
from rqilab import _utils
from rqilab import exceptions


if typing.TYPE_CHECKING:
    from collections.abc import Iterator

    from rqilab import types


LOG = logging.getLogger(__name__)

DEFAULT_STOP_TOL = 1e-14
DEFAULT_MAX_OUTER = 20
W_NORM_BREAKDOWN = 1e-30
IMAGINARY_TOLERANCE = 1e-12


class EigenEstimate(typing.NamedTuple):
    """Outer iterate ``u_k`` with its Rayleigh quotient and residual."""

    u: types.ComplexVector
    theta: float
    r: types.ComplexVector
    r_norm: float


class ProbeValues(typing.NamedTuple):
    """Angles measured against a known eigenvector at one outer step."""

    sin_phi: float
    cos_phi: float
    cos_psi: float | None = None
    sin_psi: float | None = None
    eps_m: float | None = None
    cos_phi_plus_xi_cos_psi: float | None = None
    cos_varphi: float | None = None
    sin_phi_hat: float | None = None


class Probe(typing.Protocol):
    def __call__(
        self,
        estimate: EigenEstimate,
        result: _minres.InnerSolveResult | None,
        preconditioner: _tuned_precond.TunedPreconditioner | None,
    ) -> ProbeValues: ...


class TraceRecord(typing.NamedTuple):
    """Outer iterate ``k`` and the inner solve performed from it.

    The inner solve fields are ``None`` on the last record of a run, where
    no solve happens. Angle fields are only set on oracle-backed runs.
    """

    k: int
    theta: float
    r_norm: float
    xi_requested: float | None = None
    xi_achieved: float | None = None
    inner_steps: int | None = None
    stagnated: bool = False
    w_norm: float | None = None
    sin_phi: float | None = None
    cos_psi: float | None = None
    cos_phi_plus_xi_cos_psi: float | None = None
    cos_phi: float | None = None
    sin_psi: float | None = None
    eps_m: float | None = None
    cos_varphi: float | None = None
    sin_phi_hat: float | None = None
    inner_converged: bool | None = None
    preconditioned: bool = False
    tuning: str | None = None
    tuning_defect: float | None = None

    @property
    def solved(self) -> bool:
        return self.inner_steps is not None

    @property
    def flagged(self) -> bool:
        """Stagnated, or stopped above the requested tolerance."""
        return self.stagnated or self.inner_converged is False


class OuterTrace:
    """Append-only sequence of :py:class:`TraceRecord`."""

    def __init__(self, policy: str = "", preconditioner: str | None = None) -> None:
        self.policy = policy
        self.preconditioner = preconditioner
        self.events: list[str] = []
        self._records: list[TraceRecord] = []

    def append(self, record: TraceRecord) -> None:
        if self._records and record.k <= self._records[-1].k:
            msg = f"trace index must increase: {record.k} after {self._records[-1].k}"
            raise ValueError(msg)
        self._records.append(record)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)

    @typing.overload
    def __getitem__(self, index: int) -> TraceRecord: ...

    @typing.overload
    def __getitem__(self, index: slice) -> list[TraceRecord]: ...

    def __getitem__(self, index: int | slice) -> TraceRecord | list[TraceRecord]:
        return self._records[index]

    @property
    def records(self) -> tuple[TraceRecord, ...]:
        return tuple(self._records)

    @property
    def total_inner_steps(self) -> int:
        return sum(r.inner_steps or 0 for r in self._records)

    @property
    def outer_iterations(self) -> int:
        return sum(1 for r in self._records if r.solved)


class RunStatus(str, enum.Enum):
    CONVERGED = "converged"
    EXHAUSTED = "exhausted"
    BREAKDOWN = "breakdown"


class RunResult(typing.NamedTuple):
    trace: OuterTrace
    final: EigenEstimate
    status: RunStatus


class SolverConfig(typing.NamedTuple):
    """Inner solver settings of a run.

    ``preconditioner`` is either a mode, in which case the base is built at
    the initial Rayleigh quotient, or a prebuilt preconditioner. ``max_inner``
    defaults to the matrix order.
    """

    preconditioner: (
        _tuned_precond.PrecondMode | _tuned_precond.TunedPreconditioner | None
    ) = None
    max_inner: int | None = None
    max_outer: int = DEFAULT_MAX_OUTER


OnOuterIterationHook: typing.TypeAlias = typing.Callable[[TraceRecord], None]
OnInnerEventHook: typing.TypeAlias = typing.Callable[[int, str], None]


class Hooks(typing.TypedDict):
    outer_iteration: list[OnOuterIterationHook]
    inner_event: list[OnInnerEventHook]


def rayleigh_quotient(
    A: _matio.SparseHermitianMatrix,
    u: types.ComplexVector,
) -> EigenEstimate:
    """Return ``theta = u* A u``, ``r = A u - theta u`` and ``||r||``."""
    u = _utils.as_complex_vector(u)
    _utils.check_unit(u, "u")
    au = _matio.matvec(A, u)
    value = np.vdot(u, au)
    if abs(value.imag) > IMAGINARY_TOLERANCE * max(A.one_norm, 1.0):
        LOG.warning("Rayleigh quotient has imaginary part %.3e", value.imag)
    theta = float(value.real)
    r = au - theta * u
    return EigenEstimate(u=u, theta=theta, r=r, r_norm=float(np.linalg.norm(r)))


def next_tolerance(
    policy: _policies.TolerancePolicy,
    state: EigenEstimate,
    A: _matio.SparseHermitianMatrix,
) -> float:
    """Inner tolerance ``xi_k`` for the current outer state."""
    if not math.isfinite(state.r_norm):
        msg = f"residual norm must be finite, not: {state.r_norm}"
        raise ValueError(msg)
    return policy.tolerance(state.r_norm, A.one_norm)


def initial_vector(
    x_oracle: types.ComplexVector,
    target_sin_phi: float,
    rng_seed: int,
) -> types.ComplexVector:
    """Unit vector at angle ``asin(target_sin_phi)`` from ``x_oracle``.

    ``x`` is mixed with a uniformly distributed random vector orthogonalized
    against it. Real eigenvectors get real perturbations.
    """
    if not 0.0 <= target_sin_phi < 0.5:
        msg = f"'target_sin_phi' must be in [0, 0.5), not: {target_sin_phi}"
        raise ValueError(msg)
    x = _utils.as_complex_vector(x_oracle)
    x = x / np.linalg.norm(x)
    if target_sin_phi == 0.0:
        return x
    n = x.shape[0]
    if n < 2:
        msg = "a perturbation needs dimension >= 2"
        raise ValueError(msg)
    rng = np.random.default_rng(rng_seed)
    y = rng.uniform(-1.0, 1.0, n).astype(np.complex128)
    if np.any(x.imag):
        y += 1j * rng.uniform(-1.0, 1.0, n)
    for _ in range(2):
        y -= np.vdot(x, y) * x
    y /= np.linalg.norm(y)
    return math.sqrt(1.0 - target_sin_phi**2) * x + target_sin_phi * y


def random_start(
    n: int, rng_seed: int, complex_entries: bool = False
) -> types.ComplexVector:
    """Seeded uniform random unit vector, for runs without an oracle."""
    rng = np.random.default_rng(rng_seed)
    v = rng.uniform(-1.0, 1.0, n).astype(np.complex128)
    if complex_entries:
        v += 1j * rng.uniform(-1.0, 1.0, n)
    return v / np.linalg.norm(v)


class InexactRQI:
    """Rayleigh quotient iteration with MINRES inner solves.

    Usage::

        solver = InexactRQI(A, Fixed(0.1), SolverConfig(max_outer=10))
        solver.register_hooks(on_outer_iteration=print)
        result = solver.run(u0)

    :param A: the Hermitian matrix
    :param policy: inner tolerance policy
    :param config: inner solver settings
    :param stop_tol: the run converges once ``||r_k|| <= ||A||_1 stop_tol``
    :param probe: optional callable measuring angles against a known
                  eigenvector; its values go into the trace
    """

    def __init__(
        self,
        A: _matio.SparseHermitianMatrix,
        policy: _policies.TolerancePolicy,
        config: SolverConfig | None = None,
        stop_tol: float = DEFAULT_STOP_TOL,
        probe: Probe | None = None,
    ) -> None:
        config = config or SolverConfig()
        if not 0.0 < stop_tol < 1.0:
            msg = f"'stop_tol' must be in (0, 1), not: {stop_tol}"
            raise ValueError(msg)
        _utils.check_count(config.max_outer, "max_outer", 1)
        if config.max_inner is not None:
            _utils.check_count(config.max_inner, "max_inner", _minres.MIN_STEPS)
        self.A = A
        self.policy = policy
        self.config = config
        self.stop_tol = stop_tol
        self.probe = probe
        self.preconditioner: _tuned_precond.TunedPreconditioner | None = None
        self._hooks: Hooks = {
            "outer_iteration": [],
            "inner_event": [],
        }

    def register_hooks(
        self,
        on_outer_iteration: OnOuterIterationHook | None = None,
        on_inner_event: OnInnerEventHook | None = None,
    ) -> None:
        """Register hook methods

        :param on_outer_iteration: called with each :py:class:`TraceRecord`
                                   once appended
        :type on_outer_iteration: callable
        :param on_inner_event: called with the outer index and a message when
                               an inner solve stagnates, misses its tolerance
                               or falls back from the preconditioner
        :type on_inner_event: callable

        Exceptions raised by hooks are logged and ignored.
        """
        if on_outer_iteration is not None:
            _utils.check_callable(on_outer_iteration, "on_outer_iteration")
            self._hooks["outer_iteration"].append(on_outer_iteration)
        if on_inner_event is not None:
            _utils.check_callable(on_inner_event, "on_inner_event")
            self._hooks["inner_event"].append(on_inner_event)

    @property
    def max_inner(self) -> int:
        if self.config.max_inner is not None:
            return self.config.max_inner
        return max(self.A.n, _minres.MIN_STEPS)

    def _event(self, trace: OuterTrace, k: int, message: str) -> None:
        LOG.warning("Outer iteration %(k)d: %(message)s", {"k": k, "message": message})
        trace.events.append(f"k={k}: {message}")
        _utils.run_hooks("inner_event", self._hooks["inner_event"], k, message)

    def _setup_preconditioner(self, theta0: float) -> None:
        choice = self.config.preconditioner
        if choice is None or isinstance(choice, _tuned_precond.TunedPreconditioner):
            self.preconditioner = choice
        else:
            self.preconditioner = _tuned_precond.build_base(self.A, theta0, choice)

    def _solve(
        self,
        trace: OuterTrace,
        k: int,
        est: EigenEstimate,
        xi: float,
    ) -> tuple[_minres.InnerSolveResult, bool]:
        p = self.preconditioner
        if p is not None:
            p.tune(self.A, est.u)
            if p.spd_ok:
                result = _tuned_precond.preconditioned_minres_solve(
                    self.A, est.theta, est.u, p, xi, self.max_inner
                )
                return result, True
            self._event(trace, k, "tuning lost definiteness, solving unpreconditioned")
        return _minres.minres_solve(self.A, est.theta, est.u, xi, self.max_inner), False

    def _record(
        self,
        k: int,
        est: EigenEstimate,
        result: _minres.InnerSolveResult | None = None,
        xi: float | None = None,
        preconditioned: bool = False,
    ) -> TraceRecord:
        values: dict[str, typing.Any] = {}
        p = self.preconditioner if preconditioned else None
        if self.probe is not None:
            probe = self.probe(est, result, p)
            values = probe._asdict()
        if result is None:
            return TraceRecord(
                k=k,
                theta=est.theta,
                r_norm=est.r_norm,
                sin_phi=values.get("sin_phi"),
                cos_phi=values.get("cos_phi"),
            )
        return TraceRecord(
            k=k,
            theta=est.theta,
            r_norm=est.r_norm,
            xi_requested=xi,
            xi_achieved=result.xi,
            inner_steps=result.steps,
            stagnated=result.stagnated,
            w_norm=float(np.linalg.norm(result.w)),
            inner_converged=result.converged,
            preconditioned=preconditioned,
            tuning=None if p is None else p.tuning_kind.value,
            tuning_defect=None if p is None else p.tuning_defect,
            **values,
        )

    def run(self, u0: types.ComplexVector) -> RunResult:
        """Iterate from ``u0`` until convergence, ``max_outer`` or breakdown.

        :raises SolverError: when an inner solve fails, with the partial trace
                             attached as ``trace``
        """
        u = _utils.as_complex_vector(u0)
        norm = float(np.linalg.norm(u))
        if norm == 0.0 or not math.isfinite(norm):
            msg = "initial vector must be finite and nonzero"
            raise ValueError(msg)
        u = _utils.normalize_phase(u / norm)
        est = rayleigh_quotient(self.A, u)

        trace = OuterTrace(
            policy=_policies.policy_name(self.policy),
            preconditioner=None if self.config.preconditioner is None else str(
                getattr(self.config.preconditioner, "value", "prebuilt")
            ),
        )
        threshold = self.A.one_norm * self.stop_tol
        try:
            self._setup_preconditioner(est.theta)
            k = 0
            while True:
                if est.r_norm <= threshold or k >= self.config.max_outer:
                    status = (
                        RunStatus.CONVERGED
                        if est.r_norm <= threshold
                        else RunStatus.EXHAUSTED
                    )
                    self._append(trace, self._record(k, est))
                    break

                xi = next_tolerance(self.policy, est, self.A)
                result, preconditioned = self._solve(trace, k, est, xi)
                record = self._record(k, est, result, xi, preconditioned)
                self._append(trace, record)
                if result.stagnated:
                    self._event(
                        trace, k, f"MINRES stagnated at xi={result.xi:.3e} > {xi:.3e}"
                    )
                elif not result.converged:
                    self._event(
                        trace, k, f"MINRES stopped at xi={result.xi:.3e} > {xi:.3e}"
                    )

                if record.w_norm is None or not record.w_norm >= W_NORM_BREAKDOWN:
                    status = RunStatus.BREAKDOWN
                    break
                u = _utils.normalize_phase(result.w / record.w_norm)
                est = rayleigh_quotient(self.A, u)
                k += 1
        except exceptions.SolverError as exc:
            exc.trace = trace
            raise

        LOG.info(
            "RQI %(status)s after %(outer)d outer iterations (%(inner)d inner steps), "
            "theta=%(theta).15g residual=%(res).3e",
            {
                "status": status.value,
                "outer": trace.outer_iterations,
                "inner": trace.total_inner_steps,
                "theta": est.theta,
                "res": est.r_norm,
            },
        )
        return RunResult(trace=trace, final=est, status=status)

    def _append(self, trace: OuterTrace, record: TraceRecord) -> None:
        trace.append(record)
        LOG.debug(
            "k=%(k)d theta=%(theta).15g r=%(r).3e xi=%(xi)s steps=%(steps)s",
            {
                "k": record.k,
                "theta": record.theta,
                "r": record.r_norm,
                "xi": record.xi_achieved,
                "steps": record.inner_steps,
            },
        )
        _utils.run_hooks("outer_iteration", self._hooks["outer_iteration"], record)


def run(
    A: _matio.SparseHermitianMatrix,
    u0: types.ComplexVector,
    policy: _policies.TolerancePolicy,
    solver_config: SolverConfig | None = None,
    stop_tol: float = DEFAULT_STOP_TOL,
    probe: Probe | None = None,
) -> RunResult:
    """Run the inexact Rayleigh quotient iteration, see :py:class:`InexactRQI`."""
    return InexactRQI(A, policy, solver_config, stop_tol, probe).run(u0)
