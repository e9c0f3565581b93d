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

import typing
from unittest import mock

import numpy as np
import pytest

from rqilab import _minres
from rqilab import _policies
from rqilab import _rqi_driver
from rqilab import _synthetic
from rqilab import _tuned_precond
from rqilab import exceptions
from rqilab.tests import base


def sin_angle(u: np.ndarray, x: np.ndarray) -> float:
    cos = abs(np.vdot(x, u)) / (np.linalg.norm(x) * np.linalg.norm(u))
    return float(np.sqrt(max(0.0, 1.0 - cos * cos)))


class TestRayleighQuotient(base.TestCase):
    def test_values(self) -> None:
        A = _synthetic.diagonal([0.0, 2.0])
        u = np.array([1.0, 1.0]) / np.sqrt(2.0)
        est = _rqi_driver.rayleigh_quotient(A, u)
        assert est.theta == pytest.approx(1.0)
        np.testing.assert_allclose(est.r, [-1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)])
        assert est.r_norm == pytest.approx(1.0)

    def test_not_unit(self) -> None:
        A = _synthetic.diagonal([0.0, 2.0])
        with pytest.raises(ValueError, match="'u' must be a unit vector"):
            _rqi_driver.rayleigh_quotient(A, np.array([1.0, 1.0]))

    def test_next_tolerance(self) -> None:
        A = _synthetic.diagonal([1.0, 10.0])
        est = _rqi_driver.rayleigh_quotient(A, np.array([1.0, 0.0]))
        assert _rqi_driver.next_tolerance(_policies.Fixed(0.25), est, A) == 0.25
        broken = est._replace(r_norm=float("nan"))
        self.assert_raises_msg(
            ValueError,
            "residual norm must be finite, not: nan",
            _rqi_driver.next_tolerance,
            _policies.Decreasing(),
            broken,
            A,
        )


class TestInitialVector(base.TestCase):
    def test_angle(self) -> None:
        x = np.zeros(20)
        x[3] = 1.0
        for s in (0.0, 1e-3, 0.1, 0.4):
            u = _rqi_driver.initial_vector(x, s, 7)
            assert np.linalg.norm(u) == pytest.approx(1.0)
            assert sin_angle(u, x) == pytest.approx(s, abs=1e-6)

    def test_real_eigenvector_gives_real_start(self) -> None:
        x = np.ones(5) / np.sqrt(5.0)
        u = _rqi_driver.initial_vector(x, 0.1, 1)
        np.testing.assert_array_equal(u.imag, 0.0)

    def test_seeded(self) -> None:
        x = np.array([1.0, 1j, 0.0, 0.0]) / np.sqrt(2.0)
        u1 = _rqi_driver.initial_vector(x, 0.2, 3)
        u2 = _rqi_driver.initial_vector(x, 0.2, 3)
        np.testing.assert_array_equal(u1, u2)
        assert sin_angle(u1, x) == pytest.approx(0.2, abs=1e-6)

    def test_bad_angle(self) -> None:
        self.assert_raises_msg(
            ValueError,
            "'target_sin_phi' must be in [0, 0.5), not: 0.5",
            _rqi_driver.initial_vector,
            np.ones(3),
            0.5,
            0,
        )


class TestOuterTrace(base.TestCase):
    def test_append_order(self) -> None:
        trace = _rqi_driver.OuterTrace("exact")
        trace.append(_rqi_driver.TraceRecord(k=0, theta=1.0, r_norm=0.1, inner_steps=3))
        trace.append(_rqi_driver.TraceRecord(k=1, theta=1.0, r_norm=1e-3))
        self.assert_raises_msg(
            ValueError,
            "trace index must increase: 1 after 1",
            trace.append,
            _rqi_driver.TraceRecord(k=1, theta=1.0, r_norm=1e-3),
        )
        assert len(trace) == 2
        assert trace.outer_iterations == 1
        assert trace.total_inner_steps == 3
        assert trace[-1].k == 1
        assert not trace[-1].solved

    def test_flagged(self) -> None:
        record = _rqi_driver.TraceRecord(
            k=0, theta=1.0, r_norm=0.1, inner_converged=False
        )
        assert record.flagged
        stagnated = _rqi_driver.TraceRecord(k=0, theta=1.0, r_norm=0.1, stagnated=True)
        assert stagnated.flagged
        assert not _rqi_driver.TraceRecord(k=0, theta=1.0, r_norm=0.1).flagged


class TestInexactRQI(base.TestCase):
    def setUp(self) -> None:
        super().setUp()
        self.A = _synthetic.diagonal([1.0, 2.0, 5.0, 9.0])
        self.x = np.array([1.0, 0.0, 0.0, 0.0])
        self.u0 = _rqi_driver.initial_vector(self.x, 0.1, 0)

    def test_eigenvector_is_fixed_point(self) -> None:
        result = _rqi_driver.run(self.A, self.x, _policies.Exact())
        assert result.status is _rqi_driver.RunStatus.CONVERGED
        assert len(result.trace) == 1
        assert result.trace.total_inner_steps == 0
        assert result.final.theta == 1.0

    def test_exact_converges(self) -> None:
        result = _rqi_driver.run(self.A, self.u0, _policies.Exact())
        assert result.status is _rqi_driver.RunStatus.CONVERGED
        assert result.trace.outer_iterations <= 5
        assert result.final.theta == pytest.approx(1.0, abs=1e-12)
        assert result.final.r_norm <= self.A.one_norm * _rqi_driver.DEFAULT_STOP_TOL
        assert result.trace.policy == "exact"
        records = result.trace.records
        assert [r.k for r in records] == list(range(len(records)))
        assert all(r.solved for r in records[:-1])
        assert not records[-1].solved

    def test_fixed_tolerance_converges(self) -> None:
        result = _rqi_driver.run(self.A, self.u0, _policies.Fixed(0.1))
        assert result.status is _rqi_driver.RunStatus.CONVERGED
        assert result.final.theta == pytest.approx(1.0, abs=1e-12)
        for record in result.trace.records[:-1]:
            assert record.xi_requested == 0.1
            assert record.inner_steps is not None
            assert record.inner_steps >= _minres.MIN_STEPS or record.xi_achieved == 0.0

    def test_fixed_tolerance_keeps_cubic_pace_on_wide_spectrum(self) -> None:
        A = _synthetic.diagonal_with_beta(100, 50.0)
        x = np.zeros(100)
        x[0] = 1.0
        u0 = _rqi_driver.initial_vector(x, 0.1, 0)
        result = _rqi_driver.run(A, u0, _policies.Fixed(0.5))
        assert result.status is _rqi_driver.RunStatus.CONVERGED
        assert result.trace.outer_iterations <= 5
        assert result.final.theta == pytest.approx(0.0, abs=1e-10)

    def test_exhausted(self) -> None:
        config = _rqi_driver.SolverConfig(max_outer=1)
        result = _rqi_driver.run(self.A, self.u0, _policies.Exact(), config)
        assert result.status is _rqi_driver.RunStatus.EXHAUSTED
        assert len(result.trace) == 2
        assert result.trace.outer_iterations == 1

    def test_hooks(self) -> None:
        seen: list[int] = []
        solver = _rqi_driver.InexactRQI(self.A, _policies.Exact())
        solver.register_hooks(on_outer_iteration=lambda record: seen.append(record.k))
        result = solver.run(self.u0)
        assert seen == [r.k for r in result.trace]

    def test_failing_hook_is_ignored(self) -> None:
        hook = mock.Mock(side_effect=RuntimeError("boom"))
        solver = _rqi_driver.InexactRQI(self.A, _policies.Exact())
        solver.register_hooks(on_outer_iteration=hook)
        result = solver.run(self.u0)
        assert result.status is _rqi_driver.RunStatus.CONVERGED
        assert hook.call_count == len(result.trace)

    def test_not_callable_hook(self) -> None:
        solver = _rqi_driver.InexactRQI(self.A, _policies.Exact())
        self.assert_raises_msg(
            TypeError,
            "'on_outer_iteration' must be a callable",
            solver.register_hooks,
            on_outer_iteration=42,
        )

    def test_inner_events(self) -> None:
        A = _synthetic.diagonal_with_beta(40, 20.0)
        x = np.zeros(40)
        x[0] = 1.0
        events: list[tuple[int, str]] = []
        config = _rqi_driver.SolverConfig(max_inner=2, max_outer=2)
        solver = _rqi_driver.InexactRQI(A, _policies.Exact(), config)
        solver.register_hooks(
            on_inner_event=lambda k, message: events.append((k, message))
        )
        result = solver.run(_rqi_driver.initial_vector(x, 0.1, 4))
        assert events
        assert len(result.trace.events) == len(events)
        assert all("MINRES" in message for _, message in events)
        assert all(r.flagged for r in result.trace.records[:-1])

    def test_probe_values_are_recorded(self) -> None:
        def probe(
            estimate: _rqi_driver.EigenEstimate,
            result: _minres.InnerSolveResult | None,
            preconditioner: _tuned_precond.TunedPreconditioner | None,
        ) -> _rqi_driver.ProbeValues:
            s = sin_angle(estimate.u, self.x)
            cos = float(np.sqrt(1.0 - s * s))
            return _rqi_driver.ProbeValues(sin_phi=s, cos_phi=cos)

        result = _rqi_driver.run(self.A, self.u0, _policies.Exact(), probe=probe)
        first = result.trace[0]
        assert first.sin_phi == pytest.approx(0.1, abs=1e-6)
        assert all(r.sin_phi is not None for r in result.trace)

    def test_solver_error_carries_trace(self) -> None:
        original = _minres.minres_solve
        calls: list[int] = []

        def failing(
            *args: typing.Any,  # noqa: ANN401
            **kwargs: typing.Any,  # noqa: ANN401
        ) -> _minres.InnerSolveResult:
            calls.append(1)
            if len(calls) > 1:
                msg = "MINRES returned a non-finite solution"
                raise exceptions.SolverError(msg)
            return original(*args, **kwargs)

        with mock.patch("rqilab._minres.minres_solve", side_effect=failing):
            with pytest.raises(exceptions.SolverError) as exc_info:
                _rqi_driver.run(self.A, self.u0, _policies.Exact())
        trace = exc_info.value.trace
        assert trace is not None
        assert len(trace) == 1
        assert trace[0].k == 0

    def test_invalid_arguments(self) -> None:
        with pytest.raises(ValueError, match="'stop_tol' must be in"):
            _rqi_driver.InexactRQI(self.A, _policies.Exact(), stop_tol=0.0)
        with pytest.raises(ValueError, match="'max_outer' must be an int >= 1"):
            _rqi_driver.InexactRQI(
                self.A, _policies.Exact(), _rqi_driver.SolverConfig(max_outer=0)
            )
        with pytest.raises(
            ValueError, match="initial vector must be finite and nonzero"
        ):
            _rqi_driver.run(self.A, np.zeros(4), _policies.Exact())


class TestPreconditionedRun(base.TestCase):
    def test_tuned_dense_cholesky(self) -> None:
        A = _synthetic.laplacian_2d(6)
        values, vectors = np.linalg.eigh(A.to_dense())
        u0 = _rqi_driver.initial_vector(vectors[:, 0], 0.1, 2)
        config = _rqi_driver.SolverConfig(
            preconditioner=_tuned_precond.PrecondMode.DENSE_CHOLESKY
        )
        result = _rqi_driver.run(A, u0, _policies.Fixed(0.1), config, stop_tol=1e-10)
        assert result.status is _rqi_driver.RunStatus.CONVERGED
        assert result.final.theta == pytest.approx(values[0], abs=1e-9)
        assert result.trace.preconditioner == "dense-cholesky"
        solved = [r for r in result.trace if r.solved]
        assert solved
        for record in solved:
            assert record.preconditioned
            assert record.tuning == "rank-one"
            assert record.tuning_defect is not None
            assert record.tuning_defect <= 1e-10

    def test_tuned_matrix_maps_every_iterate_like_a(self) -> None:
        A = _synthetic.laplacian_2d(6)
        dense = A.to_dense()
        _, vectors = np.linalg.eigh(dense)
        u0 = _rqi_driver.initial_vector(vectors[:, 0], 0.1, 2)
        defects: list[float] = []

        def measure(
            estimate: _rqi_driver.EigenEstimate,
            result: _minres.InnerSolveResult | None,
            preconditioner: _tuned_precond.TunedPreconditioner | None,
        ) -> _rqi_driver.ProbeValues:
            if preconditioner is not None:
                au = dense @ estimate.u
                qu = preconditioner.apply(estimate.u)
                defects.append(float(np.linalg.norm(qu - au) / np.linalg.norm(au)))
            return _rqi_driver.ProbeValues(sin_phi=0.0, cos_phi=1.0)

        config = _rqi_driver.SolverConfig(
            preconditioner=_tuned_precond.PrecondMode.DENSE_CHOLESKY
        )
        result = _rqi_driver.run(
            A, u0, _policies.Fixed(0.1), config, stop_tol=1e-10, probe=measure
        )
        assert result.status is _rqi_driver.RunStatus.CONVERGED
        assert len(defects) == result.trace.outer_iterations
        assert max(defects) <= 1e-10
