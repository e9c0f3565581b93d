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
import pytest

from rqilab import _lanczos
from rqilab import _matio
from rqilab import _minres
from rqilab import _synthetic
from rqilab.tests import base


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class TestMinresAccuracy(base.TestCase):
    def test_random_indefinite_systems(self) -> None:
        rng = np.random.default_rng(2024)
        for trial in range(200):
            n = int(rng.integers(4, 51))
            half = n // 2
            spectrum = np.concatenate(
                [
                    -rng.uniform(0.1, 1.0, half),
                    rng.uniform(0.1, 1.0, n - half),
                ]
            )
            # Shifting by 0.5 keeps every shifted eigenvalue at least 0.1 away from 0.
            A = base.hermitian_with_spectrum(spectrum + 0.5, seed=trial)
            rhs = unit(rng.standard_normal(n) + 1j * rng.standard_normal(n))
            result = _minres.minres_solve(A, 0.5, rhs, 1e-10, n)

            shifted = A.to_dense() - 0.5 * np.eye(n)
            exact = np.linalg.solve(shifted, rhs)
            error = np.linalg.norm(result.w - exact) / np.linalg.norm(exact)
            assert error <= 1e-8, (trial, error)

            history = np.array(result.residual_history)
            assert np.all(history[1:] <= history[:-1] * (1 + 1e-14))
            assert result.converged
            assert result.xi <= 1.01e-10 or result.breakdown

            discrepancy = _minres.residual_identity_check(result, A, 0.5, rhs)
            assert discrepancy <= 1e-10

            dec = _lanczos.lanczos_extend(A, 0.5, rhs, result.steps)
            K = shifted @ dec.basis(result.steps)
            residual = rhs - shifted @ result.w
            assert np.max(np.abs(K.conj().T @ residual)) <= 1e-10

    def test_exact_solve(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0, 3.0, 4.0])
        rhs = unit(np.ones(4))
        result = _minres.minres_solve(A, 0.5, rhs, 0.0, 10)
        np.testing.assert_allclose(result.w, rhs / (np.arange(1, 5) - 0.5), atol=1e-13)
        assert result.xi <= 1e-13
        assert result.steps <= 4

    def test_eigenvector_rhs_breaks_down_after_one_step(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0, 3.0])
        rhs = np.array([1.0, 0.0, 0.0])
        result = _minres.minres_solve(A, 0.0, rhs, 0.5, 10)
        assert result.breakdown
        assert result.steps == 1
        assert result.xi == 0.0
        np.testing.assert_allclose(result.w, rhs)
        np.testing.assert_array_equal(result.d, np.zeros(3))

    def test_at_least_two_steps(self) -> None:
        A = _synthetic.diagonal(np.arange(1.0, 11.0))
        rhs = unit(np.ones(10))
        result = _minres.minres_solve(A, 0.0, rhs, 0.99, 10)
        assert result.residual_history[0] < 0.99
        assert result.steps == 2
        assert result.converged

    def test_max_steps(self) -> None:
        A = _synthetic.diagonal(np.linspace(-1.0, 100.0, 50))
        rhs = unit(np.ones(50))
        result = _minres.minres_solve(A, 0.3, rhs, 1e-12, 3)
        assert result.steps == 3
        assert not result.converged
        assert not result.stagnated
        assert result.xi > 1e-12

    def test_direction_and_relative_residual(self) -> None:
        A = _synthetic.random_hermitian(20, seed=8)
        rng = np.random.default_rng(9)
        rhs = unit(rng.standard_normal(20) + 1j * rng.standard_normal(20))
        result = _minres.minres_solve(A, 0.1, rhs, 0.3, 20)
        residual = rhs - _matio.shifted_matvec(A, 0.1, result.w)
        assert result.xi == pytest.approx(np.linalg.norm(residual))
        np.testing.assert_allclose(result.xi * result.d, -residual, atol=1e-14)
        assert np.linalg.norm(result.d) == pytest.approx(1.0)
        assert result.xi <= 0.3

    def test_argument_checks(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0])
        rhs = np.array([1.0, 0.0])
        self.assert_raises_msg(
            ValueError,
            "'tol' must be in [0, 1), not: 1.0",
            _minres.minres_solve,
            A,
            0.0,
            rhs,
            1.0,
            5,
        )
        self.assert_raises_msg(
            ValueError,
            "'max_steps' must be an int >= 2, not: 1 (int)",
            _minres.minres_solve,
            A,
            0.0,
            rhs,
            0.1,
            1,
        )
        with pytest.raises(ValueError, match="unit vector"):
            _minres.minres_solve(A, 0.0, 2 * rhs, 0.1, 5)


class TestStopRule(base.TestCase):
    def test_stagnation_at_step_limit(self) -> None:
        rule = _minres.StopRule(0.1, 5)
        history: list[float] = []
        decisions = []
        for value in (1.0, 0.5, 0.5, 0.5, 0.5):
            history.append(value)
            decisions.append(rule(history, breakdown=False))
        assert decisions == [False, False, False, False, True]
        assert rule.stagnated
        assert not rule.converged

    def test_plateau_does_not_stop_early(self) -> None:
        rule = _minres.StopRule(0.1, 50)
        history: list[float] = []
        for _ in range(49):
            history.append(1.0)
            assert not rule(history, breakdown=False)
        history.append(1.0)
        assert rule(history, breakdown=False)
        assert rule.stagnated

    def test_step_limit_without_stalls(self) -> None:
        rule = _minres.StopRule(0.1, 4)
        history: list[float] = []
        decisions = []
        for value in (1.0, 0.9, 0.8, 0.7):
            history.append(value)
            decisions.append(rule(history, breakdown=False))
        assert decisions == [False, False, False, True]
        assert not rule.stagnated

    def test_zero_tolerance_means_exact(self) -> None:
        rule = _minres.StopRule(0.0, 100)
        assert rule.tol == _minres.EXACT_TOLERANCE

    def test_breakdown_stops_immediately(self) -> None:
        rule = _minres.StopRule(0.1, 100)
        assert rule([0.5], breakdown=True)


class TestResidualDirection(base.TestCase):
    def test_orthogonal_to_shifted_rhs(self) -> None:
        A = _synthetic.diagonal_with_beta(40, 10.0)
        rng = np.random.default_rng(3)
        x = np.zeros(40)
        x[0] = 1.0
        rhs = unit(x + 0.05 * rng.uniform(-1, 1, 40))
        shift = float(np.vdot(rhs, A.to_dense() @ rhs).real)
        result = _minres.minres_solve(A, shift, rhs, 0.5, 40)
        diag = _minres.residual_direction_diagnostics(result, A, shift, rhs, x)
        assert diag.orth_defect <= 1e-10
        assert -1.0 <= diag.cos_psi <= 1.0

    def test_undefined_for_exact_solve(self) -> None:
        A = _synthetic.diagonal([1.0, 2.0, 3.0])
        rhs = np.array([1.0, 0.0, 0.0])
        result = _minres.minres_solve(A, 0.0, rhs, 0.5, 10)
        self.assert_raises_msg(
            ValueError,
            "residual direction is undefined for an exact solve (xi == 0)",
            _minres.residual_direction_diagnostics,
            result,
            A,
            0.0,
            rhs,
            rhs,
        )

    def test_phase_aligned_cosine(self) -> None:
        e1 = np.array([1.0, 0.0])
        assert _minres.phase_aligned_cosine(1j * e1, e1, -e1) == pytest.approx(-1.0)
        assert _minres.phase_aligned_cosine(-e1, e1, e1) == pytest.approx(1.0)
