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

import pytest

from rqilab import _policies
from rqilab.tests import base


class TestTolerances(base.TestCase):
    def test_exact(self) -> None:
        policy = _policies.Exact()
        assert policy.tolerance(0.5, 10.0) == 0.0
        assert policy.label == "0 (RQI)"

    def test_fixed(self) -> None:
        policy = _policies.Fixed(0.1)
        assert policy.tolerance(1e-12, 10.0) == 0.1
        assert policy.tolerance(5.0, 10.0) == 0.1
        assert policy.label == "0.1"

    def test_decreasing(self) -> None:
        policy = _policies.Decreasing()
        assert policy.tolerance(1e-3, 10.0) == pytest.approx(1e-4)
        assert policy.tolerance(5.0, 10.0) == 0.1
        assert policy.label == "min{0.1, ||r||/||A||_1}"

    def test_quadratic_near_one(self) -> None:
        policy = _policies.QuadraticNearOne(1000.0)
        assert policy.tolerance(1e-5, 1.0) == pytest.approx(0.99)
        assert policy.tolerance(1e-3, 1.0) == _policies.NEAR_ONE_FLOOR
        assert policy.tolerance(1e-14, 1.0) == _policies.CEILING

    def test_linear_near_one(self) -> None:
        policy = _policies.LinearNearOne(1000.0)
        assert policy.tolerance(1e-4, 1.0) == pytest.approx(0.99)
        assert policy.tolerance(1e-2, 1.0) == _policies.NEAR_ONE_FLOOR
        assert policy.tolerance(1e-9, 1.0) == _policies.CEILING
        assert policy.tolerance(1e-12, 1.0) == _policies.CEILING

    def test_scaled_by_norm(self) -> None:
        policy = _policies.LinearNearOne(10.0)
        expected = policy.tolerance(1e-4, 1.0)
        assert policy.tolerance(1e-2, 100.0) == pytest.approx(expected)

    def test_ceiling(self) -> None:
        policies = [
            _policies.Fixed(_policies.CEILING),
            _policies.Decreasing(cap=1.0),
            _policies.QuadraticNearOne(1e-6),
            _policies.LinearNearOne(1e-6),
        ]
        for policy in policies:
            for r in (0.0, 1e-16, 1e-3, 1.0):
                assert 0.0 <= policy.tolerance(r, 1.0) <= _policies.CEILING


class TestParsePolicy(base.TestCase):
    def test_parse(self) -> None:
        assert _policies.parse_policy("exact") == _policies.Exact()
        assert _policies.parse_policy(" Fixed:0.5 ") == _policies.Fixed(0.5)
        assert _policies.parse_policy("decreasing") == _policies.Decreasing()
        assert _policies.parse_policy("quad:1e3") == _policies.QuadraticNearOne(1000.0)
        assert _policies.parse_policy("linear:20") == _policies.LinearNearOne(20.0)

    def test_names_parse_back(self) -> None:
        for name in ("exact", "fixed:0.1", "decreasing", "quad:1000", "linear:1000"):
            assert _policies.policy_name(_policies.parse_policy(name)) == name

    def test_invalid(self) -> None:
        expected = (
            "invalid policy 'newton', expected exact, fixed:XI, decreasing, "
            "quad:C1 or linear:C2"
        )
        self.assert_raises_msg(ValueError, expected, _policies.parse_policy, "newton")
        with pytest.raises(ValueError, match="invalid policy 'fixed'"):
            _policies.parse_policy("fixed")
        with pytest.raises(ValueError, match="invalid policy 'exact:1'"):
            _policies.parse_policy("exact:1")

    def test_invalid_arguments(self) -> None:
        self.assert_raises_msg(
            ValueError,
            "'c1' must be a number, not: 'abc'",
            _policies.parse_policy,
            "quad:abc",
        )
        self.assert_raises_msg(
            ValueError,
            "'c2' must be a positive number, not: -1",
            _policies.parse_policy,
            "linear:-1",
        )
        self.assert_raises_msg(
            ValueError,
            "'xi' must be a positive number, not: 0",
            _policies.parse_policy,
            "fixed:0",
        )
        with pytest.raises(ValueError, match="'xi' must be in"):
            _policies.parse_policy("fixed:1")
