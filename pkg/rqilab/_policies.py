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
"""Inner tolerance policies.

Every policy maps the outer residual norm ``||r_k||`` and ``||A||_1`` to the
relative residual ``xi_k`` the inner solve has to reach. Values never
exceed ``CEILING``, the finite precision safeguard of the near-one rules.
"""

from __future__ import annotations

import math
import typing


CEILING = 1.0 - 1e-8
NEAR_ONE_FLOOR = 0.95
DECREASING_CAP = 0.1


class Exact(typing.NamedTuple):
    @property
    def label(self) -> str:
        return "0 (RQI)"

    def tolerance(self, r_norm: float, one_norm: float) -> float:
        return 0.0


class Fixed(typing.NamedTuple):
    xi: float

    @property
    def label(self) -> str:
        return f"{self.xi:g}"

    def tolerance(self, r_norm: float, one_norm: float) -> float:
        return self.xi


class Decreasing(typing.NamedTuple):
    cap: float = DECREASING_CAP

    @property
    def label(self) -> str:
        return f"min{{{self.cap:g}, ||r||/||A||_1}}"

    def tolerance(self, r_norm: float, one_norm: float) -> float:
        return min(self.cap, r_norm / one_norm, CEILING)


class QuadraticNearOne(typing.NamedTuple):
    c1: float
    floor: float = NEAR_ONE_FLOOR

    @property
    def label(self) -> str:
        return f"max{{{self.floor:g}, 1-{self.c1:g}||r||/||A||_1}}"

    def tolerance(self, r_norm: float, one_norm: float) -> float:
        return min(max(self.floor, 1.0 - self.c1 * r_norm / one_norm), CEILING)


class LinearNearOne(typing.NamedTuple):
    c2: float
    floor: float = NEAR_ONE_FLOOR

    @property
    def label(self) -> str:
        return f"max{{{self.floor:g}, 1-({self.c2:g}||r||/||A||_1)^2}}"

    def tolerance(self, r_norm: float, one_norm: float) -> float:
        return min(
            max(self.floor, 1.0 - (self.c2 * r_norm / one_norm) ** 2),
            CEILING,
        )


TolerancePolicy: typing.TypeAlias = (
    Exact | Fixed | Decreasing | QuadraticNearOne | LinearNearOne
)


def policy_name(policy: TolerancePolicy) -> str:
    """Short name of ``policy`` in the syntax :py:func:`parse_policy` reads."""
    if isinstance(policy, Exact):
        return "exact"
    if isinstance(policy, Fixed):
        return f"fixed:{policy.xi:g}"
    if isinstance(policy, Decreasing):
        return "decreasing"
    if isinstance(policy, QuadraticNearOne):
        return f"quad:{policy.c1:g}"
    return f"linear:{policy.c2:g}"


def _positive(value: str, name: str) -> float:
    try:
        number = float(value)
    except ValueError:
        msg = f"'{name}' must be a number, not: {value!r}"
        raise ValueError(msg) from None
    if not math.isfinite(number) or number <= 0.0:
        msg = f"'{name}' must be a positive number, not: {value}"
        raise ValueError(msg)
    return number


def parse_policy(spec: str) -> TolerancePolicy:
    """Parse ``exact``, ``fixed:XI``, ``decreasing``, ``quad:C1`` or ``linear:C2``."""
    kind, _, arg = spec.strip().lower().partition(":")
    if kind == "exact" and not arg:
        return Exact()
    if kind == "decreasing" and not arg:
        return Decreasing()
    if kind == "fixed" and arg:
        xi = _positive(arg, "xi")
        if xi > CEILING:
            msg = f"'xi' must be in (0, {CEILING!r}], not: {arg}"
            raise ValueError(msg)
        return Fixed(xi)
    if kind == "quad" and arg:
        return QuadraticNearOne(_positive(arg, "c1"))
    if kind == "linear" and arg:
        return LinearNearOne(_positive(arg, "c2"))
    msg = (
        f"invalid policy {spec!r}, expected exact, fixed:XI, decreasing, "
        "quad:C1 or linear:C2"
    )
    raise ValueError(msg)
