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


if typing.TYPE_CHECKING:
    from rqilab import _rqi_driver


class RQILabError(Exception):
    """Base class of every error raised by rqilab.

    ``exit_code`` is the process status the command line tools use when the
    error reaches them.
    """

    exit_code: typing.ClassVar[int] = 1


class ConfigError(RQILabError):
    exit_code = 2


class MatrixIOError(RQILabError):
    exit_code = 3


class MatrixFormatError(MatrixIOError):
    """A Matrix Market file could not be parsed."""

    def __init__(self, message: str, lineno: int | None = None) -> None:
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class HermitianError(MatrixIOError):
    pass


class SolverError(RQILabError):
    """An inner or outer solve failed.

    When raised from :py:func:`rqilab.run` the iterations completed before
    the failure are available as ``trace``.
    """

    exit_code = 4

    def __init__(
        self,
        message: str,
        trace: _rqi_driver.OuterTrace | None = None,
    ) -> None:
        super().__init__(message)
        self.trace = trace


class DimensionError(RQILabError, ValueError):
    exit_code = 4


class PreconditionerError(SolverError):
    pass


class OracleError(RQILabError):
    exit_code = 4


class NotConvergedError(RQILabError):
    exit_code = 5


class InsufficientDataError(RQILabError, ValueError):
    """A trace has too few usable iterations for a rate or bound analysis."""

    exit_code = 4
