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

import numpy as np
import numpy.typing as npt


ComplexVector: typing.TypeAlias = npt.NDArray[np.complex128]
ComplexMatrix: typing.TypeAlias = npt.NDArray[np.complex128]
RealVector: typing.TypeAlias = npt.NDArray[np.float64]
RealMatrix: typing.TypeAlias = npt.NDArray[np.float64]
