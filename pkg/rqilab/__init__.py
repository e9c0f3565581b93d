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

# Public API
from rqilab._diagnostics import OracleProbe
from rqilab._diagnostics import SpectralOracle
from rqilab._diagnostics import angle_to_target
from rqilab._diagnostics import build_oracle
from rqilab._diagnostics import verify_angle_bound
from rqilab._diagnostics import verify_convergence_order
from rqilab._diagnostics import verify_run
from rqilab._diagnostics import w_norm_growth
from rqilab._experiment import ExperimentConfig
from rqilab._experiment import run_experiment
from rqilab._experiment import run_sweep
from rqilab._matio import SparseHermitianMatrix
from rqilab._matio import load_matrix_market
from rqilab._matio import matvec
from rqilab._matio import shifted_matvec
from rqilab._minres import minres_solve
from rqilab._policies import Decreasing
from rqilab._policies import Exact
from rqilab._policies import Fixed
from rqilab._policies import LinearNearOne
from rqilab._policies import QuadraticNearOne
from rqilab._rqi_driver import InexactRQI
from rqilab._rqi_driver import OuterTrace
from rqilab._rqi_driver import SolverConfig
from rqilab._rqi_driver import TraceRecord
from rqilab._rqi_driver import initial_vector
from rqilab._rqi_driver import run
from rqilab._tuned_precond import PrecondMode
from rqilab._tuned_precond import TunedPreconditioner


__all__ = [
    "Decreasing",
    "Exact",
    "ExperimentConfig",
    "Fixed",
    "InexactRQI",
    "LinearNearOne",
    "OracleProbe",
    "OuterTrace",
    "PrecondMode",
    "QuadraticNearOne",
    "SolverConfig",
    "SparseHermitianMatrix",
    "SpectralOracle",
    "TraceRecord",
    "TunedPreconditioner",
    "angle_to_target",
    "build_oracle",
    "initial_vector",
    "load_matrix_market",
    "matvec",
    "minres_solve",
    "run",
    "run_experiment",
    "run_sweep",
    "shifted_matvec",
    "verify_angle_bound",
    "verify_convergence_order",
    "verify_run",
    "w_norm_growth",
]
