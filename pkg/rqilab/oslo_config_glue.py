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
"""Command line and configuration file options of :command:`rqilab`."""

from __future__ import annotations

import copy
import logging
import typing

from oslo_config import cfg

from rqilab import _diagnostics
from rqilab import _experiment
from rqilab import _policies
from rqilab import _rqi_driver
from rqilab import exceptions


LOG = logging.getLogger(__name__)

OsloConfigT: typing.TypeAlias = typing.Any

experiment_opts = [
    cfg.StrOpt(
        "matrix",
        help="Matrix Market file holding the Hermitian matrix.",
    ),
    cfg.StrOpt(
        "target",
        default="smallest",
        help="Eigenpair to compute: smallest, largest, index:K (K-th "
        "smallest) or closest:SIGMA.",
    ),
    cfg.StrOpt(
        "policy",
        default="fixed:0.1",
        help="Inner tolerance policy: exact, fixed:XI, decreasing, quad:C1 "
        "or linear:C2.",
    ),
    cfg.ListOpt(
        "sweep",
        default=[],
        help="Run every listed policy on the matrix instead of --policy.",
    ),
    cfg.StrOpt(
        "precond",
        default="none",
        help="Preconditioner: none or tuned:MODE with MODE one of diagonal, "
        "incomplete-cholesky or dense-cholesky.",
    ),
    cfg.FloatOpt(
        "tol",
        default=_rqi_driver.DEFAULT_STOP_TOL,
        help="Stop once ||r_k|| <= ||A||_1 * tol.",
    ),
    cfg.IntOpt(
        "max-outer",
        default=_rqi_driver.DEFAULT_MAX_OUTER,
        min=1,
        help="Maximum number of outer iterations.",
    ),
    cfg.IntOpt(
        "max-inner",
        min=2,
        help="Maximum number of MINRES steps per inner solve, defaults to "
        "the matrix order.",
    ),
    cfg.IntOpt("seed", default=0, help="Seed of the initial vector."),
    cfg.FloatOpt(
        "sin-phi0",
        default=0.1,
        min=0.0,
        help="Sine of the angle between the initial vector and the target "
        "eigenvector (oracle runs only).",
    ),
    cfg.StrOpt(
        "oracle",
        default="on",
        choices=["on", "off"],
        help="Compute the dense spectrum for angles and verification.",
    ),
    cfg.IntOpt(
        "oracle-cap",
        default=_diagnostics.DEFAULT_N_CAP,
        min=1,
        help="Largest matrix order the dense oracle accepts.",
    ),
    cfg.StrOpt("out", help="Output directory for tables, traces and reports."),
    cfg.StrOpt(
        "format",
        default="both",
        choices=list(_experiment.FORMATS),
        help="Artifacts to write: table, json lines trace or both.",
    ),
    cfg.IntOpt("workers", default=1, min=1, help="Worker processes of a sweep."),
    cfg.BoolOpt(
        "log_options",
        default=False,
        help="Log the values of all registered options at DEBUG level.",
    ),
    cfg.BoolOpt("debug", default=False, help="Log at DEBUG level."),
]


def register_opts(conf: OsloConfigT) -> None:
    conf.register_cli_opts(experiment_opts)


def parse_args(argv: list[str], prog: str = "rqilab") -> OsloConfigT:
    """Parse command line and ``--config-file`` values, flags win."""
    conf = cfg.ConfigOpts()
    register_opts(conf)
    try:
        conf(args=argv, project="rqilab", prog=prog, default_config_files=[])
    except cfg.Error as exc:
        raise exceptions.ConfigError(str(exc)) from None
    return conf


def _policy(spec: str) -> _policies.TolerancePolicy:
    try:
        return _policies.parse_policy(spec)
    except ValueError as exc:
        raise exceptions.ConfigError(str(exc)) from None


def build_configs(conf: OsloConfigT) -> list[_experiment.ExperimentConfig]:
    """Convert parsed options into validated experiment settings.

    One entry per ``sweep`` policy, or a single entry for ``policy``.

    :raises ConfigError: on any invalid value
    """
    if conf.log_options:
        LOG.debug("Full set of CONF:")
        conf.log_opt_values(LOG, logging.DEBUG)
    if not conf.matrix:
        msg = "--matrix is required"
        raise exceptions.ConfigError(msg)
    base = _experiment.ExperimentConfig(
        matrix_path=conf.matrix,
        target=_experiment.parse_target(conf.target),
        policy=_policy(conf.policy),
        precond=_experiment.parse_precond(conf.precond),
        stop_tol=conf.tol,
        max_outer=conf.max_outer,
        max_inner=conf.max_inner,
        seed=conf.seed,
        sin_phi0=conf.sin_phi0,
        oracle=conf.oracle == "on",
        out=conf.out,
        format=conf.format,
        oracle_cap=conf.oracle_cap,
    )
    configs = [base._replace(policy=_policy(spec)) for spec in conf.sweep] or [base]
    for config in configs:
        _experiment.validate(config)
    return configs


def list_opts() -> list[typing.Any]:
    """Entry point for oslo-config-generator."""
    return [(None, copy.deepcopy(experiment_opts))]
