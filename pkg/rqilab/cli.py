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
"""Entry points of the :command:`rqilab` and :command:`rqilab-generate` commands."""

from __future__ import annotations

import logging
import sys
import typing

from oslo_config import cfg

from rqilab import _experiment
from rqilab import _matio
from rqilab import _synthetic
from rqilab import exceptions
from rqilab import oslo_config_glue


LOG = logging.getLogger(__name__)

generate_opts = [
    cfg.StrOpt(
        "kind",
        default="beta",
        choices=["beta", "laplacian", "random", "list"],
        help="Matrix to generate: diagonal with prescribed beta, 2-D "
        "Laplacian, random Hermitian, or list the collection matrices.",
    ),
    cfg.IntOpt(
        "order", default=100, min=3, help="Order of beta and random matrices."
    ),
    cfg.FloatOpt(
        "beta", default=50.0, help="Spread over gap of the smallest eigenvalue."
    ),
    cfg.IntOpt("nx", default=10, min=2, help="Laplacian grid points in x."),
    cfg.IntOpt("ny", min=2, help="Laplacian grid points in y, defaults to nx."),
    cfg.FloatOpt(
        "density", default=0.2, min=0.0, max=1.0, help="Random matrix density."
    ),
    cfg.IntOpt("seed", default=0, help="Random matrix seed."),
    cfg.BoolOpt("complex", default=False, help="Random matrix with complex entries."),
    cfg.StrOpt("output", help="Matrix Market file to write."),
]


def _setup_logging(debug: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    """Run an experiment or a policy sweep.

    Exit codes: 0 converged, 2 configuration, 3 input/output, 4 solver or
    oracle failure, 5 no convergence.
    """
    argv = sys.argv[1:] if argv is None else argv
    try:
        conf = oslo_config_glue.parse_args(argv)
    except exceptions.ConfigError as exc:
        _setup_logging(False)
        LOG.error("%(msg)s", {"msg": exc})  # noqa: TRY400
        return exc.exit_code
    _setup_logging(conf.debug)
    try:
        configs = oslo_config_glue.build_configs(conf)
        if conf.sweep:
            return _experiment.run_sweep(configs, conf.workers, conf.out)
    except exceptions.RQILabError as exc:
        LOG.error("%(msg)s", {"msg": exc})  # noqa: TRY400
        return exc.exit_code
    return _experiment.run_experiment(configs[0])


def _generate(conf: typing.Any) -> _matio.SparseHermitianMatrix:  # noqa: ANN401
    try:
        if conf.kind == "beta":
            return _synthetic.diagonal_with_beta(conf.order, conf.beta)
        if conf.kind == "laplacian":
            return _synthetic.laplacian_2d(conf.nx, conf.ny)
        return _synthetic.random_hermitian(
            conf.order, conf.density, conf.seed, conf.complex
        )
    except ValueError as exc:
        raise exceptions.ConfigError(str(exc)) from None


def generate_main(argv: list[str] | None = None) -> int:
    """Write a synthetic test matrix, or list the collection matrices."""
    argv = sys.argv[1:] if argv is None else argv
    conf = cfg.ConfigOpts()
    conf.register_cli_opts(generate_opts)
    _setup_logging(False)
    try:
        conf(
            args=argv,
            project="rqilab",
            prog="rqilab-generate",
            default_config_files=[],
        )
        if conf.kind == "list":
            for m in _synthetic.COLLECTION_MATRICES:
                print(
                    f"{m.name:<9} n={m.order:<5} target={m.target:<9} "
                    f"sin_phi0={m.sin_phi0:<7g} beta={m.beta:<7g} "
                    f"tol={m.stop_tol:g} {m.url}"
                )
            return 0
        if not conf.output:
            msg = "--output is required"
            raise exceptions.ConfigError(msg)
        A = _generate(conf)
        _matio.write_matrix_market(
            conf.output, A, comment=f"rqilab-generate {conf.kind}"
        )
    except cfg.Error as exc:
        LOG.error("%(msg)s", {"msg": exc})  # noqa: TRY400
        return exceptions.ConfigError.exit_code
    except exceptions.RQILabError as exc:
        LOG.error("%(msg)s", {"msg": exc})  # noqa: TRY400
        return exc.exit_code
    except OSError as exc:
        LOG.error("%(msg)s", {"msg": exc})  # noqa: TRY400
        return exceptions.MatrixIOError.exit_code
    LOG.info(
        "Wrote %(kind)s matrix of order %(n)d to %(path)s",
        {"kind": conf.kind, "n": A.n, "path": conf.output},
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
