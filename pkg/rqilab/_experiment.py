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
"""Single experiments and policy sweeps with on-disk artifacts."""

from __future__ import annotations

import json
import logging
import math
import os
import re
import typing

from rqilab import _diagnostics
from rqilab import _matio
from rqilab import _policies
from rqilab import _report
from rqilab import _rqi_driver
from rqilab import _sweep
from rqilab import _tuned_precond
from rqilab import exceptions


if typing.TYPE_CHECKING:
    import multiprocessing.context
    from collections.abc import Sequence

    from rqilab import types


LOG = logging.getLogger(__name__)

FORMATS = ("table", "json", "both")
TABLE_FILE = "table.txt"
TRACE_FILE = "trace.jsonl"
VERIFICATION_FILE = "verification.json"
SWEEP_TABLE_FILE = "sweep_table.txt"
SWEEP_SUMMARY_FILE = "sweep_summary.json"


class Target(typing.NamedTuple):
    """Which eigenpair to compute.

    ``kind`` is ``smallest``, ``largest``, ``index`` (1-based position in
    ascending order) or ``closest`` (to ``value``).
    """

    kind: str
    value: float = 0.0

    def __str__(self) -> str:
        if self.kind == "index":
            return f"index:{int(self.value)}"
        if self.kind == "closest":
            return f"closest:{self.value:g}"
        return self.kind


def parse_target(spec: str) -> Target:
    kind, _, arg = spec.strip().lower().partition(":")
    if kind in {"smallest", "largest"} and not arg:
        return Target(kind)
    if kind == "index" and arg.isdigit() and int(arg) >= 1:
        return Target("index", int(arg))
    if kind == "closest" and arg:
        try:
            sigma = float(arg)
        except ValueError:
            sigma = math.nan
        if math.isfinite(sigma):
            return Target("closest", sigma)
    msg = (
        f"invalid target {spec!r}, "
        "expected smallest, largest, index:K or closest:SIGMA"
    )
    raise exceptions.ConfigError(msg)


def parse_precond(spec: str) -> _tuned_precond.PrecondMode | None:
    kind, _, arg = spec.strip().lower().partition(":")
    if kind == "none" and not arg:
        return None
    if kind == "tuned":
        try:
            return _tuned_precond.PrecondMode.parse(arg or "incomplete-cholesky")
        except ValueError as exc:
            raise exceptions.ConfigError(str(exc)) from None
    msg = f"invalid preconditioner {spec!r}, expected none or tuned:MODE"
    raise exceptions.ConfigError(msg)


class ExperimentConfig(typing.NamedTuple):
    """Validated settings of one experiment, serialized into every output."""

    matrix_path: str
    target: Target
    policy: _policies.TolerancePolicy
    precond: _tuned_precond.PrecondMode | None = None
    stop_tol: float = _rqi_driver.DEFAULT_STOP_TOL
    max_outer: int = _rqi_driver.DEFAULT_MAX_OUTER
    max_inner: int | None = None
    seed: int = 0
    sin_phi0: float = 0.1
    oracle: bool = True
    out: str | None = None
    format: str = "both"
    oracle_cap: int = _diagnostics.DEFAULT_N_CAP

    @property
    def label(self) -> str:
        return re.sub(r"[^A-Za-z0-9.+-]+", "-", _policies.policy_name(self.policy))

    def as_dict(self) -> dict[str, typing.Any]:
        return {
            "matrix": self.matrix_path,
            "target": str(self.target),
            "policy": _policies.policy_name(self.policy),
            "precond": (
                "none" if self.precond is None else f"tuned:{self.precond.value}"
            ),
            "tol": self.stop_tol,
            "max_outer": self.max_outer,
            "max_inner": self.max_inner,
            "seed": self.seed,
            "sin_phi0": self.sin_phi0,
            "oracle": "on" if self.oracle else "off",
            "format": self.format,
        }


def validate(config: ExperimentConfig) -> None:
    """Check every setting before any computation.

    :raises ConfigError: on the first invalid setting
    """
    if not config.matrix_path:
        msg = "a matrix path is required"
        raise exceptions.ConfigError(msg)
    if not 0.0 < config.stop_tol < 1.0:
        msg = f"'tol' must be in (0, 1), not: {config.stop_tol}"
        raise exceptions.ConfigError(msg)
    if config.max_outer < 1:
        msg = f"'max_outer' must be >= 1, not: {config.max_outer}"
        raise exceptions.ConfigError(msg)
    if config.max_inner is not None and config.max_inner < 2:
        msg = f"'max_inner' must be >= 2, not: {config.max_inner}"
        raise exceptions.ConfigError(msg)
    if not 0.0 <= config.sin_phi0 < 0.5:
        msg = f"'sin_phi0' must be in [0, 0.5), not: {config.sin_phi0}"
        raise exceptions.ConfigError(msg)
    if config.format not in FORMATS:
        msg = f"'format' must be one of {', '.join(FORMATS)}, not: {config.format}"
        raise exceptions.ConfigError(msg)


class ExperimentResult(typing.NamedTuple):
    config: ExperimentConfig
    status: _rqi_driver.RunStatus
    trace: _rqi_driver.OuterTrace
    theta: float
    r_norm: float
    table: str
    files: tuple[tuple[str, str], ...]
    verification: _diagnostics.VerificationReport | None = None

    @property
    def exit_code(self) -> int:
        if self.status is _rqi_driver.RunStatus.CONVERGED:
            return 0
        return exceptions.NotConvergedError.exit_code


def _target_index(target: Target, n: int) -> int | None:
    if target.kind == "smallest":
        return 0
    if target.kind == "largest":
        return n - 1
    if target.kind == "index":
        k = int(target.value)
        if k > n:
            msg = f"target index {k} exceeds the matrix order {n}"
            raise exceptions.ConfigError(msg)
        return k - 1
    return None


def _start(
    config: ExperimentConfig,
    A: _matio.SparseHermitianMatrix,
) -> tuple[
    types.ComplexVector,
    _diagnostics.SpectralOracle | None,
    _diagnostics.OracleProbe | None,
]:
    if config.oracle:
        oracle = _diagnostics.build_oracle(
            A,
            config.target.value,
            n_cap=config.oracle_cap,
            index=_target_index(config.target, A.n),
        )
        u0 = _rqi_driver.initial_vector(oracle.x, config.sin_phi0, config.seed)
        return u0, oracle, _diagnostics.OracleProbe(A, oracle)
    LOG.warning(
        "Oracle disabled: starting from a seeded random vector, "
        "target %(target)s and sin_phi0 are ignored",
        {"target": config.target},
    )
    return _rqi_driver.random_start(A.n, config.seed, not A.is_real), None, None


def execute(config: ExperimentConfig) -> ExperimentResult:
    """Run one experiment and render its artifacts without writing them.

    :raises RQILabError: on invalid configuration, unreadable matrix or
                         solver failure
    """
    validate(config)
    A = _matio.load_matrix_market(config.matrix_path)
    LOG.info(
        "Loaded %(path)s: order %(n)d, %(nnz)d nonzeros, ||A||_1=%(norm).6g",
        {"path": config.matrix_path, "n": A.n, "nnz": A.nnz, "norm": A.one_norm},
    )
    if config.oracle and A.n > config.oracle_cap:
        msg = (
            f"matrix order {A.n} exceeds the oracle limit {config.oracle_cap}, "
            "use --oracle off"
        )
        raise exceptions.ConfigError(msg)
    u0, oracle, probe = _start(config, A)
    solver_config = _rqi_driver.SolverConfig(
        preconditioner=config.precond,
        max_inner=config.max_inner,
        max_outer=config.max_outer,
    )
    result = _rqi_driver.run(
        A, u0, config.policy, solver_config, config.stop_tol, probe
    )

    settings = config.as_dict()
    title = f"{os.path.basename(config.matrix_path)} policy={result.trace.policy}"
    table = _report.render_table(result.trace, title)
    files: list[tuple[str, str]] = []
    verification = None
    if oracle is not None:
        verification = _diagnostics.verify_run(result.trace, oracle, config.policy)
    if config.out is not None:
        if config.format in {"table", "both"}:
            files.append((os.path.join(config.out, TABLE_FILE), table))
        if config.format in {"json", "both"}:
            files.append(
                (
                    os.path.join(config.out, TRACE_FILE),
                    _report.render_trace(result.trace, settings, result.status.value),
                )
            )
        if verification is not None:
            files.append(
                (
                    os.path.join(config.out, VERIFICATION_FILE),
                    _report.render_verification(verification, settings),
                )
            )
    return ExperimentResult(
        config=config,
        status=result.status,
        trace=result.trace,
        theta=result.final.theta,
        r_norm=result.final.r_norm,
        table=table,
        files=tuple(files),
        verification=verification,
    )


def _write(files: Sequence[tuple[str, str]]) -> None:
    for path, _ in files:
        directory = os.path.dirname(path)
        if directory:
            try:
                os.makedirs(directory, exist_ok=True)
            except OSError as exc:
                msg = f"cannot create output directory {directory}: {exc}"
                raise exceptions.MatrixIOError(msg) from exc
    try:
        _report.write_files(files)
    except OSError as exc:
        msg = f"cannot write outputs: {exc}"
        raise exceptions.MatrixIOError(msg) from exc


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment, write its artifacts and return the exit code.

    Nothing is written when the experiment fails before the run completes.
    """
    try:
        outcome = execute(config)
        _write(outcome.files)
    except exceptions.RQILabError as exc:
        LOG.error("%(kind)s: %(msg)s", {"kind": type(exc).__name__, "msg": exc})  # noqa: TRY400
        return exc.exit_code
    print(outcome.table, end="")
    if outcome.exit_code:
        LOG.error(
            "No convergence: %(status)s with ||r||=%(r).3e",
            {"status": outcome.status.value, "r": outcome.r_norm},
        )
    return outcome.exit_code


class EntrySummary(typing.NamedTuple):
    label: str
    policy: str
    exit_code: int
    status: str | None = None
    outer_iterations: int | None = None
    total_inner_steps: int | None = None
    theta: float | None = None
    r_norm: float | None = None
    table: str = ""
    error: str | None = None


def _sweep_entry(config: ExperimentConfig) -> EntrySummary:
    policy = _policies.policy_name(config.policy)
    try:
        outcome = execute(config)
        _write(outcome.files)
    except exceptions.RQILabError as exc:
        LOG.error("Sweep entry %(label)s: %(msg)s", {"label": config.label, "msg": exc})  # noqa: TRY400
        return EntrySummary(config.label, policy, exc.exit_code, error=str(exc))
    return EntrySummary(
        label=config.label,
        policy=policy,
        exit_code=outcome.exit_code,
        status=outcome.status.value,
        outer_iterations=outcome.trace.outer_iterations,
        total_inner_steps=outcome.trace.total_inner_steps,
        theta=outcome.theta,
        r_norm=outcome.r_norm,
        table=outcome.table,
    )


def _inner_ratio(entries: Sequence[EntrySummary]) -> float | None:
    """Total inner steps of the best fixed policy over the decreasing policy."""
    fixed = [
        e.total_inner_steps
        for e in entries
        if e.policy.startswith("fixed:") and e.total_inner_steps and e.exit_code == 0
    ]
    decreasing = [
        e.total_inner_steps
        for e in entries
        if e.policy == "decreasing" and e.total_inner_steps and e.exit_code == 0
    ]
    if not fixed or not decreasing:
        return None
    return min(fixed) / decreasing[0]


def run_sweep(
    configs: Sequence[ExperimentConfig],
    workers: int = 1,
    out: str | None = None,
    mp_context: multiprocessing.context.BaseContext | None = None,
) -> int:
    """Run several policies on one matrix, each entry isolated from the others.

    Every entry writes its own artifacts under ``out/<policy label>``. The
    combined table and a summary comparing total inner steps go to ``out``.
    Returns the worst entry exit code, 0 for an empty sweep.
    """
    matrices = {os.path.abspath(c.matrix_path) for c in configs}
    if len(matrices) > 1:
        msg = f"a sweep must use a single matrix, got {len(matrices)}"
        raise exceptions.ConfigError(msg)
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        msg = f"duplicate policies in sweep: {', '.join(labels)}"
        raise exceptions.ConfigError(msg)
    for config in configs:
        validate(config)
    entries = [
        (
            c.label,
            c._replace(out=None if out is None else os.path.join(out, c.label)),
        )
        for c in configs
    ]
    outcomes = _sweep.run_entries(_sweep_entry, entries, workers, mp_context)
    summaries = [
        o.value
        if o.value is not None
        else EntrySummary(
            o.label, o.label, exceptions.SolverError.exit_code, error=o.error
        )
        for o in outcomes
    ]

    ratio = _inner_ratio(summaries)
    table = "\n".join(s.table or f"{s.label}: failed ({s.error})\n" for s in summaries)
    summary = {
        "matrix": next(iter(matrices), None),
        "entries": [
            {k: v for k, v in s._asdict().items() if k != "table"} for s in summaries
        ],
        "fixed_over_decreasing_inner_steps": ratio,
    }
    if table:
        print(table, end="")
    if ratio is not None:
        print(f"fixed/decreasing total inner steps: {ratio:.3g}")
    if out is not None:
        try:
            _write(
                [
                    (os.path.join(out, SWEEP_TABLE_FILE), table),
                    (
                        os.path.join(out, SWEEP_SUMMARY_FILE),
                        json.dumps(_diagnostics.as_jsonable(summary), indent=2) + "\n",
                    ),
                ]
            )
        except exceptions.RQILabError as exc:
            LOG.error("%(msg)s", {"msg": exc})  # noqa: TRY400
            return exc.exit_code
    return max((s.exit_code for s in summaries), default=0)
