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
"""Convergence tables, JSON lines traces and verification files."""

from __future__ import annotations

import json
import logging
import typing

from rqilab import _diagnostics
from rqilab import _rqi_driver
from rqilab import _utils


if typing.TYPE_CHECKING:
    from collections.abc import Iterable
    from collections.abc import Iterator
    from collections.abc import Mapping


LOG = logging.getLogger(__name__)

TRACE_SCHEMA = "rqilab.trace/1"
NEAR_ONE = 1e-4
COLUMNS = ("k", "||r_k||", "sin(phi_k)", "res(k-1)", "iter(k-1)", "iters")


def format_number(value: float | None) -> str:
    """Four significant digits, scientific notation below ``1e-3``."""
    if value is None:
        return ""
    if value == 0.0:
        return "0"
    if abs(value) >= 1e-3:
        return f"{value:.4g}"
    return f"{value:.1e}"


def format_tolerance(record: _rqi_driver.TraceRecord) -> str:
    """Achieved inner relative residual, ``1-x`` close to one.

    Flagged solves, stagnated or stopped above their tolerance, get a
    trailing ``*``.
    """
    xi = record.xi_achieved
    if xi is None:
        return ""
    text = f"1-{format_number(1.0 - xi)}" if 1.0 - xi < NEAR_ONE else format_number(xi)
    return text + "*" if record.flagged else text


def table_rows(
    trace: _rqi_driver.OuterTrace,
    exact: bool = False,
) -> Iterator[tuple[str, ...]]:
    """Rows ``k >= 1`` with the inner solve that produced iterate ``k``."""
    records = trace.records
    total = 0
    with_angles = any(r.sin_phi is not None for r in records)
    for prev, cur in zip(records, records[1:], strict=False):
        total += prev.inner_steps or 0
        row = [
            str(cur.k),
            format_number(cur.r_norm),
            format_number(cur.sin_phi) if with_angles else "",
            "" if exact else format_tolerance(prev),
            "" if exact else str(prev.inner_steps),
            str(total),
        ]
        yield tuple(row)


def render_table(trace: _rqi_driver.OuterTrace, title: str = "") -> str:
    """Render ``trace`` in the fixed-width convergence table layout.

    The ``sin(phi_k)`` column is only present for oracle-backed traces and
    exact solves leave the inner tolerance and step columns empty.
    """
    exact = trace.policy == "exact"
    with_angles = any(r.sin_phi is not None for r in trace)
    columns = [c for c in COLUMNS if with_angles or c != "sin(phi_k)"]
    rows = [
        tuple(v for c, v in zip(COLUMNS, row, strict=True) if c in columns)
        for row in table_rows(trace, exact)
    ]
    widths = [len(c) for c in columns]
    for row in rows:
        widths = [max(w, len(v)) for w, v in zip(widths, row, strict=True)]

    lines = []
    if title:
        lines.append(title)
    first = trace.records[0] if len(trace) else None
    if first is not None:
        start = f"k=0: ||r_0||={format_number(first.r_norm)}"
        if first.sin_phi is not None:
            start += f" sin(phi_0)={format_number(first.sin_phi)}"
        lines.append(start)
    lines.append("  ".join(c.rjust(w) for c, w in zip(columns, widths, strict=True)))
    lines.extend(
        "  ".join(v.rjust(w) for v, w in zip(row, widths, strict=True)) for row in rows
    )
    lines.extend(f"! {event}" for event in trace.events)
    return "\n".join(lines) + "\n"


def trace_lines(
    trace: _rqi_driver.OuterTrace,
    config: Mapping[str, typing.Any],
    status: str,
) -> Iterator[str]:
    """JSON lines: a header then one object per :py:class:`TraceRecord`.

    Record keys are exactly the ``TraceRecord`` field names.
    """
    header = {
        "schema": TRACE_SCHEMA,
        "config": _diagnostics.as_jsonable(dict(config)),
        "policy": trace.policy,
        "preconditioner": trace.preconditioner,
        "status": status,
        "fields": list(_rqi_driver.TraceRecord._fields),
        "events": list(trace.events),
    }
    yield json.dumps(header)
    for record in trace:
        yield json.dumps(_diagnostics.as_jsonable(record._asdict()))


def render_trace(
    trace: _rqi_driver.OuterTrace,
    config: Mapping[str, typing.Any],
    status: str,
) -> str:
    return "\n".join(trace_lines(trace, config, status)) + "\n"


def render_verification(
    report: _diagnostics.VerificationReport,
    config: Mapping[str, typing.Any],
) -> str:
    document = {"config": _diagnostics.as_jsonable(dict(config)), **report}
    return json.dumps(document, indent=2) + "\n"


def write_files(files: Iterable[tuple[str, str]]) -> None:
    """Write each ``(path, text)`` atomically."""
    for path, text in files:
        _utils.write_text_atomic(path, text)
        LOG.info("Wrote %(path)s", {"path": path})
