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
"""Isolated execution of sweep entries in worker processes."""

from __future__ import annotations

import concurrent.futures
import logging
import multiprocessing
import typing

from rqilab import _utils


if typing.TYPE_CHECKING:
    import multiprocessing.context
    from collections.abc import Callable
    from collections.abc import Sequence


LOG = logging.getLogger(__name__)

T = typing.TypeVar("T")
R = typing.TypeVar("R")


class EntryOutcome(typing.NamedTuple):
    label: str
    value: typing.Any
    error: str | None = None


def _worker_initializer(prog: str) -> None:
    _utils.set_process_title(f"{prog}: rqilab sweep worker")


def _run_labelled(prog: str, label: str, func: Callable[[T], R], entry: T) -> R:
    _utils.set_process_title(f"{prog}: rqilab sweep worker({label})")
    return func(entry)


def run_entries(
    func: Callable[[T], R],
    entries: Sequence[tuple[str, T]],
    workers: int = 1,
    mp_context: multiprocessing.context.BaseContext | None = None,
) -> list[EntryOutcome]:
    """Run ``func`` on every ``(label, entry)`` in a process pool.

    Outcomes keep the order of ``entries``. An entry raising an exception
    yields an outcome with ``error`` set and does not affect the others.

    :param workers: number of worker processes, 1 included
    :param mp_context: multiprocessing context to use (defaults to
                       ``multiprocessing.get_context()``)
    """
    _utils.check_workers(workers, 1)
    if not entries:
        return []
    context = mp_context or multiprocessing.get_context()
    prog = _utils.get_process_name()
    outcomes: list[EntryOutcome] = []
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=min(workers, len(entries)),
        mp_context=context,
        initializer=_worker_initializer,
        initargs=(prog,),
    ) as executor:
        futures = [
            (label, executor.submit(_run_labelled, prog, label, func, entry))
            for label, entry in entries
        ]
        for label, future in futures:
            try:
                outcomes.append(EntryOutcome(label, future.result()))
            except Exception as exc:
                LOG.exception("Sweep entry %(label)s failed", {"label": label})
                error = f"{type(exc).__name__}: {exc}"
                outcomes.append(EntryOutcome(label, None, error))
    return outcomes
