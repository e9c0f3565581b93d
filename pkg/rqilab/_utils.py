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

import contextlib
import logging
import os
import sys
import tempfile
import typing

import numpy as np


if typing.TYPE_CHECKING:
    from rqilab import types


LOG = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-12

P = typing.ParamSpec("P")
R = typing.TypeVar("R")


def check_workers(workers: int, minimum: int) -> None:
    if not isinstance(workers, int) or workers < minimum:
        msg = f"'workers' must be an int >= {minimum}, not: {workers} ({type(workers).__name__})"
        raise ValueError(msg)


def check_count(value: int, name: str, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        msg = f"'{name}' must be an int >= {minimum}, not: {value} ({type(value).__name__})"
        raise ValueError(msg)


def check_callable(
    thing: typing.Any,  # noqa: ANN401
    name: str,
) -> None:
    if not callable(thing):
        msg = f"'{name}' must be a callable"
        raise TypeError(msg)


def check_unit(v: types.ComplexVector, name: str) -> None:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        msg = f"'{name}' must be a unit vector, got the zero vector"
        raise ValueError(msg)
    if abs(norm - 1.0) > UNIT_TOLERANCE:
        msg = f"'{name}' must be a unit vector, got norm {norm:.17g}"
        raise ValueError(msg)


def as_complex_vector(v: typing.Any) -> types.ComplexVector:  # noqa: ANN401
    return np.ascontiguousarray(v, dtype=np.complex128).reshape(-1)


def normalize_phase(v: types.ComplexVector) -> types.ComplexVector:
    """Scale ``v`` by a unit scalar so its largest entry is real positive."""
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    if pivot == 0:
        return v
    return v * (abs(pivot) / pivot)


def is_finite(v: types.ComplexVector) -> bool:
    return bool(np.all(np.isfinite(v)))


_setproctitle: typing.Callable[[str], None] | None
try:
    from setproctitle import setproctitle as _setproctitle
except ImportError:
    _setproctitle = None


def set_process_title(title: str) -> None:
    if _setproctitle is None:
        return

    _setproctitle(title)


def get_process_name() -> str:
    return os.path.basename(sys.argv[0])


def run_hooks(
    name: str,
    hooks: list[typing.Callable[P, R]],
    *args: P.args,
    **kwargs: P.kwargs,
) -> None:
    try:
        for hook in hooks:
            hook(*args, **kwargs)
    except Exception:
        LOG.exception("Exception raised during %s hooks", name)


@contextlib.contextmanager
def atomic_open(
    path: str,
    suffix: str = "",
) -> typing.Iterator[str]:
    """Yield a temporary path that replaces ``path`` on success.

    The temporary file lives in the destination directory so the final
    ``os.replace`` never crosses filesystems. On error it is removed and
    ``path`` is left untouched.
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".rqilab-", suffix=suffix, dir=directory)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_text_atomic(path: str, text: str) -> None:
    with atomic_open(path) as tmp, open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
