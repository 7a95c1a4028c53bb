"""Structured ``EVT kind=... key=value`` log lines.

Lines go to the ``contina.evt`` logger; in-process listeners receive the
same events as ``(kind, fields)`` for message-count checks.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from contextlib import contextmanager

logger = logging.getLogger("contina.evt")

_listeners: list = []
_lock = threading.Lock()


def _fmt(v) -> str:
    s = str(v)
    if not s or any(c.isspace() or c in '"=' for c in s):
        return json.dumps(s)
    return s


def format_evt(kind: str, fields: dict) -> str:
    parts = [f"EVT kind={kind}"]
    parts += [f"{k}={_fmt(v)}" for k, v in fields.items()]
    return " ".join(parts)


def evt(kind: str, **fields) -> None:
    fields.setdefault("ts", f"{time.time():.6f}")
    if logger.isEnabledFor(logging.INFO):
        logger.info(format_evt(kind, fields))
    with _lock:
        listeners = list(_listeners)
    for fn in listeners:
        fn(kind, fields)


def parse_evt(line: str) -> tuple[str, dict] | None:
    """Inverse of :func:`format_evt` for one log line; None if not an EVT line."""
    idx = line.find("EVT kind=")
    if idx < 0:
        return None
    rest = line[idx + 4:]
    fields = {}
    i = 0
    n = len(rest)
    while i < n:
        while i < n and rest[i] == " ":
            i += 1
        eq = rest.find("=", i)
        if eq < 0:
            break
        key = rest[i:eq]
        j = eq + 1
        if j < n and rest[j] == '"':
            dec = json.JSONDecoder()
            val, end = dec.raw_decode(rest, j)
            i = end
        else:
            end = rest.find(" ", j)
            end = n if end < 0 else end
            val = rest[j:end]
            i = end
        fields[key] = val
    kind = fields.pop("kind", "")
    return kind, fields


@contextmanager
def capture_events():
    """Collect events emitted in this process while the block runs."""
    got: list[tuple[str, dict]] = []

    def listener(kind, fields):
        got.append((kind, dict(fields)))

    with _lock:
        _listeners.append(listener)
    try:
        yield got
    finally:
        with _lock:
            _listeners.remove(listener)
