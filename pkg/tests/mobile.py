"""In-process server/client pairs for migration tests."""

from __future__ import annotations

from contextlib import contextmanager

from contina import Runtime
from contina.events import capture_events
from contina.node import Node


@contextmanager
def pair(client_code: str = "", servants: int = 1):
    """A server node with an empty program and a client aimed at it."""
    with Node(Runtime(), password="srv", servants=servants) as server:
        client = Runtime(name="client")
        client.consult(client_code)
        client.default_target = (*server.address, "srv")
        client.move_timeout = 20.0
        yield server, client


def kinds(events, kind, **match):
    return [f for k, f in events if k == kind and all(f.get(a) == b for a, b in match.items())]


def sends(events, msg):
    return len(kinds(events, "send", msg=msg))


__all__ = ["capture_events", "kinds", "pair", "sends"]
