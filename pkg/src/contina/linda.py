"""Unification-based Linda tuple space.

Tuples are kept oldest first; ``in`` takes the oldest matching tuple and
blocked waiters are served first-come first-served.  A tuple handed to a
waiter by ``out`` is never stored.
"""

from __future__ import annotations

import threading
from collections import deque

from .term import PrologError, Struct, rename_apart, undo, unify


def _matches(pattern, tup) -> bool:
    trail: list = []
    ok = unify(pattern, tup, trail)
    undo(trail, 0)
    return ok


class Waiter:
    """A blocked ``in``/``rd`` request."""

    __slots__ = ("pattern", "take", "result", "event")

    def __init__(self, pattern, take: bool):
        self.pattern = pattern
        self.take = take
        self.result = None
        self.event = threading.Event()

    @property
    def done(self) -> bool:
        return self.event.is_set()


class TupleSpace:
    def __init__(self):
        self._tuples: deque = deque()
        self._waiters: list[Waiter] = []
        self._lock = threading.Lock()
        self.outs = 0
        self.ins = 0

    def __len__(self):
        with self._lock:
            return len(self._tuples)

    def out(self, t) -> None:
        """Add ``t`` (a copy), or hand it to the oldest matching taker."""
        t = rename_apart(t)
        with self._lock:
            self.outs += 1
            remaining = []
            taken = False
            for w in self._waiters:
                if taken or not _matches(w.pattern, t):
                    remaining.append(w)
                elif w.take:
                    w.result = t
                    self.ins += 1
                    w.event.set()
                    taken = True
                else:
                    w.result = rename_apart(t)
                    w.event.set()
            self._waiters = remaining
            if not taken:
                self._tuples.append(t)

    def _find(self, pattern):
        for i, t in enumerate(self._tuples):
            if _matches(pattern, t):
                return i, t
        return None, None

    def in_async(self, pattern, take: bool = True) -> Waiter:
        """Try to take (or read) a match now; otherwise enqueue a waiter.

        The returned waiter is already ``done`` when a tuple was available.
        """
        w = Waiter(rename_apart(pattern), take)
        with self._lock:
            i, t = self._find(pattern)
            if t is not None:
                if take:
                    del self._tuples[i]
                    self.ins += 1
                    w.result = t
                else:
                    w.result = rename_apart(t)
                w.event.set()
            else:
                self._waiters.append(w)
        return w

    def cancel(self, w: Waiter) -> bool:
        """Withdraw a pending waiter; False if it was already served."""
        with self._lock:
            if w.event.is_set():
                return False
            self._waiters.remove(w)
            return True

    def in_(self, pattern, timeout: float | None = None):
        """Blocking take of the oldest tuple unifying with ``pattern``.

        Returns the tuple (the caller unifies it with its pattern).  With a
        timeout, returns None when nothing arrived in time.
        """
        w = self.in_async(pattern, take=True)
        return self._wait(w, timeout)

    def rd(self, pattern, timeout: float | None = None):
        """Blocking read without removal."""
        w = self.in_async(pattern, take=False)
        return self._wait(w, timeout)

    def _wait(self, w: Waiter, timeout):
        if not w.event.wait(timeout):
            if self.cancel(w):
                return None
        return w.result

    def rd_nb(self, pattern):
        """Non-blocking read: a copy of the oldest match, or None."""
        items = self.all(pattern)
        return items[0] if items else None

    def all(self, pattern) -> list:
        with self._lock:
            return [rename_apart(t) for t in self._tuples if _matches(pattern, t)]

    def snapshot(self) -> list:
        with self._lock:
            return [rename_apart(t) for t in self._tuples]

    def pending_waiters(self) -> int:
        with self._lock:
            return len(self._waiters)


class RemoteSpace:
    """Tuple-space facade forwarding to a node's space over the wire."""

    def __init__(self, host: str, port: int, timeout: float | None = None):
        self.host = host
        self.port = port
        self.timeout = timeout

    def _req(self, msg, timeout=None):
        from . import wire

        reply = wire.request(self.host, self.port, msg, timeout=timeout or self.timeout)
        if type(reply) is Struct and reply.name == "err":
            raise PrologError(reply.args[0])
        return reply

    def out(self, t) -> None:
        self._req(Struct("linda_out", [t]))

    def in_(self, pattern, timeout=None):
        reply = self._req(Struct("linda_in", [pattern]), timeout)
        return reply.args[0]

    def rd(self, pattern, timeout=None):
        t = self.in_(pattern, timeout)
        # emulated as in + out against a remote space
        self.out(t)
        return t

    def all(self, pattern) -> list:
        from .term import list_items

        reply = self._req(Struct("linda_all", [pattern]))
        return list_items(reply.args[0]) or []

    def rd_nb(self, pattern):
        items = self.all(pattern)
        return items[0] if items else None


# ---------------------------------------------------------------------------
# builtins against the engine's local space


def _register_builtins():
    from .engine import det
    from .term import mklist

    @det("out", 1)
    def _out(e, t):
        e.runtime.space.out(t)
        return True

    @det("in", 1)
    def _in(e, pattern):
        t = e.runtime.space.in_(pattern)
        return t is not None and e.unify(pattern, t)

    @det("rd", 1)
    def _rd(e, pattern):
        t = e.runtime.space.rd(pattern)
        return t is not None and e.unify(pattern, t)

    @det("rd_nb", 1)
    def _rd_nb(e, pattern):
        t = e.runtime.space.rd_nb(pattern)
        return t is not None and e.unify(pattern, t)

    @det("all", 2)
    def _all(e, pattern, xs):
        return e.unify(xs, mklist(e.runtime.space.all(pattern)))


_register_builtins()

__all__ = ["TupleSpace", "RemoteSpace", "Waiter"]
