"""A runtime bundles one clause store, one tuple space and the engines,
threads and monitors that share them.  Nodes, servants and the CLI each
drive a runtime."""

from __future__ import annotations

import itertools
import os
import socket
import sys
import threading
import time
from functools import lru_cache

from . import builtins as _builtins  # noqa: F401  (registers builtins)
from . import linda as _linda  # noqa: F401
from .binarizer import parse_program
from .builtins import AnswerThread
from .continuation import PRELUDE
from .engine import Capacity, Engine
from .events import evt
from .linda import TupleSpace
from .reader import read_query
from .store import ClauseStore
from .term import Atom, PrologError, Struct, canonical_text, deref, term_variables

_epochs = itertools.count(1)


@lru_cache(maxsize=1)
def _prelude_clauses():
    return tuple(parse_program(PRELUDE))


def detect_host() -> str:
    return os.environ.get("CONTINA_HOST", "127.0.0.1")


class Runtime:
    def __init__(self, store: ClauseStore | None = None, space=None, out=None,
                 occurs_check: bool = False, prelude: bool = True, name: str = "local",
                 tier_policy: str = "auto"):
        self.store = store if store is not None else ClauseStore(tier_policy=tier_policy)
        self.space = space if space is not None else TupleSpace()
        self.out = out if out is not None else sys.stdout
        self.occurs_check = occurs_check
        self.name = name
        self.default_target: tuple | None = None  # (host, port, password)
        self.fixed_wait = False
        self.handshake_timeout = 10.0
        self.move_timeout = 60.0
        self._engines: dict[int, Engine] = {}
        self._threads: dict[int, AnswerThread] = {}
        self._monitors: dict[str, threading.Lock] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._out_lock = threading.Lock()
        self.code_id = Atom(f"{detect_host()}:{os.getpid()}:{next(_epochs)}")
        from .mobility import lazy_fetch

        self.fetch_hook = lazy_fetch
        if prelude and store is None:
            for c in _prelude_clauses():
                self.store.add(c, origin="prelude")

    # -- program loading -----------------------------------------------------

    def consult(self, text: str, origin="local"):
        return self.store.consult(text, origin=origin)

    def consult_file(self, path: str):
        with open(path, encoding="utf-8") as f:
            return self.consult(f.read())

    # -- solving ---------------------------------------------------------------

    def engine_for(self, goal, template) -> Engine:
        e = Engine(self)
        e.load(goal, template)
        return e

    def solve(self, goal, template=None):
        """Yield fresh copies of ``template`` for every answer of ``goal``."""
        if template is None:
            template = goal
        e = self.engine_for(goal, template)
        try:
            yield from e.answers()
        finally:
            e.stop()

    def once(self, goal, template=None):
        for a in self.solve(goal, template):
            return a
        return None

    def query(self, text: str):
        """Parse ``text`` and yield one ``{name: term}`` dict per answer."""
        goal, varmap = read_query(text)
        names = [n for n in varmap if not n.startswith("_")]
        template = Struct("v", [varmap[n] for n in names]) if names else Atom("v")
        for a in self.solve(goal, template):
            a = deref(a)
            yield dict(zip(names, a.args)) if names else {}

    def query_once(self, text: str):
        for b in self.query(text):
            return b
        return None

    # -- output ----------------------------------------------------------------

    def write(self, text: str) -> None:
        with self._out_lock:
            self.out.write(text)
            self.out.flush()

    def println(self, text: str) -> None:
        evt("println", node=self.name, text=text)
        self.write(text + "\n")

    # -- engines, threads, monitors -------------------------------------------

    def create_engine(self, capacity: Capacity | None = None) -> Engine:
        e = Engine(self, capacity)
        with self._lock:
            e.handle = next(self._ids)
            self._engines[e.handle] = e
        return e

    def engine(self, handle: int) -> Engine:
        with self._lock:
            e = self._engines.get(handle)
        if e is None:
            raise PrologError(Struct("stale_handle", [_int(handle)]))
        return e

    def destroy_engine(self, handle: int) -> None:
        with self._lock:
            e = self._engines.pop(handle, None)
        if e is None:
            raise PrologError(Struct("stale_handle", [_int(handle)]))
        if e.thread is not None and not e.thread.done.is_set():
            e.request_cancel()
        else:
            e.stop()

    def start_answer_thread(self, engine: Engine) -> AnswerThread:
        with self._lock:
            t = AnswerThread(self, engine, next(self._ids))
            self._threads[t.tid] = t
        engine.thread = t
        t.start()
        return t

    def thread(self, tid: int) -> AnswerThread:
        with self._lock:
            t = self._threads.get(tid)
        if t is None:
            raise PrologError(Struct("stale_handle", [_int(tid)]))
        return t

    def monitor(self, term) -> threading.Lock:
        key = canonical_text(term)
        if term_variables(term):
            raise PrologError(Atom("instantiation_error"))
        with self._lock:
            return self._monitors.setdefault(key, threading.Lock())


def _int(v):
    from .term import Int

    return Int(v)


def free_port(host: str = "127.0.0.1") -> int:
    with socket.socket() as s:
        s.bind((host, 0))
        return s.getsockname()[1]


def wait_until(pred, timeout: float, step: float = 0.01) -> bool:
    end = time.monotonic() + timeout
    while time.monotonic() < end:
        if pred():
            return True
        time.sleep(step)
    return pred()


__all__ = ["Runtime", "detect_host", "free_port", "wait_until"]
