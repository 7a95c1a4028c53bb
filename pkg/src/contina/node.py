"""Networked nodes: the server loop, servants, master registry and the
client-side remote calls.

A node owns a :class:`~contina.runtime.Runtime`.  Each accepted
connection carries one request frame and gets one reply frame.  Linda
messages are open; ``run``, ``fetch``, ``rload`` and ``stop`` need the
node's password.
"""

from __future__ import annotations

import hmac
import logging
import secrets
import socket
import threading

from . import wire
from .binarizer import parse_program
from .engine import Engine, det
from .events import evt
from .runtime import Runtime, detect_host
from .term import (
    NIL, Atom, Int, PrologError, Struct, Var, canonical_text, deref, list_items,
    mklist, subsumes, term_variables,
)

log = logging.getLogger("contina.node")

OK = Atom("ok")
NO = Atom("no")
DENIED = Atom("denied")
HALT = Atom("$halt")


def new_password() -> str:
    return secrets.token_hex(16)


def _name(t) -> str:
    t = deref(t)
    if type(t) is Atom:
        return t.name
    if type(t) is Int:
        return str(t.value)
    raise PrologError(Struct("type_error", [Atom("atom"), t]))


def first_answer(runtime: Runtime, goal, template):
    """Solve on a fresh engine; the first answer, or None."""
    e = Engine(runtime)
    e.load(goal, template)
    try:
        return e.ask()
    finally:
        e.stop()


class Node:
    def __init__(self, runtime: Runtime | None = None, host: str = "127.0.0.1", port: int = 0,
                 password: str | None = None, master: tuple | None = None, channel=None,
                 servants: int = 1, handler=None, name: str | None = None):
        self.runtime = runtime if runtime is not None else Runtime()
        self.host = host
        self.port = port
        self.password = password if password is not None else new_password()
        self.master = master
        self.channel = channel if channel is not None else Atom("default")
        self.n_servants = servants
        self.handler = handler or Node.dispatch
        self.name = name
        self._sock: socket.socket | None = None
        self._stopped = threading.Event()
        self._stop_lock = threading.Lock()
        self._closed = threading.Event()
        self._threads: list[threading.Thread] = []
        self._acceptor: threading.Thread | None = None

    # -- lifecycle -------------------------------------------------------------

    @property
    def address(self) -> tuple[str, int]:
        return self.host, self.port

    @property
    def running(self) -> bool:
        return self._sock is not None and not self._stopped.is_set()

    def start(self) -> "Node":
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            s.bind((self.host, self.port))
        except OSError:
            s.close()
            raise wire.NetError("bind_failed") from None
        s.listen(64)
        s.settimeout(0.1)
        self._sock = s
        self.port = s.getsockname()[1]
        if self.name is None:
            # a node that owns its runtime names it; helper nodes keep the owner's name
            self.name = f"{self.host}:{self.port}"
            self.runtime.name = self.name
        self._acceptor = threading.Thread(target=self._accept_loop, name=f"accept-{self.port}", daemon=True)
        self._acceptor.start()
        for i in range(self.n_servants):
            t = threading.Thread(target=servant_loop, args=(self.runtime,), kwargs={"stopped": self._stopped},
                                 name=f"servant-{self.port}-{i}", daemon=True)
            t.start()
            self._threads.append(t)
        evt("listening", node=self.name, port=self.port)
        if self.master is not None:
            register_with_master(self.master, self.channel, self.host, self.port)
        return self

    def serve_forever(self, timeout: float | None = None) -> bool:
        if self._sock is None:
            self.start()
        return self._stopped.wait(timeout)

    def wait_stopped(self, timeout: float | None = None) -> bool:
        return self._stopped.wait(timeout)

    def stop(self) -> None:
        """Close the node; later callers block until the first one is done."""
        with self._stop_lock:
            first = not self._stopped.is_set()
            self._stopped.set()
        if not first:
            self._closed.wait(5)
            return
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()
        if self._acceptor is not None and self._acceptor is not threading.current_thread():
            self._acceptor.join(1.0)
        for _ in self._threads:
            self.runtime.space.out(Struct("todo", [HALT]))
        evt("stopped", node=self.name)
        self._closed.set()

    def __enter__(self):
        if self._sock is None:
            self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    # -- serving -------------------------------------------------------------

    def _accept_loop(self):
        sock = self._sock
        while not self._stopped.is_set():
            try:
                conn, _ = sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._serve_conn, args=(conn,), daemon=True).start()

    def _serve_conn(self, conn: socket.socket):
        stop_after = False
        with conn:
            conn.settimeout(30.0)
            try:
                msg = wire.read_frame(conn)
            except wire.WireError as exc:
                self._reply(conn, Struct("err", [exc.term]))
                return
            except OSError:
                return
            if msg is None:  # a bare connect, e.g. a readiness probe
                return
            msg = deref(msg)
            evt("request", node=self.name, msg=msg.name if type(msg) in (Atom, Struct) else "?")
            conn.settimeout(None)
            try:
                reply = self.handler(self, msg)
            except PrologError as exc:
                reply = Struct("err", [exc.term])
            except Exception as exc:  # keep serving whatever happens
                log.exception("handler failure")
                reply = Struct("err", [Struct("internal", [Atom(type(exc).__name__)])])
            if type(reply) is tuple:
                reply, stop_after = reply
            self._reply(conn, reply)
        if stop_after:
            self.stop()

    @staticmethod
    def _reply(conn, reply):
        try:
            wire.write_frame(conn, reply)
        except wire.WireError as exc:
            wire.write_frame(conn, Struct("err", [exc.term]))
        except OSError:
            pass

    def check_password(self, pwd) -> bool:
        pwd = deref(pwd)
        if type(pwd) is not Atom:
            return False
        return hmac.compare_digest(pwd.name.encode(), self.password.encode())

    def dispatch(self, msg):
        """Default interactor: answer one decoded request."""
        rt = self.runtime
        name, args = msg.name, getattr(msg, "args", [])
        if name == "linda_out":
            rt.space.out(args[0])
            return OK
        if name == "linda_in":
            return self._linda_in(args[0])
        if name == "linda_all":
            return Struct("tuples", [mklist(rt.space.all(args[0]))])
        if name == "register":
            rt.space.out(args[0])
            return OK
        if name == "lookup":
            pattern = Struct("server_id", [args[0], Var(), Var()])
            return Struct("tuples", [mklist(rt.space.all(pattern))])
        if name in ("run", "fetch", "rload", "stop"):
            if not self.check_password(args[0]):
                evt("denied", node=self.name, msg=name)
                return DENIED
            if name == "run":
                a = first_answer(rt, args[1], args[2])
                return NO if a is None else Struct("the", [a])
            if name == "fetch":
                return self._fetch(args[1])
            if name == "rload":
                with open(_name(args[1]), encoding="utf-8") as f:
                    cs = parse_program(f.read())
                return Struct("clauses", [mklist([c.as_term() for c in cs])])
            return OK, True
        raise wire.WireError("protocol_error", Atom("unexpected_reply"))

    def _linda_in(self, pattern):
        w = self.runtime.space.in_async(pattern)
        while not w.event.wait(0.2):
            if self._stopped.is_set() and self.runtime.space.cancel(w):
                return Struct("err", [Atom("server_stopped")])
        return Struct("the", [w.result])

    def _fetch(self, pi):
        pi = deref(pi)
        if type(pi) is not Struct or pi.name != "/" or len(pi.args) != 2:
            raise PrologError(Struct("type_error", [Atom("predicate_indicator"), pi]))
        key = (_name(pi.args[0]), deref(pi.args[1]).value)
        if not self.runtime.store.has(key):
            return NO
        return Struct("clauses", [mklist([c.as_term() for c in self.runtime.store.clauses(key)])])


# ---------------------------------------------------------------------------
# servants


def run_task(runtime: Runtime, task) -> bool:
    try:
        ok = first_answer(runtime, task, Atom("done")) is not None
    except PrologError as exc:
        evt("task_error", node=runtime.name, error=canonical_text(exc.term))
        raise
    evt("task", node=runtime.name, ok=str(ok).lower())
    return ok


def servant_loop(runtime: Runtime, strict: bool = False, stopped: threading.Event | None = None) -> None:
    """Take ``todo(Task)`` tuples from the runtime's space and run them.

    Failing or raising tasks are logged and skipped unless ``strict``.
    Returns on a ``todo('$halt')`` tuple or when ``stopped`` is set.
    """
    pattern = Struct("todo", [Var()])
    while stopped is None or not stopped.is_set():
        t = runtime.space.in_(pattern)
        task = deref(deref(t).args[0])
        if task == HALT:
            return
        try:
            ok = run_task(runtime, task)
        except PrologError:
            if strict:
                raise
            continue
        if not ok and strict:
            return


def servant(host: str, port: int, strict: bool = False, runtime: Runtime | None = None) -> None:
    """Remote servant: pull todos from a node's space and run them here.

    Returns when the node becomes unreachable or stops serving.
    """
    from .linda import RemoteSpace

    rt = runtime if runtime is not None else Runtime(space=RemoteSpace(host, port))
    try:
        servant_loop(rt, strict=strict)
    except wire.NetError as exc:
        evt("servant_exit", reason=exc.reason)
    except PrologError as exc:
        if strict:
            raise
        evt("servant_exit", reason=canonical_text(exc.term))


# ---------------------------------------------------------------------------
# client side


def remote_run(host: str, port: int, password: str, goal, vars_, timeout: float | None = 30.0):
    """Run ``goal`` at a node; returns ``the(VarsInstance)``, ``no`` or ``denied``."""
    return wire.request(host, port, Struct("run", [Atom(password), goal, vars_]), timeout=timeout)


def server_id(channel, host: str, port: int):
    return Struct("server_id", [channel, Atom(host), Int(port)])


def register_with_master(master: tuple, channel, host: str, port: int) -> None:
    mh, mp = master
    wire.request(mh, mp, Struct("register", [server_id(channel, host, port)]))


def lookup_servers(master: tuple, pattern=None) -> list:
    mh, mp = master
    reply = wire.request(mh, mp, Struct("lookup", [pattern if pattern is not None else Var()]))
    return list_items(deref(reply).args[0]) or []


def ask_all_servers(channel, servers: list, goal, password: str) -> int:
    """Run ``goal`` at every server whose channel is an instance of ``channel``.

    Per-server failures are skipped; returns how many servers answered.
    """
    answered = 0
    for sid in servers:
        if not subsumes(Struct("server_id", [channel, Var(), Var()]), sid):
            continue
        sid = deref(sid)
        try:
            reply = remote_run(_name(sid.args[1]), deref(sid.args[2]).value, password, goal, NIL)
        except PrologError:
            continue
        if type(deref(reply)) is Struct:
            answered += 1
    return answered


# ---------------------------------------------------------------------------
# builtins


def target_of(e) -> tuple[str, int, str]:
    """Where remote operations go: scoped host/port/password assumptions,
    then the engine's there-target, then the runtime default."""
    from .builtins import assumed_value

    host, port, pwd = assumed_value(e, "host"), assumed_value(e, "port"), assumed_value(e, "password")
    fallback = e.there or e.runtime.default_target
    if host is None or port is None:
        if fallback is None:
            raise PrologError(Struct("existence_error", [Atom("server"), Atom("default")]))
        return fallback
    pw = _name(pwd) if pwd is not None else (fallback[2] if fallback else "")
    return _name(host), deref(port).value, pw


def _check_reply(reply):
    reply = deref(reply)
    if reply == DENIED:
        raise PrologError(Struct("permission_error", [Atom("access"), Atom("server")]))
    if type(reply) is Struct and reply.name == "err":
        raise PrologError(reply.args[0])
    return reply


@det("remote_run", 1)
def _remote_run1(e, goal):
    host, port, pwd = target_of(e)
    vs = mklist(term_variables(goal))
    reply = _check_reply(remote_run(host, port, pwd, goal, vs))
    if reply == NO:
        return False
    return e.unify(vs, reply.args[0])


@det("remote_run", 2)
def _remote_run2(e, answer, goal):
    host, port, pwd = target_of(e)
    reply = _check_reply(remote_run(host, port, pwd, goal, answer))
    return e.unify(answer, reply.args[0]) if reply != NO else False


@det("remote_out", 1)
def _remote_out(e, t):
    host, port, _ = target_of(e)
    _check_reply(wire.request(host, port, Struct("linda_out", [t])))
    return True


@det("remote_in", 1)
def _remote_in(e, pattern):
    host, port, _ = target_of(e)
    reply = _check_reply(wire.request(host, port, Struct("linda_in", [pattern]), timeout=None))
    return e.unify(pattern, reply.args[0])


@det("remote_all", 2)
def _remote_all(e, pattern, xs):
    host, port, _ = target_of(e)
    reply = _check_reply(wire.request(host, port, Struct("linda_all", [pattern])))
    return e.unify(xs, reply.args[0])


@det("stop_server", 1)
def _stop_server(e, pwd):
    host, port, _ = target_of(e)
    try:
        _check_reply(wire.request(host, port, Struct("stop", [Atom(_name(pwd))])))
    except wire.NetError as exc:
        evt("stop_failed", node=e.runtime.name, reason=exc.reason)
    return True


@det("rload", 1)
def _rload(e, file):
    host, port, pwd = target_of(e)
    reply = _check_reply(wire.request(host, port, Struct("rload", [Atom(pwd), Atom(_name(file))])))
    from .binarizer import BinClause

    for t in list_items(reply.args[0]) or []:
        e.store.add(BinClause.from_term(t), origin=("fetched", f"{host}:{port}"))
    return True


@det("detect_host", 1)
def _detect_host(e, h):
    return e.unify(h, Atom(detect_host()))


__all__ = [
    "Node", "ask_all_servers", "first_answer", "lookup_servers", "new_password",
    "register_with_master", "remote_run", "run_task", "servant", "servant_loop", "server_id",
]
