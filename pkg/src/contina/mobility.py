"""Moving continuations between nodes.

``move/0`` ships the rest of the current AND-branch to the there-target
and blocks until the target either reaches ``return/0`` (the remaining
goals come back together with the bindings of the first solution) or runs
off the end of the shipped goals.  While the target runs, the base serves
its own clauses so that the target can fetch missing predicates one at a
time.

``move_with_cont/1`` is the asynchronous variant used by ``move_thread``:
the goals are queued at the target as a ``todo`` task and the base turns
into a code server until the task sends ``stop`` back.
"""

from __future__ import annotations

import socket
import threading
import time

from . import wire
from .binarizer import BinClause, psi
from .builtins import assumed_value
from .continuation import collect_until, is_stop
from .engine import control, det
from .events import evt
from .node import NO, Node, _check_reply, _name, new_password, target_of
from .store import UnknownPredicate
from .term import (
    STOP, TRUE, Atom, Int, PrologError, Struct, Var, deref, list_items, mkconj,
    mklist, term_variables,
)


def _chain(facts: list, goal):
    """``f1 =>> f2 =>> ... =>> goal``"""
    for f in reversed(facts):
        goal = Struct("=>>", [f, goal])
    return goal


def _back_facts(host, port, pwd, code) -> list:
    return [
        Struct("host", [Atom(host)]),
        Struct("port", [Int(port)]),
        Struct("password", [Atom(pwd)]),
        Struct("code", [code]),
    ]


# ---------------------------------------------------------------------------
# lazy code fetching


_fetch_locks: dict = {}
_fetch_locks_guard = threading.Lock()


def _key_lock(runtime, key) -> threading.Lock:
    with _fetch_locks_guard:
        return _fetch_locks.setdefault((id(runtime.store), key), threading.Lock())


def lazy_fetch(engine, key) -> bool:
    """Unknown-predicate hook: fetch ``key`` from the base named by the
    scoped ``code``/``host``/``port``/``password`` assumptions.

    Returns False when no base is in scope or the base does not know the
    predicate, leaving the caller to report ``unknown_predicate``.
    """
    code = assumed_value(engine, "code")
    host = assumed_value(engine, "host")
    port = assumed_value(engine, "port")
    if code is None or host is None or port is None:
        return False
    pwd = assumed_value(engine, "password")
    store = engine.store
    with _key_lock(engine.runtime, key):
        if store.has(key):
            return True
        name, arity = key
        msg = Struct("fetch", [Atom(_name(pwd) if pwd is not None else ""),
                               Struct("/", [Atom(name), Int(arity)])])
        evt("fetch", node=engine.runtime.name, pred=f"{name}/{arity}")
        reply = deref(wire.request(_name(host), deref(port).value, msg))
        if type(reply) is not Struct or reply.name != "clauses":
            return False
        origin = ("fetched", _name(code))
        for t in list_items(reply.args[0]) or []:
            store.add(BinClause.from_term(t), origin=origin)
        store.declare(key, origin=origin)
        return True


# ---------------------------------------------------------------------------
# there / here


@det("there", 0)
def _there(e):
    target = e.runtime.default_target
    if target is None:
        raise PrologError(Struct("existence_error", [Atom("server"), Atom("default")]))
    old = e.there
    e.there = target
    e.trail.append(lambda: setattr(e, "there", old))
    return True


@det("here", 0)
def _here(e):
    old = e.there
    e.there = None
    e.trail.append(lambda: setattr(e, "there", old))
    return True


# ---------------------------------------------------------------------------
# move / return


def reachable(host: str, port: int, timeout: float = 2.0) -> bool:
    try:
        with socket.create_connection((host, port), timeout=timeout):
            return True
    except OSError:
        return False


def package(cont):
    """Capture the rest of the AND-branch: ``(goals, vars)``."""
    goals, _ = collect_until(cont, is_stop)
    gs = mkconj(goals)
    return gs, term_variables(gs)


@control("move", 0)
def _move(e, args):
    (k,) = args
    target = e.there
    if target is None:
        raise PrologError(Struct("existence_error", [Atom("server"), Atom("there")]))
    host, port, tpwd = target
    gs, vs = package(k)
    if not reachable(host, port):
        evt("move_failed", node=e.runtime.name, to=f"{host}:{port}", reason="unreachable")
        e.goal = k
        return True
    from .runtime import detect_host

    back = Node(e.runtime, host=detect_host(), port=0, password=new_password(), servants=0,
                name=f"{e.runtime.name}/back").start()
    ret = Var()
    facts = _back_facts(back.host, back.port, back.password, e.runtime.code_id)
    goal = _chain(facts, Struct("$moved", [gs, ret]))
    evt("move", node=e.runtime.name, to=f"{host}:{port}", back=back.port)
    try:
        reply = deref(wire.request(host, port, Struct("run", [Atom(tpwd), goal, mklist([mklist(vs), ret])]),
                                   timeout=None))
    except wire.NetError as exc:
        evt("move_failed", node=e.runtime.name, to=f"{host}:{port}", reason=exc.reason)
        e.goal = k
        return True
    finally:
        back.stop()
    reply = _check_reply(reply)
    if reply == NO:
        evt("moved_back", node=e.runtime.name, ok="false")
        return False
    vi, rest = list_items(reply.args[0])
    evt("moved_back", node=e.runtime.name, ok="true")
    if not e.unify(mklist(vs), vi):
        return False
    e.goal = psi(rest, STOP)
    return True


@control("$moved", 2)
def _moved(e, args):
    gs, ret, k = args
    e.goal = psi(gs, Struct("$moved_end", [ret, k]))
    return True


@control("$moved_end", 1)
def _moved_end(e, args):
    ret, k = args
    if type(deref(ret)) is Var and not e.unify(ret, TRUE):
        return False
    e.goal = k
    return True


def _is_moved_end(c) -> bool:
    return type(c) is Struct and c.name == "$moved_end" and len(c.args) == 2


@control("return", 0)
def _return(e, args):
    (k,) = args
    try:
        goals, end = collect_until(k, _is_moved_end)
    except PrologError:
        raise PrologError(Atom("not_migrated")) from None
    ret, after = end.args
    if not e.unify(ret, mkconj(goals)):
        return False
    e.goal = after
    return True


# ---------------------------------------------------------------------------
# asynchronous thread moving


@control("move_with_cont", 1)
def _move_with_cont(e, args):
    gs, k = args
    rt = e.runtime
    host, port, _ = target_of(e)
    from .runtime import detect_host, free_port

    bhost = detect_host()
    bport = free_port(bhost)
    bpwd = new_password()
    body = Struct(",", [
        Struct(";", [Struct("->", [Atom("$await_base"), Struct("$run_tolerant", [gs])]), TRUE]),
        Struct("stop_server", [Atom(bpwd)]),
    ])
    task = Struct("todo", [_chain(_back_facts(bhost, bport, bpwd, rt.code_id), body)])
    try:
        _check_reply(wire.request(host, port, Struct("linda_out", [task])))
    except wire.NetError as exc:
        evt("move_failed", node=rt.name, to=f"{host}:{port}", reason=exc.reason)
        e.goal = psi(gs, k)
        return True
    back = Node(rt, host=bhost, port=bport, password=bpwd, servants=0, name=f"{rt.name}/back").start()
    evt("move", node=rt.name, to=f"{host}:{port}", back=bport)
    if not back.wait_stopped(rt.move_timeout):
        evt("move_timeout", node=rt.name, back=bport)
    back.stop()
    e.goal = k
    return True


@control("$run_tolerant", 1)
def _run_tolerant(e, args):
    """``(catch(G, E, ('$task_error'(E), fail)) -> true ; true)``"""
    g, k = args
    caught = Var()
    guarded = Struct("catch", [g, caught, Struct(",", [Struct("$task_error", [caught]), Atom("fail")])])
    e.goal = psi(Struct(";", [Struct("->", [guarded, TRUE]), TRUE]), k)
    return True


@det("$task_error", 1)
def _task_error(e, err):
    from .term import canonical_text

    evt("task_error", node=e.runtime.name, error=canonical_text(err))
    return True


@det("$await_base", 0)
def _await_base(e):
    """Readiness handshake with the base's code server."""
    rt = e.runtime
    if rt.fixed_wait:
        time.sleep(5)
        return True
    host, port = _name(assumed_value(e, "host")), deref(assumed_value(e, "port")).value
    delay = 0.01
    deadline = time.monotonic() + rt.handshake_timeout
    while True:
        if reachable(host, port, timeout=1.0):
            return True
        if time.monotonic() >= deadline:
            evt("handshake_timeout", node=rt.name, to=f"{host}:{port}")
            return False
        time.sleep(min(delay, max(0.0, deadline - time.monotonic())))
        delay *= 2


__all__ = ["lazy_fetch", "package", "reachable", "UnknownPredicate"]
