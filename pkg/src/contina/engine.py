"""LD-resolution over binarized clauses.

An :class:`Engine` holds one goal register (a binarized goal whose last
argument is the continuation), a choicepoint stack and a trail.  Every
step either runs a builtin or resolves the goal against the store; there
is no separate goal stack because the continuation *is* the goal stack.

Builtins live in two tables.  ``DET`` maps ``name/arity`` to functions
that only succeed or fail (also usable as clause guards); ``BUILTINS``
maps the binarized ``name/arity+1`` to functions that set the next goal
themselves.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass

from .binarizer import psi
from .store import UnknownPredicate
from .term import (
    STOP, Atom, PrologError, Struct, Var, copy_terms, deref, rename_apart,
    undo, unify,
)

BUILTINS: dict = {}
DET: dict = {}


def det(name: str, arity: int):
    """Register a deterministic builtin ``fn(engine, *args) -> bool``."""

    def deco(fn):
        DET[(name, arity)] = fn

        def call(engine, args):
            if fn(engine, *args[:-1]):
                engine.goal = args[-1]
                return True
            return False

        call.__name__ = fn.__name__
        BUILTINS[(name, arity + 1)] = call
        return fn

    return deco


def control(name: str, arity: int):
    """Register a builtin ``fn(engine, args)`` that sets ``engine.goal`` itself.

    ``args`` includes the continuation as its last element.
    """

    def deco(fn):
        BUILTINS[(name, arity + 1)] = fn
        return fn

    return deco


# choicepoint kinds
CLAUSES, ALT, CATCH, BARRIER = range(4)


class ChoicePoint:
    __slots__ = ("kind", "goal", "clauses", "idx", "mark", "data")

    def __init__(self, kind, goal, clauses, idx, mark, data=None):
        self.kind = kind
        self.goal = goal
        self.clauses = clauses
        self.idx = idx
        self.mark = mark
        self.data = data


_assumption_ids = itertools.count(1)


class Assumption:
    __slots__ = ("id", "term", "linear", "active")

    def __init__(self, term, linear: bool):
        self.id = next(_assumption_ids)
        self.term = term
        self.linear = linear
        self.active = True


@dataclass
class Capacity:
    """Advisory size hints; trail and choicepoint stack are enforced."""

    heap: int = 1 << 24
    stack: int = 1 << 20
    trail: int = 1 << 24


class Cancelled(Exception):
    pass


def type_error(kind: str, culprit):
    return PrologError(Struct("type_error", [Atom(kind), culprit]))


def instantiation_error():
    return PrologError(Atom("instantiation_error"))


class Engine:
    def __init__(self, runtime, capacity: Capacity | None = None, parent: "Engine | None" = None):
        self.runtime = runtime
        self.store = runtime.store
        self.capacity = capacity or Capacity()
        self.handle: int | None = None
        self.trail: list = []
        self.cps: list[ChoicePoint] = []
        self._base_assumptions = list(parent.assumptions) if parent is not None else []
        self.assumptions: list[Assumption] = list(self._base_assumptions)
        self.there = parent.there if parent is not None else None
        self.goal = None
        self.answer = None
        self.state = "empty"
        self.occurs_check = runtime.occurs_check
        self.thread = None
        self._busy = threading.Lock()
        self._control = None  # set when suspend/cancel is requested
        self._resume = threading.Event()
        self._resume.set()
        self._catch_ids = itertools.count(1)

    # -- public protocol ---------------------------------------------------

    def load(self, goal, answer) -> None:
        """Fuel the engine; no resolution happens until :meth:`ask`."""
        goal, answer = copy_terms([goal, answer])
        self._reset()
        self.goal = psi(goal, STOP)
        self.answer = answer
        self.state = "loaded"

    def ask(self):
        """Run to the next answer; returns a fresh copy of it, or None at the end."""
        if not self._busy.acquire(blocking=False):
            raise PrologError(Atom("engine_busy"))
        try:
            if self.state in ("empty", "exhausted"):
                return None
            if self.state == "succeeded":
                if not self._backtrack():
                    self._exhaust()
                    return None
            try:
                ok = self._run()
            except BaseException:
                self._exhaust()
                raise
            if not ok:
                self._exhaust()
                return None
            self.state = "succeeded"
            return rename_apart(self.answer)
        finally:
            self._busy.release()

    def answers(self):
        while True:
            a = self.ask()
            if a is None:
                return
            yield a

    def stop(self) -> None:
        """Discard resolution state, undoing all bindings and assumptions."""
        self._exhaust()

    def unify(self, a, b) -> bool:
        return unify(a, b, self.trail, self.occurs_check)

    # -- thread control ------------------------------------------------------

    def request_cancel(self):
        self._control = "cancel"
        self._resume.set()

    def request_suspend(self):
        if self._control != "cancel":
            self._control = "suspend"
            self._resume.clear()

    def request_resume(self):
        if self._control == "suspend":
            self._control = None
        self._resume.set()

    def _check_control(self):
        if self._control == "suspend":
            self._resume.wait()
        if self._control == "cancel":
            raise Cancelled()

    # -- internals -----------------------------------------------------------

    def _reset(self):
        undo(self.trail, 0)
        self.cps = []
        self.assumptions = list(self._base_assumptions)

    def _exhaust(self):
        self._reset()
        self.goal = None
        self.state = "exhausted"

    def push_cp(self, kind, goal, clauses=None, idx=0, data=None) -> ChoicePoint:
        if len(self.cps) >= self.capacity.stack:
            raise PrologError(Struct("resource_error", [Atom("stack")]))
        cp = ChoicePoint(kind, goal, clauses, idx, len(self.trail), data)
        self.cps.append(cp)
        return cp

    def cut_to(self, height: int) -> None:
        del self.cps[height:]

    def _run(self) -> bool:
        trail = self.trail
        builtins = BUILTINS
        trail_cap = self.capacity.trail
        while True:
            if self._control is not None:
                self._check_control()
            goal = deref(self.goal)
            tg = type(goal)
            if tg is Struct:
                key = (goal.name, len(goal.args))
                args = goal.args
            elif tg is Atom:
                if goal.name == "$stop":
                    return True
                key = (goal.name, 0)
                args = ()
            else:
                exc = instantiation_error() if tg is Var else type_error("callable", goal)
                if not self._handle(exc):
                    raise exc
                continue
            try:
                fn = builtins.get(key)
                if fn is not None:
                    if fn(self, args):
                        if len(trail) > trail_cap:
                            raise PrologError(Struct("resource_error", [Atom("trail")]))
                        continue
                elif self._resolve(goal, key):
                    if len(trail) > trail_cap:
                        raise PrologError(Struct("resource_error", [Atom("trail")]))
                    continue
            except PrologError as exc:
                if self._handle(exc):
                    continue
                raise
            if not self._backtrack():
                return False

    def _resolve(self, goal, key) -> bool:
        try:
            clauses = self.store.lookup(goal)
        except UnknownPredicate:
            hook = self.runtime.fetch_hook
            if hook is None or not hook(self, key):
                raise
            clauses = self.store.lookup(goal)
        return self._try(goal, clauses, 0)

    def _try(self, goal, clauses, start: int) -> bool:
        trail = self.trail
        n = len(clauses)
        for i in range(start, n):
            mark = len(trail)
            head, guards, body = clauses[i].renamed()
            if unify(head, goal, trail, self.occurs_check) and (not guards or self._guards(guards)):
                if i + 1 < n:
                    if len(self.cps) >= self.capacity.stack:
                        raise PrologError(Struct("resource_error", [Atom("stack")]))
                    self.cps.append(ChoicePoint(CLAUSES, goal, clauses, i + 1, mark))
                self.goal = body
                return True
            undo(trail, mark)
        return False

    def _guards(self, guards) -> bool:
        for g in guards:
            g = deref(g)
            if type(g) is Atom:
                fn = DET[(g.name, 0)]
                if not fn(self):
                    return False
            else:
                fn = DET[(g.name, len(g.args))]
                if not fn(self, *g.args):
                    return False
        return True

    def _backtrack(self) -> bool:
        cps = self.cps
        trail = self.trail
        while cps:
            cp = cps.pop()
            undo(trail, cp.mark)
            kind = cp.kind
            if kind == CLAUSES:
                if self._try(cp.goal, cp.clauses, cp.idx):
                    return True
            elif kind == ALT:
                self.goal = cp.goal
                return True
        return False

    def _handle(self, exc: PrologError) -> bool:
        """Unwind to the innermost active catch frame whose catcher unifies."""
        try:
            ball = rename_apart(exc.term)
        except PrologError:
            return False
        cps = self.cps
        while cps:
            cp = cps.pop()
            undo(self.trail, cp.mark)
            if cp.kind == CATCH and cp.data[3]:
                catcher, recovery, cont = cp.data[:3]
                if self.unify(catcher, ball):
                    self.goal = psi(recovery, cont)
                    return True
        return False
