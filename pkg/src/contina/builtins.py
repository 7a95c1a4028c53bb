"""Core builtins: control, arithmetic, term inspection, database, assumptions,
continuation access, engines and threads."""

from __future__ import annotations

import threading
import time

from .binarizer import bin_from_term, psi
from .engine import (
    ALT, CATCH, Assumption, Capacity, Cancelled, Engine, control, det,
    instantiation_error, type_error,
)
from .term import (
    TRUE, Atom, Int, PrologError, Struct, Var, deref, identical, list_items,
    mklist, rename_apart, to_text, undo,
)

FAIL = Atom("fail")

# ---------------------------------------------------------------------------
# control


@det("true", 0)
def _true(e):
    return True


@det("fail", 0)
def _fail(e):
    return False


@det("false", 0)
def _false(e):
    return False


@control(",", 2)
def _conj(e, args):
    a, b, k = args
    e.goal = psi(a, psi(b, k))
    return True


def _if_then_else(e, cond, then, els, k):
    h = len(e.cps)
    e.push_cp(ALT, psi(els, k))
    e.goal = psi(cond, Struct("$ite_then", [Int(h), then, k]))
    return True


@control(";", 2)
def _disj(e, args):
    a, b, k = args
    a = deref(a)
    if type(a) is Struct and a.name == "->" and len(a.args) == 2:
        return _if_then_else(e, a.args[0], a.args[1], b, k)
    e.push_cp(ALT, psi(b, k))
    e.goal = psi(a, k)
    return True


@control("->", 2)
def _ite(e, args):
    c, t, k = args
    return _if_then_else(e, c, t, FAIL, k)


@control("$ite_then", 2)
def _ite_then(e, args):
    h, then, k = args
    e.cut_to(deref(h).value)
    e.goal = psi(then, k)
    return True


@control("\\+", 1)
def _not(e, args):
    g, k = args
    return _if_then_else(e, g, FAIL, TRUE, k)


control("not", 1)(_not)


@control("once", 1)
def _once(e, args):
    g, k = args
    return _if_then_else(e, g, TRUE, FAIL, k)


def _add_args(g, extra):
    g = deref(g)
    if type(g) is Var:
        raise instantiation_error()
    if type(g) is Atom:
        return Struct(g.name, list(extra)) if extra else g
    if type(g) is Struct:
        return Struct(g.name, g.args + list(extra))
    raise type_error("callable", g)


def _call_n(e, args):
    g, *extra, k = args
    if type(deref(g)) is Var:
        raise instantiation_error()
    e.goal = psi(_add_args(g, extra), k)
    return True


for _n in range(1, 9):
    control("call", _n)(_call_n)


@control("findall", 3)
def _findall(e, args):
    template, goal, result, k = args
    inner = Engine(e.runtime, parent=e)
    inner.load(goal, template)
    items = list(inner.answers())
    if e.unify(result, mklist(items)):
        e.goal = k
        return True
    return False


@control("catch", 3)
def _catch(e, args):
    goal, catcher, recovery, k = args
    fid = next(e._catch_ids)
    e.push_cp(CATCH, None, data=[catcher, recovery, k, True, fid])
    e.goal = psi(goal, Struct("$catch_exit", [Int(fid), k]))
    return True


@control("$catch_exit", 1)
def _catch_exit(e, args):
    fid, k = args
    fid = deref(fid).value
    for cp in reversed(e.cps):
        if cp.kind == CATCH and cp.data[4] == fid:
            if cp.data[3]:
                cp.data[3] = False
                e.trail.append(lambda d=cp.data: d.__setitem__(3, True))
            break
    e.goal = k
    return True


@det("throw", 1)
def _throw(e, ball):
    if type(deref(ball)) is Var:
        raise instantiation_error()
    raise PrologError(rename_apart(ball))


@det("errmes", 2)
def _errmes(e, where, what):
    raise PrologError(Struct(_atom_name(where), [rename_apart(what)]))


def _atom_name(t) -> str:
    t = deref(t)
    if type(t) is not Atom:
        raise type_error("atom", t)
    return t.name


# ---------------------------------------------------------------------------
# unification and comparison


@det("=", 2)
def _unify(e, a, b):
    return e.unify(a, b)


@det("\\=", 2)
def _not_unify(e, a, b):
    mark = len(e.trail)
    ok = e.unify(a, b)
    if ok:
        undo(e.trail, mark)
    return not ok


@det("==", 2)
def _eq(e, a, b):
    return identical(a, b)


@det("\\==", 2)
def _neq(e, a, b):
    return not identical(a, b)


def _std_key(t):
    t = deref(t)
    tt = type(t)
    if tt is Var:
        return (0, t.id)
    if tt is Int:
        return (1, t.value)
    if tt is Atom:
        return (3, t.name)
    return (4, len(t.args), t.name, tuple(_std_key(a) for a in t.args))


for _op, _f in (("@<", lambda x, y: x < y), ("@>", lambda x, y: x > y),
                ("@=<", lambda x, y: x <= y), ("@>=", lambda x, y: x >= y)):
    det(_op, 2)(lambda e, a, b, f=_f: f(_std_key(a), _std_key(b)))


# ---------------------------------------------------------------------------
# arithmetic


def _int_div(a, b):
    if b == 0:
        raise PrologError(Struct("evaluation_error", [Atom("zero_divisor")]))
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _div(a, b):
    if b == 0:
        raise PrologError(Struct("evaluation_error", [Atom("zero_divisor")]))
    return a // b


def _mod(a, b):
    if b == 0:
        raise PrologError(Struct("evaluation_error", [Atom("zero_divisor")]))
    return a % b


def _rem(a, b):
    return a - _int_div(a, b) * b


_BIN = {
    "+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
    "//": _int_div, "/": _div, "mod": _mod, "rem": _rem,
    "min": min, "max": max, "<<": lambda a, b: a << b, ">>": lambda a, b: a >> b,
    "/\\": lambda a, b: a & b, "\\/": lambda a, b: a | b,
    "^": lambda a, b: a ** b, "**": lambda a, b: a ** b,
}
_UN = {"-": lambda a: -a, "+": lambda a: a, "abs": abs, "\\": lambda a: ~a,
       "sign": lambda a: (a > 0) - (a < 0)}


def evaluate(t) -> int:
    t = deref(t)
    tt = type(t)
    if tt is Int:
        return t.value
    if tt is Var:
        raise instantiation_error()
    if tt is Struct:
        if len(t.args) == 2:
            f = _BIN.get(t.name)
            if f is not None:
                return f(evaluate(t.args[0]), evaluate(t.args[1]))
        elif len(t.args) == 1:
            f = _UN.get(t.name)
            if f is not None:
                return f(evaluate(t.args[0]))
        raise type_error("evaluable", Struct("/", [Atom(t.name), Int(len(t.args))]))
    raise type_error("evaluable", t)


@det("is", 2)
def _is(e, x, expr):
    return e.unify(x, Int(evaluate(expr)))


for _op, _f in (("<", lambda x, y: x < y), (">", lambda x, y: x > y),
                ("=<", lambda x, y: x <= y), (">=", lambda x, y: x >= y),
                ("=:=", lambda x, y: x == y), ("=\\=", lambda x, y: x != y)):
    det(_op, 2)(lambda e, a, b, f=_f: f(evaluate(a), evaluate(b)))


# ---------------------------------------------------------------------------
# type checks and term construction


det("var", 1)(lambda e, t: type(deref(t)) is Var)
det("nonvar", 1)(lambda e, t: type(deref(t)) is not Var)
det("atom", 1)(lambda e, t: type(deref(t)) is Atom)
det("integer", 1)(lambda e, t: type(deref(t)) is Int)
det("atomic", 1)(lambda e, t: type(deref(t)) in (Atom, Int))
det("compound", 1)(lambda e, t: type(deref(t)) is Struct)
det("callable", 1)(lambda e, t: type(deref(t)) in (Atom, Struct))
det("is_list", 1)(lambda e, t: list_items(t) is not None)


@det("functor", 3)
def _functor(e, t, name, arity):
    t = deref(t)
    if type(t) is Var:
        n = deref(arity)
        f = deref(name)
        if type(n) is not Int:
            raise instantiation_error()
        if n.value == 0:
            return e.unify(t, f)
        return e.unify(t, Struct(_atom_name(f), [Var() for _ in range(n.value)]))
    if type(t) is Struct:
        return e.unify(name, Atom(t.name)) and e.unify(arity, Int(len(t.args)))
    return e.unify(name, t) and e.unify(arity, Int(0))


@det("arg", 3)
def _arg(e, n, t, a):
    n = deref(n)
    t = deref(t)
    if type(t) is not Struct:
        return False
    if type(n) is not Int:
        raise instantiation_error()
    if not 1 <= n.value <= len(t.args):
        return False
    return e.unify(a, t.args[n.value - 1])


@det("=..", 2)
def _univ(e, t, lst):
    t = deref(t)
    if type(t) is Struct:
        return e.unify(lst, mklist([Atom(t.name), *t.args]))
    if type(t) is not Var:
        return e.unify(lst, mklist([t]))
    items = list_items(lst)
    if not items:
        raise instantiation_error()
    head = deref(items[0])
    if len(items) == 1:
        return e.unify(t, head)
    return e.unify(t, Struct(_atom_name(head), items[1:]))


@det("copy_term", 2)
def _copy_term(e, a, b):
    return e.unify(b, rename_apart(a))


@det("length", 2)
def _length(e, lst, n):
    items = list_items(lst)
    if items is not None:
        return e.unify(n, Int(len(items)))
    n = deref(n)
    if type(n) is Int:
        return e.unify(lst, mklist([Var() for _ in range(n.value)]))
    raise instantiation_error()


# ---------------------------------------------------------------------------
# output


@det("write", 1)
def _write(e, t):
    e.runtime.write(to_text(t))
    return True


@det("writeq", 1)
def _writeq(e, t):
    e.runtime.write(to_text(t, quoted=True))
    return True


@det("nl", 0)
def _nl(e):
    e.runtime.write("\n")
    return True


@det("println", 1)
def _println(e, t):
    e.runtime.println(to_text(t))
    return True


@det("sleep", 1)
def _sleep(e, secs):
    time.sleep(evaluate(secs))
    return True


# ---------------------------------------------------------------------------
# database


def _assert(front):
    def fn(e, clause):
        c = bin_from_term(rename_apart(clause))
        e.store.add(c, front=front, count_update=True)
        return True

    return fn


det("assert", 1)(_assert(False))
det("assertz", 1)(_assert(False))
det("asserta", 1)(_assert(True))


@det("retract", 1)
def _retract(e, pattern):
    return e.store.retract_clause(pattern, e.trail)


@det("consult_text", 1)
def _consult_text(e, text):
    e.runtime.consult(_atom_name(text))
    return True


@det("stats", 2)
def _stats(e, pi, out):
    pi = deref(pi)
    if type(pi) is not Struct or pi.name != "/":
        raise type_error("predicate_indicator", pi)
    key = (_atom_name(pi.args[0]), deref(pi.args[1]).value + 1)
    return e.unify(out, e.store.stats(key))


# ---------------------------------------------------------------------------
# assumptions


def _add_assumption(e, term, linear):
    a = Assumption(term, linear)
    e.assumptions.append(a)
    e.trail.append(e.assumptions.pop)
    return a


@det("assumeal", 1)
def _assumeal(e, term):
    _add_assumption(e, term, True)
    return True


@det("assumei", 1)
def _assumei(e, term):
    _add_assumption(e, term, False)
    return True


@control("=>>", 2)
def _implies(e, args):
    fact, goal, k = args
    a = _add_assumption(e, fact, False)
    e.goal = psi(goal, Struct("$unassume", [Int(a.id), k]))
    return True


@control("$unassume", 1)
def _unassume(e, args):
    aid, k = args
    aid = deref(aid).value
    for a in reversed(e.assumptions):
        if a.id == aid:
            if a.active:
                a.active = False
                e.trail.append(lambda a=a: setattr(a, "active", True))
            break
    e.goal = k
    return True


def assumed_lookup(e, pattern, consume: bool = True) -> bool:
    """Match ``pattern`` against active assumptions, newest first."""
    for a in reversed(e.assumptions):
        if not a.active:
            continue
        if a.linear:
            if e.unify(pattern, a.term):
                if consume:
                    a.active = False
                    e.trail.append(lambda a=a: setattr(a, "active", True))
                return True
        else:
            if e.unify(pattern, rename_apart(a.term)):
                return True
    return False


@det("assumed", 1)
def _assumed(e, pattern):
    return assumed_lookup(e, pattern)


def assumed_value(e, name: str):
    """Argument of the newest active ``name(X)`` assumption, without consuming it."""
    for a in reversed(e.assumptions):
        if not a.active:
            continue
        t = deref(a.term)
        if type(t) is Struct and t.name == name and len(t.args) == 1:
            return deref(t.args[0])
    return None


# ---------------------------------------------------------------------------
# continuations


def strip(cont):
    """Split a binarized continuation into ``(user_goal, next_continuation)``."""
    cont = deref(cont)
    if type(cont) is Struct:
        args = cont.args
        goal = Struct(cont.name, args[:-1]) if len(args) > 1 else Atom(cont.name)
        return goal, args[-1]
    return None, None


@det("strip_cont", 3)
def _strip_cont(e, cont, goal, nxt):
    g, n = strip(cont)
    if g is None:
        return False
    return e.unify(goal, g) and e.unify(nxt, n)


# ---------------------------------------------------------------------------
# engines


def _handle(t) -> int:
    t = deref(t)
    if type(t) is not Int:
        raise instantiation_error() if type(t) is Var else type_error("integer", t)
    return t.value


@det("create_engine", 1)
def _create_engine(e, h):
    eng = e.runtime.create_engine()
    return e.unify(h, Int(eng.handle))


@det("create_engine", 4)
def _create_engine4(e, heap, stack, trail, h):
    cap = Capacity(evaluate(heap), evaluate(stack), evaluate(trail))
    eng = e.runtime.create_engine(cap)
    return e.unify(h, Int(eng.handle))


@det("load_engine", 3)
def _load_engine(e, h, goal, answer):
    e.runtime.engine(_handle(h)).load(goal, answer)
    return True


@det("ask_engine", 2)
def _ask_engine(e, h, answer):
    a = e.runtime.engine(_handle(h)).ask()
    if a is None:
        return False
    return e.unify(answer, a)


@det("destroy_engine", 1)
def _destroy_engine(e, h):
    e.runtime.destroy_engine(_handle(h))
    return True


# ---------------------------------------------------------------------------
# threads


class AnswerThread:
    """One asynchronous ``ask`` of an engine, delivering into the local space."""

    def __init__(self, runtime, engine: Engine, tid: int):
        self.runtime = runtime
        self.engine = engine
        self.tid = tid
        self.thread = threading.Thread(target=self._run, name=f"answer-{tid}", daemon=True)
        self.done = threading.Event()

    def _run(self):
        try:
            a = self.engine.ask()
            reply = Atom("no") if a is None else Struct("the", [a])
        except Cancelled:
            self.engine.stop()
            reply = None
        except PrologError as exc:
            reply = Struct("err", [exc.term])
        finally:
            self.done.set()
        if reply is not None:
            self.runtime.space.out(Struct("answer", [Int(self.engine.handle), reply]))

    def start(self):
        self.thread.start()

    def join(self, timeout=None):
        self.done.wait(timeout)


@det("ask_thread", 2)
def _ask_thread(e, h, r):
    t = e.runtime.start_answer_thread(e.runtime.engine(_handle(h)))
    return e.unify(r, Int(t.tid))


@det("get_engine_thread", 2)
def _get_engine_thread(e, h, r):
    eng = e.runtime.engine(_handle(h))
    if eng.thread is None:
        return False
    return e.unify(r, Int(eng.thread.tid))


@det("thread_join", 1)
def _thread_join(e, t):
    e.runtime.thread(_handle(t)).join()
    return True


@det("thread_suspend", 1)
def _thread_suspend(e, t):
    th = e.runtime.thread(_handle(t))
    if not th.done.is_set():
        th.engine.request_suspend()
    return True


@det("thread_resume", 1)
def _thread_resume(e, t):
    e.runtime.thread(_handle(t)).engine.request_resume()
    return True


@det("thread_cancel", 1)
def _thread_cancel(e, t):
    th = e.runtime.thread(_handle(t))
    if not th.done.is_set():
        th.engine.request_cancel()
    return True


@det("synchronize_on", 3)
def _synchronize_on(e, monitor, goal, answer):
    lock = e.runtime.monitor(monitor)
    with lock:
        inner = Engine(e.runtime, parent=e)
        inner.load(goal, answer)
        try:
            a = inner.ask()
        finally:
            inner.stop()
    if a is None:
        return False
    return e.unify(answer, a)


__all__ = ["evaluate", "strip", "assumed_lookup", "assumed_value", "AnswerThread"]
