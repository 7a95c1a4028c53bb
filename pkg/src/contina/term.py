"""First-order terms: representation, unification, copying and canonical text.

A term is one of :class:`Var`, :class:`Atom`, :class:`Int` or :class:`Struct`.
Lists are ``'.'(Head, Tail)`` chains ending in the atom ``[]``.

Variables are mutable cells.  Binding goes through :func:`unify`, which
records every bound cell on a trail (a plain list) so that :func:`undo`
can restore them.  Trail entries that are not variables are callables,
used by the engine for backtrackable side effects such as assumptions.
"""

from __future__ import annotations

import itertools
import re
from typing import Iterable, Iterator

__all__ = [
    "Var", "Atom", "Int", "Struct", "Term",
    "NIL", "TRUE", "STOP",
    "PrologError", "CyclicTermError",
    "mk", "atom", "mklist", "list_items", "deref", "unify", "undo",
    "rename_apart", "copy_terms", "identical", "subsumes", "variant",
    "term_variables", "canonical_text", "to_text", "parse_term",
    "is_callable", "indicator",
]


class PrologError(Exception):
    """An error carrying a Prolog term; catchable by ``catch/3``."""

    def __init__(self, term: "Term"):
        self.term = term
        super().__init__(canonical_text(term) if _acyclic(term) else "<cyclic>")


class CyclicTermError(PrologError):
    def __init__(self):
        super().__init__(Atom("cyclic_term"))


_var_ids = itertools.count()


class Var:
    __slots__ = ("ref", "id")

    def __init__(self):
        self.ref = None
        self.id = next(_var_ids)

    def __repr__(self):
        t = deref(self)
        if t is self:
            return f"_G{self.id}"
        return repr(t)


class Atom:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __eq__(self, other):
        return type(other) is Atom and other.name == self.name

    def __hash__(self):
        return hash(("atom", self.name))

    def __repr__(self):
        return canonical_text(self)


class Int:
    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value

    def __eq__(self, other):
        return type(other) is Int and other.value == self.value

    def __hash__(self):
        return hash(("int", self.value))

    def __repr__(self):
        return str(self.value)


class Struct:
    __slots__ = ("name", "args")

    def __init__(self, name: str, args: list):
        # zero-arity compounds are atoms; see mk()
        self.name = name
        self.args = args

    @property
    def arity(self) -> int:
        return len(self.args)

    def __repr__(self):
        try:
            return canonical_text(self)
        except CyclicTermError:
            return f"<cyclic {self.name}/{len(self.args)}>"


Term = "Var | Atom | Int | Struct"

NIL = Atom("[]")
TRUE = Atom("true")
STOP = Atom("$stop")


def atom(name: str) -> Atom:
    return Atom(name)


def mk(name: str, *args) -> Atom | Struct:
    """Build ``name(args...)``, or the atom ``name`` when there are no args."""
    if not args:
        return Atom(name)
    return Struct(name, list(args))


def mklist(items: Iterable, tail=NIL):
    items = list(items)
    out = tail
    for x in reversed(items):
        out = Struct(".", [x, out])
    return out


def list_items(t) -> list | None:
    """Items of a proper list, or None when ``t`` is not one."""
    out = []
    t = deref(t)
    while type(t) is Struct and t.name == "." and len(t.args) == 2:
        out.append(t.args[0])
        t = deref(t.args[1])
    if type(t) is Atom and t.name == "[]":
        return out
    return None


def deref(t):
    while type(t) is Var:
        r = t.ref
        if r is None:
            return t
        t = r
    return t


def is_callable(t) -> bool:
    t = deref(t)
    return type(t) is Atom or type(t) is Struct


def indicator(name: str, arity: int) -> Struct:
    return Struct("/", [Atom(name), Int(arity)])


# ---------------------------------------------------------------------------
# unification


def _occurs(v: Var, t) -> bool:
    stack = [t]
    seen = set()
    while stack:
        t = deref(stack.pop())
        if t is v:
            return True
        if type(t) is Struct and id(t) not in seen:
            seen.add(id(t))
            stack.extend(t.args)
    return False


def undo(trail: list, mark: int) -> None:
    """Pop the trail back to ``mark``, unbinding cells and running undo hooks."""
    while len(trail) > mark:
        e = trail.pop()
        if type(e) is Var:
            e.ref = None
        else:
            e()


def unify(a, b, trail: list, occurs_check: bool = False) -> bool:
    """Robinson unification; on failure the trail is restored to its entry state."""
    mark = len(trail)
    stack = [(a, b)]
    while stack:
        a, b = stack.pop()
        a = deref(a)
        b = deref(b)
        if a is b:
            continue
        ta = type(a)
        tb = type(b)
        if ta is Var:
            if tb is Var and b.id > a.id:
                # younger cell points to older one
                a, b = b, a
            elif occurs_check and _occurs(a, b):
                undo(trail, mark)
                return False
            a.ref = b
            trail.append(a)
            continue
        if tb is Var:
            if occurs_check and _occurs(b, a):
                undo(trail, mark)
                return False
            b.ref = a
            trail.append(b)
            continue
        if ta is not tb:
            undo(trail, mark)
            return False
        if ta is Atom:
            if a.name != b.name:
                undo(trail, mark)
                return False
        elif ta is Int:
            if a.value != b.value:
                undo(trail, mark)
                return False
        else:
            if a.name != b.name or len(a.args) != len(b.args):
                undo(trail, mark)
                return False
            stack.extend(zip(reversed(a.args), reversed(b.args)))
    return True


def identical(a, b) -> bool:
    """Structural identity (``==``); variables compare by cell."""
    stack = [(a, b)]
    while stack:
        a, b = stack.pop()
        a = deref(a)
        b = deref(b)
        if a is b:
            continue
        ta = type(a)
        if ta is not type(b) or ta is Var:
            return False
        if ta is Atom:
            if a.name != b.name:
                return False
        elif ta is Int:
            if a.value != b.value:
                return False
        else:
            if a.name != b.name or len(a.args) != len(b.args):
                return False
            stack.extend(zip(a.args, b.args))
    return True


def term_variables(t) -> list:
    """Distinct unbound variables of ``t`` in depth-first, left-to-right order."""
    out = []
    seen = set()
    visited = set()
    stack = [t]
    while stack:
        t = deref(stack.pop())
        tt = type(t)
        if tt is Var:
            if t.id not in seen:
                seen.add(t.id)
                out.append(t)
        elif tt is Struct:
            if id(t) in visited:
                continue
            visited.add(id(t))
            stack.extend(reversed(t.args))
    return out


def subsumes(general, specific) -> bool:
    """True iff some substitution on ``general``'s variables alone yields ``specific``."""
    svars = term_variables(specific)
    trail: list = []
    try:
        if not unify(general, specific, trail):
            return False
        seen = set()
        for v in svars:
            d = deref(v)
            if type(d) is not Var or d.id in seen:
                return False
            seen.add(d.id)
        return True
    finally:
        undo(trail, 0)


def variant(a, b) -> bool:
    return canonical_text(a) == canonical_text(b)


# ---------------------------------------------------------------------------
# copying


def _acyclic(t) -> bool:
    try:
        canonical_text(t)
        return True
    except CyclicTermError:
        return False
    except RecursionError:
        return False


def copy_terms(terms: list, mapping: dict | None = None) -> list:
    """Copy several terms with one fresh-variable mapping (sharing preserved).

    Raises :class:`CyclicTermError` on a cyclic input.
    """
    if mapping is None:
        mapping = {}
    return [_copy(t, mapping, set()) for t in terms]


def rename_apart(t, mapping: dict | None = None):
    """Structurally identical copy of ``t`` with all variables fresh."""
    if mapping is None:
        mapping = {}
    return _copy(t, mapping, set())


def _copy(t, mapping: dict, path: set):
    # recursion on all but the last argument; the last one (list tails,
    # continuations, right-nested conjunctions) is followed iteratively
    added = []
    root = None
    hole_owner = None
    try:
        while True:
            t = deref(t)
            tt = type(t)
            if tt is Var:
                new = mapping.get(t.id)
                if new is None:
                    new = mapping[t.id] = Var()
            elif tt is Struct:
                key = id(t)
                if key in path:
                    raise CyclicTermError()
                path.add(key)
                added.append(key)
                args = t.args
                n = len(args)
                new_args = [None] * n
                for i in range(n - 1):
                    a = deref(args[i])
                    if type(a) is Struct:
                        new_args[i] = _copy(a, mapping, path)
                    elif type(a) is Var:
                        v = mapping.get(a.id)
                        if v is None:
                            v = mapping[a.id] = Var()
                        new_args[i] = v
                    else:
                        new_args[i] = a
                new = Struct(t.name, new_args)
            else:
                new = t
            if hole_owner is None:
                root = new
            else:
                hole_owner.args[-1] = new
            if tt is not Struct:
                return root
            hole_owner = new
            t = t.args[-1]
    finally:
        for k in added:
            path.discard(k)


# ---------------------------------------------------------------------------
# canonical text

_PLAIN_ATOM = re.compile(r"[a-z][a-zA-Z0-9_]*\Z")


def _quote(name: str) -> str:
    if _PLAIN_ATOM.match(name) or name == "[]":
        return name
    s = name.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n").replace("\t", "\\t")
    return "'" + s + "'"


def canonical_text(t, quoted: bool = True) -> str:
    """Whitespace-free text form; variables numbered ``_V0..`` by first occurrence.

    Raises :class:`CyclicTermError` for cyclic terms.
    """
    out: list[str] = []
    names: dict[int, str] = {}
    _write(t, out, names, set(), quoted)
    return "".join(out)


def to_text(t, quoted: bool = False) -> str:
    """Human-facing text (atoms unquoted by default), as used by write/1."""
    try:
        return canonical_text(t, quoted)
    except CyclicTermError:
        return "<cyclic>"


def _write(t, out, names, path, quoted):
    added = []
    closers = 0
    try:
        while True:
            t = deref(t)
            tt = type(t)
            if tt is Var:
                n = names.get(t.id)
                if n is None:
                    n = names[t.id] = f"_V{len(names)}"
                out.append(n)
                break
            if tt is Atom:
                out.append(_quote(t.name) if quoted else t.name)
                break
            if tt is Int:
                out.append(str(t.value))
                break
            key = id(t)
            if key in path:
                raise CyclicTermError()
            path.add(key)
            added.append(key)
            if t.name == "." and len(t.args) == 2:
                out.append("[")
                _write(t.args[0], out, names, path, quoted)
                tail = deref(t.args[1])
                while type(tail) is Struct and tail.name == "." and len(tail.args) == 2:
                    if id(tail) in path:
                        raise CyclicTermError()
                    path.add(id(tail))
                    added.append(id(tail))
                    out.append(",")
                    _write(tail.args[0], out, names, path, quoted)
                    tail = deref(tail.args[1])
                if not (type(tail) is Atom and tail.name == "[]"):
                    out.append("|")
                    _write(tail, out, names, path, quoted)
                out.append("]")
                break
            out.append(_quote(t.name) if quoted else t.name)
            out.append("(")
            for a in t.args[:-1]:
                _write(a, out, names, path, quoted)
                out.append(",")
            closers += 1
            t = t.args[-1]
        if closers:
            out.append(")" * closers)
    finally:
        for k in added:
            path.discard(k)


def parse_term(text: str, varmap: dict | None = None):
    """Parse one term (an optional final ``.`` is accepted)."""
    from .reader import read_term

    return read_term(text, varmap)


def iter_conj(t) -> Iterator:
    """Goals of a right-nested ``','/2`` conjunction."""
    t = deref(t)
    while type(t) is Struct and t.name == "," and len(t.args) == 2:
        yield t.args[0]
        t = deref(t.args[1])
    yield t


def mkconj(goals: list):
    """Right-nested conjunction ``(g1,(g2,g3))``; ``true`` when empty."""
    if not goals:
        return TRUE
    out = goals[-1]
    for g in reversed(goals[:-1]):
        out = Struct(",", [g, out])
    return out
