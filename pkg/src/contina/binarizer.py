"""Clause normalization, binarization and the LD composition operator.

Binarization adds a continuation argument to every atom so each clause
body is a single goal::

    a :- b1, b2, b3.        ==>   a(K) :- b1(b2(b3(K))).

Leading inline builtins (arithmetic, comparisons, unification, output)
are kept aside as guards and run right after head unification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .reader import read_clauses
from .term import (
    TRUE, Atom, Int, PrologError, Struct, Var, copy_terms, deref, iter_conj,
    mkconj, undo, unify,
)

# name/arity of builtins that may be hoisted into guards
INLINE_BUILTINS = frozenset({
    ("true", 0), ("fail", 0), ("is", 2), ("=", 2), ("==", 2),
    ("<", 2), (">", 2), ("=<", 2), (">=", 2), ("=:=", 2), ("=\\=", 2),
    ("write", 1), ("nl", 0), ("println", 1),
})


@dataclass
class Clause:
    head: object
    body: list = field(default_factory=list)

    def as_term(self):
        if not self.body:
            return self.head
        return Struct(":-", [self.head, mkconj(self.body)])


@dataclass
class BinClause:
    head: object
    guards: list
    body: object

    @property
    def key(self) -> tuple[str, int]:
        return functor_key(self.head)

    def renamed(self) -> tuple:
        """Fresh copy as ``(head, guards, body)``."""
        head, body, *guards = copy_terms([self.head, self.body, *self.guards])
        return head, guards, body

    def as_term(self):
        """Wire/introspection form ``bin(Head, Guards, Body)``."""
        from .term import mklist

        return Struct("bin", [self.head, mklist(self.guards), self.body])

    @classmethod
    def from_term(cls, t) -> "BinClause":
        from .term import list_items

        t = deref(t)
        if type(t) is not Struct or t.name != "bin" or len(t.args) != 3:
            raise PrologError(Struct("type_error", [Atom("bin_clause"), t]))
        guards = list_items(t.args[1])
        if guards is None:
            raise PrologError(Struct("type_error", [Atom("list"), t.args[1]]))
        return cls(deref(t.args[0]), [deref(g) for g in guards], deref(t.args[2]))


def functor_key(t) -> tuple[str, int]:
    t = deref(t)
    if type(t) is Atom:
        return (t.name, 0)
    if type(t) is Struct:
        return (t.name, len(t.args))
    if type(t) is Var:
        raise PrologError(Atom("instantiation_error"))
    raise PrologError(Struct("type_error", [Atom("callable"), t]))


def psi(goal, cont):
    """Add ``cont`` as an extra last argument: ``p(T1..Tn)`` -> ``p(T1..Tn,cont)``."""
    goal = deref(goal)
    tg = type(goal)
    if tg is Atom:
        return Struct(goal.name, [cont])
    if tg is Struct:
        return Struct(goal.name, goal.args + [cont])
    if tg is Var:
        return Struct("call", [goal, cont])
    raise PrologError(Struct("type_error", [Atom("callable"), goal]))


def is_inline(goal) -> bool:
    goal = deref(goal)
    if type(goal) is Atom:
        return (goal.name, 0) in INLINE_BUILTINS
    if type(goal) is Struct:
        return (goal.name, len(goal.args)) in INLINE_BUILTINS
    return False


def clause_from_term(t) -> Clause:
    t = deref(t)
    if type(t) is Struct and t.name == ":-" and len(t.args) == 2:
        return Clause(deref(t.args[0]), list(iter_conj(t.args[1])))
    return Clause(t, [])


def normalize(c: Clause) -> Clause:
    """Facts become ``H :- true``; variable body goals become ``call(X)``."""
    head = deref(c.head)
    if type(head) is Var:
        raise PrologError(Atom("instantiation_error"))
    if type(head) is Int:
        raise PrologError(Struct("type_error", [Atom("callable"), head]))
    if not c.body:
        return Clause(head, [TRUE])
    body = []
    for g in c.body:
        g = deref(g)
        if type(g) is Var:
            g = Struct("call", [g])
        elif type(g) is Int:
            raise PrologError(Struct("type_error", [Atom("callable"), g]))
        body.append(g)
    return Clause(head, body)


def binarize_clause(c: Clause) -> BinClause:
    c = normalize(c)
    cont = Var()
    goals = list(c.body)
    guards = []
    while goals and is_inline(goals[0]):
        g = goals.pop(0)
        if not (type(g) is Atom and g.name == "true"):
            guards.append(g)
    body = cont
    for g in reversed(goals):
        body = psi(g, body)
    if not goals:
        body = Struct("true", [cont])
    return BinClause(psi(c.head, cont), guards, body)


def binarize_program(clauses: list[Clause]) -> list[BinClause]:
    return [binarize_clause(c) for c in clauses]


def bin_from_term(t) -> BinClause:
    """Binarize a clause term; ``H ::- B`` is taken as already binary."""
    t = deref(t)
    if type(t) is Struct and t.name == "::-" and len(t.args) == 2:
        return BinClause(deref(t.args[0]), [], deref(t.args[1]))
    return binarize_clause(clause_from_term(t))


def parse_program(text: str) -> list[BinClause]:
    """Read program text and binarize every clause in order."""
    out = []
    for t, _ in read_clauses(text):
        t = deref(t)
        if type(t) is Struct and t.name == ":-" and len(t.args) == 1:
            continue  # directives are ignored by the loader
        out.append(bin_from_term(t))
    return out


def parse_source_clauses(text: str) -> list[Clause]:
    return [clause_from_term(t) for t, _ in read_clauses(text)]


def compose(c1: Clause | None, c2: Clause | None) -> Clause | None:
    """Unfold the leftmost body goal of ``c1`` with ``c2``; None stands for bottom."""
    if c1 is None or c2 is None:
        return None
    if not c1.body:
        raise ValueError("left operand of compose needs a nonempty body")
    a0, *abody = copy_terms([c1.head, *c1.body])
    b0, *bbody = copy_terms([c2.head, *c2.body])
    trail: list = []
    if not unify(abody[0], b0, trail):
        return None
    goals = [g for g in bbody + abody[1:] if not _is_true(g)]
    head, *body = copy_terms([a0, *goals])
    undo(trail, 0)
    return Clause(head, body)


def _is_true(g) -> bool:
    g = deref(g)
    return type(g) is Atom and g.name == "true"
