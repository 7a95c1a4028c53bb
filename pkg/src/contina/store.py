"""Clause database with two execution tiers and update/call temperature stats.

Every predicate starts *interpreted* (a plain clause list).  Calls cool it,
updates heat it; a cool, heavily called predicate is promoted to the
*indexed* tier (hash on the first argument's principal functor).  Any
update drops it back to interpreted.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .binarizer import BinClause, bin_from_term
from .term import Atom, Int, PrologError, Struct, Var, deref, indicator, undo, unify

INTERPRETED = "interpreted"
INDEXED = "indexed"


class UnknownPredicate(PrologError):
    def __init__(self, key: tuple[str, int]):
        self.key = key
        name, arity = key
        # reported with the user-visible arity (continuation slot excluded)
        super().__init__(Struct("unknown_predicate", [indicator(name, max(arity - 1, 0))]))


@dataclass
class TempStats:
    temperature: float = 0.0
    calls: int = 0
    updates: int = 0
    calls_since_update: int = 0


@dataclass
class PredicateEntry:
    key: tuple[str, int]
    clauses: list = field(default_factory=list)
    tier: str = INTERPRETED
    origin: object = "local"
    stats: TempStats = field(default_factory=TempStats)
    index: dict | None = None
    var_bucket: list | None = None


def first_arg_key(t):
    """Principal functor of a term, or None for an unbound variable."""
    t = deref(t)
    tt = type(t)
    if tt is Var:
        return None
    if tt is Atom:
        return ("a", t.name)
    if tt is Int:
        return ("i", t.value)
    return ("s", t.name, len(t.args))


def _head_first_arg(clause: BinClause):
    head = deref(clause.head)
    if type(head) is Struct and len(head.args) >= 2:
        # last argument is the continuation slot
        return first_arg_key(head.args[0])
    return None


class ClauseStore:
    """Per-node clause database. All public methods are atomic."""

    def __init__(self, heat: float = 8, cool: float = 1, promote_after: int = 16,
                 tier_policy: str = "auto"):
        self.heat = heat
        self.cool = cool
        self.promote_after = promote_after
        if tier_policy not in ("auto", INTERPRETED, INDEXED):
            raise ValueError(f"unknown tier policy {tier_policy!r}")
        self.tier_policy = tier_policy
        self._preds: dict[tuple[str, int], PredicateEntry] = {}
        self._lock = threading.RLock()
        self.events: list[tuple[str, tuple[str, int]]] = []

    # -- updates ---------------------------------------------------------

    def _entry(self, key, origin="local") -> PredicateEntry:
        e = self._preds.get(key)
        if e is None:
            e = self._preds[key] = PredicateEntry(key, origin=origin)
            if self.tier_policy == INDEXED:
                self._promote(e)
        return e

    def add(self, clause: BinClause, front: bool = False, origin="local",
            count_update: bool = False) -> None:
        """Add a clause; ``count_update`` marks it as a dynamic update (assert)."""
        key = clause.key
        if key[0] == "$stop":
            raise PrologError(Struct("permission_error", [Atom("modify"), Atom("$stop")]))
        with self._lock:
            e = self._entry(key, origin)
            clauses = list(e.clauses)
            if front:
                clauses.insert(0, clause)
            else:
                clauses.append(clause)
            e.clauses = clauses
            if count_update:
                self._record_update(e)
            elif e.tier == INDEXED:
                self._build_index(e)

    def assert_clause(self, pos: str, clause: BinClause) -> None:
        if pos not in ("front", "back"):
            raise ValueError("pos must be 'front' or 'back'")
        self.add(clause, front=(pos == "front"), count_update=True)

    def consult(self, text: str, origin="local") -> list[BinClause]:
        from .binarizer import parse_program

        clauses = parse_program(text)
        for c in clauses:
            self.add(c, origin=origin)
        return clauses

    def declare(self, key: tuple[str, int], origin="local") -> None:
        with self._lock:
            self._entry(key, origin)

    def retract_clause(self, pattern, trail: list | None = None) -> bool:
        """Remove the first clause unifying with the user-level ``pattern``.

        Bindings made by the match stay on ``trail`` when one is given.
        """
        probe = bin_from_term(pattern)
        own = trail is None
        if own:
            trail = []
        with self._lock:
            e = self._preds.get(probe.key)
            if e is None:
                return False
            for i, c in enumerate(e.clauses):
                mark = len(trail)
                head, guards, body = c.renamed()
                if (unify(probe.head, head, trail) and len(guards) == len(probe.guards)
                        and all(unify(a, b, trail) for a, b in zip(probe.guards, guards))
                        and unify(probe.body, body, trail)):
                    clauses = list(e.clauses)
                    del clauses[i]
                    e.clauses = clauses
                    self._record_update(e)
                    if own:
                        undo(trail, 0)
                    return True
                undo(trail, mark)
        return False

    def abolish(self, key) -> None:
        with self._lock:
            self._preds.pop(key, None)

    # -- lookup ----------------------------------------------------------

    def has(self, key) -> bool:
        return key in self._preds

    def clauses(self, key) -> list[BinClause]:
        e = self._preds.get(key)
        if e is None:
            raise UnknownPredicate(key)
        return e.clauses

    def entry(self, key) -> PredicateEntry:
        e = self._preds.get(key)
        if e is None:
            raise UnknownPredicate(key)
        return e

    def predicates(self) -> list[tuple[str, int]]:
        with self._lock:
            return list(self._preds)

    def lookup(self, goal, count: bool = True) -> list[BinClause]:
        """Snapshot of clauses whose head may unify with ``goal``, in source order."""
        goal = deref(goal)
        if type(goal) is Struct:
            key = (goal.name, len(goal.args))
        elif type(goal) is Atom:
            key = (goal.name, 0)
        else:
            raise PrologError(Atom("instantiation_error"))
        e = self._preds.get(key)
        if e is None:
            raise UnknownPredicate(key)
        with self._lock:
            if count:
                self._record_call(e)
                self._maybe_promote(e)
            if e.tier == INDEXED and type(goal) is Struct and len(goal.args) >= 2:
                fk = first_arg_key(goal.args[0])
                if fk is not None:
                    bucket = e.index.get(fk)
                    return bucket if bucket is not None else e.var_bucket
            return e.clauses

    # -- thermostat -------------------------------------------------------

    def record_call(self, key) -> None:
        with self._lock:
            self._record_call(self.entry(key))

    def record_update(self, key) -> None:
        with self._lock:
            self._record_update(self.entry(key))

    def maybe_promote(self, key) -> str:
        with self._lock:
            e = self.entry(key)
            self._maybe_promote(e)
            return e.tier

    def _record_call(self, e: PredicateEntry) -> None:
        s = e.stats
        s.calls += 1
        s.calls_since_update += 1
        s.temperature = max(0.0, s.temperature - self.cool)

    def _record_update(self, e: PredicateEntry) -> None:
        s = e.stats
        s.updates += 1
        s.calls_since_update = 0
        s.temperature += self.heat
        if self.tier_policy == INDEXED:
            self._build_index(e)
        elif e.tier == INDEXED:
            e.tier = INTERPRETED
            e.index = None
            e.var_bucket = None
            self.events.append(("demote", e.key))

    def _maybe_promote(self, e: PredicateEntry) -> None:
        if self.tier_policy != "auto" or e.tier == INDEXED:
            return
        s = e.stats
        if s.temperature == 0 and s.calls_since_update >= self.promote_after and len(e.clauses) >= 2:
            self._promote(e)

    def _promote(self, e: PredicateEntry) -> None:
        self._build_index(e)
        e.tier = INDEXED
        self.events.append(("promote", e.key))

    @staticmethod
    def _build_index(e: PredicateEntry) -> None:
        keyed = [(_head_first_arg(c), c) for c in e.clauses]
        keys = {k for k, _ in keyed if k is not None}
        index = {k: [c for ck, c in keyed if ck is None or ck == k] for k in keys}
        e.var_bucket = [c for ck, c in keyed if ck is None]
        e.index = index

    def stats(self, key):
        """Introspection term ``stats(F/N, Tier, Temp, Calls, Updates)``."""
        e = self.entry(key)
        s = e.stats
        return Struct("stats", [indicator(key[0], key[1] - 1), Atom(e.tier), Int(int(s.temperature)),
                                Int(s.calls), Int(s.updates)])
