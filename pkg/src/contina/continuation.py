"""Scope-bounded continuation capture.

``capture_cont_for(G)`` runs ``G`` with a linearly assumed
``cont_marker(End)`` and ``end_cont(End)`` placed right after it in the
continuation.  ``call_with_cont(Closure)`` inside ``G`` walks the current
continuation up to that ``end_cont``, hands the goals it passed over to
``Closure`` as a right-nested conjunction, and resumes after the marker.

The walk itself is written in Prolog (``CAPTURE_SOURCE``); the helpers
below do the same job from Python for move/return, which ship the
continuation up to the engine's final ``$stop``.
"""

from __future__ import annotations

from .builtins import strip
from .term import STOP, Atom, PrologError, Struct, deref, mkconj

CAPTURE_SOURCE = r"""
get_cont(Cont, Cont) ::- true(Cont).
call_cont(NewCont, _) ::- true(NewCont).

capture_cont_for(Goal) :-
    assumeal(cont_marker(End)),
    Goal,
    end_cont(End).

end_cont(_).

call_with_cont(Closure) :-
    (   assumed(cont_marker(End))
    ->  consume_cont(Closure, End)
    ;   throw(assumption_missing(cont_marker))
    ).

% the first three goals stripped are this clause's own tail:
% consume_cont1/4, call/2 and call_cont/1
consume_cont(Closure, Marker) :-
    get_cont(Cont),
    consume_cont1(Marker, (_, _, _, Cs), Cont, NewCont),
    call(Closure, Cs),
    call_cont(NewCont).

consume_cont1(Marker, Gs, Cont, LastCont) :-
    strip_cont(Cont, Goal, NextCont),
    (   '$cont_end'(NextCont)
    ->  errmes(in_consume_cont, expected_marker(Marker))
    ;   arg(1, NextCont, X), Marker == X
    ->  Gs = Goal, arg(2, NextCont, LastCont)
    ;   Gs = (Goal, OtherGs),
        consume_cont1(Marker, OtherGs, NextCont, LastCont)
    ).

'$cont_end'(C) :- C == '$stop'.
'$cont_end'(C) :- C == true.

wrap_thread(Goal) :- capture_cont_for(Goal).
move_thread :- call_with_cont(move_with_cont).
"""

LIBRARY_SOURCE = r"""
append([], Ys, Ys).
append([X|Xs], Ys, [X|Zs]) :- append(Xs, Ys, Zs).

member(X, [X|_]).
member(X, [_|Xs]) :- member(X, Xs).

memberchk(X, Xs) :- once(member(X, Xs)).

reverse(Xs, Ys) :- '$rev'(Xs, [], Ys).
'$rev'([], Ys, Ys).
'$rev'([X|Xs], Acc, Ys) :- '$rev'(Xs, [X|Acc], Ys).

for(I, L, H) :- L =< H, '$for'(I, L, H).
'$for'(L, L, _).
'$for'(I, L, H) :- L < H, L1 is L + 1, '$for'(I, L1, H).

between(L, H, I) :- for(I, L, H).

forall(C, A) :- \+ (C, \+ A).

ignore(G) :- (G -> true ; true).
"""

PRELUDE = LIBRARY_SOURCE + CAPTURE_SOURCE

# engine-internal goals that carry engine-local references; they are
# dropped when a continuation leaves its engine
_LOCAL_ONLY = {"$unassume", "$catch_exit"}


def collect_until(cont, is_end) -> tuple[list, object]:
    """Strip goals off ``cont`` until ``is_end(c)``; returns ``(goals, c)``.

    Raises ``in_consume_cont(expected_marker(end))`` when the engine's
    final ``$stop`` is reached first and ``is_end`` did not accept it.
    """
    goals = []
    c = deref(cont)
    while True:
        if is_end(c):
            return goals, c
        if type(c) is Atom and c.name in ("$stop", "true"):
            raise PrologError(Struct("in_consume_cont", [Struct("expected_marker", [Atom("end")])]))
        goal, nxt = strip(c)
        if goal is None:
            raise PrologError(Struct("type_error", [Atom("continuation"), c]))
        name = c.name
        if name == "$ite_then":
            raise PrologError(Struct("permission_error", [Atom("capture"), Atom("if_then_else_condition")]))
        if name not in _LOCAL_ONLY:
            goals.append(goal)
        c = deref(nxt)


def is_stop(c) -> bool:
    return type(c) is Atom and c.name == "$stop"


def capture_to_stop(cont):
    """The whole remaining AND-branch as a right-nested conjunction."""
    goals, _ = collect_until(cont, is_stop)
    return mkconj(goals)


__all__ = ["PRELUDE", "collect_until", "capture_to_stop", "is_stop", "STOP"]
