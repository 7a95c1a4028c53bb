import threading

import pytest

from contina import Runtime
from contina.linda import TupleSpace
from contina.term import Int, PrologError, Struct, Var, canonical_text, parse_term, unify
from oracles import linda_scheduled_run, linda_threaded_run


def texts(ts):
    return [canonical_text(t) for t in ts]


def test_out_into_empty_space_stores():
    s = TupleSpace()
    s.out(parse_term("f(1)"))
    assert texts(s.snapshot()) == ["f(1)"]


def test_out_to_a_waiter_is_never_stored():
    s = TupleSpace()
    pat = parse_term("f(X)")
    w = s.in_async(pat)
    assert not w.done
    s.out(parse_term("f(1)"))
    assert w.done and canonical_text(w.result) == "f(1)"
    assert len(s) == 0


def test_only_the_oldest_waiter_wakes():
    s = TupleSpace()
    w1 = s.in_async(parse_term("f(_)"))
    w2 = s.in_async(parse_term("f(_)"))
    s.out(parse_term("f(1)"))
    assert w1.done and not w2.done
    assert s.pending_waiters() == 1


def test_in_takes_the_oldest_match():
    s = TupleSpace()
    s.out(parse_term("g(1)"))
    s.out(parse_term("g(2)"))
    assert canonical_text(s.in_(parse_term("g(X)"))) == "g(1)"
    assert texts(s.snapshot()) == ["g(2)"]


def test_in_blocks_until_a_concurrent_out():
    s = TupleSpace()
    got = []
    t = threading.Thread(target=lambda: got.append(s.in_(parse_term("f(X)"))))
    t.start()
    t.join(0.1)
    assert t.is_alive()
    s.out(parse_term("f(7)"))
    t.join(5)
    assert texts(got) == ["f(7)"]


def test_non_matching_pattern_blocks():
    s = TupleSpace()
    s.out(parse_term("f(b)"))
    assert s.in_(parse_term("f(a)"), timeout=0.05) is None
    assert s.pending_waiters() == 0 and len(s) == 1


def test_all_is_a_non_destructive_snapshot():
    s = TupleSpace()
    assert s.all(parse_term("f(_)")) == []
    for t in ("f(1)", "g(2)", "f(3)"):
        s.out(parse_term(t))
    assert texts(s.all(parse_term("f(X)"))) == ["f(1)", "f(3)"]
    assert texts(s.all(parse_term("f(X)"))) == ["f(1)", "f(3)"]


def test_rd_reads_without_removing():
    s = TupleSpace()
    s.out(parse_term("f(1)"))
    assert canonical_text(s.rd(parse_term("f(X)"))) == "f(1)"
    assert len(s) == 1
    assert TupleSpace().rd_nb(parse_term("f(X)")) is None


def test_blocking_rd_wakes_on_later_out_and_leaves_the_tuple():
    s = TupleSpace()
    w = s.in_async(parse_term("f(_)"), take=False)
    s.out(parse_term("f(2)"))
    assert w.done and len(s) == 1


def test_rd_matches_in_then_out_emulation():
    native = TupleSpace()
    emulated = TupleSpace()
    for sp in (native, emulated):
        for t in ("f(1)", "f(2)", "g(3)"):
            sp.out(parse_term(t))
    a = native.rd(parse_term("f(X)"))
    b = emulated.in_(parse_term("f(X)"))
    emulated.out(b)
    assert canonical_text(a) == canonical_text(b)
    # the emulation moves the tuple to the back; the multiset is unchanged
    assert sorted(texts(native.snapshot())) == sorted(texts(emulated.snapshot()))


def test_cyclic_tuples_are_rejected():
    x = Var()
    unify(x, Struct("f", [x]), [])
    with pytest.raises(PrologError) as ei:
        TupleSpace().out(x)
    assert canonical_text(ei.value.term) == "cyclic_term"


def test_copy_isolation():
    s = TupleSpace()
    s.out(parse_term("f(X, g(Y))"))
    (a,) = s.all(parse_term("f(_, _)"))
    unify(a.args[0], Int(1), [])
    r = s.rd(parse_term("f(_, _)"))
    unify(r.args[1].args[0], Int(2), [])
    assert texts(s.snapshot()) == ["f(_V0,g(_V1))"]


def test_cancel_withdraws_a_waiter():
    s = TupleSpace()
    w = s.in_async(parse_term("f(_)"))
    assert s.cancel(w)
    s.out(parse_term("f(1)"))
    assert not w.done and len(s) == 1


def test_builtins_bind_the_caller_pattern():
    rt = Runtime()
    got = rt.query_once("out(p(1)), out(p(2)), in(p(X)), rd(p(Y)), all(p(_), L), "
                        "( rd_nb(q(_)) -> Q = yes ; Q = no )")
    assert {k: canonical_text(v) for k, v in got.items()} == \
        {"X": "1", "Y": "2", "L": "[p(2)]", "Q": "no"}


@pytest.mark.parametrize("seed", range(5))
def test_seeded_interleavings_match_the_model(seed):
    r = linda_scheduled_run(seed, n_ops=2000)
    assert r["mismatch"] is None
    assert r["lost"] == []
    assert r["outs"] - r["ins"] == r["stored"]


def test_concurrent_conservation_and_no_lost_wakeup():
    r = linda_threaded_run(n_ops=4000)
    assert r["alive"] == 0
    assert r["distinct"] and r["ordered"]
    assert r["outs"] - r["ins"] == r["stored"] == 0
