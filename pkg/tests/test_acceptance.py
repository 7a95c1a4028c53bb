"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import random
import time
from collections import Counter

import pytest

from contina import Runtime, wire
from contina.binarizer import binarize_program, parse_source_clauses
from contina.cli import run_mobility_demo, spawn_server, stop_server
from contina.store import ClauseStore
from contina.term import Atom, PrologError, Struct, canonical_text, parse_term, variant
from mobile import capture_events, kinds, pair, sends
from oracles import (
    capture_round_trip, corpus, engine_answers, ld_answers, linda_scheduled_run,
    linda_threaded_run, random_program, source_program,
)
from test_binarizer import NREV, NREV_BINARY, as_rule


@pytest.fixture
def gate(record_property):
    """Times the criterion and prints its verdict line."""
    state = {}

    def check(n, name, ok, limit, detail=""):
        elapsed = time.monotonic() - state["t0"]
        verdict = ok and elapsed < limit
        line = f"criterion {n:2d} {name}: {elapsed:.2f}s (limit {limit}s) {detail}".rstrip()
        record_property("acceptance", (n, line))
        print(("PASS " if verdict else "FAIL ") + line)
        assert ok, line
        assert elapsed < limit, line

    state["t0"] = time.monotonic()
    return check


def test_01_binarization_golden(gate):
    got = binarize_program(parse_source_clauses(NREV))
    ok = len(got) == len(NREV_BINARY) and all(
        variant(as_rule(bc), parse_term(want)) for bc, want in zip(got, NREV_BINARY))
    gate(1, "binarization golden listing", ok, 1)


def test_02_ld_equivalence(gate):
    progs = corpus(seed=7, n_random=20)
    mismatches = queries = 0
    for text, qs in progs:
        program = source_program(text)
        rt = Runtime(prelude=False)
        rt.consult(text)
        for q in qs:
            queries += 1
            if Counter(ld_answers(program, parse_term(q))) != Counter(engine_answers(rt, parse_term(q))):
                mismatches += 1
    ok = len(progs) >= 25 and queries >= 100 and mismatches == 0
    gate(2, "LD equivalence", ok, 30, f"programs={len(progs)} queries={queries} mismatches={mismatches}")


def test_03_engine_streaming(gate):
    rt = Runtime()
    vm = {}
    e = rt.create_engine()
    e.load(parse_term("append(As,Bs,[1,2])", vm), parse_term("As+Bs", vm))
    got = [canonical_text(a) for a in iter(e.ask, None)]
    ok = got == ["'+'([],[1,2])", "'+'([1],[2])", "'+'([1,2],[])"] and e.ask() is None
    gate(3, "engine answer stream", ok, 1, f"answers={len(got)}")


def test_04_linda_semantics(gate):
    seq = linda_scheduled_run(seed=2024, n_ops=10_000)
    thr = linda_threaded_run(n_ops=10_000)
    ok = (seq["mismatch"] is None and not seq["lost"] and seq["outs"] - seq["ins"] == seq["stored"]
          and thr["alive"] == 0 and thr["distinct"] and thr["ordered"]
          and thr["outs"] - thr["ins"] == thr["stored"])
    gate(4, "linda conservation, wakeups, oldest-first", ok, 60,
         f"seeded_ops={seq['outs'] + seq['ins']} threaded_ops={thr['outs'] + thr['ins']}")


def test_05_remote_execution(gate):
    proc, port, pw = spawn_server()
    try:
        def run(goal, vars_text, pwd=pw):
            vm = {}
            msg = Struct("run", [Atom(pwd), parse_term(goal, vm), parse_term(vars_text, vm)])
            return canonical_text(wire.request("127.0.0.1", port, msg, timeout=5))

        first = run("member(X,[1,2,3])", "[X]")
        none = run("fail", "[]")
        before = canonical_text(wire.request("127.0.0.1", port, parse_term("linda_all(_)")))
        denied = run("(assert(secret(1)), out(leak))", "[]", pwd="wrong")
        after = canonical_text(wire.request("127.0.0.1", port, parse_term("linda_all(_)")))
        probe = run("catch(secret(_), _, fail)", "[]")
    finally:
        stop_server("127.0.0.1", port, pw)
        proc.communicate(timeout=10)
    ok = first == "the([1])" and none == "no" and denied == "denied" and before == after and probe == "no"
    gate(5, "remote_run across processes", ok, 5, f"member={first} fail={none} bad_pw={denied}")


def test_06_mobility_transcript(gate):
    res = run_mobility_demo()
    server_print = [f for k, f in res["server_events"] if k == "println" and f.get("text") == "on_server"]
    client_print = [f for k, f in res["client_events"] if k == "println" and f.get("text") == "back"]
    ok = (res["server_lines"] == ["on_server"] and res["client_lines"] == ["back", "X=1"]
          and len(server_print) == 1 and len(client_print) == 1
          and float(server_print[0]["ts"]) < float(client_print[0]["ts"]))
    gate(6, "mobility transcript", ok, 10, f"server={res['server_lines']} client={res['client_lines']}")


def test_07_message_count(gate):
    n = 100
    with pair("show(I) :- println(I).") as (_, client):
        with capture_events() as ev:
            client.query_once(f"for(I,1,{n}), remote_run(println(I)), fail ; true")
        runs = sends(ev, "run")
        with capture_events() as ev:
            client.query_once(f"there, move, (for(I,1,{n}), show(I), fail ; true)")
        control = len([f for k, f in ev if k == "send" and f["msg"] != "fetch"])
        fetches = sends(ev, "fetch")
        distinct = len({f["pred"] for f in kinds(ev, "fetch")})
        printed = len(kinds(ev, "println"))
    ok = runs >= n and control <= 4 and fetches <= distinct and printed == n
    gate(7, "message count at N=100", ok, 20, f"remote_run_frames={runs} moved_control={control} fetch={fetches}")


def test_08_findall_emulation(gate):
    with pair() as (_, client), capture_events() as ev:
        count = sum(1 for _ in client.query("there, move, findall(X, for(I,1,1000), Xs), return, member(X,Xs)"))
    moves, backs = len(kinds(ev, "move")), len(kinds(ev, "moved_back"))
    ok = count == 1000 and moves == 1 and backs == 1
    gate(8, "findall emulation", ok, 10, f"solutions={count} migrations={moves}")


def test_09_lazy_fetch_caching(gate):
    k = 50
    with pair("double(X, Y) :- Y is 2 * X.") as (_, client), capture_events() as ev:
        got = client.query_once(f"there, move, findall(Y, (for(I,1,{k}), double(I,Y)), L), return")
    fetches = kinds(ev, "fetch", pred="double/3")
    ok = got is not None and len(fetches) == 1 and sends(ev, "fetch") == 1
    gate(9, "lazy fetch caching", ok, 5, f"calls={k} fetch_frames={len(fetches)}")


def test_10_thermostat(gate):
    app = "app([],Ys,Ys).\napp([X|Xs],Ys,[X|Zs]) :- app(Xs,Ys,Zs)."
    goal = parse_term("app(X,Y,Z,W)")

    def fresh():
        s = ClauseStore()
        s.consult(app)
        return s

    s = fresh()
    for _ in range(16):
        s.lookup(goal)
    promoted = s.entry(("app", 4)).tier == "indexed" and s.entry(("app", 4)).stats.temperature == 0
    s.record_update(("app", 4))
    demoted = s.entry(("app", 4)).tier == "interpreted" and s.entry(("app", 4)).stats.temperature == 8
    s = fresh()
    s.record_update(("app", 4))
    for _ in range(4):
        s.lookup(goal)
    warm = s.entry(("app", 4)).tier == "interpreted" and s.entry(("app", 4)).stats.temperature == 4

    rng = random.Random(10)
    queries = mismatches = 0
    while queries < 500:
        text, qs = random_program(rng)
        rts = {}
        for policy in ("interpreted", "indexed"):
            rts[policy] = Runtime(prelude=False, tier_policy=policy)
            rts[policy].consult(text)
        for q in qs * 5:
            queries += 1
            a, b = (engine_answers(rts[p], parse_term(q)) for p in ("interpreted", "indexed"))
            mismatches += a != b
    ok = promoted and demoted and warm and mismatches == 0
    gate(10, "thermostat transitions and tier transparency", ok, 30, f"queries={queries} mismatches={mismatches}")


def test_11_continuation_capture(gate):
    rt = Runtime()
    rt.consult("collect(_).")
    try:
        rt.query_once("consume_cont(collect, M), true(x)")
        err = None
    except PrologError as exc:
        err = exc.term
    exact = err is not None and variant(err, parse_term("in_consume_cont(expected_marker(_))"))
    rng = random.Random(11)
    held = 0
    for _ in range(200):
        text, qs = random_program(rng)
        r = Runtime()
        r.consult(text)
        held += capture_round_trip(r, ", ".join(qs[:2]))
    ok = exact and held == 200
    gate(11, "continuation capture", ok, 30,
         f"error={canonical_text(err) if err is not None else None} round_trips={held}/200")
