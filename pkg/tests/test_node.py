import socket
import struct
import threading

import pytest

from contina import Runtime, wire
from contina.linda import RemoteSpace
from contina.node import (
    Node, ask_all_servers, lookup_servers, register_with_master, remote_run, servant,
)
from contina.runtime import wait_until
from contina.term import Atom, NIL, Struct, canonical_text, deref, list_items, parse_term

APP = "app([],Ys,Ys).\napp([X|Xs],Ys,[X|Zs]) :- app(Xs,Ys,Zs).\n" \
      "nrev([],[]).\nnrev([X|Xs],Zs) :- nrev(Xs,Ys), app(Ys,[X],Zs)."


@pytest.fixture
def node():
    rt = Runtime()
    rt.consult(APP)
    with Node(rt, password="pw", servants=0) as n:
        yield n


def req(node, text):
    return canonical_text(wire.request(*node.address, parse_term(text)))


def run(node, goal_text, pwd="pw"):
    vm = {}
    g = parse_term(goal_text, vm)
    vs = parse_term("[" + ",".join(vm) + "]", vm) if vm else NIL
    return canonical_text(remote_run(*node.address, pwd, g, vs))


def state(node):
    store = node.runtime.store
    return ([(k, [canonical_text(c.as_term()) for c in store.clauses(k)]) for k in sorted(store.predicates())],
            [canonical_text(t) for t in node.runtime.space.snapshot()])


def test_stop_with_the_right_password():
    n = Node(password="pw", servants=0).start()
    assert req(n, "stop(pw)") == "ok"
    assert n.wait_stopped(5)
    with pytest.raises(wire.NetError):
        wire.request(*n.address, parse_term("linda_all(_)"), timeout=2)


def test_stop_with_a_wrong_password_keeps_serving(node):
    assert req(node, "stop(guess)") == "denied"
    assert node.running
    assert req(node, "linda_all(_)") == "tuples([])"


def test_malformed_frames_do_not_kill_the_server(node):
    for body in (b"((", b"zzz(1)", b"\xff"):
        with socket.create_connection(node.address, timeout=5) as s:
            s.sendall(struct.pack(">I", len(body)) + body)
            assert deref(wire.read_frame(s)).name == "err"
    with socket.create_connection(node.address, timeout=5) as s:
        s.sendall(b"\x00\x00")  # truncated header, then close
    assert req(node, "run(pw, true, [])") == "the([])"


def test_failing_goal_replies_err_and_keeps_serving(node):
    assert req(node, "run(pw, throw(boom), [])") == "err(boom)"
    assert req(node, "run(pw, undefined_here(1), [])").startswith("err(unknown_predicate")
    assert req(node, "run(pw, true, [])") == "the([])"


def test_remote_run_first_answer_only(node):
    assert run(node, "member(X,[1,2,3])") == "the([1])"
    assert run(node, "fail") == "no"
    assert run(node, "nrev([1,2,3],R)") == "the([[3,2,1]])"


def test_remote_run_side_effects_land_at_the_server(node):
    assert run(node, "out(t(1))") == "the([])"
    assert [canonical_text(t) for t in node.runtime.space.all(parse_term("t(_)"))] == ["t(1)"]


def test_password_gate_leaves_state_unchanged(node):
    before = state(node)
    for text in ("run(bad, assert(x(1)), [])", "run(bad, out(t(1)), [])", "fetch(bad, '/'(app,4))",
                 "rload(bad, 'nope.pl')", "stop(bad)", "run(1, true, [])"):
        assert req(node, text) == "denied"
    assert state(node) == before
    assert node.running


def test_linda_messages_rendezvous_through_the_space(node):
    got = []
    t = threading.Thread(target=lambda: got.append(req(node, "linda_in(job(X))")))
    t.start()
    assert wait_until(lambda: node.runtime.space.pending_waiters() == 1, 5)
    assert req(node, "linda_out(job(7))") == "ok"
    t.join(5)
    assert got == ["the(job(7))"]
    assert len(node.runtime.space) == 0


def test_fetch_returns_binarized_clauses(node):
    reply = wire.request(*node.address, parse_term("fetch(pw, '/'(app,4))"))
    cs = list_items(reply.args[0])
    assert len(cs) == 2
    assert all(deref(c).name == "bin" for c in cs)
    again = wire.request(*node.address, parse_term("fetch(pw, '/'(app,4))"))
    assert canonical_text(again) == canonical_text(reply)
    assert req(node, "fetch(pw, '/'(unknown,9))") == "no"


def test_rload_returns_a_file_s_clauses(node, tmp_path):
    f = tmp_path / "lib.pl"
    f.write_text("twice(X,Y) :- Y is 2*X.\nthree(3).\n")
    reply = wire.request(*node.address, Struct("rload", [Atom("pw"), Atom(str(f))]))
    assert len(list_items(reply.args[0])) == 2


def test_rload_builtin_installs_remote_code(node, tmp_path):
    f = tmp_path / "lib.pl"
    f.write_text("twice(X,Y) :- Y is 2*X.\n")
    client = Runtime()
    client.default_target = (*node.address, "pw")
    got = client.query_once(f"rload('{f}'), twice(21, Y)")
    assert canonical_text(got["Y"]) == "42"


def test_local_servant_runs_todos():
    with Node(password="pw", servants=1) as n:
        assert req(n, "linda_out(todo(out(done(1))))") == "ok"
        assert wait_until(lambda: n.runtime.space.rd_nb(parse_term("done(_)")) is not None, 5)
        # a failing task is skipped and the loop keeps going
        req(n, "linda_out(todo(fail))")
        req(n, "linda_out(todo(out(done(2))))")
        assert wait_until(lambda: len(n.runtime.space.all(parse_term("done(_)"))) == 2, 5)


def test_two_remote_servants_split_the_work():
    with Node(password="pw", servants=0) as n:
        host, port = n.address
        workers = []
        for i in range(2):
            rt = Runtime(space=RemoteSpace(host, port))
            rt.consult(f"me({i}).")
            t = threading.Thread(target=servant, args=(host, port), kwargs={"runtime": rt}, daemon=True)
            t.start()
            workers.append(t)
        for k in range(20):
            req(n, f"linda_out(todo((me(W), out(did({k}, W)))))")
        assert wait_until(lambda: len(n.runtime.space.all(parse_term("did(_,_)"))) == 20, 10)
        done = [deref(t).args[0].value for t in n.runtime.space.all(parse_term("did(_,_)"))]
        assert sorted(done) == list(range(20))
    for t in workers:
        t.join(5)
        assert not t.is_alive()


def test_servant_and_remote_run_have_the_same_effects():
    goals = ["out(r(1))", "(member(X,[a,b]), out(r(X)))", "fail", "(out(r(2)), out(r(3)))"]
    with Node(password="pw", servants=1) as via_todo, Node(password="pw", servants=0) as via_run:
        for g in goals:
            req(via_todo, f"linda_out(todo({g}))")
            run(via_run, g)
        assert wait_until(lambda: len(via_todo.runtime.space.all(parse_term("r(_)"))) == 4, 5)
        assert [canonical_text(t) for t in via_todo.runtime.space.all(parse_term("r(_)"))] == \
            [canonical_text(t) for t in via_run.runtime.space.all(parse_term("r(_)"))]


def test_master_registry_and_broadcast():
    with Node(password="m", servants=0) as master, \
            Node(password="pw", servants=0) as news, Node(password="pw", servants=0) as mail:
        register_with_master(master.address, Atom("news"), *news.address)
        register_with_master(master.address, Atom("mail"), *mail.address)
        assert len(lookup_servers(master.address)) == 2
        (only,) = lookup_servers(master.address, Atom("news"))
        assert deref(only.args[2]).value == news.address[1]
        servers = lookup_servers(master.address)
        assert ask_all_servers(Atom("news"), servers, parse_term("out(hello)"), "pw") == 1
        assert len(news.runtime.space) == 1 and len(mail.runtime.space) == 0
        assert ask_all_servers(parse_term("_"), servers, parse_term("out(hi)"), "pw") == 2
        assert ask_all_servers(Atom("none"), servers, parse_term("out(x)"), "pw") == 0


def test_broadcast_skips_dead_servers():
    with Node(password="pw", servants=0) as alive:
        dead = Node(password="pw", servants=0).start()
        dead_addr = dead.address
        dead.stop()
        servers = [parse_term(f"server_id(c, '{h}', {p})") for h, p in (dead_addr, alive.address)]
        assert ask_all_servers(Atom("c"), servers, parse_term("out(x)"), "pw") == 1


def test_node_registers_itself_on_start():
    with Node(password="m", servants=0) as master:
        with Node(password="pw", servants=0, master=master.address, channel=Atom("news")):
            assert [canonical_text(deref(s).args[0]) for s in lookup_servers(master.address)] == ["news"]


def test_generated_passwords_are_long_and_distinct():
    a, b = Node().password, Node().password
    assert a != b and len(a) >= 24


def test_remote_builtins_use_scoped_targets(node):
    h, p = node.address
    client = Runtime()
    got = client.query_once(f"host('{h}') =>> port({p}) =>> password(pw) =>> "
                            "(remote_run(member(X,[a,b])), remote_out(m(1)), remote_all(m(_), L), "
                            "remote_in(m(Y)))")
    assert {k: canonical_text(v) for k, v in got.items()} == {"X": "a", "L": "[m(1)]", "Y": "1"}
