"""Command-line entry point.

Exit codes: 0 success, 1 goal failed, 2 usage or parse error, 3 network error.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import subprocess
import sys
import threading

from . import wire
from .events import format_evt, parse_evt
from .node import Node, lookup_servers, new_password, servant
from .reader import ParseError
from .runtime import Runtime
from .term import Atom, PrologError, Struct, canonical_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NET = 0, 1, 2, 3

MOBILITY_QUERY = "there, move, println(on_server), member(X,[1,2,3]), return, println(back)"


def _hostport(s: str) -> tuple[str, int]:
    host, _, port = s.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {s!r}")
    return host, int(port)


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if verbose else logging.WARNING,
                        format="%(message)s")


def format_bindings(bindings: dict) -> list[str]:
    if not bindings:
        return ["yes"]
    return [f"{k}={canonical_text(v)}" for k, v in bindings.items()]


def _runtime(args) -> Runtime:
    rt = Runtime()
    if getattr(args, "server", None):
        host, port = args.server
        rt.default_target = (host, port, args.password or "")
    return rt


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    rt = _runtime(args)
    rt.consult_file(args.file)
    found = False
    for b in rt.query(args.goal):
        found = True
        for line in format_bindings(b):
            print(line)
        if not args.all:
            break
        print(";")
    if not found:
        print("no")
        return EXIT_FAIL
    return EXIT_OK


def cmd_repl(args) -> int:
    rt = _runtime(args)
    for f in args.load or []:
        rt.consult_file(f)
    interactive = sys.stdin.isatty()
    pending = None
    while True:
        if interactive:
            print("?- " if pending is None else "", end="", flush=True)
        line = sys.stdin.readline()
        if not line:
            return EXIT_OK
        line = line.strip()
        if pending is not None:
            if line == ";":
                _next_answer(pending)
                if pending[1]:
                    continue
                pending = None
                continue
            pending = None
        if not line:
            continue
        if line in ("halt.", "halt"):
            return EXIT_OK
        try:
            answers = rt.query(line)
            pending = [answers, True]
            _next_answer(pending)
            if not pending[1]:
                pending = None
        except PrologError as exc:
            print(f"error: {canonical_text(exc.term)}")
            pending = None


def _next_answer(pending) -> None:
    try:
        b = next(pending[0])
    except StopIteration:
        print("no")
        pending[1] = False
        return
    except PrologError as exc:
        print(f"error: {canonical_text(exc.term)}")
        pending[1] = False
        return
    print(" ".join(format_bindings(b)), flush=True)


def cmd_serve(args) -> int:
    rt = Runtime()
    rt.fixed_wait = args.fixed_wait
    for f in args.load or []:
        rt.consult_file(f)
    master = args.master or (_hostport(os.environ["CONTINA_MASTER"]) if os.environ.get("CONTINA_MASTER") else None)
    channel = Atom(args.channel) if args.channel else None
    node = Node(rt, host=args.host, port=args.port, password=args.password, master=master,
                channel=channel, servants=args.servants)
    node.start()
    print(format_evt("listening", {"port": node.port, "password": node.password}), flush=True)
    try:
        node.serve_forever()
    except KeyboardInterrupt:
        node.stop()
    return EXIT_OK


def cmd_master(args) -> int:
    args.servants = 0
    args.master = None
    args.channel = None
    args.load = None
    args.fixed_wait = False
    return cmd_serve(args)


def cmd_servant(args) -> int:
    host, port = args.target
    servant(host, port, strict=args.strict_servant)
    return EXIT_OK


def cmd_lookup(args) -> int:
    for sid in lookup_servers(args.master, Atom(args.channel) if args.channel else None):
        print(canonical_text(sid))
    return EXIT_OK


# ---------------------------------------------------------------------------
# demos


def spawn_server(extra: list[str] | None = None, password: str | None = None):
    """Start ``serve`` in a child process; returns ``(proc, port, password)``."""
    password = password or new_password()
    cmd = [sys.executable, "-m", "contina", "serve", "--port", "0", "--password", password, "-v"]
    proc = subprocess.Popen(cmd + (extra or []), stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                            text=True, bufsize=1)
    line = proc.stdout.readline()
    parsed = parse_evt(line)
    if parsed is None or parsed[0] != "listening":
        proc.kill()
        raise RuntimeError(f"server did not start: {line!r} {proc.stderr.read()}")
    return proc, int(parsed[1]["port"]), password


def stop_server(host: str, port: int, password: str) -> None:
    try:
        wire.request(host, port, Struct("stop", [Atom(password)]), timeout=5)
    except wire.NetError:
        pass


def run_mobility_demo(server: tuple | None = None, password: str | None = None) -> dict:
    """Run the two-window mobility session; returns transcript and event data."""
    proc = None
    if server is None:
        proc, port, password = spawn_server()
        server = ("127.0.0.1", port)
    out = io.StringIO()
    rt = Runtime(out=out, name="client")
    rt.default_target = (server[0], server[1], password or "")
    client_events = []
    from .events import capture_events

    with capture_events() as ev:
        first = rt.query_once(MOBILITY_QUERY)
        answers = [] if first is None else [first]
        client_events = list(ev)
    server_out, server_err = "", ""
    if proc is not None:
        stop_server(server[0], server[1], password)
        try:
            server_out, server_err = proc.communicate(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()
            server_out, server_err = proc.communicate()
    bindings = [line for b in answers for line in format_bindings(b)]
    return {
        "server_lines": [ln for ln in server_out.splitlines() if not ln.startswith("EVT")],
        "server_events": [e for e in map(parse_evt, server_err.splitlines()) if e],
        "client_lines": out.getvalue().splitlines() + bindings,
        "client_events": client_events,
        "bindings": bindings,
    }


def cmd_demo(args) -> int:
    if args.name == "mobility":
        res = run_mobility_demo(args.server, args.password)
        for ln in res["server_lines"]:
            print(f"[server] {ln}")
        for ln in res["client_lines"]:
            print(f"[client] {ln}")
        return EXIT_OK if res["bindings"] else EXIT_FAIL
    if args.name == "recompile":
        return demo_recompile()
    return demo_linda(args.server)


def demo_recompile() -> int:
    rt = Runtime()
    rt.consult("color(red). color(green). color(blue).")

    def show(label):
        print(f"{label}: {canonical_text(rt.store.stats(('color', 2)))}")

    show("loaded")
    for _ in range(16):
        rt.query_once("color(blue)")
    show("after 16 calls")
    rt.query_once("assert(color(black))")
    show("after assert")
    for _ in range(4):
        rt.query_once("color(red)")
    show("after 4 calls")
    for _ in range(16):
        rt.query_once("color(red)")
    show("after 16 more calls")
    return EXIT_OK


def demo_linda(server: tuple | None = None) -> int:
    rt = Runtime()
    if server is not None:
        from .linda import RemoteSpace

        rt.space = RemoteSpace(*server)
    n = 5

    def consumer():
        for _ in range(n):
            got = rt.query_once("in(item(I)), println(consumed(I))")
            if got is None:
                return

    t = threading.Thread(target=consumer)
    t.start()
    rt.query_once(f"for(I,1,{n}), println(produced(I)), out(item(I)), I >= {n}")
    t.join()
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contina", description="Mobile-continuation logic runtime.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def client_opts(sp):
        sp.add_argument("--server", type=_hostport, help="default remote node HOST:PORT")
        sp.add_argument("--password", help="password of the default remote node")
        sp.add_argument("-v", "--verbose", action="store_true", help="log EVT lines to stderr")

    r = sub.add_parser("repl", help="interactive query loop")
    r.add_argument("--load", action="append", metavar="FILE")
    client_opts(r)

    r = sub.add_parser("run", help="load a program and solve a goal")
    r.add_argument("file")
    r.add_argument("--goal", required=True)
    r.add_argument("--all", action="store_true", help="print every answer, not only the first")
    client_opts(r)

    s = sub.add_parser("serve", help="run a node")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=0)
    s.add_argument("--password")
    s.add_argument("--master", type=_hostport)
    s.add_argument("--channel")
    s.add_argument("--load", action="append", metavar="FILE")
    s.add_argument("--servants", type=int, default=1, help="local servant threads")
    s.add_argument("--paper-sleep", dest="fixed_wait", action="store_true",
                   help="wait a fixed 5 s instead of the readiness handshake")
    s.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("servant", help="pull todo tasks from a node and run them here")
    s.add_argument("--target", type=_hostport, required=True)
    s.add_argument("--strict-servant", action="store_true", help="stop on the first failing task")
    s.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("master", help="run a registry node")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=0)
    s.add_argument("--password")
    s.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("lookup", help="list servers registered at a master")
    s.add_argument("--master", type=_hostport, required=True)
    s.add_argument("--channel")
    s.add_argument("-v", "--verbose", action="store_true")

    d = sub.add_parser("demo", help="scripted scenarios")
    d.add_argument("name", choices=["mobility", "recompile", "linda"])
    client_opts(d)
    return p


COMMANDS = {
    "run": cmd_run, "repl": cmd_repl, "serve": cmd_serve, "master": cmd_master,
    "servant": cmd_servant, "lookup": cmd_lookup, "demo": cmd_demo,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    _setup_logging(getattr(args, "verbose", False))
    try:
        return COMMANDS[args.cmd](args)
    except ParseError as exc:
        print(f"syntax error: {canonical_text(exc.term)}", file=sys.stderr)
        return EXIT_USAGE
    except wire.NetError as exc:
        print(f"network error: {canonical_text(exc.term)}", file=sys.stderr)
        return EXIT_NET
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrologError as exc:
        print(f"error: {canonical_text(exc.term)}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
