"""Length-prefixed term frames over TCP.

A frame is a 4-byte big-endian payload length followed by the UTF-8
canonical text of one term.  Every request gets exactly one reply frame.
"""

from __future__ import annotations

import socket
import struct

from .events import evt
from .reader import ParseError, read_term
from .term import Atom, PrologError, Struct, canonical_text, deref

MAX_FRAME = 1 << 24

REQUESTS = {
    ("linda_out", 1), ("linda_in", 1), ("linda_all", 1), ("run", 3), ("fetch", 2),
    ("rload", 2), ("stop", 1), ("register", 1), ("lookup", 1),
}
REPLIES = {("ok", 0), ("the", 1), ("no", 0), ("tuples", 1), ("clauses", 1), ("denied", 0), ("err", 1)}
VOCABULARY = REQUESTS | REPLIES

_HDR = struct.Struct(">I")


class WireError(PrologError):
    def __init__(self, reason: str, detail=None):
        term = Atom(reason) if detail is None else Struct(reason, [detail])
        super().__init__(term)
        self.reason = reason


class NetError(PrologError):
    def __init__(self, reason: str):
        super().__init__(Struct("net_error", [Atom(reason)]))
        self.reason = reason


def _key(t):
    t = deref(t)
    if type(t) is Atom:
        return (t.name, 0)
    if type(t) is Struct:
        return (t.name, len(t.args))
    return None


def encode(msg, max_frame: int = MAX_FRAME) -> bytes:
    payload = canonical_text(msg).encode("utf-8")
    if len(payload) > max_frame:
        raise WireError("frame_too_large")
    return _HDR.pack(len(payload)) + payload


def decode(data: bytes, max_frame: int = MAX_FRAME):
    """Inverse of :func:`encode` for one complete frame."""
    if len(data) < 4:
        raise WireError("protocol_error", Atom("truncated_header"))
    (n,) = _HDR.unpack_from(data)
    if n > max_frame:
        raise WireError("frame_too_large")
    if len(data) - 4 != n:
        raise WireError("protocol_error", Atom("length_mismatch"))
    return decode_payload(data[4:])


def decode_payload(payload: bytes):
    try:
        msg = read_term(payload.decode("utf-8"))
    except (UnicodeDecodeError, ParseError):
        raise WireError("protocol_error", Atom("malformed_payload")) from None
    if _key(msg) not in VOCABULARY:
        raise WireError("protocol_error", Atom("unknown_message"))
    return msg


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WireError("protocol_error", Atom("truncated_frame"))
        buf += chunk
    return bytes(buf)


def read_frame(sock, max_frame: int = MAX_FRAME):
    """Read one frame; returns None on a clean close before any header byte."""
    first = sock.recv(1)
    if not first:
        return None
    hdr = first + _recv_exact(sock, 3)
    (n,) = _HDR.unpack(hdr)
    if n > max_frame:
        raise WireError("frame_too_large")
    return decode_payload(_recv_exact(sock, n))


def write_frame(sock, msg, max_frame: int = MAX_FRAME) -> None:
    sock.sendall(encode(msg, max_frame))


def request(host: str, port: int, msg, timeout: float | None = 30.0):
    """Send one message and wait for its reply.

    Pass ``timeout=None`` for requests that may block indefinitely, such as
    a ``linda_in`` on an empty space.
    """
    k = _key(msg)
    evt("send", msg=k[0] if k else "?", to=f"{host}:{port}")
    try:
        with socket.create_connection((host, port), timeout=timeout) as s:
            s.settimeout(timeout)
            write_frame(s, msg)
            reply = read_frame(s)
    except WireError:
        raise
    except socket.timeout:
        raise NetError("timeout") from None
    except OSError as exc:
        raise NetError(_reason(exc)) from None
    if reply is None:
        raise NetError("connection_closed")
    return reply


def _reason(exc: OSError) -> str:
    if isinstance(exc, ConnectionRefusedError):
        return "connection_refused"
    if isinstance(exc, ConnectionResetError):
        return "connection_reset"
    return "os_error"


__all__ = [
    "MAX_FRAME", "NetError", "WireError", "decode", "encode", "read_frame",
    "request", "write_frame",
]
