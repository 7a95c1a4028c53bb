"""Tokenizer and a small operator-precedence parser for program and query text.

Reads the canonical term syntax plus a fixed operator table, enough for
clause files (``:-``, ``::-``), control constructs and arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .term import NIL, Atom, Int, PrologError, Struct, Var, mk

SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")
SOLO = set("!;,|")
PUNCT = set("()[]{}")

# name -> (priority, type)
PREFIX_OPS = {
    ":-": (1200, "fx"),
    "?-": (1200, "fx"),
    "\\+": (900, "fy"),
    "-": (200, "fy"),
    "+": (200, "fy"),
    "\\": (200, "fy"),
}
INFIX_OPS = {
    ":-": (1200, "xfx"),
    "::-": (1200, "xfx"),
    ";": (1100, "xfy"),
    "|": (1100, "xfy"),
    "->": (1050, "xfy"),
    "*->": (1050, "xfy"),
    ",": (1000, "xfy"),
    "=>>": (950, "xfy"),
    "-:": (950, "xfy"),
    "=": (700, "xfx"),
    "\\=": (700, "xfx"),
    "==": (700, "xfx"),
    "\\==": (700, "xfx"),
    "@<": (700, "xfx"),
    "@>": (700, "xfx"),
    "@=<": (700, "xfx"),
    "@>=": (700, "xfx"),
    "=..": (700, "xfx"),
    "is": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    ":": (200, "xfy"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "/\\": (500, "yfx"),
    "\\/": (500, "yfx"),
    "*": (400, "yfx"),
    "/": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
    "rem": (400, "yfx"),
    "<<": (400, "yfx"),
    ">>": (400, "yfx"),
    "^": (200, "xfy"),
}


class ParseError(PrologError):
    def __init__(self, pos: int, message: str = ""):
        self.pos = pos
        self.message = message
        super().__init__(Struct("syntax_error", [Int(pos)]))

    def __str__(self):
        return f"syntax error at {self.pos}: {self.message}"


@dataclass
class Tok:
    kind: str  # atom, qatom, var, int, str, punct, end, eof
    value: object
    pos: int
    layout_before: bool


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    i = 0
    n = len(text)
    layout = True
    while True:
        # skip layout and comments
        start_skip = i
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
            elif c == "%":
                while i < n and text[i] != "\n":
                    i += 1
            elif c == "/" and i + 1 < n and text[i + 1] == "*":
                j = text.find("*/", i + 2)
                if j < 0:
                    raise ParseError(i, "unterminated block comment")
                i = j + 2
            else:
                break
        if i > start_skip:
            layout = True
        if i >= n:
            toks.append(Tok("eof", None, i, layout))
            return toks
        c = text[i]
        start = i
        if c.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            toks.append(Tok("int", int(text[start:i]), start, layout))
        elif c == "_" or c.isupper():
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(Tok("var", text[start:i], start, layout))
        elif c.isalpha():
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(Tok("atom", text[start:i], start, layout))
        elif c == "'" or c == '"':
            q = c
            i += 1
            buf = []
            while True:
                if i >= n:
                    raise ParseError(start, "unterminated quoted item")
                ch = text[i]
                if ch == q:
                    if i + 1 < n and text[i + 1] == q:
                        buf.append(q)
                        i += 2
                        continue
                    i += 1
                    break
                if ch == "\\":
                    if i + 1 >= n:
                        raise ParseError(i, "bad escape")
                    e = text[i + 1]
                    buf.append({"n": "\n", "t": "\t", "\\": "\\", "'": "'", '"': '"', "0": "\0"}.get(e, e))
                    i += 2
                    continue
                buf.append(ch)
                i += 1
            toks.append(Tok("qatom" if q == "'" else "str", "".join(buf), start, layout))
        elif c in PUNCT:
            i += 1
            toks.append(Tok("punct", c, start, layout))
        elif c in SOLO:
            i += 1
            toks.append(Tok("atom", c, start, layout))
        elif c in SYMBOL_CHARS:
            while i < n and text[i] in SYMBOL_CHARS:
                i += 1
            sym = text[start:i]
            if sym == "." and (i >= n or text[i].isspace() or text[i] == "%"):
                toks.append(Tok("end", ".", start, layout))
            else:
                toks.append(Tok("atom", sym, start, layout))
        else:
            raise ParseError(i, f"unexpected character {c!r}")
        layout = False


class Parser:
    def __init__(self, text: str, varmap: dict | None = None):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.varmap = {} if varmap is None else varmap

    def peek(self) -> Tok:
        return self.toks[self.i]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind, value=None) -> Tok:
        t = self.next()
        if t.kind != kind or (value is not None and t.value != value):
            raise ParseError(t.pos, f"expected {value or kind}")
        return t

    def at_term_end(self) -> bool:
        t = self.peek()
        return t.kind in ("end", "eof") or (t.kind == "punct" and t.value in ")]}")

    def parse(self, max_prec: int = 1200):
        left, left_prec = self.parse_primary(max_prec)
        return self.parse_infix(left, left_prec, max_prec)

    def parse_infix(self, left, left_prec, max_prec):
        while True:
            t = self.peek()
            if t.kind == "atom":
                name = t.value
            elif t.kind == "punct" and t.value == "|":
                name = "|"
            else:
                break
            op = INFIX_OPS.get(name)
            if op is None:
                break
            prec, typ = op
            if prec > max_prec:
                break
            la = prec - 1 if typ[0] == "x" else prec
            ra = prec - 1 if typ[2] == "x" else prec
            if left_prec > la:
                break
            self.next()
            right = self.parse(ra)
            if name == "|":
                name = ";"
            left = Struct(name, [left, right])
            left_prec = prec
        return left

    def parse_arglist(self) -> list:
        args = [self.parse(999)]
        while True:
            t = self.next()
            if t.kind == "atom" and t.value == ",":
                args.append(self.parse(999))
            elif t.kind == "punct" and t.value == ")":
                return args
            else:
                raise ParseError(t.pos, "expected , or )")

    def parse_primary(self, max_prec):
        t = self.next()
        k = t.kind
        if k == "int":
            return Int(t.value), 0
        if k == "var":
            if t.value == "_":
                return Var(), 0
            v = self.varmap.get(t.value)
            if v is None:
                v = self.varmap[t.value] = Var()
            return v, 0
        if k == "str":
            # double-quoted text reads as an atom
            return Atom(t.value), 0
        if k == "punct":
            if t.value == "(":
                inner = self.parse(1200)
                self.expect("punct", ")")
                return inner, 0
            if t.value == "[":
                nt = self.peek()
                if nt.kind == "punct" and nt.value == "]":
                    self.next()
                    return self._after_name("[]", t)
                items = [self.parse(999)]
                tail = NIL
                while True:
                    nt = self.next()
                    if nt.kind == "atom" and nt.value == ",":
                        items.append(self.parse(999))
                    elif nt.kind == "atom" and nt.value == "|":
                        tail = self.parse(999)
                        self.expect("punct", "]")
                        break
                    elif nt.kind == "punct" and nt.value == "]":
                        break
                    else:
                        raise ParseError(nt.pos, "expected , | or ]")
                out = tail
                for x in reversed(items):
                    out = Struct(".", [x, out])
                return out, 0
            if t.value == "{":
                nt = self.peek()
                if nt.kind == "punct" and nt.value == "}":
                    self.next()
                    return self._after_name("{}", t)
                inner = self.parse(1200)
                self.expect("punct", "}")
                return Struct("{}", [inner]), 0
            raise ParseError(t.pos, f"unexpected {t.value}")
        if k in ("atom", "qatom"):
            name = t.value
            nt = self.peek()
            if nt.kind == "punct" and nt.value == "(" and not nt.layout_before:
                self.next()
                return Struct(name, self.parse_arglist()), 0
            if k == "atom":
                if name == "-" and nt.kind == "int" and not nt.layout_before:
                    self.next()
                    return Int(-nt.value), 0
                pre = PREFIX_OPS.get(name)
                if pre is not None and not self.at_term_end() and not self._infix_next():
                    prec, typ = pre
                    if prec > max_prec:
                        prec, typ = 999, typ
                    arg_max = prec - 1 if typ == "fx" else prec
                    arg = self.parse(arg_max)
                    return Struct(name, [arg]), prec
                if name in INFIX_OPS or name in PREFIX_OPS:
                    prec = max(INFIX_OPS.get(name, (0,))[0], PREFIX_OPS.get(name, (0,))[0])
                    return Atom(name), prec if prec <= max_prec else 0
            return Atom(name), 0
        if k == "end":
            raise ParseError(t.pos, "unexpected end of clause")
        raise ParseError(t.pos, "unexpected end of input")

    def _after_name(self, name, tok):
        nt = self.peek()
        if nt.kind == "punct" and nt.value == "(" and not nt.layout_before:
            self.next()
            return Struct(name, self.parse_arglist()), 0
        return Atom(name), 0

    def _infix_next(self) -> bool:
        # "- (a)" style: a following infix operator means the prefix name is an operand
        t = self.peek()
        if t.kind == "atom" and t.value in INFIX_OPS and t.value not in PREFIX_OPS:
            nt = self.toks[self.i + 1] if self.i + 1 < len(self.toks) else None
            if nt is not None and nt.kind == "punct" and nt.value == "(" and not nt.layout_before:
                return False
            return True
        return False


def read_term(text: str, varmap: dict | None = None):
    """Parse exactly one term; a trailing ``.`` is optional."""
    p = Parser(text, varmap)
    t = p.parse(1200)
    nt = p.next()
    if nt.kind == "end":
        nt = p.next()
    if nt.kind != "eof":
        raise ParseError(nt.pos, "trailing input")
    return t


def read_clauses(text: str) -> list[tuple[object, dict]]:
    """All ``.``-terminated terms in ``text`` with their variable-name maps."""
    p = Parser(text)
    out = []
    while p.peek().kind != "eof":
        p.varmap = {}
        t = p.parse(1200)
        p.expect("end")
        out.append((t, p.varmap))
    return out


def read_query(text: str) -> tuple[object, dict]:
    varmap: dict = {}
    text = text.strip()
    if text.startswith("?-"):
        text = text[2:]
    return read_term(text, varmap), varmap


__all__ = ["ParseError", "read_term", "read_clauses", "read_query", "tokenize", "mk"]
