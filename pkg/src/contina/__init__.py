"""Mobile-continuation logic runtime with Linda coordination."""

from . import builtins, linda, mobility, node  # noqa: F401  (builtin registration)
from .runtime import Runtime
from .store import ClauseStore
from .term import Atom, Int, PrologError, Struct, Var, canonical_text, parse_term

__version__ = "0.1.0"

__all__ = [
    "Atom", "ClauseStore", "Int", "PrologError", "Runtime", "Struct", "Var",
    "canonical_text", "parse_term",
]
