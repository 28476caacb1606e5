"""Payload dispatch table shared by all modules.

Each module registers its handlers with :func:`command`. A handler receives
the live :class:`WorldState`, the call :class:`Ctx`, and the payload dict;
it raises a :class:`~commons_kernel.errors.DomainError` to refuse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .errors import Malformed, MechanismDisabled
from .state import WorldState

Handler = Callable[[WorldState, "Ctx", dict], Any]

COMMANDS: dict[str, Handler] = {}
MECHANISM_OF: dict[str, str | None] = {}


@dataclass
class Ctx:
    author: str
    tick: int
    seq: int
    # set when a passed proposal's action runs on behalf of the collective
    privileged: bool = False
    touched: set = field(default_factory=set)

    def touch(self, st: WorldState, *applications: str) -> None:
        """Attribute this event to applications whose mechanism is enabled."""
        for app in applications:
            if st.enabled(app.split("-")[0]):
                self.touched.add(app)


def command(kind: str, mechanism: str | None = None):
    """Register a handler. Kinds tied to a mechanism are refused when it is off."""

    def register(fn: Handler) -> Handler:
        COMMANDS[kind] = fn
        MECHANISM_OF[kind] = mechanism
        return fn

    return register


def dispatch(st: WorldState, ctx: Ctx, payload: dict) -> Any:
    if not isinstance(payload, dict) or not isinstance(payload.get("kind"), str):
        raise Malformed("payload must be a mapping with a string 'kind'")
    kind = payload["kind"]
    handler = COMMANDS.get(kind)
    if handler is None:
        raise Malformed(f"unknown payload kind {kind!r}")
    mech = MECHANISM_OF[kind]
    if mech is not None and not st.enabled(mech):
        raise MechanismDisabled(f"{kind} requires {mech}")
    try:
        return handler(st, ctx, payload)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise Malformed(f"{kind}: {type(exc).__name__}: {exc}") from exc


def frac(x: Any) -> Fraction:
    """Exact rational from an int, a decimal string like "0.2", or "1/3"."""
    if isinstance(x, bool):
        raise TypeError("bool is not a number")
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def amount(x: Any) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < 0:
        raise ValueError(f"amount must be a non-negative integer, got {x!r}")
    return x
