"""Token classes, balances, locks and address roles.

Holders are address ids or escrow accounts such as ``pool:budget``; the
latter let pools, curves, markets and courts hold currency under the same
conservation rule as everyone else.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .commands import Ctx, amount, command
from .errors import (
    AccessDenied,
    Insufficient,
    NonTransferable,
    Unauthorized,
    UnknownClass,
)
from .state import WorldState

GLOBAL = "global"


class TokenKind(str, enum.Enum):
    FUNGIBLE = "Fungible"
    ACCESS = "Access"
    RESOURCE = "Resource"
    REPUTATION = "Reputation"


@dataclass(frozen=True)
class TokenClass:
    id: str
    kind: TokenKind
    transferable: bool

    def __post_init__(self):
        if self.kind is TokenKind.REPUTATION and self.transferable:
            raise ValueError(f"reputation class {self.id} cannot be transferable")


def token_class(st: WorldState, cls: str) -> TokenClass:
    tc = st.table("token.class").get(cls)
    if tc is None:
        raise UnknownClass(cls)
    return tc


def define(st: WorldState, tc: TokenClass) -> None:
    st.table("token.class")[tc.id] = tc
    supply = st.table("token.supply")
    if tc.id not in supply:
        supply[tc.id] = 0


def balance(st: WorldState, cls: str, holder: str) -> int:
    return st.table("token.balance").get((cls, holder), 0)


def supply(st: WorldState, cls: str) -> int:
    return st.table("token.supply").get(cls, 0)


def holders(st: WorldState, cls: str) -> dict[str, int]:
    return {h: v for (c, h), v in st.table("token.balance").items() if c == cls}


def supply_audit(st: WorldState) -> list[tuple[str, int, int]]:
    """(class, recorded supply, sum of balances) for every class where they differ."""
    sums: dict[str, int] = {}
    for (c, _), v in st.table("token.balance").items():
        sums[c] = sums.get(c, 0) + v
    return [
        (c, supply(st, c), sums.get(c, 0))
        for c in sorted(st.table("token.class"))
        if supply(st, c) != sums.get(c, 0)
    ]


def _set_balance(st: WorldState, cls: str, holder: str, value: int) -> None:
    t = st.table("token.balance")
    if value:
        t[(cls, holder)] = value
    elif (cls, holder) in t:
        del t[(cls, holder)]


# -- locks ---------------------------------------------------------------

def locked(st: WorldState, cls: str, holder: str, tick: int | None = None) -> int:
    now = st.tick if tick is None else tick
    return sum(amt for _, amt, until in st.table("token.lock").get((cls, holder), ()) if until < 0 or until > now)


def free_balance(st: WorldState, cls: str, holder: str) -> int:
    return max(0, balance(st, cls, holder) - locked(st, cls, holder))


def lock(st: WorldState, cls: str, holder: str, lock_id: str, amt: int, until: int = -1) -> None:
    """Lock ``amt`` until tick ``until`` (exclusive); ``-1`` means until unlocked."""
    if free_balance(st, cls, holder) < amt:
        raise Insufficient(f"{holder} has {free_balance(st, cls, holder)} free {cls}, needs {amt}")
    t = st.table("token.lock")
    now = st.tick
    live = tuple(x for x in t.get((cls, holder), ()) if x[0] != lock_id and (x[2] < 0 or x[2] > now))
    current = next((x[1] for x in t.get((cls, holder), ()) if x[0] == lock_id), 0)
    t[(cls, holder)] = live + ((lock_id, current + amt, until),)


def unlock(st: WorldState, cls: str, holder: str, lock_id: str, amt: int | None = None) -> int:
    t = st.table("token.lock")
    entries = t.get((cls, holder), ())
    kept, released = [], 0
    for lid, held, until in entries:
        if lid == lock_id:
            released = held if amt is None else min(amt, held)
            if held - released:
                kept.append((lid, held - released, until))
        else:
            kept.append((lid, held, until))
    if kept:
        t[(cls, holder)] = tuple(kept)
    elif (cls, holder) in t:
        del t[(cls, holder)]
    return released


# -- internal movements (no authorization; callers check) -----------------

def credit(st: WorldState, cls: str, holder: str, amt: int) -> None:
    token_class(st, cls)
    if amt:
        _set_balance(st, cls, holder, balance(st, cls, holder) + amt)
        st.table("token.supply")[cls] = supply(st, cls) + amt


def debit(st: WorldState, cls: str, holder: str, amt: int) -> None:
    token_class(st, cls)
    have = balance(st, cls, holder)
    if have < amt:
        raise Insufficient(f"{holder} holds {have} {cls}, needs {amt}")
    if amt:
        _set_balance(st, cls, holder, have - amt)
        st.table("token.supply")[cls] = supply(st, cls) - amt


def move(st: WorldState, cls: str, src: str, dst: str, amt: int, *, respect_locks: bool = True) -> None:
    tc = token_class(st, cls)
    if tc.kind is TokenKind.REPUTATION:
        raise NonTransferable(cls)
    avail = free_balance(st, cls, src) if respect_locks else balance(st, cls, src)
    if avail < amt:
        raise Insufficient(f"{src} has {avail} spendable {cls}, needs {amt}")
    if amt and src != dst:
        _set_balance(st, cls, src, balance(st, cls, src) - amt)
        _set_balance(st, cls, dst, balance(st, cls, dst) + amt)


# -- roles and access ------------------------------------------------------

def has_role(st: WorldState, holder: str, name: str, scope: str = GLOBAL) -> bool:
    roles = st.table("role")
    return (holder, name, scope) in roles or (holder, name, GLOBAL) in roles


def roles_of(st: WorldState, holder: str) -> list[tuple[str, str]]:
    return sorted((n, s) for (h, n, s) in st.table("role") if h == holder)


def check_access(st: WorldState, actor: str, requirement: dict) -> bool:
    """Pure predicate: ``{"role": name[, "scope": s]}`` or ``{"token": cls, "min": n}``."""
    if "role" in requirement:
        return has_role(st, actor, requirement["role"], requirement.get("scope", GLOBAL))
    if "token" in requirement:
        return balance(st, requirement["token"], actor) >= requirement.get("min", 1)
    raise ValueError(f"unrecognised requirement {requirement!r}")


def gate(st: WorldState, actor: str, requirement: dict | None) -> None:
    """Raise AccessDenied unless ``actor`` meets ``requirement``; M1 off admits all."""
    if requirement and st.enabled("M1") and not check_access(st, actor, requirement):
        raise AccessDenied(f"{actor} lacks {requirement}")


def is_governor(st: WorldState, ctx: Ctx) -> bool:
    return ctx.privileged or has_role(st, ctx.author, "governance")


def grant_role(st: WorldState, holder: str, name: str, scope: str = GLOBAL) -> None:
    st.table("role")[(holder, name, scope)] = True


def revoke_role(st: WorldState, holder: str, name: str, scope: str = GLOBAL) -> None:
    st.table("role").pop((holder, name, scope))


# -- public operations -----------------------------------------------------

def mint(st: WorldState, ctx: Ctx, cls: str, to: str, amt: int) -> int:
    token_class(st, cls)
    if not (ctx.privileged or has_role(st, ctx.author, "minter", cls)):
        raise Unauthorized(f"{ctx.author} is not a minter of {cls}")
    credit(st, cls, to, amt)
    return supply(st, cls)


def burn(st: WorldState, ctx: Ctx, cls: str, frm: str, amt: int) -> int:
    token_class(st, cls)
    authority = ctx.privileged or has_role(st, ctx.author, "sanctions")
    if frm != ctx.author and not authority:
        raise Unauthorized(f"{ctx.author} may not burn {cls} held by {frm}")
    if not authority and free_balance(st, cls, frm) < amt:
        raise Insufficient(f"{frm} has {free_balance(st, cls, frm)} free {cls}")
    debit(st, cls, frm, amt)
    return supply(st, cls)


def transfer(st: WorldState, ctx: Ctx, cls: str, frm: str, to: str, amt: int) -> None:
    tc = token_class(st, cls)
    if not tc.transferable:
        raise NonTransferable(cls)
    if frm != ctx.author and not ctx.privileged:
        raise Unauthorized("only the holder can transfer")
    move(st, cls, frm, to, amt)


def _touch_class(st: WorldState, ctx: Ctx, cls: str) -> None:
    kind = token_class(st, cls).kind
    if kind is TokenKind.ACCESS:
        ctx.touch(st, "M1-1")
    elif kind is TokenKind.REPUTATION:
        ctx.touch(st, "M9-1")
    elif kind is TokenKind.RESOURCE:
        ctx.touch(st, "M2-1")


@command("token.define")
def _define(st, ctx, p):
    if not is_governor(st, ctx):
        raise Unauthorized("defining token classes is a governance action")
    define(st, TokenClass(p["id"], TokenKind(p["token_kind"]), bool(p.get("transferable", True))))
    return p["id"]


@command("token.mint")
def _mint(st, ctx, p):
    _touch_class(st, ctx, p["class"])
    return mint(st, ctx, p["class"], p["to"], amount(p["amount"]))


@command("token.burn")
def _burn(st, ctx, p):
    _touch_class(st, ctx, p["class"])
    return burn(st, ctx, p["class"], p.get("from", ctx.author), amount(p["amount"]))


@command("token.transfer")
def _transfer(st, ctx, p):
    _touch_class(st, ctx, p["class"])
    transfer(st, ctx, p["class"], ctx.author, p["to"], amount(p["amount"]))


@command("role.grant")
def _grant(st, ctx, p):
    if not is_governor(st, ctx):
        raise Unauthorized(f"{ctx.author} cannot grant roles")
    ctx.touch(st, "M1-1")
    grant_role(st, p["holder"], p["name"], p.get("scope", GLOBAL))


@command("role.revoke")
def _revoke(st, ctx, p):
    if not is_governor(st, ctx):
        raise Unauthorized(f"{ctx.author} cannot revoke roles")
    ctx.touch(st, "M1-1")
    revoke_role(st, p["holder"], p["name"], p.get("scope", GLOBAL))


def load_genesis(st: WorldState, cfg: dict) -> None:
    for spec in cfg.get("tokens", []):
        define(st, TokenClass(spec["id"], TokenKind(spec["kind"]), bool(spec.get("transferable", True))))
        for holder, amt in sorted(spec.get("balances", {}).items()):
            credit(st, spec["id"], holder, amount(amt))
    for r in cfg.get("roles", []):
        grant_role(st, r["holder"], r["name"], r.get("scope", GLOBAL))
