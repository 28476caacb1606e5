"""Resource pools and linear bonding curves.

A pool's reserve is the balance of its escrow account ``pool:<id>``.
A curve prices its token at ``p0 + k*s``; the curve reserve is kept equal to
``ceil(C(s))`` where ``C(s) = p0*s + k*s**2/2`` is the exact integral of the
price up to supply ``s``. Buys are charged, and sells paid, the difference of
that rounded integral, so rounding never leaves the reserve short and a
zero-fee round trip restores it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from . import tokens
from .commands import Ctx, amount, command, frac
from .errors import (
    Insufficient,
    InsufficientReserve,
    NoApproval,
    NotFound,
    Unauthorized,
    ZeroSpend,
)
from .ledger import is_machine
from .state import WorldState


@dataclass(frozen=True)
class ResourcePool:
    id: str
    resource_class: str
    rule: str | None = None

    @property
    def account(self) -> str:
        return f"pool:{self.id}"


@dataclass(frozen=True)
class Approval:
    id: str
    actor: str
    pool: str
    amount: int
    tick: int
    used: bool = False


@dataclass(frozen=True)
class BondingCurve:
    id: str
    token: str
    currency: str
    p0: Fraction
    k: Fraction
    supply: int = 0
    entry_tribute: Fraction = Fraction(0)
    exit_tax: Fraction = Fraction(0)
    funding_pool: str | None = None

    def __post_init__(self):
        if self.p0 <= 0 or self.k < 0:
            raise ValueError("curve needs p0 > 0 and k >= 0")
        if not (0 <= self.entry_tribute < 1 and 0 <= self.exit_tax < 1):
            raise ValueError("tribute and tax must lie in [0, 1)")

    @property
    def account(self) -> str:
        return f"curve:{self.id}"


def pool(st: WorldState, pool_id: str) -> ResourcePool:
    p = st.table("pool").get(pool_id)
    if p is None:
        raise NotFound(f"pool {pool_id}")
    return p


def reserve(st: WorldState, pool_id: str) -> int:
    p = pool(st, pool_id)
    return tokens.balance(st, p.resource_class, p.account)


def deposit(st: WorldState, ctx: Ctx, pool_id: str, amt: int) -> int:
    p = pool(st, pool_id)
    tokens.move(st, p.resource_class, ctx.author, p.account, amt)
    ctx.touch(st, "M2-1")
    return reserve(st, pool_id)


def issue_approval(st: WorldState, actor: str, pool_id: str, amt: int, tick: int, approval_id: str) -> Approval:
    ap = Approval(approval_id, actor, pool_id, amt, tick)
    st.table("approval")[approval_id] = ap
    return ap


def withdraw(st: WorldState, ctx: Ctx, pool_id: str, to: str, amt: int, approval_id: str | None) -> int:
    """Pay ``amt`` out of a pool against a single-use approval for this tick."""
    p = pool(st, pool_id)
    ap = st.table("approval").get(approval_id) if approval_id else None
    if (
        ap is None
        or ap.used
        or ap.actor != to
        or ap.pool != pool_id
        or ap.amount != amt
        or ap.tick != ctx.tick
    ):
        raise NoApproval(f"no live approval {approval_id!r} for {amt} from {pool_id}")
    have = tokens.balance(st, p.resource_class, p.account)
    if have < amt:
        raise InsufficientReserve(f"pool {pool_id} holds {have}, asked {amt}")
    st.table("approval")[ap.id] = replace(ap, used=True)
    tokens.move(st, p.resource_class, p.account, to, amt)
    log = st.table("withdrawal")
    log[len(log)] = (ctx.tick, pool_id, to, amt, ap.id)
    ctx.touch(st, "M2-1")
    if is_machine(st, to):
        ctx.touch(st, "M1-2", "M4-2")
    return reserve(st, pool_id)


def withdrawals(st: WorldState) -> list[tuple]:
    t = st.table("withdrawal")
    return [t[i] for i in range(len(t))]


def withdrawal_report(st: WorldState) -> str:
    from .ledger import label_of

    rows = ["tick\tpool\tactor\tamount\tapproval"]
    for tick, pool_id, actor, amt, ap in withdrawals(st):
        rows.append(f"{tick}\t{pool_id}\t{label_of(st, actor)}\t{amt}\t{ap}")
    return "\n".join(rows) + "\n"


# -- bonding curve ---------------------------------------------------------

def integral(p0: Fraction, k: Fraction, s: int) -> Fraction:
    return p0 * s + k * s * s / 2


def cost(p0: Fraction, k: Fraction, s: int, ds: int) -> Fraction:
    """Exact currency cost of moving supply from ``s`` to ``s + ds``."""
    return p0 * ds + k * ((s + ds) ** 2 - s * s) / 2


def rounded_reserve(c: BondingCurve, s: int | None = None) -> int:
    return math.ceil(integral(c.p0, c.k, c.supply if s is None else s))


def max_issuable(c: BondingCurve, budget: int) -> int:
    """Largest ``ds`` with ``cost(s, s + ds) <= budget``."""
    if budget <= 0:
        return 0
    if c.k == 0:
        return int(budget / c.p0)
    # k/2 ds^2 + (p0 + k s) ds - budget = 0
    b = c.p0 + c.k * c.supply
    disc = b * b + 2 * c.k * budget
    guess = int((math.sqrt(disc) - float(b)) / float(c.k)) if disc >= 0 else 0
    ds = max(0, guess)
    while ds > 0 and cost(c.p0, c.k, c.supply, ds) > budget:
        ds -= 1
    while cost(c.p0, c.k, c.supply, ds + 1) <= budget:
        ds += 1
    return ds


def curve(st: WorldState, curve_id: str) -> BondingCurve:
    c = st.table("curve").get(curve_id)
    if c is None:
        raise NotFound(f"curve {curve_id}")
    return c


def spot_price(st: WorldState, curve_id: str) -> Fraction:
    c = curve(st, curve_id)
    return c.p0 + c.k * c.supply


def curve_reserve(st: WorldState, curve_id: str) -> int:
    c = curve(st, curve_id)
    return tokens.balance(st, c.currency, c.account)


def curve_buy(st: WorldState, ctx: Ctx, curve_id: str, spend: int) -> dict:
    c = curve(st, curve_id)
    if spend <= 0:
        raise ZeroSpend(curve_id)
    if tokens.free_balance(st, c.currency, ctx.author) < spend:
        raise Insufficient(f"{ctx.author} cannot spend {spend} {c.currency}")
    tribute = math.floor(c.entry_tribute * spend)
    net = spend - tribute
    issued = max_issuable(c, net)
    charge = rounded_reserve(c, c.supply + issued) - rounded_reserve(c)
    if tribute:
        tokens.move(st, c.currency, ctx.author, pool(st, c.funding_pool).account, tribute)
    tokens.move(st, c.currency, ctx.author, c.account, charge)
    tokens.credit(st, c.token, ctx.author, issued)
    st.table("curve")[curve_id] = replace(c, supply=c.supply + issued)
    ctx.touch(st, "M2-2")
    return {"issued": issued, "charge": charge, "tribute": tribute, "refund": net - charge}


def curve_sell(st: WorldState, ctx: Ctx, curve_id: str, ds: int) -> dict:
    c = curve(st, curve_id)
    if ds <= 0 or tokens.free_balance(st, c.token, ctx.author) < ds:
        raise Insufficient(f"{ctx.author} cannot sell {ds} {c.token}")
    gross = rounded_reserve(c) - rounded_reserve(c, c.supply - ds)
    tax = math.floor(c.exit_tax * gross)
    tokens.debit(st, c.token, ctx.author, ds)
    tokens.move(st, c.currency, c.account, ctx.author, gross - tax)
    if tax:
        tokens.move(st, c.currency, c.account, pool(st, c.funding_pool).account, tax)
    st.table("curve")[curve_id] = replace(c, supply=c.supply - ds)
    ctx.touch(st, "M2-2")
    return {"gross": gross, "tax": tax, "paid": gross - tax}


def reserve_audit(st: WorldState, curve_id: str) -> tuple[bool, int, int]:
    """(ok, expected, actual): the reserve must equal the rounded integral."""
    c = curve(st, curve_id)
    expected = rounded_reserve(c)
    actual = curve_reserve(st, curve_id)
    return expected == actual and c.supply == tokens.supply(st, c.token), expected, actual


# -- commands ----------------------------------------------------------------

@command("pool.deposit")
def _deposit(st, ctx, p):
    return deposit(st, ctx, p["pool"], amount(p["amount"]))


@command("pool.withdraw")
def _withdraw(st, ctx, p):
    return withdraw(st, ctx, p["pool"], ctx.author, amount(p["amount"]), p.get("approval"))


@command("pool.spend")
def _spend(st, ctx, p):
    """Governance payout; the approval is the executing proposal itself."""
    if not ctx.privileged:
        raise Unauthorized("pool.spend runs only as a passed proposal's action")
    amt = amount(p["amount"])
    ap = issue_approval(st, p["to"], p["pool"], amt, ctx.tick, f"proposal:{p.get('proposal', ctx.seq)}")
    return withdraw(st, ctx, p["pool"], p["to"], amt, ap.id)


@command("curve.buy", "M2")
def _buy(st, ctx, p):
    return curve_buy(st, ctx, p["curve"], amount(p["spend"]))


@command("curve.sell", "M2")
def _sell(st, ctx, p):
    return curve_sell(st, ctx, p["curve"], amount(p["tokens"]))


def load_genesis(st: WorldState, cfg: dict) -> None:
    for spec in cfg.get("pools", []):
        p = ResourcePool(spec["id"], spec["resource_class"], spec.get("rule"))
        tokens.token_class(st, p.resource_class)
        st.table("pool")[p.id] = p
        tokens.credit(st, p.resource_class, p.account, amount(spec.get("reserve", 0)))
    for spec in cfg.get("curves", []):
        c = BondingCurve(
            spec["id"],
            spec["token"],
            spec["currency"],
            frac(spec["p0"]),
            frac(spec.get("k", 0)),
            entry_tribute=frac(spec.get("entry_tribute", 0)),
            exit_tax=frac(spec.get("exit_tax", 0)),
            funding_pool=spec.get("funding_pool"),
        )
        tokens.token_class(st, c.token)
        tokens.token_class(st, c.currency)
        if (c.entry_tribute or c.exit_tax) and c.funding_pool is None:
            raise ValueError(f"curve {c.id} has fees but no funding pool")
        st.table("curve")[c.id] = c
