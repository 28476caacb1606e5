"""Reverse-auction tendering and pari-mutuel prediction markets."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from . import tokens
from .commands import Ctx, amount, command, frac
from .errors import (
    AccessDenied,
    AlreadyClosed,
    DuplicateBid,
    DuplicateEntry,
    MarketClosed,
    NoBids,
    NotFound,
    NotYetDeadline,
    Unauthorized,
)
from .ledger import is_machine
from .rules import largest_remainder
from .state import WorldState


@dataclass(frozen=True)
class Tender:
    id: str
    poster: str
    work_package: str
    deadline: int
    min_reputation: int = 0
    required_role: str | None = None
    escrow: int = 0
    on_no_bids: str = "cancel"  # or "reopen"
    reopen_ticks: int = 5
    status: str = "Open"
    winner: str | None = None
    price: int | None = None


@dataclass(frozen=True)
class Bid:
    tender: str
    bidder: str
    price: int
    submitted_tick: int


@dataclass(frozen=True)
class PredictionMarket:
    id: str
    question: str
    outcomes: tuple
    fee: Fraction = Fraction(0)
    fee_pool: str | None = None
    status: str = "Open"  # Open | Resolved | Settled
    outcome: str | None = None


def tender(st: WorldState, tender_id: str) -> Tender:
    t = st.table("tender").get(tender_id)
    if t is None:
        raise NotFound(f"tender {tender_id}")
    return t


def bids(st: WorldState, tender_id: str) -> tuple:
    return st.table("bid").get(tender_id, ())


def post_tender(st: WorldState, ctx: Ctx, spec: dict) -> Tender:
    tid = spec["id"]
    if tid in st.table("tender"):
        raise DuplicateEntry(f"tender {tid}")
    deadline = int(spec["deadline"])
    if deadline <= ctx.tick:
        raise ValueError("deadline must lie in the future")
    on_no_bids = spec.get("on_no_bids", "cancel")
    if on_no_bids not in ("cancel", "reopen"):
        raise ValueError(f"on_no_bids must be cancel or reopen, got {on_no_bids!r}")
    t = Tender(
        tid,
        ctx.author,
        spec.get("work_package", tid),
        deadline,
        amount(spec.get("min_reputation", 0)),
        spec.get("required_role"),
        amount(spec.get("escrow", 0)),
        on_no_bids,
        int(spec.get("reopen_ticks", 5)),
    )
    if t.escrow:
        tokens.move(st, st.config("currency"), ctx.author, f"tender:{tid}", t.escrow)
    st.table("tender")[tid] = t
    ctx.touch(st, "M3-1")
    return t


def eligible(st: WorldState, t: Tender, bidder: str) -> bool:
    if not st.enabled("M1"):
        return True
    if t.min_reputation:
        from .accountability import reputation_gate

        if not reputation_gate(st, bidder, t.min_reputation):
            return False
    return t.required_role is None or tokens.has_role(st, bidder, t.required_role)


def submit_bid(st: WorldState, ctx: Ctx, tender_id: str, price: int) -> Bid:
    t = tender(st, tender_id)
    if t.status != "Open" or ctx.tick >= t.deadline:
        raise MarketClosed(f"tender {tender_id} is not accepting bids")
    if any(b.bidder == ctx.author for b in bids(st, tender_id)):
        raise DuplicateBid(f"{ctx.author} already bid on {tender_id}")
    if not eligible(st, t, ctx.author):
        raise AccessDenied(f"{ctx.author} does not meet the constraints of {tender_id}")
    if t.min_reputation:
        ctx.touch(st, "M9-1")
    if t.required_role:
        ctx.touch(st, "M1-1")
    if is_machine(st, ctx.author):
        ctx.touch(st, "M1-2")
    b = Bid(tender_id, ctx.author, price, ctx.tick)
    st.table("bid")[tender_id] = bids(st, tender_id) + (b,)
    ctx.touch(st, "M3-1")
    return b


def select_winner(candidates) -> Bid:
    """Lowest price, then earliest submission, then smallest bidder id."""
    return min(candidates, key=lambda b: (b.price, b.submitted_tick, b.bidder))


def close_auction(st: WorldState, ctx: Ctx, tender_id: str) -> dict:
    t = tender(st, tender_id)
    if t.status != "Open":
        raise AlreadyClosed(tender_id)
    if ctx.tick < t.deadline:
        raise NotYetDeadline(f"{tender_id} closes at tick {t.deadline}")
    candidates = bids(st, tender_id)
    rows = st.table("auction")
    if not candidates:
        if t.on_no_bids == "reopen":
            st.table("tender")[tender_id] = replace(t, deadline=ctx.tick + t.reopen_ticks)
            status = "Reopened"
        else:
            st.table("tender")[tender_id] = replace(t, status="Cancelled")
            _refund_escrow(st, t)
            status = "Cancelled"
        rows[len(rows)] = (ctx.tick, tender_id, None, None, 0)
        ctx.touch(st, "M3-1")
        # reported rather than raised so the reopen/cancel transition is kept
        return {"status": status, "error": NoBids.__name__}
    win = select_winner(candidates)
    st.table("tender")[tender_id] = replace(t, status="Closed", winner=win.bidder, price=win.price)
    _refund_escrow(st, t)
    rows[len(rows)] = (ctx.tick, tender_id, win.bidder, win.price, len(candidates))
    ctx.touch(st, "M3-1")
    return {"status": "Closed", "winner": win.bidder, "price": win.price, "bids": len(candidates)}


def _refund_escrow(st: WorldState, t: Tender) -> None:
    if t.escrow:
        tokens.move(st, st.config("currency"), f"tender:{t.id}", t.poster, t.escrow)


def auction_report(st: WorldState) -> str:
    from .ledger import label_of

    rows = ["tick\ttender\twinner\tprice\tbids_considered"]
    t = st.table("auction")
    for i in range(len(t)):
        tick, tid, winner, price, n = t[i]
        who = label_of(st, winner) if winner else "-"
        rows.append(f"{tick}\t{tid}\t{who}\t{'-' if price is None else price}\t{n}")
    return "\n".join(rows) + "\n"


# -- prediction markets ---------------------------------------------------------

def market(st: WorldState, market_id: str) -> PredictionMarket:
    m = st.table("pm").get(market_id)
    if m is None:
        raise NotFound(f"market {market_id}")
    return m


def stakes(st: WorldState, market_id: str) -> dict[tuple[str, str], int]:
    return {(a, o): s for (m, a, o), s in st.table("pm.stake").items() if m == market_id}


def open_market(st: WorldState, ctx: Ctx, spec: dict) -> PredictionMarket:
    mid = spec["id"]
    if mid in st.table("pm"):
        raise DuplicateEntry(f"market {mid}")
    outcomes = tuple(spec["outcomes"])
    if len(outcomes) < 2 or len(set(outcomes)) != len(outcomes):
        raise ValueError("a market needs at least two distinct outcomes")
    m = PredictionMarket(mid, spec.get("question", mid), outcomes, frac(spec.get("fee", 0)), spec.get("fee_pool"))
    if not 0 <= m.fee < 1:
        raise ValueError("fee must lie in [0, 1)")
    if m.fee and m.fee_pool is None:
        raise ValueError("a fee needs a fee pool")
    st.table("pm")[mid] = m
    ctx.touch(st, "M6-1")
    return m


def bet(st: WorldState, ctx: Ctx, market_id: str, outcome: str, stake: int) -> int:
    m = market(st, market_id)
    if m.status != "Open":
        raise MarketClosed(market_id)
    if outcome not in m.outcomes:
        raise ValueError(f"unknown outcome {outcome!r}")
    if stake <= 0:
        raise ValueError("stake must be positive")
    tokens.move(st, st.config("currency"), ctx.author, f"market:{market_id}", stake)
    t = st.table("pm.stake")
    key = (market_id, ctx.author, outcome)
    t[key] = t.get(key, 0) + stake
    ctx.touch(st, "M6-1")
    return t[key]


def resolve_market(st: WorldState, ctx: Ctx, market_id: str, outcome: str) -> None:
    m = market(st, market_id)
    if not (ctx.privileged or tokens.has_role(st, ctx.author, "oracle", market_id)):
        raise Unauthorized(f"{ctx.author} is not an oracle for {market_id}")
    if m.status != "Open":
        raise MarketClosed(market_id)
    if outcome not in m.outcomes:
        raise ValueError(f"unknown outcome {outcome!r}")
    st.table("pm")[market_id] = replace(m, status="Resolved", outcome=outcome)
    ctx.touch(st, "M6-1")


def compute_payouts(
    stake_map: dict[tuple[str, str], int], outcome: str, fee: Fraction
) -> tuple[dict[str, int], int]:
    """(payouts by address, fee). With no winning stake everyone is refunded."""
    total = sum(stake_map.values())
    winners: dict[str, int] = {}
    for (addr, o), s in stake_map.items():
        if o == outcome:
            winners[addr] = winners.get(addr, 0) + s
    if not winners:
        refunds: dict[str, int] = {}
        for (addr, _), s in stake_map.items():
            refunds[addr] = refunds.get(addr, 0) + s
        return refunds, 0
    fee_amt = math.floor(fee * total)
    pay = largest_remainder(total - fee_amt, [(a, Fraction(s)) for a, s in winners.items()])
    return pay, fee_amt


def settle_market(st: WorldState, ctx: Ctx, market_id: str) -> dict:
    m = market(st, market_id)
    if m.status == "Settled":
        raise AlreadyClosed(market_id)
    if m.status != "Resolved":
        raise MarketClosed(f"{market_id} is not resolved")
    payouts, fee_amt = compute_payouts(stakes(st, market_id), m.outcome, m.fee)
    cur = st.config("currency")
    for addr in sorted(payouts):
        tokens.move(st, cur, f"market:{market_id}", addr, payouts[addr])
    if fee_amt:
        from .treasury import pool

        tokens.move(st, cur, f"market:{market_id}", pool(st, m.fee_pool).account, fee_amt)
    st.table("pm")[market_id] = replace(m, status="Settled")
    ctx.touch(st, "M6-1")
    return {"payouts": dict(sorted(payouts.items())), "fee": fee_amt}


@command("tender.post", "M3")
def _post(st, ctx, p):
    return post_tender(st, ctx, p).id


@command("tender.bid", "M3")
def _bid(st, ctx, p):
    submit_bid(st, ctx, p["tender"], amount(p["price"]))


@command("tender.close", "M3")
def _close(st, ctx, p):
    return close_auction(st, ctx, p["tender"])


@command("market.open", "M6")
def _open(st, ctx, p):
    return open_market(st, ctx, p).id


@command("market.bet", "M6")
def _bet(st, ctx, p):
    return bet(st, ctx, p["market"], p["outcome"], amount(p["stake"]))


@command("market.resolve", "M6")
def _resolve(st, ctx, p):
    resolve_market(st, ctx, p["market"], p["outcome"])


@command("market.settle", "M6")
def _settle(st, ctx, p):
    return settle_market(st, ctx, p["market"])
