import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as hs

from commons_kernel import market, tokens
from commons_kernel.errors import AccessDenied, AlreadyClosed, DuplicateBid, MarketClosed, NotYetDeadline, Unauthorized
from oracles import brute_largest_remainder

PEOPLE = ["owner", "a", "b", "c", "oracle"]
WORLD = {
    "currency": "EUR",
    "reputation": "REP",
    "tokens": [
        {"id": "EUR", "kind": "Fungible", "balances": {f"@{n}": 500 for n in PEOPLE + ["bot"]}},
        {"id": "REP", "kind": "Reputation", "transferable": False, "balances": {"@a": 10, "@b": 10, "@bot": 10}},
    ],
    "roles": [{"holder": "@oracle", "name": "oracle", "scope": "m"}],
}


@pytest.fixture
def box(sandbox):
    return sandbox(WORLD, people=PEOPLE, machines=["bot"])


def tender(box, **extra):
    box.send("owner", kind="tender.post", id="t", deadline=3, **extra)


def test_lowest_bid_wins(box):
    tender(box)
    for who, price in [("a", 100), ("b", 90), ("c", 95)]:
        box.send(who, kind="tender.bid", tender="t", price=price)
    box.advance(3)
    out = box.send("owner", kind="tender.close", tender="t")
    assert (out["winner"], out["price"]) == (box.id("b"), 90)


def test_price_tie_goes_to_earlier_bid(box):
    tender(box)
    box.advance()
    box.send("b" if box.id("b") > box.id("a") else "a", kind="tender.bid", tender="t", price=90)
    first = box.engine.events[-1].author
    box.advance()
    box.send("a" if first == box.id("b") else "b", kind="tender.bid", tender="t", price=90)
    box.advance()
    assert box.send("owner", kind="tender.close", tender="t")["winner"] == first


def test_reputation_gate_at_submission(box):
    tender(box, min_reputation=5)
    assert isinstance(box.reject("c", kind="tender.bid", tender="t", price=10), AccessDenied)
    box.send("bot", kind="tender.bid", tender="t", price=50)


def test_bid_rules(box):
    tender(box, escrow=40)
    box.send("a", kind="tender.bid", tender="t", price=10)
    assert isinstance(box.reject("a", kind="tender.bid", tender="t", price=9), DuplicateBid)
    assert isinstance(box.reject("owner", kind="tender.close", tender="t"), NotYetDeadline)
    box.advance(3)
    assert isinstance(box.reject("b", kind="tender.bid", tender="t", price=5), MarketClosed)
    box.send("owner", kind="tender.close", tender="t")
    assert tokens.balance(box.st, "EUR", box.id("owner")) == 500
    assert isinstance(box.reject("owner", kind="tender.close", tender="t"), AlreadyClosed)


def test_no_bids_cancel_or_reopen(box):
    box.send("owner", kind="tender.post", id="x", deadline=2, on_no_bids="reopen", reopen_ticks=4)
    box.send("owner", kind="tender.post", id="y", deadline=2)
    box.advance(2)
    assert box.send("owner", kind="tender.close", tender="x") == {"status": "Reopened", "error": "NoBids"}
    assert market.tender(box.st, "x").deadline == 6
    assert box.send("owner", kind="tender.close", tender="y")["status"] == "Cancelled"


@settings(max_examples=50, deadline=None)
@given(prices=hs.lists(hs.integers(1, 10**6), min_size=1, max_size=10, unique=True), seed=hs.integers(0, 99))
def test_winner_ignores_arrival_order(prices, seed):
    bids = [market.Bid("t", f"{i:02d}", p, 0) for i, p in enumerate(prices)]
    shuffled = bids[:]
    random.Random(seed).shuffle(shuffled)
    assert market.select_winner(bids) == market.select_winner(shuffled)


def bet_all(box, bets):
    box.send("owner", kind="market.open", id="m", outcomes=["yes", "no"])
    for who, outcome, stake in bets:
        box.send(who, kind="market.bet", market="m", outcome=outcome, stake=stake)
    box.send("oracle", kind="market.resolve", market="m", outcome="yes")
    return box.send("owner", kind="market.settle", market="m")


def test_single_winner_takes_pool(box):
    out = bet_all(box, [("a", "yes", 60), ("b", "no", 40)])
    assert out["payouts"] == {box.id("a"): 100}


def test_two_winners_split(box):
    out = bet_all(box, [("a", "yes", 30), ("b", "yes", 30), ("c", "no", 40)])
    assert out["payouts"] == {box.id("a"): 50, box.id("b"): 50}


def test_no_winning_stake_refunds(box):
    out = bet_all(box, [("a", "no", 30), ("b", "no", 20)])
    assert out["payouts"] == {box.id("a"): 30, box.id("b"): 20}


def test_resolution_needs_oracle_and_single_settle(box):
    box.send("owner", kind="market.open", id="m", outcomes=["yes", "no"])
    assert isinstance(box.reject("a", kind="market.resolve", market="m", outcome="yes"), Unauthorized)
    box.send("oracle", kind="market.resolve", market="m", outcome="no")
    assert isinstance(box.reject("a", kind="market.bet", market="m", outcome="no", stake=1), MarketClosed)
    box.send("a", kind="market.settle", market="m")
    assert isinstance(box.reject("a", kind="market.settle", market="m"), AlreadyClosed)


@settings(max_examples=200, deadline=None)
@given(bets=hs.lists(hs.tuples(hs.sampled_from("abcde"), hs.sampled_from(["y", "n", "x"]), hs.integers(1, 1000)), max_size=12),
       fee=hs.fractions(0, Fraction(1, 2), max_denominator=20))
def test_parimutuel_zero_sum(bets, fee):
    stake_map = {}
    for who, o, s in bets:
        stake_map[(who, o)] = stake_map.get((who, o), 0) + s
    payouts, fee_amt = market.compute_payouts(stake_map, "y", fee)
    assert sum(payouts.values()) + fee_amt == sum(stake_map.values())
    winners = {}
    for (who, o), s in stake_map.items():
        if o == "y":
            winners[who] = winners.get(who, 0) + s
    if winners:
        assert payouts == brute_largest_remainder(sum(stake_map.values()) - fee_amt,
                                                  [(w, Fraction(s)) for w, s in winners.items()])


def test_auction_pays_nobody(box):
    tender(box, escrow=30)
    box.send("a", kind="tender.bid", tender="t", price=10)
    box.advance(3)
    before = {n: tokens.balance(box.st, "EUR", box.id(n)) for n in PEOPLE}
    box.send("c", kind="tender.close", tender="t")
    after = {n: tokens.balance(box.st, "EUR", box.id(n)) for n in PEOPLE}
    gained = {n for n in PEOPLE if after[n] > before[n]}
    assert gained <= {"owner"}  # only the poster's own escrow comes back
