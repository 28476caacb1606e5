import math

import pytest
from hypothesis import given, settings, strategies as hs

from commons_kernel import tokens, treasury, voting
from commons_kernel.errors import (
    AlreadyExecuted, DoubleVote, Insufficient, MachineVoter, NotFound, NotPassed, OutsideWindow,
)
from oracles import conviction_trace

VOTERS = [f"v{i}" for i in range(10)]
PEOPLE = ["a", "b", "c", "whale"] + VOTERS
WORLD = {
    "currency": "EUR",
    "governance_token": "GOV",
    "tokens": [
        {"id": "EUR", "kind": "Fungible", "balances": {f"@{n}": 100 for n in PEOPLE}},
        {"id": "GOV", "kind": "Fungible", "balances": {**{f"@{n}": 100 for n in PEOPLE}, "@bot": 100}},
    ],
    "pools": [{"id": "budget", "resource_class": "EUR", "reserve": 500}],
    "registries": [{"id": "r", "stake": 10, "challenge_window": 2, "vote_window": 2}],
}


@pytest.fixture
def box(sandbox):
    return sandbox(WORLD, people=PEOPLE, machines=["bot"])


def test_quadratic_weights(box):
    box.send("a", kind="proposal.create", id="p", scheme="QuadraticLock")
    assert box.send("a", kind="vote.cast", proposal="p", choice="yes", tokens=1) == 1.0
    assert box.send("b", kind="vote.cast", proposal="p", choice="yes", tokens=9) == 3.0
    assert isinstance(box.reject("bot", kind="vote.cast", proposal="p", choice="no", tokens=4), MachineVoter)
    assert isinstance(box.reject("a", kind="vote.cast", proposal="p", choice="no", tokens=1), DoubleVote)


def test_machine_cannot_propose(box):
    assert isinstance(box.reject("bot", kind="proposal.create", id="p"), MachineVoter)


def test_token_weighted_majority(box):
    box.send("a", kind="proposal.create", id="p", duration=2)
    box.send("a", kind="vote.cast", proposal="p", choice="yes", tokens=60)
    box.send("b", kind="vote.cast", proposal="p", choice="no", tokens=40)
    assert isinstance(box.reject("c", kind="proposal.tally", proposal="p"), OutsideWindow)
    box.advance(2)
    assert isinstance(box.reject("c", kind="vote.cast", proposal="p", choice="no", tokens=1), OutsideWindow)
    assert box.send("c", kind="proposal.tally", proposal="p")["result"] == "Pass"


def test_ten_small_voters_outweigh_whale(box):
    box.send("a", kind="proposal.create", id="p", scheme="QuadraticLock", duration=1)
    box.send("whale", kind="vote.cast", proposal="p", choice="no", tokens=100)
    for v in VOTERS:
        box.send(v, kind="vote.cast", proposal="p", choice="yes", tokens=4)
    box.advance()
    out = box.send("a", kind="proposal.tally", proposal="p")
    assert (out["result"], out["yes"], out["no"]) == ("Pass", 20.0, 10.0)


def test_votes_lock_tokens_until_close(box):
    box.send("a", kind="proposal.create", id="p", scheme="QuadraticLock", duration=2, params={"lock_duration": 3})
    box.send("a", kind="vote.cast", proposal="p", choice="yes", tokens=90)
    assert isinstance(box.reject("a", kind="token.transfer", **{"class": "GOV"}, to=box.id("b"), amount=11), Insufficient)
    box.advance(5)
    box.send("a", kind="token.transfer", **{"class": "GOV"}, to=box.id("b"), amount=100)
    assert tokens.supply_audit(box.st) == []


def conviction_box(box, alpha, **params):
    box.send("a", kind="proposal.create", id="cv", scheme="Conviction", requested=100,
             params={"alpha": alpha, **params})


def test_memoryless_conviction(box):
    conviction_box(box, 0)
    box.send("a", kind="conviction.stake", proposal="cv", amount=10)
    box.advance()
    assert voting.total_conviction(box.st, "cv") == 10


def test_conviction_saturates_and_decays(box):
    conviction_box(box, 0.9, threshold=1000)
    box.send("a", kind="conviction.stake", proposal="cv", amount=10)
    trace = []
    for _ in range(44):
        box.advance()
        trace.append(voting.total_conviction(box.st, "cv"))
    assert trace == pytest.approx(conviction_trace(0.9, 10, 44), abs=1e-9)
    assert abs(trace[-1] - 100) / 100 < 0.01
    peak = trace[-1]
    box.send("a", kind="conviction.unstake", proposal="cv", amount=10)
    n = math.ceil(math.log(0.01) / math.log(0.9))
    box.advance(n)
    assert voting.total_conviction(box.st, "cv") < 0.01 * peak


def test_conviction_just_below_threshold_fails(box):
    # steady state s/(1-a) = 99 with a = 0 and s = 99
    conviction_box(box, 0, threshold=100)
    box.send("a", kind="conviction.stake", proposal="cv", amount=99)
    for _ in range(3):
        box.advance()
        assert box.send("a", kind="proposal.tally", proposal="cv")["result"] == "Fail"
    box.send("a", kind="conviction.stake", proposal="cv", amount=1)
    box.advance()
    assert box.send("a", kind="proposal.tally", proposal="cv")["result"] == "Pass"


def test_default_conviction_threshold():
    p = voting.Proposal("x", "a", "general", None, "Conviction", {}, "GOV", 0, None, None, 50, "Open", 0, None)
    assert voting.conviction_threshold(p) == pytest.approx(0.2 * 50 / 0.1)


def spend_proposal(box, amount=40):
    box.send("a", kind="proposal.create", id="p", duration=1,
             action={"kind": "pool.spend", "pool": "budget", "to": box.id("c"), "amount": amount})


def test_execute_passed_spend(box):
    spend_proposal(box)
    box.send("a", kind="vote.cast", proposal="p", choice="yes", tokens=5)
    box.advance()
    box.send("a", kind="proposal.tally", proposal="p")
    box.send("b", kind="proposal.execute", proposal="p")
    assert treasury.reserve(box.st, "budget") == 460
    assert tokens.balance(box.st, "EUR", box.id("c")) == 140
    assert isinstance(box.reject("b", kind="proposal.execute", proposal="p"), AlreadyExecuted)
    assert treasury.withdrawals(box.st)[0][4] == "proposal:p"


def test_failed_proposal_not_executable(box):
    spend_proposal(box)
    box.send("a", kind="vote.cast", proposal="p", choice="no", tokens=5)
    box.advance()
    assert box.send("a", kind="proposal.tally", proposal="p")["result"] == "Fail"
    assert isinstance(box.reject("a", kind="proposal.execute", proposal="p"), NotPassed)


def test_execute_at_most_once_under_repeats(sandbox):
    box = sandbox(WORLD, people=PEOPLE, machines=["bot"])
    spend_proposal(box, 7)
    box.send("a", kind="vote.cast", proposal="p", choice="yes", tokens=5)
    box.advance()
    box.send("a", kind="proposal.tally", proposal="p")
    for who in ["a", "b", "c", "a", "whale"]:
        try:
            box.send(who, kind="proposal.execute", proposal="p")
        except Exception:
            pass
    assert treasury.reserve(box.st, "budget") == 493


def test_tcr_unchallenged_admitted_at_window_end(box):
    box.send("a", kind="tcr.apply", registry="r", item="acme")
    assert isinstance(box.reject("a", kind="tcr.resolve", registry="r", item="acme"), OutsideWindow)
    box.advance(2)
    assert box.send("b", kind="tcr.resolve", registry="r", item="acme")["status"] == "Admitted"
    assert voting.listed(box.st, "r") == ["acme"]


def test_tcr_challenge_wins(box):
    a, b, c, w = (box.id(n) for n in ("a", "b", "c", "whale"))
    box.send("a", kind="tcr.apply", registry="r", item="acme")
    poll = box.send("b", kind="tcr.challenge", registry="r", item="acme")
    box.send("c", kind="vote.cast", proposal=poll, choice="yes", tokens=70)
    box.send("whale", kind="vote.cast", proposal=poll, choice="no", tokens=30)
    box.advance(2)
    out = box.send("c", kind="tcr.resolve", registry="r", item="acme")
    # challenger: half the applicant's stake plus their own; voters on the winning side split the rest
    assert out["status"] == "Rejected"
    assert out["payouts"] == {b: 5 + 10, c: 5}
    assert tokens.balance(box.st, "EUR", a) == 90
    assert tokens.balance(box.st, "EUR", "tcr:r") == 0


def test_tcr_missing_item(box):
    assert isinstance(box.reject("b", kind="tcr.challenge", registry="r", item="ghost"), NotFound)


@settings(max_examples=300, deadline=None)
@given(n=hs.integers(1, 1000), t=hs.floats(1e-6, 1e6))
def test_quadratic_scaling_law(n, t):
    lhs = voting.quadratic_weight(n * n * t)
    rhs = n * voting.quadratic_weight(t)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


@settings(max_examples=100, deadline=None)
@given(alpha=hs.floats(0, 0.999), s=hs.floats(0, 1e4), t=hs.integers(1, 1000))
def test_conviction_closed_form(alpha, s, t):
    c = conviction_trace(alpha, s, t)[-1]
    closed = voting.conviction_closed_form(s, alpha, t)
    assert abs(c - closed) <= 1e-9 * max(1.0, abs(closed))
