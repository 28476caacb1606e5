"""Graduated sanctions, staked-juror disputes and the affected-party guard."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from . import enterprise, tokens
from .commands import Ctx, amount, command, frac
from .errors import (
    DoubleVote,
    DuplicateEntry,
    Insufficient,
    InsufficientStake,
    MachineVoter,
    NotFound,
    AlreadyClosed,
    OutOfOrder,
    OutOfScope,
    TooFewJurors,
    Unauthorized,
)
from .ledger import AddressKind, address_kind
from .state import WorldState

DEFAULT_LADDER = (
    {"type": "Warning"},
    {"type": "ReputationSlash", "fraction": "0.1"},
    {"type": "RewardShareReduction", "fraction": "0.25"},
    {"type": "Removal"},
)

# Every action kind whose handler enforces an affected-party scope.
SCOPED_ACTIONS = (
    "proposal.create",
    "vote.cast",
    "conviction.stake",
    "proposal.escalate",
    "rules.set_program",
    "enforce.apply_sanction",
    "dispute.vote",
    "enterprise.delegate",
)


@dataclass(frozen=True)
class ViolationRecord:
    actor: str
    kind: str
    tick: int
    severity: int = 1


@dataclass(frozen=True)
class LadderState:
    epoch_start: int
    count: int  # violations in the current epoch
    applied: int = -1  # highest ladder index applied in this epoch


# -- scope guard -------------------------------------------------------------

def scope_check(st: WorldState, scope: str | None, actor: str) -> bool:
    """Allow only members of the scope's enterprise subtree; global roles do not help."""
    if scope is None or not st.enabled("M13"):
        return True
    return actor in enterprise.subtree_members(st, scope)


def require_scope(st: WorldState, ctx: Ctx, scope: str | None) -> None:
    if ctx.privileged:
        return
    if not scope_check(st, scope, ctx.author):
        raise OutOfScope(f"{ctx.author} is not an affected party of {scope}")
    if scope is not None:
        ctx.touch(st, "M13-1")


# -- sanctions ---------------------------------------------------------------

def ladder(st: WorldState) -> tuple:
    return st.config("sanctions", {}).get("ladder", DEFAULT_LADDER)


def window(st: WorldState) -> int:
    return st.config("sanctions", {}).get("window", 20)


def violations(st: WorldState, actor: str | None = None) -> list[ViolationRecord]:
    t = st.table("violation")
    recs = [t[i] for i in range(len(t))]
    return [r for r in recs if actor is None or r.actor == actor]


def _ladder_state(st: WorldState, actor: str, tick: int) -> LadderState | None:
    ls = st.table("ladder").get(actor)
    if ls is None or tick >= ls.epoch_start + window(st):
        return None
    return ls


def next_sanction(st: WorldState, actor: str, tick: int | None = None) -> tuple[int, dict] | None:
    """Ladder index and step due for ``actor`` given violations in the live epoch."""
    ls = _ladder_state(st, actor, st.tick if tick is None else tick)
    if ls is None:
        return None
    steps = ladder(st)
    idx = min(ls.count - 1, len(steps) - 1)
    return idx, steps[idx]


def record_violation(st: WorldState, ctx: Ctx, actor: str, kind: str, tick: int, severity: int = 1) -> int:
    t = st.table("violation")
    t[len(t)] = ViolationRecord(actor, kind, tick, severity)
    ls = _ladder_state(st, actor, tick)
    if ls is None:
        ls = LadderState(tick, 1)
    else:
        ls = replace(ls, count=ls.count + 1)
    st.table("ladder")[actor] = ls
    ctx.touch(st, "M11-2", "M7-2")
    if st.config("sanctions", {}).get("automatic", True) and st.enabled("M11"):
        apply_sanction(st, ctx, actor, min(ls.applied + 1, len(ladder(st)) - 1))
    return len(t) - 1


def apply_sanction(st: WorldState, ctx: Ctx, actor: str, index: int) -> dict:
    """Apply ladder step ``index``; only the step after the last applied one is allowed."""
    ls = _ladder_state(st, actor, ctx.tick)
    if ls is None:
        raise OutOfOrder(f"{actor} has no violations in the current window")
    expected = min(ls.applied + 1, len(ladder(st)) - 1)
    if index != expected or index > ls.count - 1:
        raise OutOfOrder(f"step {index} requested, step {expected} due for {actor}")
    st.table("ladder")[actor] = replace(ls, applied=index)
    step = ladder(st)[index]
    effects = {"actor": actor, "step": step["type"], "index": index}
    kind = step["type"]
    if kind == "ReputationSlash":
        rep = st.config("reputation")
        have = tokens.balance(st, rep, actor) if rep else 0
        keep = math.floor(have * (1 - frac(step["fraction"])))
        if have:
            tokens.debit(st, rep, actor, have - keep)
        effects["burned"] = have - keep
        ctx.touch(st, "M11-1", "M9-1")
    elif kind == "RewardShareReduction":
        factors = st.table("reward.factor")
        factors[actor] = factors.get(actor, Fraction(1)) * (1 - frac(step["fraction"]))
        ctx.touch(st, "M11-1")
    elif kind == "Removal":
        remove(st, actor, ctx.tick)
        ctx.touch(st, "M11-1", "M1-1")
    sanctions = st.table("sanction")
    sanctions[len(sanctions)] = (ctx.tick, actor, kind, index)
    return effects


def remove(st: WorldState, actor: str, tick: int) -> None:
    membership = st.config("membership")
    if membership:
        tokens.debit(st, membership, actor, tokens.balance(st, membership, actor))
    for name, scope in tokens.roles_of(st, actor):
        tokens.revoke_role(st, actor, name, scope)
    st.table("removed")[actor] = tick


def is_removed(st: WorldState, actor: str) -> bool:
    return actor in st.table("removed")


def sanctions_report(st: WorldState) -> str:
    from .ledger import label_of

    rows = ["tick\tactor\tkind\tdetail"]
    for r in violations(st):
        rows.append(f"{r.tick}\t{label_of(st, r.actor)}\tviolation\t{r.kind}")
    t = st.table("sanction")
    for i in range(len(t)):
        tick, actor, kind, index = t[i]
        rows.append(f"{tick}\t{label_of(st, actor)}\tsanction\t{kind}#{index}")
    t = st.table("verdict")
    for i in range(len(t)):
        tick, dispute_id, verdict = t[i]
        rows.append(f"{tick}\t{dispute_id}\tverdict\t{verdict}")
    return "\n".join(rows) + "\n"


@command("enforce.record_violation", "M11")
def _record(st, ctx, p):
    if not (ctx.privileged or tokens.has_role(st, ctx.author, "monitor") or tokens.has_role(st, ctx.author, "sanctions")):
        raise Unauthorized("only monitors record violations")
    return record_violation(st, ctx, p["actor"], p["violation"], ctx.tick, int(p.get("severity", 1)))


@command("enforce.apply_sanction", "M11")
def _apply(st, ctx, p):
    require_scope(st, ctx, p.get("scope"))
    if not (ctx.privileged or tokens.has_role(st, ctx.author, "sanctions", p.get("scope") or tokens.GLOBAL)):
        raise Unauthorized("only the sanctions authority applies sanctions")
    return apply_sanction(st, ctx, p["actor"], int(p["step"]))


# -- disputes ----------------------------------------------------------------

@dataclass(frozen=True)
class Dispute:
    id: str
    parties: tuple
    claim: str
    scope: str | None
    remedies: dict  # choice -> {"pay": {...}} | {"violation": address}; never mutated
    status: str = "Open"
    verdict: str | None = None


@dataclass(frozen=True)
class Juror:
    address: str
    stake: int
    order: int
    vote: str | None = None


def dispute(st: WorldState, dispute_id: str) -> Dispute:
    d = st.table("dispute").get(dispute_id)
    if d is None:
        raise NotFound(f"dispute {dispute_id}")
    return d


def _court(st: WorldState) -> dict:
    return st.config("court", {})


def _jurors(st: WorldState, dispute_id: str) -> tuple:
    return st.table("juror").get(dispute_id, ())


def open_dispute(st, ctx, dispute_id, parties, claim, scope=None, remedies=None) -> Dispute:
    if dispute_id in st.table("dispute"):
        raise DuplicateEntry(dispute_id)
    if ctx.author not in parties and not ctx.privileged:
        raise Unauthorized("only a party may open a dispute")
    d = Dispute(dispute_id, tuple(parties), claim, scope, dict(remedies or {}))
    st.table("dispute")[dispute_id] = d
    ctx.touch(st, "M12-1")
    return d


def stake_juror(st: WorldState, ctx: Ctx, dispute_id: str, amt: int) -> None:
    d = dispute(st, dispute_id)
    if d.status != "Open":
        raise AlreadyClosed(dispute_id)
    if address_kind(st, ctx.author) is AddressKind.MACHINE:
        raise MachineVoter("conflict resolution is human-based")
    if ctx.author in d.parties:
        raise Unauthorized("parties cannot sit as jurors")
    if amt < _court(st).get("min_stake", 1):
        raise InsufficientStake(f"stake {amt} below minimum")
    jurors = _jurors(st, dispute_id)
    if any(j.address == ctx.author for j in jurors):
        raise DuplicateEntry(f"{ctx.author} already staked")
    tokens.move(st, st.config("currency"), ctx.author, f"dispute:{dispute_id}", amt)
    st.table("juror")[dispute_id] = jurors + (Juror(ctx.author, amt, len(jurors)),)
    ctx.touch(st, "M12-2")


def vote_verdict(st: WorldState, ctx: Ctx, dispute_id: str, choice: str) -> None:
    d = dispute(st, dispute_id)
    if d.status != "Open":
        raise AlreadyClosed(dispute_id)
    require_scope(st, ctx, d.scope)
    jurors = list(_jurors(st, dispute_id))
    for i, j in enumerate(jurors):
        if j.address == ctx.author:
            if j.vote is not None:
                raise DoubleVote(ctx.author)
            jurors[i] = replace(j, vote=str(choice))
            st.table("juror")[dispute_id] = tuple(jurors)
            ctx.touch(st, "M12-1")
            return
    raise Unauthorized("jurors must stake before voting")


def tally_verdict(jurors: list[Juror], slash: Fraction) -> tuple[str, dict[str, int], list[Juror]]:
    """Verdict and final juror balances. Pure; shared by resolve and its tests.

    With an even number of voters the latest staker's vote is dropped. Each
    minority juror loses ``floor(stake*slash)``, split over majority jurors
    pro rata to stake.
    """
    from .rules import largest_remainder

    voters = sorted((j for j in jurors if j.vote is not None), key=lambda j: j.order)
    if len(voters) % 2 == 0 and voters:
        voters = voters[:-1]
    if len(voters) < 3:
        raise TooFewJurors(f"{len(voters)} counted votes")
    counts: dict[str, int] = {}
    for j in voters:
        counts[j.vote] = counts.get(j.vote, 0) + 1
    verdict = min(counts, key=lambda c: (-counts[c], c))
    majority = [j for j in voters if j.vote == verdict]
    # dropped and abstaining jurors are refunded in full
    payout = {j.address: j.stake for j in jurors}
    pot = 0
    for j in voters:
        if j.vote != verdict:
            cut = math.floor(j.stake * slash)
            payout[j.address] -= cut
            pot += cut
    if pot:
        for addr, extra in largest_remainder(pot, [(j.address, Fraction(j.stake)) for j in majority]).items():
            payout[addr] += extra
    return verdict, payout, majority


def resolve_dispute(st: WorldState, ctx: Ctx, dispute_id: str) -> dict:
    d = dispute(st, dispute_id)
    if d.status != "Open":
        raise AlreadyClosed(dispute_id)
    jurors = list(_jurors(st, dispute_id))
    verdict, payout, _ = tally_verdict(jurors, frac(_court(st).get("slash", "0.2")))
    cur = st.config("currency")
    escrow = f"dispute:{dispute_id}"
    for addr in sorted(payout):
        tokens.move(st, cur, escrow, addr, payout[addr])
    st.table("dispute")[dispute_id] = replace(d, status="Resolved", verdict=verdict)
    verdicts = st.table("verdict")
    verdicts[len(verdicts)] = (ctx.tick, dispute_id, verdict)
    effect = d.remedies.get(verdict)
    outcome = {"verdict": verdict, "payouts": dict(sorted(payout.items()))}
    if effect and "pay" in effect:
        order = effect["pay"]
        if tokens.free_balance(st, cur, order["from"]) >= order["amount"]:
            tokens.move(st, cur, order["from"], order["to"], order["amount"])
            outcome["complied"] = True
        else:
            record_violation(st, ctx, order["from"], "verdict_noncompliance", ctx.tick)
            outcome["complied"] = False
    elif effect and "violation" in effect:
        record_violation(st, ctx, effect["violation"], "verdict", ctx.tick)
    ctx.touch(st, "M12-1")
    return outcome


@command("dispute.open", "M12")
def _open(st, ctx, p):
    open_dispute(st, ctx, p["id"], p["parties"], p.get("claim", ""), p.get("scope"), p.get("remedies"))
    return p["id"]


@command("dispute.stake", "M12")
def _stake(st, ctx, p):
    stake_juror(st, ctx, p["dispute"], amount(p["amount"]))


@command("dispute.vote", "M12")
def _vote(st, ctx, p):
    vote_verdict(st, ctx, p["dispute"], p["choice"])


@command("dispute.resolve", "M12")
def _resolve(st, ctx, p):
    return resolve_dispute(st, ctx, p["dispute"])


def load_genesis(st: WorldState, cfg: dict) -> None:
    # sanction/court settings live in the config table; nothing to seed
    steps = cfg.get("sanctions", {}).get("ladder")
    if steps is not None:
        kinds = {"Warning", "ReputationSlash", "RewardShareReduction", "Removal"}
        for s in steps:
            if s.get("type") not in kinds:
                raise ValueError(f"unknown sanction step {s!r}")
