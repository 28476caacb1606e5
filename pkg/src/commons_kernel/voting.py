"""Proposals, vote schemes and the token-curated registry.

Schemes:

* ``TokenWeighted``: one vote per token, locked until the window closes.
* ``QuadraticLock``: weight is the square root of the locked tokens; the
  lock runs until ``close + lock_duration``.
* ``Conviction``: stakes accrue conviction ``c <- alpha*c + s`` once per
  tick; the proposal passes when total conviction reaches
  ``beta * requested / (1 - alpha)`` (or an explicit threshold).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from . import enforcement, enterprise, tokens
from .commands import Ctx, amount, command, dispatch, frac
from .errors import (
    AlreadyExecuted,
    DoubleVote,
    DuplicateEntry,
    Insufficient,
    InsufficientStake,
    MachineVoter,
    NotEligible,
    NotFound,
    NotPassed,
    OutsideWindow,
)
from .ledger import AddressKind, address_kind
from .state import WorldState

SCHEMES = ("TokenWeighted", "QuadraticLock", "Conviction")


@dataclass(frozen=True)
class Proposal:
    id: str
    proposer: str
    decision: str
    scope: str | None
    scheme: str
    params: dict  # never mutated
    token: str
    open_tick: int
    close_tick: int | None
    action: dict | None = None
    requested: int = 0
    status: str = "Open"
    failed_tallies: int = 0
    origin: str | None = None


@dataclass(frozen=True)
class Vote:
    voter: str
    choice: str
    tokens: int
    weight: float


@dataclass(frozen=True)
class ConvictionState:
    staked: int
    conviction: float
    last_tick: int


def quadratic_weight(n_tokens: int | float) -> float:
    return math.sqrt(n_tokens)


def conviction_closed_form(s: float, alpha: float, t: int) -> float:
    """Conviction after ``t`` steps of constant stake ``s`` from zero."""
    if alpha == 0:
        return float(s) if t > 0 else 0.0
    return s * (1 - alpha**t) / (1 - alpha)


def proposal(st: WorldState, pid: str) -> Proposal:
    p = st.table("proposal").get(pid)
    if p is None:
        raise NotFound(f"proposal {pid}")
    return p


def votes(st: WorldState, pid: str) -> tuple:
    return st.table("vote").get(pid, ())


def _require_human(st: WorldState, actor: str) -> None:
    if address_kind(st, actor) is AddressKind.MACHINE:
        raise MachineVoter(f"{actor} is a machine; collective choice is human-based")


def create_proposal(st: WorldState, ctx: Ctx, spec: dict) -> Proposal:
    pid = spec["id"]
    if pid in st.table("proposal"):
        raise DuplicateEntry(f"proposal {pid}")
    scheme = spec.get("scheme", "TokenWeighted")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    _require_human(st, ctx.author)
    decision = spec.get("decision", "general")
    scope = spec.get("scope")
    if scope is None and spec.get("affected") is not None and st.enabled("M14"):
        scope = enterprise.route_decision(st, decision, spec["affected"])
        ctx.touch(st, "M14-1")
    enforcement.require_scope(st, ctx, scope)
    close = None if scheme == "Conviction" else ctx.tick + int(spec.get("duration", 5))
    prop = Proposal(
        pid,
        ctx.author,
        decision,
        scope,
        scheme,
        dict(spec.get("params", {})),
        spec.get("token", st.config("governance_token") or st.config("currency")),
        ctx.tick,
        close,
        spec.get("action"),
        int(spec.get("requested", 0)),
        origin=spec.get("origin"),
    )
    tokens.token_class(st, prop.token)
    st.table("proposal")[pid] = prop
    ctx.touch(st, "M5-1")
    if scheme != "TokenWeighted":
        ctx.touch(st, "M5-2")
    return prop


def cast_vote(st: WorldState, ctx: Ctx, pid: str, choice: str, n_tokens: int) -> float:
    p = proposal(st, pid)
    _require_human(st, ctx.author)
    enforcement.require_scope(st, ctx, p.scope)
    if p.scheme == "Conviction":
        raise ValueError("conviction proposals take stakes, not votes")
    if p.status != "Open" or not p.open_tick <= ctx.tick < p.close_tick:
        raise OutsideWindow(f"{pid} is not accepting votes at tick {ctx.tick}")
    if any(v.voter == ctx.author for v in votes(st, pid)):
        raise DoubleVote(f"{ctx.author} already voted on {pid}")
    if choice not in p.params.get("options", ("yes", "no")):
        raise ValueError(f"unknown choice {choice!r}")
    if n_tokens <= 0:
        raise Insufficient("a vote must lock at least one token")
    if p.scheme == "QuadraticLock":
        until = p.close_tick + int(p.params.get("lock_duration", 0))
        weight = quadratic_weight(n_tokens)
        ctx.touch(st, "M5-2")
    else:
        until = p.close_tick
        weight = float(n_tokens)
    tokens.lock(st, p.token, ctx.author, f"vote:{pid}", n_tokens, until)
    st.table("vote")[pid] = votes(st, pid) + (Vote(ctx.author, choice, n_tokens, weight),)
    ctx.touch(st, "M5-1")
    return weight


def totals(st: WorldState, pid: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for v in votes(st, pid):
        out[v.choice] = out.get(v.choice, 0.0) + v.weight
    return out


def conviction_states(st: WorldState, pid: str) -> dict[str, ConvictionState]:
    return {voter: cs for (p, voter), cs in st.table("conviction").items() if p == pid}


def total_conviction(st: WorldState, pid: str) -> float:
    return math.fsum(cs.conviction for cs in conviction_states(st, pid).values())


def conviction_threshold(p: Proposal) -> float:
    if "threshold" in p.params:
        return float(p.params["threshold"])
    alpha = float(p.params.get("alpha", 0.9))
    beta = float(p.params.get("beta", 0.2))
    return beta * p.requested / (1 - alpha)


def stake_conviction(st: WorldState, ctx: Ctx, pid: str, amt: int) -> ConvictionState:
    p = proposal(st, pid)
    _require_human(st, ctx.author)
    enforcement.require_scope(st, ctx, p.scope)
    if p.scheme != "Conviction" or p.status != "Open":
        raise OutsideWindow(f"{pid} does not accept conviction stakes")
    tokens.lock(st, p.token, ctx.author, f"cv:{pid}", amt)
    t = st.table("conviction")
    cs = t.get((pid, ctx.author), ConvictionState(0, 0.0, ctx.tick))
    cs = replace(cs, staked=cs.staked + amt, last_tick=ctx.tick)
    t[(pid, ctx.author)] = cs
    ctx.touch(st, "M5-1", "M5-2")
    return cs


def unstake_conviction(st: WorldState, ctx: Ctx, pid: str, amt: int) -> ConvictionState:
    p = proposal(st, pid)
    t = st.table("conviction")
    cs = t.get((pid, ctx.author))
    if cs is None or cs.staked < amt:
        raise Insufficient(f"{ctx.author} has not staked {amt} on {pid}")
    tokens.unlock(st, p.token, ctx.author, f"cv:{pid}", amt)
    cs = replace(cs, staked=cs.staked - amt, last_tick=ctx.tick)
    t[(pid, ctx.author)] = cs
    ctx.touch(st, "M5-2")
    return cs


def conviction_step(st: WorldState, tick: int) -> None:
    """Advance every open conviction proposal by one tick."""
    props = st.table("proposal")
    t = st.table("conviction")
    for key in sorted(t):
        pid, _ = key
        p = props[pid]
        if p.status != "Open":
            continue
        cs = t[key]
        alpha = float(p.params.get("alpha", 0.9))
        t[key] = replace(cs, conviction=alpha * cs.conviction + cs.staked, last_tick=tick)


def tally(st: WorldState, ctx: Ctx, pid: str) -> dict:
    p = proposal(st, pid)
    if p.status == "Executed":
        raise AlreadyExecuted(pid)
    if p.status in ("Passed", "Failed", "Escalated"):
        return {"result": "Pass" if p.status == "Passed" else "Fail", "final": True}
    if p.scheme == "Conviction":
        total = total_conviction(st, pid)
        threshold = conviction_threshold(p)
        passed = total >= threshold
        result = {"conviction": total, "threshold": threshold}
        new = replace(p, status="Passed") if passed else replace(p, failed_tallies=p.failed_tallies + 1)
    else:
        if ctx.tick < p.close_tick:
            raise OutsideWindow(f"{pid} closes at tick {p.close_tick}")
        tot = totals(st, pid)
        yes, no = tot.get("yes", 0.0), tot.get("no", 0.0)
        cast = math.fsum(tot.values())
        threshold = float(frac(p.params.get("threshold", "1/2")))
        passed = cast >= float(p.params.get("quorum", 0)) and cast > 0 and yes > threshold * cast
        result = {"yes": yes, "no": no}
        new = replace(p, status="Passed" if passed else "Failed", failed_tallies=p.failed_tallies + (not passed))
    st.table("proposal")[pid] = new
    rows = st.table("tally")
    rows[len(rows)] = (ctx.tick, pid, p.scheme, "Pass" if passed else "Fail", result)
    ctx.touch(st, "M5-1")
    return {"result": "Pass" if passed else "Fail", **result}


def execute(st: WorldState, ctx: Ctx, pid: str):
    p = proposal(st, pid)
    if p.status == "Executed":
        raise AlreadyExecuted(pid)
    if p.status != "Passed":
        raise NotPassed(pid)
    st.table("proposal")[pid] = replace(p, status="Executed")
    ctx.touch(st, "M5-1")
    if not p.action:
        return None
    action = dict(p.action)
    if action.get("kind") == "pool.spend":
        action.setdefault("proposal", pid)
    sub = Ctx(ctx.author, ctx.tick, ctx.seq, privileged=True, touched=ctx.touched)
    return dispatch(st, sub, action)


def escalate(st: WorldState, ctx: Ctx, pid: str, scheme: str | None = None) -> Proposal:
    """Reopen a deadlocked or failed decision one tier up."""
    p = proposal(st, pid)
    deadlock_n = int(st.config("deadlock_n", 2))
    stuck = p.status == "Failed" or (p.scheme == "Conviction" and p.status == "Open" and p.failed_tallies >= deadlock_n)
    if not stuck:
        raise NotEligible(f"{pid} has not failed or deadlocked")
    if p.scope is None:
        raise NotEligible(f"{pid} is not scoped to a tier")
    enforcement.require_scope(st, ctx, p.scope)
    up = enterprise.parent(st, p.scope)
    duration = (p.close_tick - p.open_tick) if p.close_tick is not None else None
    new_scheme = scheme or p.scheme
    new = replace(
        p,
        id=f"{pid}^",
        scope=up,
        scheme=new_scheme,
        open_tick=ctx.tick,
        close_tick=None if new_scheme == "Conviction" else ctx.tick + (duration or 5),
        status="Open",
        failed_tallies=0,
        origin=pid,
    )
    if new.id in st.table("proposal"):
        raise DuplicateEntry(new.id)
    st.table("proposal")[new.id] = new
    st.table("proposal")[pid] = replace(p, status="Escalated")
    ctx.touch(st, "M14-1", "M5-1")
    return new


def tally_report(st: WorldState) -> str:
    rows = ["tick\tproposal\tscheme\tresult\tdetail"]
    t = st.table("tally")
    for i in range(len(t)):
        tick, pid, scheme, result, detail = t[i]
        shown = ",".join(f"{k}={v:.6g}" for k, v in sorted(detail.items()))
        rows.append(f"{tick}\t{pid}\t{scheme}\t{result}\t{shown}")
    return "\n".join(rows) + "\n"


@command("proposal.create", "M5")
def _create(st, ctx, p):
    return create_proposal(st, ctx, p).id


@command("vote.cast", "M5")
def _cast(st, ctx, p):
    return cast_vote(st, ctx, p["proposal"], p["choice"], amount(p["tokens"]))


@command("conviction.stake", "M5")
def _stake(st, ctx, p):
    stake_conviction(st, ctx, p["proposal"], amount(p["amount"]))


@command("conviction.unstake", "M5")
def _unstake(st, ctx, p):
    unstake_conviction(st, ctx, p["proposal"], amount(p["amount"]))


@command("proposal.tally", "M5")
def _tally(st, ctx, p):
    return tally(st, ctx, p["proposal"])


@command("proposal.execute", "M5")
def _execute(st, ctx, p):
    return execute(st, ctx, p["proposal"])


@command("proposal.escalate", "M14")
def _escalate(st, ctx, p):
    return escalate(st, ctx, p["proposal"], p.get("scheme")).id


# -- token-curated registry -------------------------------------------------

@dataclass(frozen=True)
class Registry:
    id: str
    stake: int
    challenge_window: int
    vote_window: int
    token: str
    dispensation: Fraction
    scope: str | None = None

    @property
    def account(self) -> str:
        return f"tcr:{self.id}"


@dataclass(frozen=True)
class Listing:
    owner: str
    deposit: int
    since: int


@dataclass(frozen=True)
class Application:
    applicant: str
    stake: int
    opened: int
    kind: str = "application"  # or "removal" of a listed item
    challenger: str | None = None
    poll: str | None = None


def registry(st: WorldState, reg_id: str) -> Registry:
    r = st.table("tcr.registry").get(reg_id)
    if r is None:
        raise NotFound(f"registry {reg_id}")
    return r


def listed(st: WorldState, reg_id: str) -> list[str]:
    return sorted(item for (r, item) in st.table("tcr.entry") if r == reg_id)


def _escrow_stake(st: WorldState, reg: Registry, who: str) -> None:
    cur = st.config("currency")
    if tokens.free_balance(st, cur, who) < reg.stake:
        raise InsufficientStake(f"{who} cannot post stake {reg.stake}")
    tokens.move(st, cur, who, reg.account, reg.stake)


def tcr_apply(st: WorldState, ctx: Ctx, reg_id: str, item: str) -> str:
    reg = registry(st, reg_id)
    if (reg_id, item) in st.table("tcr.entry") or (reg_id, item) in st.table("tcr.pending"):
        raise DuplicateEntry(f"{item} already listed or pending in {reg_id}")
    _escrow_stake(st, reg, ctx.author)
    st.table("tcr.pending")[(reg_id, item)] = Application(ctx.author, reg.stake, ctx.tick)
    ctx.touch(st, "M5-1", "M5-2")
    return "Pending"


def tcr_challenge(st: WorldState, ctx: Ctx, reg_id: str, item: str) -> str:
    reg = registry(st, reg_id)
    pending = st.table("tcr.pending").get((reg_id, item))
    entry = st.table("tcr.entry").get((reg_id, item))
    if pending is not None:
        if pending.challenger is not None:
            raise DuplicateEntry(f"{item} is already challenged")
        if ctx.tick >= pending.opened + reg.challenge_window:
            raise OutsideWindow(f"challenge window for {item} has closed")
        app = pending
    elif entry is not None:
        app = Application(entry.owner, entry.deposit, ctx.tick, kind="removal")
    else:
        raise NotFound(f"{item} is neither listed nor pending in {reg_id}")
    _escrow_stake(st, reg, ctx.author)
    poll = f"tcr:{reg_id}:{item}:{ctx.tick}"
    sub = Ctx(ctx.author, ctx.tick, ctx.seq, privileged=True, touched=ctx.touched)
    create_proposal(
        st,
        sub,
        {"id": poll, "decision": "registry", "scope": reg.scope, "scheme": "TokenWeighted",
         "token": reg.token, "duration": reg.vote_window},
    )
    st.table("tcr.pending")[(reg_id, item)] = replace(app, challenger=ctx.author, poll=poll)
    ctx.touch(st, "M5-2")
    return poll


def tcr_resolve(st: WorldState, ctx: Ctx, reg_id: str, item: str) -> dict:
    from .rules import largest_remainder

    reg = registry(st, reg_id)
    pending = st.table("tcr.pending").get((reg_id, item))
    if pending is None:
        raise NotFound(f"nothing pending for {item} in {reg_id}")
    cur = st.config("currency")
    if pending.challenger is None:
        if ctx.tick < pending.opened + reg.challenge_window:
            raise OutsideWindow(f"challenge window for {item} is still open")
        del st.table("tcr.pending")[(reg_id, item)]
        st.table("tcr.entry")[(reg_id, item)] = Listing(pending.applicant, pending.stake, ctx.tick)
        ctx.touch(st, "M5-1")
        return {"status": "Admitted", "payouts": {}}
    poll = proposal(st, pending.poll)
    if ctx.tick < poll.close_tick:
        raise OutsideWindow(f"vote on {item} closes at tick {poll.close_tick}")
    sub = Ctx(ctx.author, ctx.tick, ctx.seq, privileged=True, touched=ctx.touched)
    tally(st, sub, poll.id)
    tot = totals(st, poll.id)
    challenger_wins = tot.get("yes", 0.0) > tot.get("no", 0.0)
    winner = pending.challenger if challenger_wins else pending.applicant
    win_choice = "yes" if challenger_wins else "no"
    forfeit = pending.stake  # equal stakes on both sides
    share = math.floor(reg.dispensation * forfeit)
    voters = [(v.voter, Fraction(v.tokens)) for v in votes(st, poll.id) if v.choice == win_choice]
    payouts: dict[str, int] = {winner: share}
    if voters:
        for addr, amt in largest_remainder(forfeit - share, voters).items():
            payouts[addr] = payouts.get(addr, 0) + amt
    else:
        payouts[winner] += forfeit - share
    del st.table("tcr.pending")[(reg_id, item)]
    if challenger_wins:
        payouts[winner] += reg.stake  # challenger's own stake back
        st.table("tcr.entry").pop((reg_id, item))
        status = "Removed" if pending.kind == "removal" else "Rejected"
    else:
        # the applicant's stake stays in escrow as the listing deposit
        st.table("tcr.entry")[(reg_id, item)] = Listing(pending.applicant, pending.stake, ctx.tick)
        status = "Kept" if pending.kind == "removal" else "Admitted"
    for addr in sorted(payouts):
        tokens.move(st, cur, reg.account, addr, payouts[addr])
    ctx.touch(st, "M5-1", "M5-2")
    return {"status": status, "payouts": dict(sorted(payouts.items()))}


def tcr_exit(st: WorldState, ctx: Ctx, reg_id: str, item: str) -> None:
    reg = registry(st, reg_id)
    entry = st.table("tcr.entry").get((reg_id, item))
    if entry is None:
        raise NotFound(item)
    if entry.owner != ctx.author:
        raise NotEligible("only the owner can withdraw a listing")
    if (reg_id, item) in st.table("tcr.pending"):
        raise NotEligible("listing is under challenge")
    del st.table("tcr.entry")[(reg_id, item)]
    tokens.move(st, st.config("currency"), reg.account, ctx.author, entry.deposit)


@command("tcr.apply", "M5")
def _tcr_apply(st, ctx, p):
    return tcr_apply(st, ctx, p["registry"], p["item"])


@command("tcr.challenge", "M5")
def _tcr_challenge(st, ctx, p):
    return tcr_challenge(st, ctx, p["registry"], p["item"])


@command("tcr.resolve", "M5")
def _tcr_resolve(st, ctx, p):
    return tcr_resolve(st, ctx, p["registry"], p["item"])


@command("tcr.exit", "M5")
def _tcr_exit(st, ctx, p):
    tcr_exit(st, ctx, p["registry"], p["item"])


def load_genesis(st: WorldState, cfg: dict) -> None:
    for spec in cfg.get("registries", []):
        reg = Registry(
            spec["id"],
            amount(spec["stake"]),
            int(spec.get("challenge_window", 3)),
            int(spec.get("vote_window", 3)),
            spec.get("token", cfg.get("governance_token") or cfg.get("currency")),
            frac(spec.get("dispensation", "1/2")),
            spec.get("scope"),
        )
        tokens.token_class(st, reg.token)
        st.table("tcr.registry")[reg.id] = reg
