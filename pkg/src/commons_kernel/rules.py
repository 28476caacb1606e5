"""Appropriation rules, risk/reward distribution and incentive rules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from . import tokens, treasury
from .commands import Ctx, amount, command, frac
from .errors import InsufficientReserve, NotFound, Unauthorized, UnknownRule
from .state import WorldState

CLAUSE_TYPES = ("cap", "role_allowance", "pool_floor", "window", "require")


@dataclass(frozen=True)
class RuleProgram:
    id: str
    clauses: tuple  # of dicts, never mutated
    scope: str | None = None


@dataclass(frozen=True)
class Decision:
    approved: bool
    clause: str | None = None  # first failing clause on denial


@dataclass(frozen=True)
class RiskRewardPolicy:
    id: str
    participants: tuple  # ((address, Fraction weight), ...)
    pool: str
    at_risk_fraction: Fraction = Fraction(0)


@dataclass(frozen=True)
class IncentiveRule:
    id: str
    trigger: dict
    reward_class: str
    reward_amount: int
    target: str = "author"


def largest_remainder(total: int, weights: Iterable[tuple[str, Fraction]]) -> dict[str, int]:
    """Split ``total`` proportionally to ``weights`` in whole units.

    Everyone gets the floor of their quota; the leftover units go to the
    largest fractional remainders, ties broken by ascending address.
    """
    weights = sorted(weights)
    wsum = sum((w for _, w in weights), Fraction(0))
    if total == 0:
        return {a: 0 for a, _ in weights}
    if wsum <= 0:
        raise ValueError("cannot distribute over zero total weight")
    quotas = [(a, total * w / wsum) for a, w in weights]
    out = {a: math.floor(q) for a, q in quotas}
    residue = total - sum(out.values())
    order = sorted(quotas, key=lambda aq: (-(aq[1] - math.floor(aq[1])), aq[0]))
    for a, _ in order[:residue]:
        out[a] += 1
    return out


def rule(st: WorldState, rule_id: str) -> RuleProgram:
    r = st.table("rule").get(rule_id)
    if r is None:
        raise UnknownRule(rule_id)
    return r


def appropriated(st: WorldState, pool_id: str, actor: str, period: int, tick: int) -> int:
    """Approved amount for ``actor`` in the period containing ``tick``."""
    epoch = tick // period
    return sum(a for t, a in st.table("appropriated").get((pool_id, actor), ()) if t // period == epoch)


def evaluate_appropriation(
    st: WorldState, rule_id: str, actor: str, pool_id: str, amt: int, tick: int
) -> Decision:
    """Pure conjunctive evaluation; reports the first clause that fails."""
    r = rule(st, rule_id)
    for clause in r.clauses:
        if not _clause_holds(st, clause, actor, pool_id, amt, tick):
            return Decision(False, clause["id"])
    return Decision(True)


def _clause_holds(st, clause, actor, pool_id, amt, tick) -> bool:
    kind = clause["type"]
    if kind == "cap":
        return appropriated(st, pool_id, actor, clause["period"], tick) + amt <= clause["amount"]
    if kind == "role_allowance":
        allowance = max(
            (n for role, n in clause["allowances"].items() if tokens.has_role(st, actor, role)),
            default=0,
        )
        return appropriated(st, pool_id, actor, clause["period"], tick) + amt <= allowance
    if kind == "pool_floor":
        return treasury.reserve(st, pool_id) - amt >= clause["floor"]
    if kind == "window":
        return clause["start"] <= tick <= clause["end"]
    if kind == "require":
        req = {k: v for k, v in clause.items() if k in ("role", "scope", "token", "min")}
        return tokens.check_access(st, actor, req)
    raise ValueError(f"unknown clause type {kind!r}")


def allowance(st: WorldState, rule_id: str | None, actor: str, pool_id: str, tick: int) -> int:
    """Largest amount ``actor`` could be approved right now (agents read this)."""
    hi = treasury.reserve(st, pool_id)
    if rule_id is None or not st.enabled("M4"):
        return hi
    lo = 0
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if evaluate_appropriation(st, rule_id, actor, pool_id, mid, tick).approved:
            lo = mid
        else:
            hi = mid - 1
    return lo


def request_appropriation(st: WorldState, ctx: Ctx, pool_id: str, amt: int) -> dict:
    p = treasury.pool(st, pool_id)
    if p.rule is None or not st.enabled("M4"):
        decision = Decision(True)
    else:
        decision = evaluate_appropriation(st, p.rule, ctx.author, pool_id, amt, ctx.tick)
        ctx.touch(st, "M4-1")
        if any(c["type"] in ("cap", "role_allowance") for c in rule(st, p.rule).clauses):
            ctx.touch(st, "M7-2")
    if decision.approved:
        ap = treasury.issue_approval(st, ctx.author, pool_id, amt, ctx.tick, f"ap:{ctx.seq}")
        hist = st.table("appropriated")
        hist[(pool_id, ctx.author)] = hist.get((pool_id, ctx.author), ()) + ((ctx.tick, amt),)
        return {"approved": True, "approval": ap.id}
    denials = st.table("denial")
    denials[len(denials)] = (ctx.tick, pool_id, ctx.author, amt, decision.clause)
    if st.enabled("M11"):
        from . import enforcement

        enforcement.record_violation(st, ctx, ctx.author, "rule_breach", ctx.tick)
    return {"approved": False, "clause": decision.clause}


# -- risk / reward -----------------------------------------------------------

def policy(st: WorldState, policy_id: str) -> RiskRewardPolicy:
    pol = st.table("policy").get(policy_id)
    if pol is None:
        raise NotFound(f"policy {policy_id}")
    return pol


def effective_weights(st: WorldState, pol: RiskRewardPolicy) -> list[tuple[str, Fraction]]:
    """Policy weights after reward-share reductions, re-normalized to sum to 1."""
    factors = st.table("reward.factor")
    raw = [(a, w * factors.get(a, Fraction(1))) for a, w in pol.participants]
    total = sum((w for _, w in raw), Fraction(0))
    return [(a, w / total if total else Fraction(0)) for a, w in raw]


def distribute_rewards(st: WorldState, policy_id: str, amt: int) -> list[tuple[str, int]]:
    pol = policy(st, policy_id)
    if treasury.reserve(st, pol.pool) < amt:
        raise InsufficientReserve(f"pool {pol.pool} cannot cover {amt}")
    payouts = largest_remainder(amt, effective_weights(st, pol))
    return sorted(payouts.items())


@command("rewards.distribute", "M4")
def _distribute(st, ctx, p):
    if not (ctx.privileged or tokens.has_role(st, ctx.author, "treasurer") or tokens.is_governor(st, ctx)):
        raise Unauthorized("distribution requires treasurer or governance")
    pol = policy(st, p["policy"])
    payouts = distribute_rewards(st, p["policy"], amount(p["amount"]))
    src = treasury.pool(st, pol.pool)
    for addr, amt in payouts:
        tokens.move(st, src.resource_class, src.account, addr, amt)
    ctx.touch(st, "M4-2")
    return payouts


@command("appropriation.request")
def _request(st, ctx, p):
    return request_appropriation(st, ctx, p["pool"], amount(p["amount"]))


@command("rules.set_program", "M4")
def _set_program(st, ctx, p):
    spec = p["rule"]
    existing = st.table("rule").get(spec["id"])
    scope = existing.scope if existing else spec.get("scope")
    if not ctx.privileged:
        from . import enforcement

        enforcement.require_scope(st, ctx, scope)
        if not tokens.has_role(st, ctx.author, "governance", scope or tokens.GLOBAL):
            raise Unauthorized("changing rules is a governance action")
    st.table("rule")[spec["id"]] = program_from_spec(spec)
    ctx.touch(st, "M4-1")


def program_from_spec(spec: dict) -> RuleProgram:
    clauses = []
    for i, c in enumerate(spec["clauses"]):
        if c.get("type") not in CLAUSE_TYPES:
            raise ValueError(f"clause {i}: unknown type {c.get('type')!r}")
        clauses.append({"id": c.get("id", f"{c['type']}#{i}"), **c})
    return RuleProgram(spec["id"], tuple(clauses), spec.get("scope"))


# -- incentives --------------------------------------------------------------

def _matches(trigger: dict, payload: dict) -> bool:
    return all(payload.get(k) == v for k, v in trigger.items())


def apply_incentive(st: WorldState, ctx: Ctx, inc: IncentiveRule, payload: dict) -> int:
    """Fire ``inc`` for this event once; returns the minted amount (0 if not fired)."""
    if not _matches(inc.trigger, payload):
        return 0
    key = (inc.id, str(payload.get("ref", f"seq:{ctx.seq}")))
    fired = st.table("incentive.fired")
    if key in fired:
        return 0
    target = ctx.author if inc.target == "author" else payload[inc.target]
    tokens.credit(st, inc.reward_class, target, inc.reward_amount)
    fired[key] = ctx.seq
    ctx.touch(st, "M4-3")
    if tokens.token_class(st, inc.reward_class).kind is tokens.TokenKind.REPUTATION:
        ctx.touch(st, "M9-1")
    return inc.reward_amount


def apply_incentives(st: WorldState, ctx: Ctx, payload: dict) -> None:
    if not st.enabled("M4"):
        return
    incentives = st.table("incentive")
    for inc_id in sorted(incentives):
        inc = incentives[inc_id]
        if inc.reward_class == st.config("reputation") and not st.enabled("M9"):
            continue
        apply_incentive(st, ctx, inc, payload)


@command("data.submit")
def _data_submit(st, ctx, p):
    """A contribution record (e.g. a model or data-set update); incentives match on it."""
    st.table("data")[str(p["ref"])] = (ctx.author, ctx.tick, p.get("quality"))


def load_genesis(st: WorldState, cfg: dict) -> None:
    for spec in cfg.get("rules", []):
        r = program_from_spec(spec)
        st.table("rule")[r.id] = r
    for spec in cfg.get("policies", []):
        parts = tuple(sorted((a, frac(w)) for a, w in spec["participants"].items()))
        total = sum(w for _, w in parts)
        if total != 1 or any(w < 0 for _, w in parts):
            raise ValueError(f"policy {spec['id']}: weights must be non-negative and sum to 1")
        st.table("policy")[spec["id"]] = RiskRewardPolicy(
            spec["id"], parts, spec["pool"], frac(spec.get("at_risk_fraction", 0))
        )
    for spec in cfg.get("incentives", []):
        inc = IncentiveRule(
            spec["id"], dict(spec["trigger"]), spec["reward"]["class"], amount(spec["reward"]["amount"]),
            spec.get("target", "author"),
        )
        st.table("incentive")[inc.id] = inc
