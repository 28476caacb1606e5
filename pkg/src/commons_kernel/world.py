"""Genesis: turn a world configuration into the initial state, and check it."""

from __future__ import annotations

import re
from fractions import Fraction

from . import accountability, enforcement, enterprise, market, rules, tokens, treasury, voting  # noqa: F401  (registers commands)
from .commands import command, frac
from .errors import Unauthorized
from .ledger import Address, AddressKind
from .state import WorldState

MECHANISMS = tuple(f"M{i}" for i in range(1, 15))

# settings copied verbatim into the config table
CONFIG_KEYS = (
    "kernel",
    "currency",
    "reputation",
    "membership",
    "governance_token",
    "sanctions",
    "court",
    "deadlock_n",
    "review_reputation_scale",
)

_HEX_ID = re.compile(r"^[0-9a-f]{64}$")


def genesis_state(cfg: dict) -> WorldState:
    st = WorldState()
    conf = st.table("config")
    for key in CONFIG_KEYS:
        if key in cfg:
            conf[key] = cfg[key]
    conf["enabled"] = frozenset(cfg.get("enabled", MECHANISMS))
    if cfg.get("enterprise"):
        conf["enterprise_root"] = cfg["enterprise"]["id"]
    addrs = st.table("address")
    for a in cfg.get("addresses", []):
        addrs[a["id"]] = Address(a["id"], AddressKind(a["kind"]), a.get("label", ""))
    st.table("clock")["tick"] = 0
    for module in (tokens, treasury, rules, voting, enforcement, enterprise):
        module.load_genesis(st, cfg)
    return st


@command("advance")
def _advance(st, ctx, p):
    """Move the clock one tick and step conviction; only the kernel may do it."""
    kernel = st.config("kernel")
    if kernel is not None and ctx.author != kernel:
        raise Unauthorized("only the kernel address advances the clock")
    st.table("clock")["tick"] = ctx.tick
    voting.conviction_step(st, ctx.tick)


def validate_world(cfg: dict, path: str = "world") -> list[str]:
    """Path-qualified problems with a world configuration; empty when valid."""
    errs: list[str] = []

    def err(where: str, msg: str) -> None:
        errs.append(f"{path}.{where}: {msg}")

    if not isinstance(cfg, dict):
        return [f"{path}: must be a mapping"]
    known: set[str] = set()
    for i, a in enumerate(cfg.get("addresses", [])):
        aid = a.get("id") if isinstance(a, dict) else None
        if not isinstance(aid, str) or not _HEX_ID.match(aid):
            err(f"addresses[{i}].id", "must be 64 lowercase hex characters")
            continue
        if aid in known:
            err(f"addresses[{i}].id", "duplicate address")
        known.add(aid)
        if a.get("kind") not in {k.value for k in AddressKind}:
            err(f"addresses[{i}].kind", f"unknown kind {a.get('kind')!r}")

    def holder_ok(h: str) -> bool:
        return h in known or ":" in h  # escrow accounts are "<kind>:<id>"

    for i, m in enumerate(cfg.get("enabled", [])):
        if m not in MECHANISMS:
            err(f"enabled[{i}]", f"unknown mechanism {m!r}")

    classes: dict[str, str] = {}
    for i, t in enumerate(cfg.get("tokens", [])):
        tid = t.get("id")
        if not isinstance(tid, str):
            err(f"tokens[{i}].id", "missing")
            continue
        if tid in classes:
            err(f"tokens[{i}].id", f"duplicate class {tid!r}")
        kind = t.get("kind")
        if kind not in {k.value for k in tokens.TokenKind}:
            err(f"tokens[{i}].kind", f"unknown kind {kind!r}")
        elif kind == "Reputation" and t.get("transferable", True):
            err(f"tokens[{i}].transferable", "reputation classes must be non-transferable")
        classes[tid] = kind
        for h, amt in sorted(t.get("balances", {}).items()):
            if not holder_ok(h):
                err(f"tokens[{i}].balances.{h}", "unknown holder")
            if isinstance(amt, bool) or not isinstance(amt, int) or amt < 0:
                err(f"tokens[{i}].balances.{h}", "must be a non-negative integer")

    for key in ("currency", "reputation", "membership", "governance_token"):
        if key in cfg and cfg[key] not in classes:
            err(key, f"unknown token class {cfg[key]!r}")

    for i, r in enumerate(cfg.get("roles", [])):
        if not holder_ok(r.get("holder", "")):
            err(f"roles[{i}].holder", "unknown holder")

    rule_ids = set()
    for i, r in enumerate(cfg.get("rules", [])):
        rule_ids.add(r.get("id"))
        for j, c in enumerate(r.get("clauses", [])):
            if c.get("type") not in rules.CLAUSE_TYPES:
                err(f"rules[{i}].clauses[{j}].type", f"unknown clause type {c.get('type')!r}")
            elif c["type"] in ("cap", "role_allowance") and not (isinstance(c.get("period"), int) and c["period"] > 0):
                err(f"rules[{i}].clauses[{j}].period", "must be a positive integer")

    pool_ids = set()
    for i, p in enumerate(cfg.get("pools", [])):
        pool_ids.add(p.get("id"))
        if p.get("resource_class") not in classes:
            err(f"pools[{i}].resource_class", f"unknown token class {p.get('resource_class')!r}")
        if p.get("rule") is not None and p["rule"] not in rule_ids:
            err(f"pools[{i}].rule", f"unknown rule {p['rule']!r}")

    for i, c in enumerate(cfg.get("curves", [])):
        for key in ("token", "currency"):
            if c.get(key) not in classes:
                err(f"curves[{i}].{key}", f"unknown token class {c.get(key)!r}")
        if c.get("funding_pool") is not None and c["funding_pool"] not in pool_ids:
            err(f"curves[{i}].funding_pool", f"unknown pool {c['funding_pool']!r}")
        try:
            if frac(c.get("p0", 0)) <= 0 or frac(c.get("k", 0)) < 0:
                err(f"curves[{i}]", "needs p0 > 0 and k >= 0")
        except (ValueError, TypeError, ZeroDivisionError):
            err(f"curves[{i}]", "p0 and k must be numbers")

    for i, pol in enumerate(cfg.get("policies", [])):
        if pol.get("pool") not in pool_ids:
            err(f"policies[{i}].pool", f"unknown pool {pol.get('pool')!r}")
        try:
            total = sum((frac(w) for w in pol.get("participants", {}).values()), Fraction(0))
            if total != 1:
                err(f"policies[{i}].participants", f"weights sum to {total}, not 1")
        except (ValueError, TypeError, ZeroDivisionError):
            err(f"policies[{i}].participants", "weights must be numbers")

    for i, inc in enumerate(cfg.get("incentives", [])):
        if inc.get("reward", {}).get("class") not in classes:
            err(f"incentives[{i}].reward.class", "unknown token class")

    for i, reg in enumerate(cfg.get("registries", [])):
        tok = reg.get("token", cfg.get("governance_token") or cfg.get("currency"))
        if tok not in classes:
            err(f"registries[{i}].token", f"unknown token class {tok!r}")

    tree = cfg.get("enterprise")
    if tree:
        seen: set[str] = set()

        def walk(node: dict, where: str) -> None:
            nid = node.get("id")
            if nid in seen:
                err(f"{where}.id", f"duplicate node {nid!r}")
            seen.add(nid)
            for j, m in enumerate(node.get("members", [])):
                if m not in known:
                    err(f"{where}.members[{j}]", "unknown address")
            for j, child in enumerate(node.get("children", [])):
                walk(child, f"{where}.children[{j}]")

        walk(tree, "enterprise")
    return errs
