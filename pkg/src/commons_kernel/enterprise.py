"""Nested enterprise tree: routing of decisions, delegation, escalation."""

from __future__ import annotations

from dataclasses import dataclass

from . import tokens
from .commands import Ctx, command
from .errors import AtRoot, NoCompetentNode, NoMandate, NotAncestor, NotFound, Unauthorized
from .state import WorldState


@dataclass(frozen=True)
class EnterpriseNode:
    id: str
    parent: str | None
    members: frozenset
    mandate: frozenset


def node(st: WorldState, node_id: str) -> EnterpriseNode:
    n = st.table("ent.node").get(node_id)
    if n is None:
        raise NotFound(f"enterprise node {node_id}")
    return n


def root(st: WorldState) -> str | None:
    return st.config("enterprise_root")


def children(st: WorldState, node_id: str) -> list[str]:
    return sorted(n.id for n in st.table("ent.node").values() if n.parent == node_id)


def ancestors(st: WorldState, node_id: str) -> list[str]:
    """``node_id`` followed by its ancestors up to the root."""
    chain = []
    cur: str | None = node_id
    while cur is not None:
        chain.append(cur)
        cur = node(st, cur).parent
    return chain


def is_ancestor(st: WorldState, anc: str, desc: str) -> bool:
    return anc != desc and anc in ancestors(st, desc)


def subtree_members(st: WorldState, node_id: str) -> frozenset:
    cache = st.table("ent.subtree")
    hit = cache.get(node_id)
    if hit is not None:
        return hit
    out = set(node(st, node_id).members)
    for c in children(st, node_id):
        out |= subtree_members(st, c)
    return frozenset(out)


def effective_mandate(st: WorldState, node_id: str) -> frozenset:
    own = node(st, node_id).mandate
    delegated = {kind for (_, to, kind) in st.table("ent.delegation") if to == node_id}
    return own | delegated


def route_decision(st: WorldState, kind: str, affected) -> str:
    """Lowest node whose subtree covers ``affected`` and that may decide ``kind``."""
    affected = set(affected)
    start = root(st)
    if start is None:
        raise NoCompetentNode("no enterprise tree")
    # descend while a single child still covers everyone affected
    cur = start
    while True:
        covering = [c for c in children(st, cur) if affected <= subtree_members(st, c)]
        if len(covering) != 1:
            break
        cur = covering[0]
    if not affected <= subtree_members(st, cur):
        raise NoCompetentNode(f"affected parties are outside the enterprise")
    for n in ancestors(st, cur):
        if kind in effective_mandate(st, n):
            return n
    raise NoCompetentNode(f"no tier holds a mandate for {kind!r}")


def parent(st: WorldState, node_id: str) -> str:
    p = node(st, node_id).parent
    if p is None:
        raise AtRoot(node_id)
    return p


def delegate(st: WorldState, ctx: Ctx, frm: str, to: str, kind: str, revocable: bool = True) -> None:
    from .enforcement import require_scope

    node(st, to)
    if not is_ancestor(st, frm, to):
        raise NotAncestor(f"{frm} is not an ancestor of {to}")
    if kind not in effective_mandate(st, frm):
        raise NoMandate(f"{frm} holds no mandate for {kind!r}")
    require_scope(st, ctx, frm)
    if not (ctx.privileged or ctx.author in node(st, frm).members or tokens.has_role(st, ctx.author, "governance", frm)):
        raise Unauthorized("only members of the delegating tier can delegate")
    st.table("ent.delegation")[(frm, to, kind)] = revocable
    ctx.touch(st, "M14-1")


def revoke_delegation(st: WorldState, ctx: Ctx, frm: str, to: str, kind: str) -> None:
    key = (frm, to, kind)
    d = st.table("ent.delegation")
    if key not in d:
        raise NotFound(f"delegation {key}")
    if not d[key]:
        raise Unauthorized("delegation is irrevocable")
    if not (ctx.privileged or ctx.author in node(st, frm).members):
        raise Unauthorized("only members of the delegating tier can revoke")
    del d[key]
    ctx.touch(st, "M14-1")


@command("enterprise.delegate", "M14")
def _delegate(st, ctx, p):
    delegate(st, ctx, p["from"], p["to"], p["decision"], bool(p.get("revocable", True)))


@command("enterprise.revoke", "M14")
def _revoke(st, ctx, p):
    revoke_delegation(st, ctx, p["from"], p["to"], p["decision"])


def _load(st: WorldState, spec: dict, parent_id: str | None) -> None:
    nid = spec["id"]
    if nid in st.table("ent.node"):
        raise ValueError(f"duplicate enterprise node {nid}")
    st.table("ent.node")[nid] = EnterpriseNode(
        nid, parent_id, frozenset(spec.get("members", ())), frozenset(spec.get("mandate", ()))
    )
    for child in spec.get("children", ()):
        _load(st, child, nid)


def load_genesis(st: WorldState, cfg: dict) -> None:
    tree = cfg.get("enterprise")
    if not tree:
        return
    _load(st, tree, None)
    # the tree is static apart from delegations, so subtree membership is cached
    for nid in sorted(st.table("ent.node")):
        st.table("ent.subtree")[nid] = subtree_members(st, nid)
