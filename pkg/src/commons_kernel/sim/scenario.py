"""Scenario files: loading, ``@name`` resolution and validation.

A scenario names its participants; every string ``"@name"`` (as a value or
a mapping key) is replaced by that participant's address, derived from the
scenario seed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..commands import COMMANDS
from ..errors import InvalidScenario
from ..ledger import AddressKind, Keyring
from ..world import MECHANISMS, validate_world

KERNEL = "kernel"
VARIANTS = ("Honest", "Opportunistic", "Deterrable")
U64 = 2**64


@dataclass
class Scenario:
    doc: dict
    seed: int
    keyring: Keyring
    names: dict  # label -> address id
    genesis: dict
    agents: list  # (address id, policy dict), address order
    script: list  # (tick, author id, payload)
    ticks: int
    project: dict

    @property
    def name(self) -> str:
        return self.doc.get("name", "scenario")


def shipped(name: str) -> dict:
    """A scenario document shipped with the package (``baseline``, ``full_demo``...)."""
    text = resources.files("commons_kernel.sim").joinpath(f"data/{name}.json").read_text()
    return json.loads(text)


def read(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InvalidScenario(str(path), "no such file") from None
    except json.JSONDecodeError as exc:
        raise InvalidScenario(str(path), f"not valid JSON ({exc})") from None


def enabled_set(doc: dict, disable=()) -> list[str]:
    on = doc.get("governance_enabled", list(MECHANISMS))
    if isinstance(on, dict):
        on = [m for m, flag in on.items() if flag]
    return sorted(set(on) - set(disable), key=lambda m: (len(m), m))


def _resolve(value, names: dict, path: str, errs: list):
    if isinstance(value, str) and value.startswith("@"):
        label = value[1:]
        if label not in names:
            errs.append(f"{path}: unknown participant {value!r}")
            return value
        return names[label]
    if isinstance(value, list):
        return [_resolve(v, names, f"{path}[{i}]", errs) for i, v in enumerate(value)]
    if isinstance(value, dict):
        out = {}
        for k, v in value.items():
            key = _resolve(k, names, f"{path}.{k}", errs) if isinstance(k, str) else k
            out[key] = _resolve(v, names, f"{path}.{k}", errs)
        return out
    return value


def validate(doc: dict, seed: int | None = None, disable=()) -> list[str]:
    """Every problem in ``doc`` as ``path: message``; empty when valid."""
    try:
        build(doc, seed, disable)
    except InvalidScenario as exc:
        return exc.problems
    return []


def load(doc: dict, seed: int | None = None, disable=()) -> Scenario:
    return build(doc, seed, disable)


def build(doc: dict, seed: int | None = None, disable=()) -> Scenario:
    errs: list[str] = []
    if not isinstance(doc, dict):
        raise InvalidScenario("scenario", "must be a JSON object")
    seed = doc.get("seed", 0) if seed is None else seed
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < U64:
        errs.append("seed: must be an unsigned 64-bit integer")
        seed = 0
    ticks = doc.get("ticks")
    if isinstance(ticks, bool) or not isinstance(ticks, int) or ticks < 0:
        errs.append("ticks: must be a non-negative integer")
        ticks = 0
    for i, m in enumerate(enabled_set(doc) if isinstance(doc.get("governance_enabled", []), (list, dict)) else []):
        if m not in MECHANISMS:
            errs.append(f"governance_enabled[{i}]: unknown mechanism {m!r}")
    for i, m in enumerate(disable):
        if m not in MECHANISMS:
            errs.append(f"disable[{i}]: unknown mechanism {m!r}")

    keyring = Keyring(seed)
    names: dict[str, str] = {}
    addresses = []
    participants = doc.get("participants", [])
    for i, p in enumerate(participants):
        label = p.get("name") if isinstance(p, dict) else None
        if not isinstance(label, str) or not label or label == KERNEL:
            errs.append(f"participants[{i}].name: must be a non-empty name other than {KERNEL!r}")
            continue
        if label in names:
            errs.append(f"participants[{i}].name: duplicate {label!r}")
            continue
        kind = p.get("kind", "Human")
        if kind not in {k.value for k in AddressKind}:
            errs.append(f"participants[{i}].kind: unknown kind {kind!r}")
            continue
        addr = keyring.address(label, kind)
        names[label] = addr.id
        addresses.append(addr)
    kernel = keyring.address(KERNEL, AddressKind.MACHINE)
    names[KERNEL] = kernel.id

    world = _resolve(copy.deepcopy(doc.get("world", {})), names, "world", errs)
    if not isinstance(world, dict):
        errs.append("world: must be a mapping")
        world = {}
    genesis = dict(world)
    genesis["addresses"] = [
        {"id": a.id, "kind": a.kind.value, "label": a.label} for a in [kernel, *addresses]
    ]
    genesis["kernel"] = kernel.id
    genesis["enabled"] = enabled_set(doc, disable)
    errs += validate_world(genesis)

    project = doc.get("project", {})
    pools = {p.get("id") for p in world.get("pools", [])}
    if project:
        if project.get("pool") not in pools:
            errs.append(f"project.pool: unknown pool {project.get('pool')!r}")
        for key in ("packages", "package_cost", "fair_share"):
            v = project.get(key)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                errs.append(f"project.{key}: must be a positive integer")

    agents = []
    seen = set()
    for i, a in enumerate(doc.get("agents", [])):
        label = a.get("name")
        if label not in names or label == KERNEL:
            errs.append(f"agents[{i}].name: unknown participant {label!r}")
            continue
        if label in seen:
            errs.append(f"agents[{i}].name: {label!r} already has a policy")
        seen.add(label)
        pol = dict(a.get("policy", {"variant": "Honest"}))
        variant = pol.get("variant")
        if variant not in VARIANTS:
            errs.append(f"agents[{i}].policy.variant: unknown variant {variant!r}")
        if variant in ("Opportunistic", "Deterrable"):
            g = pol.get("greed")
            if not isinstance(g, (int, float)) or isinstance(g, bool) or not 0 < g <= 1:
                errs.append(f"agents[{i}].policy.greed: must lie in (0, 1]")
        if variant == "Deterrable":
            d = pol.get("deterrence")
            if not isinstance(d, (int, float)) or isinstance(d, bool) or not 0 <= d <= 1:
                errs.append(f"agents[{i}].policy.deterrence: must lie in [0, 1]")
        j = pol.get("jitter", 0)
        if not isinstance(j, (int, float)) or not 0 <= j < 1:
            errs.append(f"agents[{i}].policy.jitter: must lie in [0, 1)")
        agents.append((names[label], pol))
    if agents and not project:
        errs.append("project: agents need a project section")

    script = []
    for i, ev in enumerate(doc.get("script", [])):
        where = f"script[{i}]"
        t = ev.get("tick") if isinstance(ev, dict) else None
        if isinstance(t, bool) or not isinstance(t, int) or not 0 <= t <= ticks:
            errs.append(f"{where}.tick: must be an integer in [0, {ticks}]")
            continue
        author = _resolve(ev.get("author"), names, f"{where}.author", errs)
        payload = _resolve(ev.get("payload"), names, f"{where}.payload", errs)
        if not isinstance(payload, dict) or payload.get("kind") not in COMMANDS:
            errs.append(f"{where}.payload.kind: unknown command {None if not isinstance(payload, dict) else payload.get('kind')!r}")
            continue
        if author not in names.values():
            errs.append(f"{where}.author: must name a participant")
            continue
        script.append((t, author, payload))
    script.sort(key=lambda e: e[0])  # stable: file order within a tick

    if errs:
        path, _, message = errs[0].partition(": ")
        raise InvalidScenario(path, message, errs)
    agents.sort(key=lambda ap: ap[0])
    return Scenario(doc, seed, keyring, names, genesis, agents, script, ticks, project)
