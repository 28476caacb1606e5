"""Concept map of principles, mechanisms and applications, and run coverage."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable


def load_concept_map(path: str | None = None) -> dict:
    if path is None:
        text = resources.files("commons_kernel.sim").joinpath("data/concept_map.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


@dataclass
class MapCheck:
    ok: bool
    counts: dict
    violations: list = field(default_factory=list)


def validate_concept_map(cmap: dict | None = None) -> MapCheck:
    cmap = load_concept_map() if cmap is None else cmap
    problems = []
    principles = cmap.get("principles", [])
    principle_ids = set()
    for p in principles:
        principle_ids.add(p["id"])
        principle_ids.update(s["id"] for s in p.get("sub", []))
    mechs = cmap.get("mechanisms", [])
    apps = cmap.get("applications", [])
    mech_ids = [m["id"] for m in mechs]
    app_ids = [a["id"] for a in apps]
    counts = {"principles": len(principles), "mechanisms": len(mechs), "applications": len(apps)}
    for key, want in (("principles", 8), ("mechanisms", 14), ("applications", 22)):
        if counts[key] != want:
            problems.append(f"expected {want} {key}, found {counts[key]}")
    for ids, what in ((mech_ids, "mechanism"), (app_ids, "application")):
        for dup in sorted(i for i, n in Counter(ids).items() if n > 1):
            problems.append(f"duplicate {what} {dup}")
    for m in mechs:
        principle = m.get("principle")
        if not isinstance(principle, str) or principle not in principle_ids:
            problems.append(f"mechanism {m['id']} must map to exactly one known principle, has {principle!r}")
    per_mech = Counter(a.get("mechanism") for a in apps)
    for m in mech_ids:
        if per_mech[m] == 0:
            problems.append(f"mechanism {m} has no application")
    for a in apps:
        if a.get("mechanism") not in mech_ids:
            problems.append(f"application {a['id']} references unknown mechanism {a.get('mechanism')!r}")
    known = set(app_ids)
    for i, edge in enumerate(cmap.get("edges", [])):
        for end in edge:
            if end not in known:
                problems.append(f"edge {i} {edge[0]}->{edge[1]} has dangling endpoint {end}")
    counts["edges"] = len(cmap.get("edges", []))
    return MapCheck(not problems, counts, problems)


def in_degrees(cmap: dict) -> Counter:
    return Counter(b for _, b in cmap["edges"])


def out_degrees(cmap: dict) -> Counter:
    return Counter(a for a, _ in cmap["edges"])


@dataclass
class Coverage:
    mechanisms: dict
    applications: dict
    mechanism_gaps: list
    application_gaps: list

    @property
    def mechanisms_hit(self) -> int:
        return sum(1 for n in self.mechanisms.values() if n)

    @property
    def applications_hit(self) -> int:
        return sum(1 for n in self.applications.values() if n)

    def to_tsv(self) -> str:
        rows = ["id\tlevel\tevents"]
        rows += [f"{k}\tmechanism\t{v}" for k, v in self.mechanisms.items()]
        rows += [f"{k}\tapplication\t{v}" for k, v in self.applications.items()]
        return "\n".join(rows) + "\n"


def coverage_report(receipts: Iterable, cmap: dict | None = None) -> Coverage:
    """Count accepted events attributed to each application and mechanism."""
    cmap = load_concept_map() if cmap is None else cmap
    apps = {a["id"]: 0 for a in cmap["applications"]}
    mechs = {m["id"]: 0 for m in cmap["mechanisms"]}
    for r in receipts:
        for app in r.applications:
            if app in apps:
                apps[app] += 1
        for m in {app.split("-")[0] for app in r.applications}:
            if m in mechs:
                mechs[m] += 1
    return Coverage(
        mechs,
        apps,
        [m for m, n in mechs.items() if n == 0],
        [a for a, n in apps.items() if n == 0],
    )
