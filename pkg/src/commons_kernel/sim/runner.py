"""Tick loop, project metrics, reports and A/B comparison."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import __version__, accountability, enforcement, market, rules, treasury, voting
from ..errors import InvalidPayload
from ..ledger import Client, Engine, label_of
from . import scenario as scn
from .agents import Agent, uniform
from .concept import Coverage, coverage_report


@dataclass
class Metrics:
    horizon: int
    depletion_tick: int | None
    completion: float
    completion_at_depletion: float | None
    completion_tick: int | None
    series: list  # (tick, reserve, packages_done, completion, violations, sanctions)
    greed_reduction_tick: int | None = None
    greed_trace: dict = field(default_factory=dict)
    violations: int = 0
    sanctions: int = 0
    rejections: int = 0

    @property
    def tragedy(self) -> bool:
        return tragedy_metric(self)[0]

    @property
    def margin(self) -> int | None:
        return tragedy_metric(self)[1]


def tragedy_metric(m: Metrics) -> tuple[bool, int | None]:
    """(tragedy flag, depletion margin). Tragedy means the pool ran dry before the work was done."""
    if m.depletion_tick is None:
        return False, None
    return m.completion_at_depletion < 1, m.horizon - m.depletion_tick


@dataclass
class RunResult:
    scenario: scn.Scenario
    engine: Engine
    metrics: Metrics
    coverage: Coverage
    disabled: tuple
    reports: dict  # file name -> text

    @property
    def state_hash(self) -> str:
        return self.engine.state_hash().hex()

    def manifest(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "scenario_digest": scenario_digest(self.scenario.doc),
            "seed": self.scenario.seed,
            "engine_version": __version__,
            "disabled": list(self.disabled),
            "ticks": self.scenario.ticks,
            "events": len(self.engine.events),
            "final_state_hash": self.state_hash,
            "tragedy": self.metrics.tragedy,
            "reports": sorted(self.reports),
            "log": "events.log",
            "genesis": "genesis.json",
        }

    def write(self, out: str | Path) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.reports.items()):
            (out / name).write_text(text)
        self.engine.log.write(out / "events.log")
        (out / "genesis.json").write_text(canonical_json(self.engine.genesis))
        path = out / "manifest.json"
        path.write_text(canonical_json(self.manifest()))
        return path


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def scenario_digest(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


class _Runner:
    def __init__(self, sc: scn.Scenario):
        self.sc = sc
        self.engine = Engine(sc.genesis)
        self.client = Client(self.engine, sc.keyring, sc.names[scn.KERNEL])
        self.agents = [Agent.from_policy(a, p) for a, p in sc.agents]
        self.project = sc.project
        self.work = 0
        self.late: list[tuple[str, str]] = []  # (agent, commitment id) reported next tick
        self.rejections: list[tuple] = []
        self.sanctions_seen = 0

    @property
    def st(self):
        return self.engine.state

    def send(self, author: str, payload: dict, expect: str | None = None):
        try:
            return self.client.send(author, payload)
        except InvalidPayload as exc:
            err = type(exc.error).__name__
            self.rejections.append((self.engine.tick, label_of(self.st, author), payload["kind"], err, str(exc.error)))
            return None

    def run(self) -> Metrics:
        sc = self.sc
        script = list(sc.script)
        series = []
        depletion = completion_tick = None
        at_depletion = None
        self._script(script, 0)
        for t in range(1, sc.ticks + 1):
            self.client.advance()
            self._observe(t)
            self._script(script, t)
            if self.project:
                self._agents(t)
            done = self.packages_done()
            frac_done = done / self.project["packages"] if self.project else 0.0
            if self.project and completion_tick is None and done == self.project["packages"]:
                completion_tick = t
            reserve = treasury.reserve(self.st, self.project["pool"]) if self.project else None
            if reserve == 0 and depletion is None:
                depletion, at_depletion = t, frac_done
            series.append(
                (t, reserve, done, frac_done, len(self.st.table("violation")), len(self.st.table("sanction")))
            )
        final = series[-1][3] if series else 0.0
        deterrable = [a for a in self.agents if a.variant == "Deterrable"]
        reductions = [a.reduced_at for a in deterrable if a.reduced_at is not None]
        return Metrics(
            sc.ticks,
            depletion,
            final,
            at_depletion,
            completion_tick,
            series,
            min(reductions) if reductions else None,
            {label_of(self.st, a.address): list(a.greed_trace) for a in deterrable},
            len(self.st.table("violation")),
            len(self.st.table("sanction")),
            len(self.rejections),
        )

    def packages_done(self) -> int:
        if not self.project:
            return 0
        return min(self.project["packages"], self.work // self.project["package_cost"])

    def _script(self, script: list, t: int) -> None:
        while script and script[0][0] == t:
            _, author, payload = script.pop(0)
            self.send(author, payload)

    def _observe(self, t: int) -> None:
        total = len(self.st.table("sanction"))
        new = total - self.sanctions_seen
        self.sanctions_seen = total
        for a in self.agents:
            a.observe_sanctions(new, t)

    def _agents(self, t: int) -> None:
        proj = self.project
        pool_id = proj["pool"]
        commitments = proj.get("commitments", False) and self.st.enabled("M8")
        for agent, cid in self.late:
            self.send(agent, {"kind": "report.complete", "commitment": cid})
        self.late = []
        if self.packages_done() >= proj["packages"]:
            return
        fair = proj["fair_share"]
        pool = treasury.pool(self.st, pool_id)
        for a in self.agents:
            if enforcement.is_removed(self.st, a.address):
                continue
            reserve = treasury.reserve(self.st, pool_id)
            want = a.desired(reserve, fair, uniform(self.sc.seed, t, a.address))
            if want <= 0:
                continue
            cid = f"c:{label_of(self.st, a.address)}:{t}"
            if commitments:
                self.send(a.address, {"kind": "commit.sign", "id": cid, "package": pool_id, "promised_tick": t})
            got = self._appropriate(a.address, pool_id, want)
            if got == 0:
                fallback = rules.allowance(self.st, pool.rule, a.address, pool_id, t)
                if 0 < fallback < want:
                    got = self._appropriate(a.address, pool_id, fallback)
            productive = min(got, fair)
            self.work += productive
            if commitments:
                if productive >= fair:
                    self.send(a.address, {"kind": "report.complete", "commitment": cid})
                else:
                    self.late.append((a.address, cid))

    def _appropriate(self, who: str, pool_id: str, amt: int) -> int:
        r = self.send(who, {"kind": "appropriation.request", "pool": pool_id, "amount": amt})
        if r is None or not r.result["approved"]:
            return 0
        w = self.send(who, {"kind": "pool.withdraw", "pool": pool_id, "amount": amt, "approval": r.result["approval"]})
        return amt if w is not None else 0


def reports(r: _Runner, m: Metrics) -> dict[str, str]:
    st = r.st
    rows = ["tick\treserve\tpackages_done\tcompletion\tviolations\tsanctions"]
    for t, reserve, done, frac_done, v, s in m.series:
        rows.append(f"{t}\t{'-' if reserve is None else reserve}\t{done}\t{frac_done:.4f}\t{v}\t{s}")
    rej = ["tick\tauthor\tkind\terror\tdetail"]
    rej += ["\t".join(str(x) for x in row) for row in r.rejections]
    summary = [
        "metric\tvalue",
        f"depletion_tick\t{m.depletion_tick if m.depletion_tick is not None else '-'}",
        f"completion\t{m.completion:.4f}",
        f"completion_tick\t{m.completion_tick if m.completion_tick is not None else '-'}",
        f"tragedy\t{str(m.tragedy).lower()}",
        f"margin\t{m.margin if m.margin is not None else '-'}",
        f"greed_reduction_tick\t{m.greed_reduction_tick if m.greed_reduction_tick is not None else '-'}",
        f"violations\t{m.violations}",
        f"sanctions\t{m.sanctions}",
        f"rejections\t{m.rejections}",
    ]
    period = int(r.project.get("ppc_period", 5)) if r.project else 5
    return {
        "summary.tsv": "\n".join(summary) + "\n",
        "metrics.tsv": "\n".join(rows) + "\n",
        "withdrawals.tsv": treasury.withdrawal_report(st),
        "sanctions.tsv": enforcement.sanctions_report(st),
        "ppc.tsv": accountability.ppc_report(st, period, r.sc.ticks),
        "tallies.tsv": voting.tally_report(st),
        "auctions.tsv": market.auction_report(st),
        "reviews.tsv": accountability.review_report(st),
        "rejections.tsv": "\n".join(rej) + "\n",
    }


def run(doc: dict, seed: int | None = None, disable=()) -> RunResult:
    """Run a scenario document; raises InvalidScenario before any event."""
    sc = scn.load(doc, seed, disable)
    r = _Runner(sc)
    m = r.run()
    cov = coverage_report(r.engine.receipts)
    reps = reports(r, m)
    reps["coverage.tsv"] = cov.to_tsv()
    return RunResult(sc, r.engine, m, cov, tuple(sorted(set(disable))), reps)


@dataclass
class ABResult:
    switches: tuple
    with_: RunResult
    without: RunResult

    def to_tsv(self) -> str:
        rows = ["arm\tstate_hash\ttragedy\tdepletion_tick\tcompletion\tgreed_reduction_tick\tviolations\tsanctions"]
        for arm, res in (("with", self.with_), ("without", self.without)):
            m = res.metrics
            rows.append(
                f"{arm}\t{res.state_hash}\t{str(m.tragedy).lower()}\t{m.depletion_tick if m.depletion_tick is not None else '-'}"
                f"\t{m.completion:.4f}\t{m.greed_reduction_tick if m.greed_reduction_tick is not None else '-'}"
                f"\t{m.violations}\t{m.sanctions}"
            )
        return "\n".join(rows) + "\n"


def ab_compare(doc: dict, switches, seed: int | None = None) -> ABResult:
    """Run ``doc`` with the named mechanisms switched on and then off, same seed."""
    switches = tuple(sorted(set(switches), key=lambda m: (len(m), m)))
    on = dict(doc)
    on["governance_enabled"] = sorted(set(scn.enabled_set(doc)) | set(switches), key=lambda m: (len(m), m))
    return ABResult(switches, run(on, seed), run(on, seed, disable=switches))
