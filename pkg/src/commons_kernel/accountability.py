"""Signed commitments, Planned-Percent-Complete, peer review and reputation."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable

from . import tokens
from .commands import Ctx, amount, command, frac
from .errors import (
    AlreadyFinal,
    DuplicateEntry,
    IncompleteScores,
    NotFound,
    SelfReview,
    Unauthorized,
)
from .ledger import is_machine
from .rules import largest_remainder, rule
from .state import WorldState


@dataclass(frozen=True)
class Commitment:
    id: str
    committer: str
    package: str
    promised_tick: int
    terms: str | None = None
    status: str = "Promised"  # Promised | Completed | Missed
    done_tick: int | None = None


@dataclass(frozen=True)
class PPCRecord:
    period: int
    actor: str
    promised: int
    completed: int

    @property
    def ppc(self) -> float:
        return self.completed / self.promised


@dataclass(frozen=True)
class ReviewRound:
    id: str
    subjects: tuple
    reviewers: tuple
    pool: int
    status: str = "Open"


def commitment(st: WorldState, cid: str) -> Commitment:
    c = st.table("commitment").get(cid)
    if c is None:
        raise NotFound(f"commitment {cid}")
    return c


def commit(st: WorldState, ctx: Ctx, cid: str, package: str, promised_tick: int, terms: str | None = None) -> Commitment:
    if cid in st.table("commitment"):
        raise DuplicateEntry(f"commitment {cid}")
    if terms is not None:
        for clause in rule(st, terms).clauses:
            if clause["type"] != "require":
                continue
            req = {k: v for k, v in clause.items() if k in ("role", "scope", "token", "min")}
            if not tokens.check_access(st, ctx.author, req):
                raise Unauthorized(f"{ctx.author} does not satisfy terms clause {clause['id']}")
        ctx.touch(st, "M1-1")
    if is_machine(st, ctx.author):
        ctx.touch(st, "M1-2")
    c = Commitment(cid, ctx.author, package, promised_tick, terms)
    st.table("commitment")[cid] = c
    ctx.touch(st, "M8-1")
    return c


def report_complete(st: WorldState, ctx: Ctx, cid: str) -> str:
    c = commitment(st, cid)
    if not (ctx.privileged or ctx.author == c.committer):
        raise Unauthorized("only the committer reports completion")
    if c.status != "Promised":
        raise AlreadyFinal(cid)
    status = "Completed" if ctx.tick <= c.promised_tick else "Missed"
    st.table("commitment")[cid] = replace(c, status=status, done_tick=ctx.tick)
    ctx.touch(st, "M8-1", "M7-1")
    if status == "Missed" and st.enabled("M11"):
        from .enforcement import record_violation

        record_violation(st, ctx, c.committer, "missed_commitment", ctx.tick)
    return status


def compute_ppc(st: WorldState, actors: str | Iterable[str], start: int, end: int, label: str | None = None) -> PPCRecord | None:
    """Completion ratio of commitments due in ``[start, end)``; None when nothing was promised."""
    who = {actors} if isinstance(actors, str) else set(actors)
    due = [
        c for c in st.table("commitment").values()
        if c.committer in who and start <= c.promised_tick < end
    ]
    if not due:
        return None
    done = sum(c.status == "Completed" for c in due)
    name = label or (actors if isinstance(actors, str) else ",".join(sorted(who)))
    return PPCRecord(start, name, len(due), done)


def ppc_series(st: WorldState, period: int, horizon: int) -> list[PPCRecord]:
    actors = sorted({c.committer for c in st.table("commitment").values()})
    out = []
    for start in range(0, horizon + 1, period):
        for a in actors:
            rec = compute_ppc(st, a, start, start + period)
            if rec is not None:
                out.append(rec)
    return out


def ppc_report(st: WorldState, period: int, horizon: int) -> str:
    from .ledger import label_of

    rows = ["period\tactor\tpromised\tcompleted\tppc"]
    for r in ppc_series(st, period, horizon):
        rows.append(f"{r.period}\t{label_of(st, r.actor)}\t{r.promised}\t{r.completed}\t{r.ppc:.4f}")
    return "\n".join(rows) + "\n"


# -- peer review ---------------------------------------------------------------

def review(st: WorldState, rid: str) -> ReviewRound:
    r = st.table("review").get(rid)
    if r is None:
        raise NotFound(f"review round {rid}")
    return r


def open_review(st: WorldState, ctx: Ctx, rid: str, subjects, reviewers, pool: int) -> ReviewRound:
    if rid in st.table("review"):
        raise DuplicateEntry(f"review round {rid}")
    r = ReviewRound(rid, tuple(sorted(set(subjects))), tuple(sorted(set(reviewers))), pool)
    if not r.subjects or not r.reviewers:
        raise ValueError("a review round needs subjects and reviewers")
    tokens.move(st, st.config("currency"), ctx.author, f"review:{rid}", pool)
    st.table("review")[rid] = r
    ctx.touch(st, "M10-1")
    return r


def submit_score(st: WorldState, ctx: Ctx, rid: str, subject: str, score: Fraction) -> None:
    r = review(st, rid)
    if r.status != "Open":
        raise AlreadyFinal(rid)
    if ctx.author not in r.reviewers:
        raise Unauthorized(f"{ctx.author} is not a reviewer in {rid}")
    if subject == ctx.author:
        raise SelfReview(f"{ctx.author} cannot score their own contribution")
    if subject not in r.subjects:
        raise NotFound(f"{subject} is not under review in {rid}")
    if not 0 <= score <= 1:
        raise ValueError("scores lie in [0, 1]")
    st.table("review.score")[(rid, ctx.author, subject)] = score
    ctx.touch(st, "M10-1")


def mean_scores(st: WorldState, rid: str) -> dict[str, Fraction]:
    r = review(st, rid)
    scores = st.table("review.score")
    means = {}
    for s in r.subjects:
        graders = [v for v in r.reviewers if v != s]
        missing = [v for v in graders if (rid, v, s) not in scores]
        if not graders or missing:
            raise IncompleteScores(f"{s} lacks scores from {missing or 'any reviewer'}")
        means[s] = sum((scores[(rid, v, s)] for v in graders), Fraction(0)) / len(graders)
    return means


def round_half_up(x: Fraction) -> int:
    return int((x + Fraction(1, 2)) // 1)


def settlement(means: dict[str, Fraction], pool: int, scale: int) -> tuple[dict[str, int], dict[str, int]]:
    """(currency payouts, reputation mints); all-zero scores split equally."""
    if sum(means.values()) == 0:
        weights = [(s, Fraction(1)) for s in means]
    else:
        weights = list(means.items())
    pay = largest_remainder(pool, weights)
    mints = {s: round_half_up(scale * m) for s, m in means.items()}
    return pay, mints


def settle_review(st: WorldState, ctx: Ctx, rid: str) -> dict:
    r = review(st, rid)
    if r.status != "Open":
        raise AlreadyFinal(rid)
    means = mean_scores(st, rid)
    pay, mints = settlement(means, r.pool, int(st.config("review_reputation_scale", 10)))
    cur = st.config("currency")
    for s in sorted(pay):
        tokens.move(st, cur, f"review:{rid}", s, pay[s])
    rep = st.config("reputation")
    minted = {}
    if rep is not None and st.enabled("M9"):
        for s in sorted(mints):
            if mints[s]:
                tokens.credit(st, rep, s, mints[s])
        minted = mints
        ctx.touch(st, "M9-1")
    st.table("review")[rid] = replace(r, status="Settled")
    ctx.touch(st, "M10-1", "M4-3")
    return {"payouts": dict(sorted(pay.items())), "reputation": dict(sorted(minted.items()))}


def review_report(st: WorldState) -> str:
    """Scores of settled rounds only; open rounds stay sealed."""
    from .ledger import label_of

    rows = ["round\treviewer\tsubject\tscore"]
    for (rid, v, s), score in sorted(st.table("review.score").items()):
        if review(st, rid).status == "Settled":
            rows.append(f"{rid}\t{label_of(st, v)}\t{label_of(st, s)}\t{float(score):.4f}")
    return "\n".join(rows) + "\n"


def reputation(st: WorldState, actor: str) -> int:
    rep = st.config("reputation")
    return 0 if rep is None else tokens.balance(st, rep, actor)


def reputation_gate(st: WorldState, actor: str, minimum: int) -> bool:
    return reputation(st, actor) >= minimum


@command("commit.sign", "M8")
def _commit(st, ctx, p):
    return commit(st, ctx, p["id"], p.get("package", p["id"]), int(p["promised_tick"]), p.get("terms")).id


@command("report.complete", "M8")
def _report(st, ctx, p):
    return report_complete(st, ctx, p["commitment"])


@command("review.open", "M10")
def _review_open(st, ctx, p):
    return open_review(st, ctx, p["id"], p["subjects"], p["reviewers"], amount(p["pool"])).id


@command("review.score", "M10")
def _review_score(st, ctx, p):
    submit_score(st, ctx, p["review"], p["subject"], frac(p["score"]))


@command("review.settle", "M10")
def _review_settle(st, ctx, p):
    return settle_review(st, ctx, p["review"])
