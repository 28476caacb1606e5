"""Command-line entry point: ``commons-kernel validate|run|replay|coverage|ab``.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import CorruptLog, InvalidScenario, KernelError
from .ledger import EventLog, replay_engine
from .sim import ab_compare, coverage_report, read, run, validate_concept_map
from .sim.scenario import validate
from .tokens import supply_audit

OK, INVALID, FAILED = 0, 1, 2


def mech_list(text: str) -> list[str]:
    return [m.strip() for m in text.split(",") if m.strip()]


def u64(text: str) -> int:
    n = int(text, 0)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return n


def cmd_validate(args) -> int:
    doc = read(args.file)
    if isinstance(doc, dict) and "mechanisms" in doc and "applications" in doc:
        check = validate_concept_map(doc)
        problems = check.violations
    else:
        problems = validate(doc)
    if problems:
        for p in problems:
            print(f"{args.file}: {p}", file=sys.stderr)
        return INVALID
    print(f"{args.file}: ok")
    return OK


def cmd_run(args) -> int:
    doc = read(args.file)
    result = run(doc, args.seed, args.disable or ())
    manifest = result.write(args.out)
    m = result.metrics
    print(f"manifest\t{manifest}")
    print(f"state_hash\t{result.state_hash}")
    print(f"tragedy\t{str(m.tragedy).lower()}")
    print(f"completion\t{m.completion:.4f}")
    return OK


def _load_log(log_path: Path) -> EventLog:
    genesis_path = log_path.with_name("genesis.json")
    try:
        genesis = json.loads(genesis_path.read_text())
    except FileNotFoundError:
        raise InvalidScenario(str(genesis_path), "genesis.json must sit beside the log") from None
    return EventLog.read(log_path, genesis)


def cmd_replay(args) -> int:
    path = Path(args.log)
    try:
        engine = replay_engine(_load_log(path))
    except CorruptLog as exc:
        print(f"corrupt\tposition {exc.position}\t{exc.reason}", file=sys.stderr)
        print(f"last_valid_seq\t{exc.position - 1}")
        return FAILED
    digest = engine.state_hash().hex()
    print(f"events\t{len(engine.events)}")
    print(f"state_hash\t{digest}")
    bad = supply_audit(engine.state)
    for cls, recorded, summed in bad:
        print(f"supply_mismatch\t{cls}\t{recorded}\t{summed}", file=sys.stderr)
    manifest = path.with_name("manifest.json")
    if manifest.exists():
        expected = json.loads(manifest.read_text()).get("final_state_hash")
        match = expected == digest
        print(f"manifest_match\t{str(match).lower()}")
        if not match:
            return FAILED
    return FAILED if bad else OK


def cmd_coverage(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise InvalidScenario(str(manifest_path), "no such file") from None
    log = manifest_path.with_name(manifest.get("log", "events.log"))
    engine = replay_engine(_load_log(log))
    cov = coverage_report(engine.receipts)
    out = manifest_path.with_name("coverage.tsv")
    out.write_text(cov.to_tsv())
    print(f"mechanisms\t{cov.mechanisms_hit}/{len(cov.mechanisms)}")
    print(f"applications\t{cov.applications_hit}/{len(cov.applications)}")
    print(f"mechanism_gaps\t{','.join(cov.mechanism_gaps) or '-'}")
    print(f"application_gaps\t{','.join(cov.application_gaps) or '-'}")
    print(f"report\t{out}")
    return OK


def cmd_ab(args) -> int:
    doc = read(args.file)
    result = ab_compare(doc, args.switch, args.seed)
    sys.stdout.write(result.to_tsv())
    return OK


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="commons-kernel", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario or concept-map file")
    p.add_argument("file")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="run a scenario and write reports")
    p.add_argument("file")
    p.add_argument("--seed", type=u64, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--disable", type=mech_list, default=None, help="comma-separated mechanism ids, e.g. M4,M11")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("replay", help="replay an event log and audit it")
    p.add_argument("log")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("coverage", help="mechanism/application coverage of a finished run")
    p.add_argument("manifest")
    p.set_defaults(fn=cmd_coverage)

    p = sub.add_parser("ab", help="paired runs with and without some mechanisms")
    p.add_argument("file")
    p.add_argument("--switch", type=mech_list, required=True)
    p.add_argument("--seed", type=u64, default=None)
    p.set_defaults(fn=cmd_ab)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.fn(args)
    except InvalidScenario as exc:
        for p in exc.problems:
            print(f"invalid: {p}", file=sys.stderr)
        return INVALID
    except (KernelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
