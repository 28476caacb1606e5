import json
import subprocess
import sys
from importlib import resources

import pytest

from commons_kernel import sim
from commons_kernel.cli import FAILED, INVALID, OK, main

DATA = resources.files("commons_kernel.sim").joinpath("data")


def shipped_path(name):
    return str(DATA.joinpath(f"{name}.json"))


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def lines(text):
    return dict(line.split("\t", 1) for line in text.strip().splitlines() if "\t" in line)


def test_validate_ok(capsys):
    assert main(["validate", shipped_path("full_demo")]) == OK
    assert main(["validate", shipped_path("concept_map")]) == OK
    assert capsys.readouterr().out.count(": ok") == 2


def test_validate_reports_path(tmp_path, capsys):
    doc = sim.shipped("baseline")
    doc["world"]["pools"][0]["resource_class"] = "GOLD"
    assert main(["validate", write(tmp_path, "bad.json", doc)]) == INVALID
    assert "world.pools[0].resource_class" in capsys.readouterr().err


def test_validate_concept_map_count(tmp_path, capsys):
    cmap = sim.load_concept_map()
    cmap["applications"].pop()
    assert main(["validate", write(tmp_path, "map.json", cmap)]) == INVALID
    assert "expected 22 applications" in capsys.readouterr().err


def test_missing_and_malformed_files(tmp_path):
    assert main(["validate", str(tmp_path / "absent.json")]) == INVALID
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["run", str(tmp_path / "junk.json"), "--out", str(tmp_path / "o")]) == INVALID


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert main(["run", shipped_path("full_demo"), "--seed", "7", "--out", str(out)]) == OK
    return out


def test_run_is_byte_deterministic(demo_run, tmp_path):
    assert main(["run", shipped_path("full_demo"), "--seed", "7", "--out", str(tmp_path)]) == OK
    names = sorted(p.name for p in demo_run.iterdir())
    assert names == sorted(p.name for p in tmp_path.iterdir())
    assert "manifest.json" in names and "summary.tsv" in names
    for n in names:
        assert (demo_run / n).read_bytes() == (tmp_path / n).read_bytes(), n


def test_replay_matches_manifest(demo_run, capsys):
    assert main(["replay", str(demo_run / "events.log")]) == OK
    out = lines(capsys.readouterr().out)
    manifest = json.loads((demo_run / "manifest.json").read_text())
    assert out["state_hash"] == manifest["final_state_hash"]
    assert out["manifest_match"] == "true"


def copy_run(src, dst):
    for p in src.iterdir():
        (dst / p.name).write_bytes(p.read_bytes())
    return dst / "events.log"


def test_replay_truncated(demo_run, tmp_path, capsys):
    log = copy_run(demo_run, tmp_path)
    rows = log.read_text().splitlines()
    log.write_text("\n".join(rows[:-3]) + "\n" + rows[-3][: len(rows[-3]) // 2] + "\n")
    assert main(["replay", str(log)]) == FAILED
    assert lines(capsys.readouterr().out)["last_valid_seq"] == str(len(rows) - 4)


def test_replay_tampered(demo_run, tmp_path, capsys):
    log = copy_run(demo_run, tmp_path)
    rows = log.read_text().splitlines()
    raw = bytearray(bytes.fromhex(rows[5]))
    at = raw.find(b"amount")
    target = at if at >= 0 else len(raw) // 2
    raw[target + 9] ^= 1
    rows[5] = raw.hex()
    log.write_text("\n".join(rows) + "\n")
    assert main(["replay", str(log)]) == FAILED
    assert lines(capsys.readouterr().out)["last_valid_seq"] == "4"


def test_replay_needs_genesis(tmp_path):
    (tmp_path / "events.log").write_text("00\n")
    assert main(["replay", str(tmp_path / "events.log")]) == INVALID


def test_coverage(demo_run, capsys):
    assert main(["coverage", str(demo_run / "manifest.json")]) == OK
    out = lines(capsys.readouterr().out)
    assert out["mechanisms"] == "14/14"
    hit, total = map(int, out["applications"].split("/"))
    assert total == 22 and hit >= 20
    assert (demo_run / "coverage.tsv").exists()


def test_ab(capsys):
    assert main(["ab", shipped_path("baseline"), "--switch", "M4,M11", "--seed", "5"]) == OK
    rows = [r.split("\t") for r in capsys.readouterr().out.strip().splitlines()]
    assert [r[0] for r in rows] == ["arm", "with", "without"]
    assert (rows[1][2], rows[2][2]) == ("false", "true")


def test_disable_flag(tmp_path, capsys):
    assert main(["run", shipped_path("baseline"), "--seed", "2", "--out", str(tmp_path), "--disable", "M4"]) == OK
    assert lines(capsys.readouterr().out)["tragedy"] == "true"
    assert json.loads((tmp_path / "manifest.json").read_text())["disabled"] == ["M4"]


def test_unknown_disable_is_invalid(tmp_path):
    assert main(["run", shipped_path("baseline"), "--out", str(tmp_path), "--disable", "M77"]) == INVALID


def test_console_script_exit_code(tmp_path):
    bad = write(tmp_path, "bad.json", {"ticks": "soon"})
    proc = subprocess.run([sys.executable, "-m", "commons_kernel.cli", "validate", bad], capture_output=True, text=True)
    assert proc.returncode == INVALID
    assert "ticks" in proc.stderr
