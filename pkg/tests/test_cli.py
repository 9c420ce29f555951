import io
import json
import subprocess
import sys

import pytest

from resmatch.cli import main
from resmatch.formats import parse_market_file


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def test_match_two_by_two(fixtures_dir, tmp_path):
    target = tmp_path / "m.csv"
    code, _, _ = run("match", "--engine", "gs", "--propose", "applicants",
                     "-i", str(fixtures_dir / "two_by_two.csv"), "-o", str(target))
    assert code == 0
    assert target.read_text().splitlines() == ["applicant,program", "A,beta", "B,alpha"]
    manifest = json.loads((tmp_path / "m.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "match"
    assert len(manifest["inputs"]) == 1


def test_match_then_verify(fixtures_dir, tmp_path):
    target = tmp_path / "m.csv"
    run("match", "-i", str(fixtures_dir / "two_by_two.csv"), "-o", str(target))
    code, out, _ = run("verify", "-i", str(fixtures_dir / "two_by_two.csv"), "-m", str(target))
    assert code == 0
    assert out == "STABLE, 0 blocking pairs\n"


def test_boston_then_verify(fixtures_dir, tmp_path):
    market = str(fixtures_dir / "boston_instability.csv")
    target = tmp_path / "b.csv"
    trace = tmp_path / "trace.jsonl"
    assert run("match", "--engine", "boston", "-i", market, "-o", str(target), "--trace", str(trace))[0] == 0
    code, out, _ = run("verify", "-i", market, "-m", str(target))
    assert code == 0
    assert out.splitlines()[0].startswith("BLOCKING (A, P2)")
    assert out.splitlines()[-1] == "UNSTABLE, 1 blocking pairs"
    first = json.loads(trace.read_text().splitlines()[0])
    assert (first["tier"], first["rank"]) == (1, 1)


def test_gs_needs_flatten_for_tiers(fixtures_dir):
    market = str(fixtures_dir / "boston_instability.csv")
    assert run("match", "-i", market)[0] == 4
    code, out, _ = run("match", "--flatten", "-i", market)
    assert code == 0
    assert out.splitlines()[1:] == ["A,P2", "B,", "C,P1"]


def test_cost_optimize_default():
    code, out, _ = run("cost", "--optimize", "--schedule", "ophtho2019.cfg")
    assert code == 0
    assert "optimal applications q* = 116" in out
    assert "expected interviews: 16.571" in out
    assert "expected total cost: $9,864.86" in out
    assert "application cost: $3,170.00" in out


def test_cost_csv(tmp_path):
    target = tmp_path / "scan.csv"
    assert run("cost", "--q-max", "12", "-o", str(target))[0] == 0
    lines = target.read_text().splitlines()
    assert lines[0] == "q,application_cost_cents,expected_interviews,expected_spend_cents,expected_payoff_cents,feasible"
    assert lines[11].startswith("10,6000,")
    assert len(lines) == 14


def test_cost_budget_override():
    code, out, _ = run("cost", "--programs", "116", "--budget-money", "5000")
    assert code == 0
    assert "feasible: no" in out


def test_payoff_one_by_one(fixtures_dir, tmp_path):
    market = tmp_path / "m.csv"
    market.write_text("applicant,A,1,,alpha\nprogram,alpha,1,,A\n")
    table = tmp_path / "t.csv"
    code, out, _ = run("payoff", "-i", str(market), "--spec", str(fixtures_dir / "one_by_one_payoff.cfg"),
                       "-o", str(table))
    assert code == 0
    assert table.read_text().splitlines() == [
        "action:applicant:A,action:program:alpha,payoff:applicant:A,payoff:program:alpha",
        "rank,rank,10,10",
        "rank,not rank,1,0",
        "not rank,rank,0,0",
        "not rank,not rank,0,0",
    ]
    assert json.loads(out)["holds"] is True


def test_payoff_guard(tmp_path):
    rows = [f"applicant,a{i},1,,p0" for i in range(7)] + [f"program,p{j},,,"for j in range(7)]
    market = tmp_path / "big.csv"
    market.write_text("\n".join(rows) + "\n")
    code, _, err = run("payoff", "-i", str(market))
    assert code == 5
    assert "too large" in err


def test_rank_gap_names_row(fixtures_dir):
    code, _, err = run("match", "-i", str(fixtures_dir / "rank_gap.csv"))
    assert code in (3, 4)
    assert "rank_gap.csv:5: rank gap" in err


def test_missing_input():
    code, _, err = run("match", "-i", "/does/not/exist.csv")
    assert code == 3
    assert "/does/not/exist.csv" in err


def test_unknown_flag():
    assert run("match", "--bogus")[0] == 2


def test_minimal_csv_parses(fixtures_dir):
    m = parse_market_file(fixtures_dir / "minimal.csv")
    assert m.applicants == ("A",) and m.programs == ("alpha",) and m.capacity["alpha"] == 1


def test_simulate_reruns_byte_identical(tmp_path, monkeypatch):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(
        "[simulation]\napplicants = 15\nprograms = 5\napplications = 2\nreplicas = 20\nseed = 3\n"
        "[escalation]\nrounds = 2\nstart_applications = 2\nschedule = ophtho2019.cfg\n"
    )
    outputs = []
    for name in ("one", "two"):
        code, _, _ = run("simulate", "-c", str(cfg), "--out-dir", str(tmp_path / name))
        assert code == 0
        outputs.append({f: (tmp_path / name / f).read_bytes() for f in ("curve.csv", "escalation.csv")})
    assert outputs[0] == outputs[1]
    manifest = json.loads((tmp_path / "one" / "manifest.json").read_text())
    assert manifest["seed"] == 3
    code, _, _ = run("simulate", "-c", str(cfg), "--seed", "4", "--out-dir", str(tmp_path / "three"))
    assert (tmp_path / "three" / "curve.csv").read_bytes() != outputs[0]["curve.csv"]


def test_config_dir_env(tmp_path, monkeypatch, fixtures_dir):
    (tmp_path / "mine.cfg").write_text((fixtures_dir / "one_by_one_payoff.cfg").read_text())
    monkeypatch.setenv("RESMATCH_CONFIG_DIR", str(tmp_path))
    code, out, _ = run("payoff", "-i", str(fixtures_dir / "two_by_two.csv"), "--spec", "mine.cfg",
                       "--players", "applicant:A", "-o", str(tmp_path / "t.csv"))
    assert code == 0


@pytest.mark.parametrize("args", [["--version"], ["cost", "--help"]])
def test_console_script(args):
    proc = subprocess.run([sys.executable, "-m", "resmatch.cli", *args], capture_output=True, text=True)
    assert proc.returncode == 0
