import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from pcfgppl import corpus_path
from pcfgppl.cli import main
from pcfgppl.codegen import STAGES, validate_stage

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("stage", STAGES)
def test_every_stage_round_trips(capsys, corpus_name, stage):
    code, out, _ = run(capsys, "compile", corpus_path(corpus_name), "--emit", stage)
    assert code == 0
    assert validate_stage(stage, out)


def test_anf_validator_rejects_nested_call():
    assert not validate_stage("anf", "-- f(p)\naddi 1 (g p)")


@pytest.mark.parametrize("name, stage, golden", [
    ("geometric", "anf", "geometric.anf"),
    ("fig5", "anf", "fig5.anf"),
    ("fig5", "blocks", "fig5.blocks"),
])
def test_golden_dumps(capsys, name, stage, golden):
    code, out, _ = run(capsys, "compile", corpus_path(name), "--emit", stage)
    assert code == 0
    assert out == (GOLDEN / golden).read_text()


def test_missing_file(capsys):
    code, _, err = run(capsys, "compile", "nope.cppl", "--emit", "ast")
    assert code == 2 and "no such file" in err


def test_compile_error_has_stage_and_location(capsys, tmp_path):
    bad = tmp_path / "bad.cppl"
    bad.write_text("let x = 1 in\naddi x y")
    code, _, err = run(capsys, "compile", bad, "--emit", "anf")
    assert code == 2
    assert f"{bad}:2:8: parse error: unbound variable 'y'" in err


def test_unknown_stage_is_usage_error(capsys):
    code, _, err = run(capsys, "compile", corpus_path("fig5"), "--emit", "llvm")
    assert code == 2 and "invalid choice" in err


def test_run_report(capsys):
    code, out, _ = run(capsys, "run", corpus_path("geometric"), "--particles", 2000,
                       "--seed", 1, "--threads", 1)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1
    assert rep["config"] == {"particles": 2000, "seed": 1, "essThreshold": 1.0,
                             "stackCells": 4096}
    assert abs(rep["logZ"] - math.log(2)) < 0.1
    assert sum(w for _, w in rep["samples"]) == pytest.approx(1.0)
    t = rep["timingsMs"]
    assert t["compile"] + t["propagate"] + t["resample"] <= t["total"] + 1.0


def test_run_histogram(capsys):
    code, out, _ = run(capsys, "run", corpus_path("ssm"), "--particles", 1000,
                       "--histogram", 12, "--threads", 1)
    assert code == 0
    bins = json.loads(out)["histogram"]
    assert len(bins) == 12
    assert all(len(b) == 4 and b[0] < b[1] for b in bins)
    assert sum(b[2] for b in bins) == 1000
    assert sum(b[3] for b in bins) == pytest.approx(1.0)


def test_run_csv(capsys):
    code, out, err = run(capsys, "run", corpus_path("geometric"), "--particles", 500,
                         "--output", "csv", "--histogram", 5, "--range", 0.5, 5.5,
                         "--threads", 1)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["lo", "hi", "count", "normWeight"]
    assert [float(r[0]) for r in rows[1:]] == [0.5, 1.5, 2.5, 3.5, 4.5]
    assert "logZ" in err


def test_threads_do_not_change_report(capsys):
    reports = []
    for threads in (1, 8):
        code, out, _ = run(capsys, "run", corpus_path("geometric"), "--particles", 3000,
                           "--seed", 7, "--threads", threads, "--no-timings")
        assert code == 0
        reports.append(out)
    assert reports[0] == reports[1]


def test_inference_error_exit_code(capsys, tmp_path):
    p = tmp_path / "reject.cppl"
    p.write_text("weight (log 0.); resample; 1")
    code, _, err = run(capsys, "run", p, "--particles", 10)
    assert code == 1 and "inference error" in err


def test_bad_particles_is_usage_error(capsys):
    code, _, _ = run(capsys, "run", corpus_path("geometric"), "--particles", 0)
    assert code == 2


def test_trace_flag(capsys):
    code, _, err = run(capsys, "run", corpus_path("fig5"), "--particles", 1, "--trace",
                       "--threads", 1, "--stack-cells", 64)
    # fig5 recurses forever; the stack eventually overflows
    assert code == 1
    assert "trace: sim returned (2, checkpoint=True)" in err


def test_gen_ssm_data(capsys):
    code, out, _ = run(capsys, "gen-ssm-data", "--steps", 10, "--seed", 2021)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "y"] and len(rows) == 11
    assert rows[1] == ["1", "-1.1387"]
    assert run(capsys, "gen-ssm-data", "--steps", 10, "--seed", 2021)[1] == out


def test_gen_ssm_data_to_file(capsys, tmp_path):
    f = tmp_path / "y.csv"
    assert run(capsys, "gen-ssm-data", "--steps", 3, "--out", f)[0] == 0
    assert f.read_text().count("\n") == 4


def test_gen_ssm_data_needs_steps(capsys):
    code, _, err = run(capsys, "gen-ssm-data", "--steps", 0)
    assert code == 2 and "at least 1" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "pcfgppl", "compile",
                        str(corpus_path("fig5")), "--emit", "frames"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert "f: {ra: 0, retValLoc: 1, p: 2, s1: 3, s3: 4, s4: 5}  -- frameSize 6" in r.stdout
