import json
import subprocess
import sys

import pytest

from crooklab.cli import main

DETECT = ('{"experiment": "detection-curve", "params": {"n": 6}, "trials": 200, '
          '"subverter": {"kind": "input-predicate", "k": 4}, "workers": 1%s}')


def write(tmp_path, text, name="c.json"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "game-chain-audit" in out and "f-collision-demo" in out


def test_bound_exor(capsys):
    assert main(["bound", "exor", "--eps", "0", "--q1", "0", "--q2", "0", "--tau", "1",
                 "--n", "8"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == 2 ** -8 and out["vacuous"] is False


def test_bound_sponge_readings(capsys):
    args = ["bound", "sponge", "--eps", "0", "--q", "2", "--tau", "1", "--q2", "4",
            "--ell", "8", "--s", "4", "--r", "4", "--c", "10", "--kappa", "1"]
    assert main(args) == 0
    blocks = json.loads(capsys.readouterr().out)["value"]
    assert main(args + ["--reading", "bits"]) == 0
    bits = json.loads(capsys.readouterr().out)["value"]
    assert blocks == (4 + 4 * 3) / 1024 and bits == (4 + 4 * 12) / 1024


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["bound"], ["bound", "exor"],
                                  ["run"]])
def test_usage_errors_exit_1(argv):
    assert main(argv) == 1


def test_run_writes_to_env_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CROOKLAB_OUTPUT_DIR", str(tmp_path / "out"))
    cfg = write(tmp_path, DETECT % "")
    assert main(["run", cfg]) == 0
    report = tmp_path / "out" / "detection-curve.jsonl"
    lines = report.read_text().splitlines()
    assert len(lines) == 201 and json.loads(lines[-1])["pass"] == 1
    assert main(["run", cfg, "--format", "csv", "--output", "r.csv"]) == 0
    assert (tmp_path / "out" / "r.csv").exists()


def test_run_failure_exit_2(tmp_path, monkeypatch):
    monkeypatch.setenv("CROOKLAB_OUTPUT_DIR", str(tmp_path))
    cfg = write(tmp_path, DETECT % ', "extra": {"eps": 0.5}')
    assert main(["run", cfg]) == 2


def test_run_config_errors(tmp_path, monkeypatch):
    monkeypatch.setenv("CROOKLAB_OUTPUT_DIR", str(tmp_path))
    assert main(["run", str(tmp_path / "missing.json")]) == 3
    assert main(["run", write(tmp_path, '{"experiment": "nope"}')]) == 1
    assert main(["run", write(tmp_path, '{"experiment": "exor-bad-prob", '
                                        '"params": {"n": 8, "l": 2}, "q2": 1}')]) == 1


def test_run_output_io_error(tmp_path, monkeypatch):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    monkeypatch.setenv("CROOKLAB_OUTPUT_DIR", str(blocker))
    assert main(["run", write(tmp_path, DETECT % "")]) == 3


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "crooklab.cli", "list"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "lemma1-check" in res.stdout
