import csv
import io
import json

import pytest

from crooklab.adversaries import DistinguisherSpec
from crooklab.errors import ConfigError
from crooklab.harness import (CATALOG, ExperimentConfig, Report, emit_report,
                              estimate_advantage, load_config, output_path, render_report,
                              run_experiment)

EXOR = {"n": 8, "l": 4}


def cfg(**kw):
    base = {"experiment": "exor-bad-prob", "params": EXOR, "trials": 10, "workers": 1}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_catalog_complete():
    assert set(CATALOG) == {
        "exor-bad-prob", "sponge-bad-prob", "lemma1-check", "robust-function-check",
        "critical-set-check", "resampling-set-check", "rejection-resampling-check",
        "detection-curve", "multi-message-attack", "f-collision-demo", "game-chain-audit"}


@pytest.mark.parametrize("bad", [
    {"experiment": "nope"},
    {"trials": -1},
    {"master_seed": 1 << 64},
    {"q2": 0},
    {"format": "xml"},
    {"worlds": ["G5"]},
    {"params": {"n": 8}},
    {"surprise": 1},
    {"subverter": {"kind": "wat"}},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        cfg(**bad)


def test_budget_validation():
    c = cfg(q2=2, adversary={"kind": "consistency-multi", "count": 2})
    with pytest.raises(ConfigError):
        run_experiment(c)


def test_load_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("experiment: detection-curve\nparams: {n: 6}\n"
                 "subverter: {kind: input-predicate, k: 2}\ntrials: 3\n")
    c = load_config(p)
    assert c.subverter.k == 2 and c.trials == 3
    p.write_text("experiment: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_report_shape_csv_and_jsonl():
    rep = run_experiment(cfg())
    rows = list(csv.reader(io.StringIO(render_report(rep, "csv"))))
    assert len(rows) == 1 + 11
    header = rows[0]
    assert header[0] == "row_type" and rows[-1][0] == "summary"
    seed_col = header.index("seed")
    assert all(len(r[seed_col]) == 16 for r in rows[1:-1])
    lines = render_report(rep, "jsonl").splitlines()
    assert len(lines) == 11
    assert json.loads(lines[-1])["row_type"] == "summary"


def test_empty_trial_list():
    rep = run_experiment(cfg(trials=0))
    rows = list(csv.reader(io.StringIO(render_report(rep, "csv"))))
    assert len(rows) == 2 and rows[1][0] == "summary"


def test_byte_identical_reruns_and_worker_independence(tmp_path):
    a = emit_report(run_experiment(cfg(trials=6)), tmp_path / "a.csv", "csv")
    b = emit_report(run_experiment(cfg(trials=6)), tmp_path / "b.csv", "csv")
    c = emit_report(run_experiment(cfg(trials=6), workers=2), tmp_path / "c.csv", "csv")
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_summary_matches_trial_indicators():
    rep = run_experiment(cfg(trials=40, subverter={"kind": "output-predicate", "k": 3}))
    assert rep.summary["bad_rate"] == sum(r["bad"] for r in rep.rows) / 40


def test_output_path_env(monkeypatch, tmp_path):
    monkeypatch.setenv("CROOKLAB_OUTPUT_DIR", str(tmp_path))
    assert output_path(cfg()) == tmp_path / "exor-bad-prob.jsonl"
    assert output_path(cfg(output="/x/y.csv")) == __import__("pathlib").Path("/x/y.csv")


def test_emit_report_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rep = Report("x", ["trial"], [], {}, True)
    with pytest.raises(OSError):
        emit_report(rep, blocker / "sub" / "r.csv", "csv")


def test_honest_bad_prob_against_theorem():
    rep = run_experiment(cfg(params={"n": 8, "l": 8}, q2=20, trials=200,
                             adversary={"kind": "random-probe", "q": 20}))
    s = rep.summary
    assert rep.passed and s["vacuous"] in (True, s["bad_rate_ci_high"] <= s["paper_bound"])
    assert s["budget_inflation_factor"] == 8


def test_multi_message_and_game_chain_pass():
    assert run_experiment(cfg(experiment="multi-message-attack", trials=30,
                              subverter={"kind": "neighbor-wrapped",
                                         "inner": "honest"})).passed
    rep = run_experiment(cfg(experiment="game-chain-audit", trials=10,
                             extra={"adversaries": "all"},
                             subverter={"kind": "trigger", "k": 2, "delta": "0x3"}))
    assert rep.passed and rep.summary["all_equal_rows"] == 10


def test_f_collision_monotone():
    rep = run_experiment(cfg(experiment="f-collision-demo", trials=120, worlds=["Ideal"],
                             params={"n": 8, "l": 2}))
    s = rep.summary
    assert s["bad1_rate_q2"] <= s["bad1_rate_q16"] <= s["bad1_rate_q32"]
    assert rep.passed


def test_analysis_experiments_emit_rows():
    rep = run_experiment(cfg(experiment="lemma1-check", trials=10, params={"n": 6, "l": 1},
                             subverter={"kind": "output-predicate", "k": 2},
                             extra={"alphas": 4}))
    row = rep.rows[0]
    for key in ("quantity", "params", "estimate", "ci_low", "ci_high", "paper_bound",
                "vacuous", "pass"):
        assert key in row
    rej = run_experiment(cfg(experiment="rejection-resampling-check", trials=0,
                             extra={"selectors": 3, "random_sets": 10, "shapes": [[2, 2]]}))
    assert rej.passed and len(rej.rows) == 3


def test_advantage_same_world_is_zero():
    c = cfg()
    adv = DistinguisherSpec("random-probe", q=8)
    est = estimate_advantage("G1", "G1", adv, c, 50, seed=3)
    assert est.paired and est.advantage == 0


def test_advantage_g1_g2_bounded_by_bad():
    c = cfg(subverter={"kind": "output-predicate", "k": 3, "q1": 2})
    adv = DistinguisherSpec("consistency-multi", count=2)
    est = estimate_advantage("G1", "G2", adv, c, 400, seed=1)
    assert est.paired
    assert est.advantage <= est.bad_rate.estimate + 1e-12


def test_advantage_unpaired_for_distant_worlds():
    c = cfg(extra={"pair": False})
    est = estimate_advantage("Real", "Ideal", DistinguisherSpec("random-probe"), c, 20, 0)
    assert not est.paired
    assert 0 <= est.p_world_a.estimate <= 1
    assert set(est.as_dict()) >= {"p_world_a", "p_world_b", "advantage", "bad_rate"}


def test_shipped_configs_parse():
    from pathlib import Path
    root = Path(__file__).resolve().parent.parent / "configs"
    files = sorted(root.glob("*"))
    assert files
    for f in files:
        assert load_config(f).experiment in CATALOG
