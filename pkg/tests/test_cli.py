from __future__ import annotations

import json

import pytest

from tabsynth.cli import main
from tabsynth.fixture import fixture_path, fixture_schema_path
from tabsynth.fixture import FIXTURE_SCHEMA
from tabsynth.model import load_table

REAL = str(fixture_path())
SCHEMA = str(fixture_schema_path())


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["profile", "--real", REAL, "--schema", SCHEMA, "--bmi-column", "BMI",
                 "--out", str(d / "p.json")]) == 0
    return d


def test_generate_and_validate(work):
    out = work / "s.csv"
    assert main(["generate", "--profile", str(work / "p.json"), "--n", "1390", "--seed", "7",
                 "--out", str(out)]) == 0
    t = load_table(out, FIXTURE_SCHEMA)
    assert t.n_rows == 1390
    assert (work / "s.manifest.json").exists()
    assert main(["validate", "--profile", str(work / "p.json"), "--data", str(out), "--n", "1390",
                 "--out", str(work / "v.json")]) == 0
    assert json.loads((work / "v.json").read_text())["passed"] is True
    # the real file lacks the derived columns
    assert main(["validate", "--profile", str(work / "p.json"), "--data", REAL]) == 1


def test_evaluate_is_reproducible(work):
    synth = work / "e.csv"
    main(["generate", "--profile", str(work / "p.json"), "--seed", "3", "--out", str(synth)])
    outs = []
    for i in range(2):
        path = work / f"e{i}.json"
        assert main(["evaluate", "--real", REAL, "--synth", str(synth), "--schema", SCHEMA,
                     "--out", str(path), "--csv", str(work / f"e{i}.csv")]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_tstr_and_report(work):
    synth = work / "t.csv"
    main(["generate", "--profile", str(work / "p.json"), "--n", "500", "--seed", "1", "--out", str(synth)])
    assert main(["tstr", "--real", REAL, "--synth", str(synth), "--schema", SCHEMA,
                 "--stages", "10", "--out", str(work / "tstr.json")]) == 0
    assert main(["evaluate", "--real", REAL, "--synth", str(synth), "--schema", SCHEMA,
                 "--out", str(work / "f.json")]) == 0
    assert main(["report", "--fidelity", f"x={work / 'f.json'}", "--tstr", f"x={work / 'tstr.json'}",
                 "--out", str(work / "r.json"), "--csv", str(work / "r.csv")]) == 0
    doc = json.loads((work / "r.json").read_text())
    f1 = json.loads((work / "tstr.json").read_text())["f1"]
    row = next(r for r in doc["rows"] if r["metric"] == "TSTR (F1)")
    assert row["values"]["x"]["mean"] == f1


def test_prompt_and_trials(work, capsys):
    assert main(["prompt", "--profile", str(work / "p.json"), "--n", "1390"]) == 0
    assert "1390 patients" in capsys.readouterr().out
    assert main(["generate", "--profile", str(work / "p.json"), "--trials", "3", "--workers", "2",
                 "--seed", "10", "--out", str(work / "trials" / "g.csv")]) == 0
    rank = json.loads((work / "trials" / "g_ranking.json").read_text())
    assert rank["trials"] == ["g_trial01.csv", "g_trial02.csv", "g_trial03.csv"]
    assert len(rank["columns"]) == 12


def test_config_file(work):
    cfg = work / "c.toml"
    cfg.write_text(f'seed = 5\n[generate]\nprofile = "{work / "p.json"}"\nn = 40\nout = "{work / "c.csv"}"\n')
    assert main(["generate", "--config", str(cfg), "--n", "45"]) == 0
    manifest = json.loads((work / "c.manifest.json").read_text())
    assert manifest["n"] == 45 and manifest["seed"] == 5
    bad = work / "bad.toml"
    bad.write_text("[generate]\nbogus = 1\n")
    assert main(["generate", "--config", str(bad), "--profile", "p", "--out", "o"]) == 2


def test_usage_and_runtime_errors(work, capsys):
    assert main(["evaluate", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main([]) == 2
    assert main(["tstr", "--real", "nope.csv", "--synth", REAL, "--schema", SCHEMA,
                 "--out", str(work / "x.json")]) == 3
    assert main(["report", "--fidelity", "nolabel", "--out", str(work / "y.json")]) == 2
