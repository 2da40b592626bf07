import json

import pytest

from prime.cli import main
from prime.harness import read_records


@pytest.fixture(scope="module")
def puzzles(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "puzzles.json"
    assert main(["generate", "--sizes", "2x3,4x4", "--per-size", "3", "--seed", "5",
                 "--workers", "1", "--out", str(path)]) == 0
    return path


def test_generate_and_solve(puzzles, capsys):
    doc = json.loads(puzzles.read_text())
    assert [t["id"] for t in doc] == ["2x3-0000", "2x3-0001", "2x3-0002", "4x4-0000", "4x4-0001", "4x4-0002"]
    capsys.readouterr()
    assert main(["solve", str(puzzles)]) == 0
    out = capsys.readouterr().out
    assert out.count("unique solution (ok)") == 18


def test_generate_is_deterministic(puzzles, tmp_path):
    again = tmp_path / "again.json"
    main(["generate", "--sizes", "2x3,4x4", "--per-size", "3", "--seed", "5", "--workers", "1", "--out", str(again)])
    assert again.read_bytes() == puzzles.read_bytes()


def test_render(puzzles, tmp_path, capsys):
    out = tmp_path / "prompts"
    assert main(["render", str(puzzles), "--id", "2x3-0001", "--modes", "base,cot,debias", "--out", str(out)]) == 0
    files = sorted(p.name for p in out.iterdir())
    assert len(files) == 9 and files[0] == "2x3-0001.AS.base.txt"
    assert "Let's think step by step." in (out / "2x3-0001.S.cot.txt").read_text()
    assert main(["render", "--explicit", "--bp-category", "Food"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all(json.loads(ln)["category"] == "Food" for ln in lines)
    assert main(["render", str(puzzles), "--id", "nope"]) == 1


def test_eval_report_roundtrip(puzzles, tmp_path, capsys):
    run = tmp_path / "run.jsonl"
    assert main(["eval", "--puzzles", str(puzzles), "--mock", "stereotype", "--out", str(run), "--workers", "2"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["executed"] == 18 and summary["complete"]
    assert main(["eval", "--puzzles", str(puzzles), "--mock", "stereotype", "--out", str(run)]) == 0
    assert json.loads(capsys.readouterr().out)["skipped"] == 18
    assert len(read_records(run)) == 18
    rep = tmp_path / "rep"
    assert main(["report", "--runs", str(run), "--out", str(rep)]) == 0
    csv = (rep / "deltas.csv").read_text().splitlines()
    assert csv[0].startswith("size,endpoint,mode,scope")
    bp = next(ln for ln in csv if ln.startswith("2x3,mock:stereotype,base,BP"))
    assert ",-1.0000," in bp
    for kind in ("categories", "scatter", "accuracy"):
        assert main(["report", "--runs", str(run), "--kind", kind]) == 0
    assert main(["report", "--runs", str(run), "--kind", "compare"]) == 1


def test_config_file(puzzles, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"workers": 1, "eval": {"mock": "oracle", "limit": 1}}))
    run = tmp_path / "cfg.jsonl"
    assert main(["--config", str(cfg), "eval", "--puzzles", str(puzzles), "--out", str(run)]) == 0
    recs = read_records(run)
    assert {r["endpoint"] for r in recs} == {"mock:oracle"} and len(recs) == 3
    # explicit flags beat the config
    run2 = tmp_path / "cfg2.jsonl"
    assert main(["--config", str(cfg), "eval", "--puzzles", str(puzzles), "--out", str(run2), "--mock", "stereotype"]) == 0
    assert {r["endpoint"] for r in read_records(run2)} == {"mock:stereotype"}
    bad = tmp_path / "bad.json"
    bad.write_text("[1]")
    assert main(["--config", str(bad), "catalog"]) == 1


def test_probes(tmp_path, capsys):
    out = tmp_path / "probe.json"
    assert main(["probe", "--kind", "names", "--mock", "oracle", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["accuracy"] == {"man": 1.0, "woman": 1.0}
    assert main(["probe", "--kind", "explicit", "--mock", "refuse", "--out", str(out)]) == 0
    table = json.loads(out.read_text())["table"]
    assert all(r["R"] == 100.0 for r in table)


def test_exit_codes(tmp_path, capsys):
    assert main(["bogus"]) == 2
    assert main([]) == 2
    assert main(["solve", str(tmp_path / "missing.json")]) == 1
    (tmp_path / "broken.json").write_text("{")
    assert main(["solve", str(tmp_path / "broken.json")]) == 1
    assert main(["catalog"]) == 0
    assert json.loads(capsys.readouterr().out)


def test_transport_failure_exit_code(puzzles, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PRIME_BASE_URL", "http://127.0.0.1:9")
    code = main(["eval", "--puzzles", str(puzzles), "--model", "m", "--max-retries", "0", "--timeout", "1",
                 "--limit", "1", "--out", str(tmp_path / "t.jsonl")])
    assert code == 3
