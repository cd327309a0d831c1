import json
import subprocess
import sys

import pytest

from test_harness import gt_row, write_jsonl
from vlmscore.cli import main
from vlmscore.synthetic import write_corpus


@pytest.fixture
def corpus(tmp_path):
    return write_corpus(tmp_path, 8, seed=1)


def test_eval_json_and_digest(corpus, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["eval", "--gt", str(corpus[0]), "--pred", str(corpus[1]), "-o", str(out)]) == 0
    err = capsys.readouterr().err
    assert "config digest:" in err
    report = json.loads(out.read_text())
    assert report["provenance"]["config_digest"] in err


def test_eval_stdout_markdown(corpus, capsys):
    assert main(["eval", "--gt", str(corpus[0]), "--pred", str(corpus[1]), "--format", "markdown",
                 "--judge", "stub", "--matcher", "judge", "--tasks", "objects,ocr,media"]) == 0
    assert "| Aggregation | Reliability | Object F1" in capsys.readouterr().out


def test_report_verb(corpus, tmp_path, capsys):
    out = tmp_path / "r.json"
    main(["eval", "--gt", str(corpus[0]), "--pred", str(corpus[1]), "-o", str(out)])
    capsys.readouterr()
    assert main(["report", str(out), "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("sample_id,task,status,score,metrics")


def test_validate(corpus, tmp_path, capsys):
    assert main(["validate", str(corpus[0])]) == 0
    bad = write_jsonl(tmp_path / "bad.jsonl", [{"sample_id": "z", "raw_output": "junk"}])
    assert main(["validate", str(bad), "--role", "pred", "--media-kind", "image"]) == 1
    assert "z\tinvalid" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["--tasks", "objects,bogus"],
    ["--matcher", "judge"],
    ["--matcher", "alias_table"],
    ["--tasks", "media"],
    ["--tau", "1.5"],
    ["--judge", "http"],
])
def test_config_errors_exit_2(corpus, argv, monkeypatch):
    monkeypatch.delenv("VLMSCORE_JUDGE_URL", raising=False)
    assert main(["eval", "--gt", str(corpus[0]), "--pred", str(corpus[1])] + argv) == 2


def test_io_errors_exit_3(tmp_path):
    assert main(["eval", "--gt", str(tmp_path / "missing"), "--pred", str(tmp_path / "missing")]) == 3
    gt = write_jsonl(tmp_path / "gt.jsonl", [gt_row("a")])
    dup = write_jsonl(tmp_path / "dup.jsonl", [gt_row("a"), gt_row("a")])
    assert main(["eval", "--gt", str(gt), "--pred", str(dup)]) == 3
    assert main(["report", str(tmp_path / "missing.json")]) == 3


def test_failure_threshold_exit_1(tmp_path, monkeypatch):
    gt = write_jsonl(tmp_path / "gt.jsonl", [gt_row(f"s{i}") for i in range(3)])
    monkeypatch.setenv("VLMSCORE_JUDGE_URL", "http://127.0.0.1:9/judge")
    import vlmscore.judge as judge_mod
    monkeypatch.setattr(judge_mod.time, "sleep", lambda s: None)
    out = tmp_path / "r.json"
    code = main(["eval", "--gt", str(gt), "--pred", str(gt), "--judge", "http", "--matcher", "judge",
                 "--tasks", "objects", "-o", str(out)])
    assert code == 1
    report = json.loads(out.read_text())
    assert report["status"] == "failed" and len(report["failed"]) == 3


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "vlmscore", "eval", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for needle in ("VLMSCORE_JUDGE_URL", "VLMSCORE_CACHE_DIR", "--tau", "--theta", "--min-block-len", "--format"):
        assert needle in res.stdout
