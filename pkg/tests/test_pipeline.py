"""End-to-end tests: pipeline runs with the mock provider and the command line surface."""

import argparse
import sys
from pathlib import Path

import pytest

import a11yfix
from commands.core import handle_command_error
from config import BASE_DIR
from conftest import make_page
from cost import CostLedger
from dataset import load_dataset
from errors import ConfigError, DatasetError, PartialFailureError, ProviderError, A11yFixError
from llm import MockProvider
from logic import run_detection, run_evaluation, run_repair
from schemas import ProviderKind, ProviderSettings, RunConfig, Stage, Strategy, StrategyChoice, UsageRecord

BROKEN = make_page('<img src="a.png">')
FIXED = make_page('<img src="a.png" alt="Logo">')
DEMO_SCRIPT = BASE_DIR / "data" / "mock_demo.yaml"


def fenced(html: str) -> dict:
    return {"mode": "text", "text": f"```html\n{html}\n```"}


def run_cli(monkeypatch, *argv) -> int:
    monkeypatch.setattr(sys, "argv", ["a11yfix", *map(str, argv)])
    with pytest.raises(SystemExit) as excinfo:
        a11yfix.main()
    return excinfo.value.code


def mock_config(out: Path, strategy=StrategyChoice.BOTH, **values) -> RunConfig:
    return RunConfig(provider=ProviderSettings(kind=ProviderKind.MOCK), strategy=strategy, out=out,
                     freeze_clock=True, workers=2, **values)


def tree_bytes(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# --- Full pipeline through the CLI ---

def full_run(monkeypatch, dataset_root: Path, out: Path):
    common = ["--dataset", dataset_root, "--provider", "mock", "--mock-script", DEMO_SCRIPT,
              "--out", out, "--freeze-clock", "--workers", 3]
    assert run_cli(monkeypatch, "detect", *common) == 0
    assert run_cli(monkeypatch, "repair", *common) == 0
    assert run_cli(monkeypatch, "evaluate", "--out", out, "--max-iterations", 3) == 0
    assert run_cli(monkeypatch, "cost-report", out / "zero_shot" / "ledger.ndjson",
                   out / "agent" / "ledger.ndjson", "--out", out / "costs") == 0


CORPUS = [
    ('<img src="a.png">', '<img src="a.png" alt="Logo">'),
    ('<a href="/x"></a><h2></h2>', '<a href="/x">Home</a><h2>About</h2>'),
    ('<div><li>Orphan</li></div><button></button>', "<ul><li>Listed</li></ul><button>Go</button>"),
    ('<p style="color:#aaa">Faint</p><input type="text">',
     '<p style="color:#333">Dark</p><label>Name <input type="text"></label>'),
    ("<p>ok</p>", "<p>ok</p>"),
]


def test_frozen_mock_runs_are_byte_identical(monkeypatch, make_dataset, tmp_path):
    violated = {f"page-{i:02d}.html": make_page(CORPUS[i % len(CORPUS)][0]) for i in range(20)}
    fixed = {f"page-{i:02d}.html": make_page(CORPUS[i % len(CORPUS)][1]) for i in range(0, 20, 2)}
    root = make_dataset(violated, fixed)

    full_run(monkeypatch, root, tmp_path / "run1")
    full_run(monkeypatch, root, tmp_path / "run2")

    first, second = tree_bytes(tmp_path / "run1"), tree_bytes(tmp_path / "run2")
    assert first == second
    for name in ["detection_summary.csv", "detect_ledger.ndjson", "agent/ledger.ndjson", "zero_shot/skipped.csv",
                 "remediation_summary.csv", "iteration_distribution.csv", "costs/cost_comparison.csv",
                 "schema/file-report.schema.json", "detection/violated/page-00.html.json"]:
        assert name in first, name
    assert b"page-04.html,0" in first["zero_shot/skipped.csv"]
    assert len([n for n in first if n.startswith("agent/reports/")]) == 16


def test_detection_tables(make_dataset, tmp_path):
    root = make_dataset({"a.html": BROKEN}, {"a.html": FIXED})
    out = tmp_path / "out"

    outcome = run_detection(mock_config(out), load_dataset(root), provider=MockProvider.from_file(DEMO_SCRIPT))

    assert outcome["processed"] == 2
    summary = (out / "detection_summary.csv").read_text(encoding="utf-8").splitlines()
    assert summary[0] == "system,files,precision,recall,f1,degenerate"
    assert summary[1] == "rule-engine,2,1.0000,1.0000,1.0000,"
    # The demo script mirrors the rule engine, so the LLM row matches it
    assert summary[2] == "llm,2,1.0000,1.0000,1.0000,"
    assert (out / "detection" / "fixed" / "a.html.json").is_file()


def test_detection_without_provider_is_rules_only(make_dataset, tmp_path):
    out = tmp_path / "out"
    run_detection(RunConfig(out=out, freeze_clock=True), load_dataset(make_dataset({"a.html": BROKEN})))

    summary = (out / "detection_summary.csv").read_text(encoding="utf-8").splitlines()
    assert summary[2] == "llm,0,,,,"
    assert not (out / "detect_ledger.ndjson").exists()


def test_detection_parse_failures_are_partial(make_dataset, tmp_path):
    root = make_dataset({"a.html": BROKEN})

    with pytest.raises(PartialFailureError) as excinfo:
        run_detection(mock_config(tmp_path / "out"), load_dataset(root),
                      provider=MockProvider({"default": {"mode": "malformed"}}))

    assert excinfo.value.failed_files[0][0] == "violated/a.html"
    assert (tmp_path / "out" / "detection_summary.csv").is_file()


# --- Repair runs ---

def test_agent_outcomes_feed_evaluation(make_dataset, tmp_path):
    root = make_dataset({f"f{i}.html": BROKEN for i in range(10)})
    script = {"scenarios": [
        {"match": "agent/f[0-6].html", "steps": [fenced(FIXED)]},
        {"match": "agent/f7.html", "steps": [fenced(BROKEN), fenced(FIXED)]},
    ]}
    out = tmp_path / "out"

    outcome = run_repair(mock_config(out, StrategyChoice.AGENT), load_dataset(root), provider=MockProvider(script))
    evaluation = run_evaluation(out, max_iterations=3)

    assert outcome["strategies"][Strategy.AGENT]["calls"] == 7 + 2 + 2 * 3
    assert outcome["strategies"][Strategy.AGENT]["accepted"] == 8
    summary = evaluation["summaries"][Strategy.AGENT]
    assert summary.avg_iterations == pytest.approx(1.5)
    assert summary.accepted_rate == pytest.approx(0.8)
    buckets = (out / "iteration_distribution.csv").read_text(encoding="utf-8").splitlines()
    assert buckets[1:] == ["agent,1,7,7", "agent,2,1,1", "agent,3,2,0"]
    assert (out / "agent" / "repaired" / "f0.html").read_text(encoding="utf-8") == FIXED


def test_call_counts_are_bounded(make_dataset, tmp_path):
    root = make_dataset({**{f"p{i}.html": BROKEN for i in range(4)}, "clean.html": make_page("<p>x</p>")})
    out = tmp_path / "out"

    outcome = run_repair(mock_config(out), load_dataset(root), provider=MockProvider())

    assert outcome["strategies"][Strategy.ZERO_SHOT]["calls"] == 4
    assert outcome["strategies"][Strategy.AGENT]["calls"] == 4 * 3
    assert outcome["strategies"][Strategy.AGENT]["skipped"] == 1
    skipped = (out / "agent" / "skipped.csv").read_text(encoding="utf-8")
    assert skipped == "file_id,violations\nclean.html,0\n"


def test_introduced_violations_are_reported(make_dataset, tmp_path):
    root = make_dataset({"a.html": make_page('<img src="a.png"><img src="b.png">')})
    repaired = make_page('<img src="a.png" alt="A"><img src="b.png" alt="B"><button></button>')
    out = tmp_path / "out"

    run_repair(mock_config(out, StrategyChoice.ZERO_SHOT), load_dataset(root),
               provider=MockProvider({"default": fenced(repaired)}))
    evaluation = run_evaluation(out)

    assert evaluation["new_violations"] == 1
    rows = (out / "new_violations.csv").read_text(encoding="utf-8").splitlines()
    assert rows[1].startswith("a.html,zero_shot,1,")
    assert ",button-name," in rows[1]


def test_repair_provider_failure_is_partial(make_dataset, tmp_path):
    root = make_dataset({"a.html": BROKEN})
    out = tmp_path / "out"

    with pytest.raises(PartialFailureError) as excinfo:
        run_repair(mock_config(out, StrategyChoice.ZERO_SHOT), load_dataset(root),
                   provider=MockProvider({"default": {"fail": True}}))

    assert excinfo.value.failed_files[0][0] == "zero_shot/a.html"
    assert (out / "zero_shot" / "reports" / "a.html.json").is_file()
    assert len((out / "zero_shot" / "ledger.ndjson").read_text(encoding="utf-8").splitlines()) == 1


def test_repair_needs_provider(make_dataset, tmp_path):
    with pytest.raises(ConfigError):
        run_repair(RunConfig(out=tmp_path / "out"), load_dataset(make_dataset({"a.html": BROKEN})))


# --- Command line ---

def test_scan_command(monkeypatch, capsys, tmp_path):
    page = tmp_path / "page.html"
    page.write_text(make_page('<img src="a.png"><button></button>'), encoding="utf-8")

    assert run_cli(monkeypatch, "scan", page, "-v") == 0

    output = capsys.readouterr().out
    assert "page.html: 2 violations" in output
    assert "image-alt" in output and "button-name" in output


def test_cli_exit_codes(monkeypatch, make_dataset, tmp_path):
    root = make_dataset({"a.html": BROKEN})
    script = tmp_path / "fail.yaml"
    script.write_text("default:\n  fail: true\n", encoding="utf-8")

    assert run_cli(monkeypatch, "scan", tmp_path / "missing.html") == 3
    assert run_cli(monkeypatch, "repair", "--dataset", root, "--out", tmp_path / "o1") == 2
    assert run_cli(monkeypatch, "detect", "--dataset", tmp_path / "nowhere", "--out", tmp_path / "o2") == 3
    assert run_cli(monkeypatch, "evaluate", "--out", tmp_path / "empty") == 3
    assert run_cli(monkeypatch, "repair", "--dataset", root, "--provider", "mock", "--mock-script", script,
                   "--strategy", "zero-shot", "--out", tmp_path / "o3") == 5


def test_cost_report_uses_price_table_from_config(monkeypatch, tmp_path):
    ledger_path = tmp_path / "custom" / "ledger.ndjson"
    CostLedger([UsageRecord(file_id="a.html", stage=Stage.AGENT, call_index=0, model_id="gpt-4o-mini",
                            prompt_tokens=1_000_000, completion_tokens=0, latency_ms=0.0)]).to_ndjson(ledger_path)
    prices = tmp_path / "prices.yaml"
    prices.write_text("models:\n  gpt-4o-mini:\n    prompt_per_million: 2.0\n    completion_per_million: 8.0\n",
                      encoding="utf-8")
    config = tmp_path / "a11yfix.yaml"
    config.write_text(f"price_table: {prices}\nout: {tmp_path / 'costs'}\n", encoding="utf-8")

    assert run_cli(monkeypatch, "cost-report", ledger_path, "--config", config) == 0
    assert run_cli(monkeypatch, "cost-report", ledger_path, "--out", tmp_path / "default") == 0

    custom = (tmp_path / "costs" / "cost_aggregate.csv").read_text(encoding="utf-8").splitlines()
    bundled = (tmp_path / "default" / "cost_aggregate.csv").read_text(encoding="utf-8").splitlines()
    assert custom[1].startswith("custom,1,1000000,0,1000000,2.0000,")
    assert bundled[1].startswith("custom,1,1000000,0,1000000,0.1500,")


def test_no_command_prints_help(monkeypatch, capsys):
    assert run_cli(monkeypatch) == 1
    assert "usage: a11yfix" in capsys.readouterr().out


@pytest.mark.parametrize("error,code", [
    (A11yFixError("boom"), 1),
    (ConfigError("bad config"), 2),
    (DatasetError("bad data"), 3),
    (ProviderError("down"), 4),
    (PartialFailureError("some failed", [("a.html", "down")]), 5),
    (RuntimeError("unexpected"), 1),
])
def test_error_exit_codes(error, code, capsys):
    def failing(args):
        raise error

    with pytest.raises(SystemExit) as excinfo:
        handle_command_error(failing)(argparse.Namespace())

    assert excinfo.value.code == code
    assert "❌ Error:" in capsys.readouterr().out
