"""Tests for the usage ledger, price table and cost reports."""

import threading
from datetime import datetime, timezone
from decimal import Decimal

import pytest

from cost import (
    CostLedger,
    PriceTable,
    comparison_report,
    overhead,
    per_file_report,
    summarize,
    total_cost,
)
from errors import ConfigError, LedgerError, MetricsInputError, PriceLookupError
from logic import run_cost_report
from schemas import Stage, UsageRecord

PRICES = PriceTable.from_mapping({"models": {
    "gpt-4o-mini": {"prompt_per_million": 0.15, "completion_per_million": 0.60},
}})
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
FILES = 308


def spread(total: int, n: int):
    base, extra = divmod(total, n)
    return [base + (1 if i < extra else 0) for i in range(n)]


def make_ledger(stage, calls, prompt_total, completion_total, latency_ms):
    """calls: (file_id, call_index, retry) per record; token totals are spread over the records."""
    prompts = spread(prompt_total, len(calls))
    completions = spread(completion_total, len(calls))
    return CostLedger(
        UsageRecord(file_id=file_id, stage=stage, call_index=index, model_id="gpt-4o-mini",
                    prompt_tokens=p, completion_tokens=c, latency_ms=latency_ms, retry=retry, timestamp=EPOCH)
        for (file_id, index, retry), p, c in zip(calls, prompts, completions)
    )


@pytest.fixture
def zero_shot_ledger():
    calls = [(f"page-{i:03d}.html", 0, False) for i in range(FILES)]
    return make_ledger(Stage.ZERO_SHOT, calls, 8_000_000, 6_200_000, 474.0)


@pytest.fixture
def agent_ledger():
    calls = [(f"page-{i:03d}.html", 0, False) for i in range(FILES)]
    calls += [(f"page-{i:03d}.html", 1, True) for i in range(196)]
    return make_ledger(Stage.AGENT, calls, 11_540_000, 9_615_000, 433.0)


def test_total_cost_is_exact(zero_shot_ledger, agent_ledger):
    assert total_cost(zero_shot_ledger, PRICES) == Decimal("4.92")
    assert total_cost(agent_ledger, PRICES) == Decimal("7.50")


def test_summary(agent_ledger):
    summary = summarize(agent_ledger, PRICES, "agent")

    assert summary.calls == 504
    assert summary.retries == 196
    assert summary.total_tokens == 21_155_000
    assert summary.mean_latency_ms == pytest.approx(433.0)


def test_comparison_ratios(zero_shot_ledger, agent_ledger):
    rows = {r.metric: r for r in comparison_report(zero_shot_ledger, agent_ledger, PRICES)}

    assert rows["calls"].ratio == pytest.approx(1.636, abs=1e-3)
    assert rows["prompt_tokens"].ratio == pytest.approx(1.4425)
    assert rows["completion_tokens"].ratio == pytest.approx(1.5508, abs=1e-4)
    assert rows["total_tokens"].ratio == pytest.approx(1.4898, abs=1e-4)
    assert rows["cost"].ratio == pytest.approx(1.5244, abs=1e-4)
    assert rows["mean_latency_ms"].ratio == pytest.approx(0.9135, abs=1e-4)
    # No retries in the zero-shot run
    assert rows["retries"].ratio is None
    assert rows["retries"].degenerate


def test_per_file_costs(zero_shot_ledger, agent_ledger):
    zero_shot = per_file_report(zero_shot_ledger, FILES, PRICES)
    agent = per_file_report(agent_ledger, FILES, PRICES)

    assert float(zero_shot.cost_per_file) == pytest.approx(0.01597, abs=1e-3)
    assert float(agent.cost_per_file) == pytest.approx(0.02435, abs=1e-3)
    assert agent.calls_per_file == pytest.approx(504 / 308)
    with pytest.raises(MetricsInputError):
        per_file_report(agent_ledger, 0, PRICES)


def test_retries_can_be_excluded(agent_ledger):
    plain = agent_ledger.without_retries()

    assert len(plain) == FILES
    assert not any(r.retry for r in plain.snapshot())


def test_overhead_counts_calls(agent_ledger):
    assert overhead(agent_ledger) == 504
    assert overhead(agent_ledger, "page-000.html") == 2
    assert overhead(agent_ledger, "page-300.html") == 1
    with pytest.raises(MetricsInputError):
        overhead(agent_ledger, "missing.html")


def test_unknown_model_has_no_price():
    record = UsageRecord(file_id="a", stage=Stage.AGENT, call_index=0, model_id="mystery",
                         prompt_tokens=1, completion_tokens=1, latency_ms=0.0)

    with pytest.raises(PriceLookupError):
        PRICES.record_cost(record)


def test_bundled_price_table_loads():
    assert PriceTable.load().price_for("gpt-4o-mini").prompt_per_million == Decimal("0.15")


def test_bad_price_entry_is_config_error():
    with pytest.raises(ConfigError):
        PriceTable.from_mapping({"models": {"m": {"prompt_per_million": 1}}})
    with pytest.raises(ConfigError):
        PriceTable.from_mapping({"models": {"m": {"prompt_per_million": -1, "completion_per_million": 1}}})


# --- Ledger persistence ---

def test_ndjson_is_sorted_and_reloads(tmp_path):
    records = [
        UsageRecord(file_id=f, stage=s, call_index=i, model_id="gpt-4o-mini", prompt_tokens=1,
                    completion_tokens=2, latency_ms=3.0, timestamp=EPOCH)
        for f, s, i in [("b.html", Stage.AGENT, 1), ("a.html", Stage.AGENT, 0),
                        ("b.html", Stage.AGENT, 0), ("a.html", Stage.DETECT, 0)]
    ]
    path = tmp_path / "ledger.ndjson"
    CostLedger(records).to_ndjson(path)

    loaded = CostLedger.from_ndjson(path)

    assert [(r.file_id, r.stage, r.call_index) for r in loaded.snapshot()] == [
        ("a.html", Stage.DETECT, 0), ("a.html", Stage.AGENT, 0), ("b.html", Stage.AGENT, 0), ("b.html", Stage.AGENT, 1)]
    assert path.read_text(encoding="utf-8").count("\n") == 4


def test_bad_ledgers(tmp_path):
    with pytest.raises(LedgerError):
        CostLedger.from_ndjson(tmp_path / "missing.ndjson")

    bad = tmp_path / "bad.ndjson"
    bad.write_text('{"file_id": "a"}\n', encoding="utf-8")
    with pytest.raises(LedgerError, match=":1:"):
        CostLedger.from_ndjson(bad)

    empty = tmp_path / "empty.ndjson"
    empty.write_text("", encoding="utf-8")
    assert len(CostLedger.from_ndjson(empty)) == 0


def test_concurrent_appends_are_not_lost():
    ledger = CostLedger()

    def worker(n):
        for i in range(500):
            ledger.append(UsageRecord(file_id=f"f{n}", stage=Stage.AGENT, call_index=i, model_id="m",
                                      prompt_tokens=1, completion_tokens=1, latency_ms=0.0))

    threads = [threading.Thread(target=worker, args=(n,)) for n in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert len(ledger) == 4000
    assert ledger.file_ids() == [f"f{n}" for n in range(8)]


# --- Cost report command ---

def test_cost_report_tables(tmp_path, zero_shot_ledger, agent_ledger):
    zero_path = tmp_path / "run" / "zero_shot" / "ledger.ndjson"
    agent_path = tmp_path / "run" / "agent" / "ledger.ndjson"
    zero_shot_ledger.to_ndjson(zero_path)
    agent_ledger.to_ndjson(agent_path)
    out = tmp_path / "costs"

    result = run_cost_report([zero_path, agent_path], out, PRICES)

    comparison = (out / "cost_comparison.csv").read_text(encoding="utf-8").splitlines()
    assert comparison[0] == "metric,a,b,ratio,degenerate"
    assert "cost,4.9200,7.5000,1.5244,false" in comparison
    assert "retries,0.0000,196.0000,,true" in comparison

    aggregate = (out / "cost_aggregate.csv").read_text(encoding="utf-8").splitlines()
    assert [line.split(",")[0] for line in aggregate[1:]] == [
        "zero_shot", "zero_shot (no retries)", "agent", "agent (no retries)"]

    per_file = (out / "cost_per_file.csv").read_text(encoding="utf-8").splitlines()
    assert per_file[1].startswith("zero_shot,308,0.0160,")
    assert per_file[2].startswith("agent,308,0.0244,")
    assert len(result["per_file"]) == 2


def test_cost_report_file_count_override(tmp_path, zero_shot_ledger):
    path = tmp_path / "zero_shot.ndjson"
    zero_shot_ledger.to_ndjson(path)

    result = run_cost_report([path], tmp_path / "costs", PRICES, file_counts=[100])

    assert result["ratios"] == []
    assert result["per_file"][0].files == 100
    assert not (tmp_path / "costs" / "cost_comparison.csv").exists()
    with pytest.raises(ConfigError):
        run_cost_report([path], tmp_path / "costs", PRICES, file_counts=[1, 2])
