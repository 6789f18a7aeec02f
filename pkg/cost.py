# cost.py
# Token, call, latency and money accounting over the per-call usage ledger.

import json
import logging
import threading
from decimal import Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import yaml
from pydantic import ValidationError

from config import PRICE_TABLE_PATH
from errors import ConfigError, LedgerError, MetricsInputError, PriceLookupError
from reports import atomic_write_text
from schemas import CostSummary, PerFileCost, PriceEntry, RatioRow, Stage, UsageRecord

logger = logging.getLogger(__name__)

MILLION = Decimal(1_000_000)

_STAGE_ORDER = {stage: i for i, stage in enumerate(Stage)}


# --- Price table ---

class PriceTable:
    """Per-model prices in currency per one million tokens."""

    def __init__(self, entries: Dict[str, PriceEntry]):
        self.entries = dict(entries)

    @classmethod
    def from_mapping(cls, data: Dict) -> "PriceTable":
        models = data.get("models", data) if isinstance(data, dict) else None
        if not isinstance(models, dict):
            raise ConfigError("Price table must map model ids to prices")
        entries = {}
        for model_id, row in models.items():
            try:
                # str() keeps YAML floats like 0.15 from turning into binary fractions
                entries[str(model_id)] = PriceEntry(
                    prompt_per_million=Decimal(str(row["prompt_per_million"])),
                    completion_per_million=Decimal(str(row["completion_per_million"])),
                )
            except (KeyError, TypeError, ValidationError) as e:
                raise ConfigError(f"Bad price table entry for '{model_id}': {e}") from e
        return cls(entries)

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "PriceTable":
        path = Path(path or PRICE_TABLE_PATH)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Could not read price table {path}: {e}") from e
        return cls.from_mapping(data)

    def price_for(self, model_id: str) -> PriceEntry:
        try:
            return self.entries[model_id]
        except KeyError:
            raise PriceLookupError(f"No price for model '{model_id}' in the price table") from None

    def record_cost(self, record: UsageRecord) -> Decimal:
        price = self.price_for(record.model_id)
        return (Decimal(record.prompt_tokens) * price.prompt_per_million
                + Decimal(record.completion_tokens) * price.completion_per_million) / MILLION


# --- Ledger ---

class CostLedger:
    """
    Append-only record of every provider call.

    Appends are serialized by a lock; readers work on the tuple returned by snapshot().
    """

    def __init__(self, records: Iterable[UsageRecord] = ()):
        self._records: List[UsageRecord] = list(records)
        self._lock = threading.Lock()

    def append(self, record: UsageRecord):
        with self._lock:
            self._records.append(record)

    def snapshot(self) -> Tuple[UsageRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def __len__(self) -> int:
        return len(self.snapshot())

    def sorted_records(self) -> List[UsageRecord]:
        return sorted(self.snapshot(), key=lambda r: (r.file_id, _STAGE_ORDER[r.stage], r.call_index))

    def file_ids(self) -> List[str]:
        return sorted({r.file_id for r in self.snapshot()})

    def for_file(self, file_id: str) -> "CostLedger":
        return CostLedger(r for r in self.snapshot() if r.file_id == file_id)

    def for_stage(self, stage: Stage) -> "CostLedger":
        return CostLedger(r for r in self.snapshot() if r.stage == stage)

    def without_retries(self) -> "CostLedger":
        """The same ledger with retry-flagged calls removed."""
        return CostLedger(r for r in self.snapshot() if not r.retry)

    @staticmethod
    def concat(*ledgers: "CostLedger") -> "CostLedger":
        return CostLedger(r for ledger in ledgers for r in ledger.snapshot())

    def to_ndjson(self, path: Path):
        """Write one record per line, sorted by (file, stage, call index), atomically."""
        lines = [r.model_dump_json() + "\n" for r in self.sorted_records()]
        atomic_write_text(path, "".join(lines))
        logger.info(f"Wrote {len(lines)} usage records to {path}")

    @classmethod
    def from_ndjson(cls, path: Path) -> "CostLedger":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise LedgerError(f"Could not read ledger {path}: {e}") from e
        records = []
        for number, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(UsageRecord.model_validate_json(line))
            except (ValidationError, json.JSONDecodeError) as e:
                raise LedgerError(f"{path}:{number}: invalid usage record: {e}") from e
        if not records:
            logger.warning(f"Ledger {path} is empty")
        return cls(records)


# --- Aggregates ---

def total_cost(ledger: CostLedger, prices: PriceTable) -> Decimal:
    """Exact sum over calls of prompt and completion tokens times their prices."""
    return sum((prices.record_cost(r) for r in ledger.snapshot()), Decimal(0))


def overhead(ledger: CostLedger, file_id: Optional[str] = None) -> int:
    """
    Number of provider interactions, for the whole run or one file.

    Raises:
        MetricsInputError: If file_id has no records in the ledger
    """
    records = ledger.snapshot()
    if file_id is None:
        return len(records)
    count = sum(1 for r in records if r.file_id == file_id)
    if count == 0:
        raise MetricsInputError(f"Unknown file id in ledger: {file_id}")
    return count


def mean_latency_ms(ledger: CostLedger) -> float:
    records = ledger.snapshot()
    if not records:
        return 0.0
    return sum(r.latency_ms for r in records) / len(records)


def summarize(ledger: CostLedger, prices: PriceTable, label: str = "") -> CostSummary:
    records = ledger.snapshot()
    if not records:
        logger.warning(f"Ledger '{label}' has no records; all figures are zero")
    prompt_tokens = sum(r.prompt_tokens for r in records)
    completion_tokens = sum(r.completion_tokens for r in records)
    return CostSummary(
        label=label,
        calls=len(records),
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        total_tokens=prompt_tokens + completion_tokens,
        cost=total_cost(ledger, prices),
        mean_latency_ms=mean_latency_ms(ledger),
        retries=sum(1 for r in records if r.retry),
    )


RATIO_METRICS = ("calls", "prompt_tokens", "completion_tokens", "total_tokens", "cost", "mean_latency_ms", "retries")


def comparison_report(ledger_a: CostLedger, ledger_b: CostLedger, prices: PriceTable) -> List[RatioRow]:
    """
    B/A ratio per metric. A zero denominator leaves the ratio empty and flags the row.
    """
    a = summarize(ledger_a, prices, "a")
    b = summarize(ledger_b, prices, "b")
    rows = []
    for metric in RATIO_METRICS:
        value_a = getattr(a, metric)
        value_b = getattr(b, metric)
        if value_a == 0:
            rows.append(RatioRow(metric=metric, a=float(value_a), b=float(value_b), ratio=None, degenerate=True))
            continue
        rows.append(RatioRow(metric=metric, a=float(value_a), b=float(value_b), ratio=float(Decimal(value_b) / Decimal(value_a))))
    return rows


def per_file_report(ledger: CostLedger, file_count: int, prices: PriceTable, label: str = "") -> PerFileCost:
    if file_count <= 0:
        raise MetricsInputError("Per-file cost needs at least one file")
    summary = summarize(ledger, prices, label)
    return PerFileCost(
        label=label,
        files=file_count,
        cost_per_file=summary.cost / Decimal(file_count),
        tokens_per_file=summary.total_tokens / file_count,
        calls_per_file=summary.calls / file_count,
    )
