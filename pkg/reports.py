# reports.py
# Atomic JSON / CSV / HTML writers, report schema publication and report readers.

import csv
import io
import json
import logging
import os
import tempfile
from decimal import Decimal, ROUND_HALF_UP
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, List, Sequence

from pydantic import BaseModel, ValidationError

from errors import DatasetError, EmptyResultsError
from schemas import DetectionFileReport, FileReport, Strategy

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.4f}"
CURRENCY_QUANTUM = Decimal("0.0001")
SCHEMA_DIR = "schema"
REPORTS_DIR = "reports"
REPAIRED_DIR = "repaired"
DETECTION_DIR = "detection"


def quantize(amount: Decimal) -> Decimal:
    """Round a currency amount to 4 decimal places, half up."""
    return amount.quantize(CURRENCY_QUANTUM, rounding=ROUND_HALF_UP)


def atomic_write_text(path: Path, text: str):
    """Write via a temp file in the same directory and rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, model: BaseModel):
    atomic_write_text(path, model.model_dump_json(indent=2) + "\n")


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Decimal):
        return str(quantize(value))
    if isinstance(value, float):
        return FLOAT_FORMAT.format(value)
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ";".join(format_cell(v) for v in value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    """Fixed column order, '\\n' line endings, floats and currency to 4 decimals."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    count = 0
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
        count += 1
    atomic_write_text(path, buffer.getvalue())
    logger.info(f"Wrote {count} rows to {path}")


def write_models_csv(path: Path, models: Sequence[BaseModel], columns: Sequence[str]):
    write_csv(path, columns, ([getattr(m, c) for c in columns] for m in models))


def publish_schemas(out: Path):
    """Write the JSON Schemas of both per-file report types under <out>/schema/."""
    schema_dir = Path(out) / SCHEMA_DIR
    for name, model in (("file-report", FileReport), ("detection-report", DetectionFileReport)):
        text = json.dumps(model.model_json_schema(), indent=2, sort_keys=True) + "\n"
        atomic_write_text(schema_dir / f"{name}.schema.json", text)


# --- Layout ---

def strategy_dir(out: Path, strategy: Strategy) -> Path:
    return Path(out) / strategy.value


def file_report_path(out: Path, strategy: Strategy, file_id: str) -> Path:
    return strategy_dir(out, strategy) / REPORTS_DIR / f"{file_id}.json"


def repaired_path(out: Path, strategy: Strategy, file_id: str) -> Path:
    return strategy_dir(out, strategy) / REPAIRED_DIR / file_id


def detection_report_path(out: Path, source: str, file_id: str) -> Path:
    return Path(out) / DETECTION_DIR / source / f"{file_id}.json"


# --- Readers ---

def read_file_reports(out: Path) -> List[FileReport]:
    """
    All per-file repair reports under an output directory, ordered by strategy then file.

    Raises:
        EmptyResultsError: When there are none
        DatasetError: When a report does not match the schema
    """
    reports: List[FileReport] = []
    for strategy in Strategy:
        directory = strategy_dir(out, strategy) / REPORTS_DIR
        if not directory.is_dir():
            continue
        for path in sorted(directory.glob("*.json")):
            try:
                reports.append(FileReport.model_validate_json(path.read_text(encoding="utf-8")))
            except (OSError, ValidationError) as e:
                raise DatasetError(f"Invalid file report {path}: {e}") from e
    if not reports:
        raise EmptyResultsError(f"No per-file repair reports under {out}")
    return reports

