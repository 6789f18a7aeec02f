import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from config import make_clock
from cost import CostLedger, PriceTable, comparison_report, per_file_report, summarize
from errors import A11yFixError, ConfigError, EmptyResultsError, PartialFailureError
from html_core import parse_file, parse_html
from llm import CallSession, LlmProvider, make_provider
from metrics import (
    before_after_deltas,
    category_agreement,
    comparison_table,
    confusion,
    iteration_distribution,
    precision_recall_f1,
    relative_performance,
    remediation_summaries,
)
from prompts import PromptSet, default_prompts
from repair import detect_page, repairer
from reports import (
    atomic_write_text,
    detection_report_path,
    file_report_path,
    publish_schemas,
    repaired_path,
    read_file_reports,
    strategy_dir,
    write_csv,
    write_json,
    write_models_csv,
)
from rules import RuleRegistry, category_flags, default_registry, page_label, principle_distribution, rule_frequency, scan
from schemas import (
    Category,
    DecodingParams,
    DetectionFileReport,
    DetectionSummaryRow,
    FileReport,
    Dataset,
    DatasetPair,
    LabeledSample,
    NewViolationRow,
    RunConfig,
    ScanReport,
    Stage,
)
from validator import validator_from_config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

RULE_SYSTEM = "rule-engine"
LLM_SYSTEM = "llm"


def run_pool(items: Sequence[T], work: Callable[[T], R], workers: int,
             name: Callable[[T], str] = str) -> Tuple[List[Tuple[T, R]], List[Tuple[str, str]]]:
    """
    Run work over items on a bounded thread pool.

    Returns:
        (successes as (item, result) in input order, failures as (item name, error) sorted by name)

    Ctrl-C cancels everything not yet started; work already finished keeps its outputs on disk.
    """
    results: Dict[int, R] = {}
    failures: List[Tuple[str, str]] = []
    executor = ThreadPoolExecutor(max_workers=workers)
    try:
        futures = {executor.submit(work, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            index = futures[future]
            try:
                results[index] = future.result()
            except (A11yFixError, OSError) as e:
                logger.error(f"{name(items[index])}: {e}")
                failures.append((name(items[index]), str(e)))
    except KeyboardInterrupt:
        logger.warning("Interrupted; cancelling pending files")
        executor.shutdown(wait=False, cancel_futures=True)
        raise
    executor.shutdown(wait=True)
    return [(items[i], results[i]) for i in sorted(results)], sorted(failures)


def decoding_params(config: RunConfig) -> DecodingParams:
    return DecodingParams(
        temperature=config.provider.temperature,
        max_tokens=config.provider.max_tokens,
        seed=config.seed,
    )


def scan_file(path: Path, registry: Optional[RuleRegistry] = None, freeze_clock: bool = False) -> ScanReport:
    """Rule scan of a single HTML file."""
    path = Path(path)
    return scan(parse_file(path), registry, document_id=path.name, clock=make_clock(freeze_clock))


# --- Detection ---

def _sample_key(sample: LabeledSample) -> str:
    return f"{sample.source}/{sample.file_id}"


def _llm_flags(report: DetectionFileReport) -> Dict[Category, int]:
    categories = set(report.llm.categories) if report.llm.page_verdict == 1 else set()
    return {category: int(category in categories) for category in Category}


def run_detection(config: RunConfig, dataset: Dataset, registry: Optional[RuleRegistry] = None,
                  provider: Optional[LlmProvider] = None, prompts: Optional[PromptSet] = None) -> Dict[str, Any]:
    """
    Rule-engine (and, with a provider, LLM) detection over every labeled sample.

    Writes per-sample reports and the detection tables under config.out.

    Raises:
        PartialFailureError: After writing, when some samples could not be processed
    """
    registry = registry or default_registry()
    if provider is None:
        provider = make_provider(config.provider)
    prompts = prompts or (default_prompts() if provider else None)
    clock = make_clock(config.freeze_clock)
    out = Path(config.out)
    ledger = CostLedger()
    params = decoding_params(config)

    def detect_sample(sample: LabeledSample) -> DetectionFileReport:
        doc = parse_file(sample.path)
        key = _sample_key(sample)
        rule_scan = scan(doc, registry, document_id=sample.file_id, clock=clock)
        llm = None
        if provider is not None:
            session = CallSession(provider, ledger, key, Stage.DETECT, params, clock)
            llm = detect_page(doc, session, key, config.chunk_budget, config.parse_retries, prompts)
        report = DetectionFileReport(
            file_id=sample.file_id, source=sample.source, label=sample.label,
            rule_scan=rule_scan, rule_label=page_label(rule_scan), llm=llm,
        )
        write_json(detection_report_path(out, sample.source, sample.file_id), report)
        return report

    done, failures = run_pool(dataset.samples, detect_sample, config.workers, _sample_key)
    reports = [report for _, report in done]
    llm_errors = [(_sample_key(s), r.llm.error) for s, r in done if r.llm is not None and r.llm.error]
    failures = sorted(failures + llm_errors)
    publish_schemas(out)

    scores = {}
    summary_rows = []
    labels = [r.label for r in reports]
    if reports:
        matrix = confusion([r.rule_label for r in reports], labels)
        scores[RULE_SYSTEM] = (matrix, precision_recall_f1(matrix))
    llm_reports = [r for r in reports if r.llm is not None and r.llm.page_verdict is not None]
    if llm_reports:
        matrix = confusion([r.llm.page_verdict for r in llm_reports], [r.label for r in llm_reports])
        scores[LLM_SYSTEM] = (matrix, precision_recall_f1(matrix))
    for system in (RULE_SYSTEM, LLM_SYSTEM):
        if system in scores:
            matrix, s = scores[system]
            summary_rows.append([system, matrix.total, s.precision, s.recall, s.f1, s.degenerate])
        else:
            summary_rows.append([system, 0, None, None, None, []])
    write_csv(out / "detection_summary.csv", list(DetectionSummaryRow.model_fields), summary_rows)
    write_csv(out / "confusion.csv", ["system", "tp", "fp", "tn", "fn"],
              [[system, m.tp, m.fp, m.tn, m.fn] for system, (m, _) in scores.items()])

    rule_flags = {_sample_key(sample): category_flags(r.rule_scan) for sample, r in done}
    if llm_reports:
        keyed = {f"{r.source}/{r.file_id}": r for r in llm_reports}
        reference = {k: rule_flags[k] for k in keyed}
        candidate = {k: _llm_flags(r) for k, r in keyed.items()}
        agreement = category_agreement(reference, candidate)
        write_csv(out / "category_detection.csv", ["category", "rule_rate", "llm_rate", "agreement"],
                  [[a.category, a.rate_a, a.rate_b, a.agreement] for a in agreement])
        write_models_csv(out / "relative_performance.csv", relative_performance(reference, candidate),
                         ["category", "precision", "recall", "f1", "degenerate"])
    elif rule_flags:
        files = len(rule_flags)
        write_csv(out / "category_detection.csv", ["category", "rule_rate", "llm_rate", "agreement"],
                  [[c, sum(f[c] for f in rule_flags.values()) / files, None, None] for c in Category])

    violated_scans = [r.rule_scan for r in reports if r.label == 1]
    write_models_csv(out / "rule_frequency.csv", rule_frequency(violated_scans, registry),
                     ["rule_id", "category", "impact", "description", "nodes", "pages", "wcag"])
    write_csv(out / "principle_distribution.csv", ["principle", "violations"],
              list(principle_distribution(violated_scans, registry).items()))
    if provider is not None:
        ledger.to_ndjson(out / "detect_ledger.ndjson")

    outcome = {
        "samples": len(dataset.samples),
        "processed": len(reports),
        "failed": failures,
        "scores": {system: s for system, (_, s) in scores.items()},
        "out": out,
    }
    if failures:
        raise PartialFailureError(f"{len(failures)} of {len(dataset.samples)} samples failed", failures)
    return outcome


# --- Repair ---

def run_repair(config: RunConfig, dataset: Dataset, registry: Optional[RuleRegistry] = None,
               provider: Optional[LlmProvider] = None, prompts: Optional[PromptSet] = None) -> Dict[str, Any]:
    """
    Repair every violated file with each configured strategy.

    Per strategy: repaired HTML, one FileReport per file, the usage ledger and a list of files skipped
    because the rule scan found nothing to fix.

    Raises:
        ConfigError: When no provider is configured
        PartialFailureError: After writing, when some files failed
    """
    registry = registry or default_registry()
    if provider is None:
        provider = make_provider(config.provider)
    if provider is None:
        raise ConfigError("Repair needs an LLM provider; set provider.kind to 'mock' or 'openai'")
    prompts = prompts or default_prompts()
    clock = make_clock(config.freeze_clock)
    check = validator_from_config(config, registry, clock=clock)
    params = decoding_params(config)
    out = Path(config.out)
    publish_schemas(out)

    outcome: Dict[str, Any] = {"files": len(dataset.pairs), "strategies": {}, "failed": []}
    for strategy in config.strategy.strategies():
        ledger = CostLedger()
        repair = repairer(strategy, config.max_iterations)
        skipped: List[Tuple[str, int]] = []

        def repair_file(pair: DatasetPair) -> Optional[FileReport]:
            doc_html = pair.violated_path.read_bytes().decode("utf-8", errors="replace")
            doc = parse_html(doc_html)
            before = scan(doc, registry, document_id=pair.file_id, clock=clock)
            if before.violation_count == 0:
                skipped.append((pair.file_id, before.violation_count))
                return None
            session = CallSession(provider, ledger, pair.file_id, Stage(strategy.value), params, clock)
            result = repair(doc_html, before, session, pair.file_id, check=check, budget=config.chunk_budget,
                            prompts=prompts, original=doc)
            verdict = result.final_verdict
            after = None
            if verdict is not None and verdict.parse_valid:
                after = scan(parse_html(result.final_html), registry, document_id=pair.file_id, clock=clock)
            report = FileReport(
                file_id=pair.file_id, strategy=strategy, scan_before=before, scan_after=after,
                repair=result, verdict=verdict, usage=list(ledger.for_file(pair.file_id).sorted_records()),
            )
            atomic_write_text(repaired_path(out, strategy, pair.file_id), result.final_html)
            write_json(file_report_path(out, strategy, pair.file_id), report)
            logger.info(f"[{strategy.value}] {pair.file_id}: V {before.violation_count} -> "
                        f"{verdict.v_after if verdict else '?'}, accepted={result.accepted}")
            return report

        done, failures = run_pool(dataset.pairs, repair_file, config.workers, lambda p: p.file_id)
        reports = [report for _, report in done if report is not None]
        failures += [(r.file_id, r.repair.error) for r in reports if r.repair.error]
        failures.sort()

        directory = strategy_dir(out, strategy)
        ledger.to_ndjson(directory / "ledger.ndjson")
        write_csv(directory / "skipped.csv", ["file_id", "violations"], sorted(skipped))
        outcome["strategies"][strategy] = {
            "repaired": len(reports),
            "accepted": sum(1 for r in reports if r.repair.accepted),
            "skipped": len(skipped),
            "calls": len(ledger),
        }
        outcome["failed"] += [(f"{strategy.value}/{name}", error) for name, error in failures]

    if outcome["failed"]:
        raise PartialFailureError(f"{len(outcome['failed'])} repairs failed", outcome["failed"])
    return outcome


# --- Evaluation ---

def run_evaluation(out: Path, registry: Optional[RuleRegistry] = None,
                   max_iterations: Optional[int] = None) -> Dict[str, Any]:
    """
    Remediation tables from the per-file reports a repair run left under out.

    Reports whose repair produced no verdict (provider failure) are left out of the tables.

    Raises:
        EmptyResultsError: When there is nothing to evaluate
    """
    registry = registry or default_registry()
    out = Path(out)
    reports = [r for r in read_file_reports(out) if r.verdict is not None]
    if not reports:
        raise EmptyResultsError(f"No per-file reports with a verdict under {out}")

    summaries = remediation_summaries([(r.scan_before, r.repair, r.verdict) for r in reports])
    summary_columns = list(next(iter(summaries.values())).model_fields)
    write_models_csv(out / "remediation_summary.csv", list(summaries.values()), summary_columns)
    strategies = list(summaries)
    write_csv(out / "remediation_comparison.csv", ["metric", *[s.value for s in strategies]],
              [[row.metric, *[row.values[s] for s in strategies]] for row in comparison_table(summaries)])

    rule_rows, category_rows, new_rows = [], [], []
    for strategy in strategies:
        subset = [r for r in reports if r.strategy is strategy]
        # An unparseable final output keeps its before counts
        rules, categories = before_after_deltas([(r.file_id, r.scan_before, r.scan_after or r.scan_before)
                                                 for r in subset])
        rule_rows += [[strategy, *[getattr(row, c) for c in row.model_fields]] for row in rules]
        category_rows += [[strategy, *[getattr(row, c) for c in row.model_fields]] for row in categories]
        for report in subset:
            for number, violation in enumerate(report.verdict.new_violations, 1):
                description = registry.get(violation.rule_id).meta.description if violation.rule_id in registry else ""
                new_rows.append(NewViolationRow(
                    file_id=report.file_id, strategy=strategy, number=number, category=violation.category,
                    rule_id=violation.rule_id, description=description, element=violation.node_path,
                ))
    write_csv(out / "rule_deltas.csv",
              ["strategy", "file_id", "rule_id", "category", "impact", "before", "after", "delta"], rule_rows)
    write_csv(out / "category_deltas.csv", ["strategy", "file_id", "category", "before", "after", "delta"],
              category_rows)
    write_models_csv(out / "new_violations.csv", new_rows,
                     ["file_id", "strategy", "number", "category", "rule_id", "description", "element"])
    write_models_csv(out / "iteration_distribution.csv",
                     iteration_distribution([r.repair for r in reports], max_iterations),
                     ["strategy", "iterations", "files", "accepted"])
    return {"files": len(reports), "summaries": summaries, "new_violations": len(new_rows), "out": out}


# --- Cost ---

def ledger_label(path: Path) -> str:
    path = Path(path)
    return path.parent.name if path.stem == "ledger" and path.parent.name else path.stem


def run_cost_report(ledger_paths: Sequence[Path], out: Path, prices: Optional[PriceTable] = None,
                    file_counts: Optional[Sequence[int]] = None) -> Dict[str, Any]:
    """
    Aggregate, ratio and per-file cost tables for one or more ledgers.

    The ratio table compares the first ledger (A) with the second (B). File counts default to the
    number of distinct files in each ledger.
    """
    prices = prices or PriceTable.load()
    out = Path(out)
    ledgers = [(ledger_label(p), CostLedger.from_ndjson(p)) for p in ledger_paths]
    if file_counts is not None and len(file_counts) != len(ledgers):
        raise ConfigError("Give one file count per ledger")

    aggregate = []
    for label, ledger in ledgers:
        aggregate.append(summarize(ledger, prices, label))
        aggregate.append(summarize(ledger.without_retries(), prices, f"{label} (no retries)"))
    write_models_csv(out / "cost_aggregate.csv", aggregate,
                     ["label", "calls", "prompt_tokens", "completion_tokens", "total_tokens", "cost",
                      "mean_latency_ms", "retries"])

    ratios = []
    if len(ledgers) >= 2:
        ratios = comparison_report(ledgers[0][1], ledgers[1][1], prices)
        write_models_csv(out / "cost_comparison.csv", ratios, ["metric", "a", "b", "ratio", "degenerate"])
    elif ledgers:
        logger.info("One ledger given; skipping the ratio table")

    per_file = []
    for i, (label, ledger) in enumerate(ledgers):
        count = file_counts[i] if file_counts is not None else len(ledger.file_ids())
        if count == 0:
            logger.warning(f"Ledger '{label}' has no files; per-file figures skipped")
            continue
        per_file.append(per_file_report(ledger, count, prices, label))
    write_models_csv(out / "cost_per_file.csv", per_file,
                     ["label", "files", "cost_per_file", "tokens_per_file", "calls_per_file"])
    return {"aggregate": aggregate, "ratios": ratios, "per_file": per_file, "out": out}
