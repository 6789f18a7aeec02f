# metrics.py
# Detection scores, category agreement between systems, and remediation summaries.

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from errors import MetricsInputError
from schemas import (
    Category,
    CategoryAgreement,
    CategoryDeltaRow,
    CategoryScores,
    ComparisonRow,
    ConfusionMatrix,
    DetectionScores,
    IterationBucket,
    RemediationSummary,
    RepairResult,
    RuleDeltaRow,
    ScanReport,
    Strategy,
    ValidationVerdict,
)

logger = logging.getLogger(__name__)

# file id -> category -> 0/1
CategoryFlags = Mapping[str, Mapping[Category, int]]
RemediationRecord = Tuple[ScanReport, RepairResult, ValidationVerdict]


# --- Detection ---

def confusion(preds: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    """
    Count binary outcomes.

    Raises:
        MetricsInputError: On empty input, a length mismatch or a value outside {0, 1}
    """
    if len(preds) != len(labels):
        raise MetricsInputError(f"Got {len(preds)} predictions for {len(labels)} labels")
    if not preds:
        raise MetricsInputError("Cannot build a confusion matrix from no samples")
    tp = fp = tn = fn = 0
    for pred, label in zip(preds, labels):
        if pred not in (0, 1) or label not in (0, 1):
            raise MetricsInputError(f"Binary values expected, got prediction {pred!r} and label {label!r}")
        if pred and label:
            tp += 1
        elif pred:
            fp += 1
        elif label:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def precision_recall_f1(matrix: ConfusionMatrix) -> DetectionScores:
    """Zero denominators give 0 and name the metric in `degenerate`."""
    degenerate = []
    if matrix.tp + matrix.fp:
        precision = matrix.tp / (matrix.tp + matrix.fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if matrix.tp + matrix.fn:
        recall = matrix.tp / (matrix.tp + matrix.fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if precision + recall:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.append("f1")
    return DetectionScores(precision=precision, recall=recall, f1=f1, degenerate=degenerate)


def _same_files(a: CategoryFlags, b: CategoryFlags):
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))
        raise MetricsInputError(f"Runs cover different files: {', '.join(missing[:5])}")
    if not a:
        raise MetricsInputError("No files to compare")


def category_agreement(flags_a: CategoryFlags, flags_b: CategoryFlags) -> List[CategoryAgreement]:
    """Per category: how often each system flags a file and how often the two agree."""
    _same_files(flags_a, flags_b)
    files = sorted(flags_a)
    rows = []
    for category in Category:
        a = [flags_a[f].get(category, 0) for f in files]
        b = [flags_b[f].get(category, 0) for f in files]
        rows.append(CategoryAgreement(
            category=category,
            rate_a=sum(a) / len(files),
            rate_b=sum(b) / len(files),
            agreement=sum(1 for x, y in zip(a, b) if x == y) / len(files),
        ))
    return rows


def relative_performance(reference: CategoryFlags, candidate: CategoryFlags) -> List[CategoryScores]:
    """Per-category scores of candidate flags, with the reference flags as labels."""
    _same_files(reference, candidate)
    files = sorted(reference)
    rows = []
    for category in Category:
        matrix = confusion([candidate[f].get(category, 0) for f in files],
                           [reference[f].get(category, 0) for f in files])
        scores = precision_recall_f1(matrix)
        rows.append(CategoryScores(category=category, precision=scores.precision, recall=scores.recall,
                                   f1=scores.f1, degenerate=scores.degenerate))
    return rows


# --- Remediation ---

def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def remediation_summary(results: Sequence[RemediationRecord]) -> RemediationSummary:
    """
    Rates and averages over repaired files of one strategy.

    The reduction is the unclamped mean of (before - after), so introduced violations count against it;
    avg_violations_reduced_clamped floors each file at zero instead.
    """
    if not results:
        raise MetricsInputError("Cannot summarize an empty set of repair results")
    strategies = {result.strategy for _, result, _ in results}
    if len(strategies) != 1:
        raise MetricsInputError("Results mix strategies; summarize each strategy separately")

    before = [scan.violation_count for scan, _, _ in results]
    verdicts = [verdict for _, _, verdict in results]
    after = [v.v_after for v in verdicts]
    return RemediationSummary(
        strategy=strategies.pop(),
        n_files=len(results),
        syntactic_valid_rate=_mean([v.parse_valid for v in verdicts]),
        structure_preserved_rate=_mean([v.structure_preserved for v in verdicts]),
        avg_structure_similarity=_mean([v.structural_similarity for v in verdicts]),
        compliance_improved_rate=_mean([v.compliance_improved for v in verdicts]),
        fully_fixed_rate=_mean([v.fully_fixed for v in verdicts]),
        accepted_rate=_mean([v.accepted for v in verdicts]),
        avg_violations_before=_mean(before),
        avg_violations_after=_mean(after),
        avg_violations_reduced=_mean([b - a for b, a in zip(before, after)]),
        avg_violations_reduced_clamped=_mean([max(b - a, 0) for b, a in zip(before, after)]),
        avg_iterations=_mean([result.iterations_used for _, result, _ in results]),
    )


def remediation_summaries(results: Sequence[RemediationRecord]) -> Dict[Strategy, RemediationSummary]:
    """remediation_summary per strategy present in results, in strategy order."""
    grouped: Dict[Strategy, List[RemediationRecord]] = {}
    for record in results:
        grouped.setdefault(record[1].strategy, []).append(record)
    return {strategy: remediation_summary(grouped[strategy]) for strategy in Strategy if strategy in grouped}


COMPARISON_METRICS = (
    ("Avg violations (before)", "avg_violations_before"),
    ("Avg violations (after)", "avg_violations_after"),
    ("Avg violations reduced", "avg_violations_reduced"),
    ("Compliance improved rate", "compliance_improved_rate"),
    ("Fully fixed rate", "fully_fixed_rate"),
    ("Accepted rate", "accepted_rate"),
    ("Structure preserved rate", "structure_preserved_rate"),
    ("Avg iterations", "avg_iterations"),
)


def comparison_table(summaries: Mapping[Strategy, RemediationSummary]) -> List[ComparisonRow]:
    """Metric rows by strategy columns."""
    return [
        ComparisonRow(metric=label, values={s: getattr(summary, field) for s, summary in summaries.items()})
        for label, field in COMPARISON_METRICS
    ]


def iteration_distribution(results: Sequence[RepairResult], max_iterations: Optional[int] = None) -> List[IterationBucket]:
    """Files and accepted files per number of iterations used, one bucket per strategy and count."""
    if not results:
        raise MetricsInputError("No repair results to bucket")
    rows = []
    for strategy in Strategy:
        subset = [r for r in results if r.strategy is strategy]
        if not subset:
            continue
        top = max(max_iterations or 0, max(r.iterations_used for r in subset), 1)
        for iterations in range(1, top + 1):
            bucket = [r for r in subset if r.iterations_used == iterations]
            rows.append(IterationBucket(strategy=strategy, iterations=iterations, files=len(bucket),
                                        accepted=sum(1 for r in bucket if r.accepted)))
    return rows


def before_after_deltas(pairs: Sequence[Tuple[str, ScanReport, Optional[ScanReport]]]
                        ) -> Tuple[List[RuleDeltaRow], List[CategoryDeltaRow]]:
    """
    Per-file change in violation counts by rule and by category (after - before).

    Rule rows cover every rule seen before or after; category rows always cover all categories.

    Raises:
        MetricsInputError: When a file has no after report or appears twice
    """
    seen = set()
    rule_rows: List[RuleDeltaRow] = []
    category_rows: List[CategoryDeltaRow] = []
    for file_id, before, after in sorted(pairs, key=lambda p: p[0]):
        if file_id in seen:
            raise MetricsInputError(f"File appears twice: {file_id}")
        seen.add(file_id)
        if after is None:
            raise MetricsInputError(f"No after report for {file_id}")

        meta = {}
        for violation in [*before.violations, *after.violations]:
            meta.setdefault(violation.rule_id, (violation.category, violation.impact))
        counts_before, counts_after = before.rule_counts(), after.rule_counts()
        for rule_id in sorted(meta):
            b, a = counts_before.get(rule_id, 0), counts_after.get(rule_id, 0)
            category, impact = meta[rule_id]
            rule_rows.append(RuleDeltaRow(file_id=file_id, rule_id=rule_id, category=category, impact=impact,
                                          before=b, after=a, delta=a - b))
        for category in Category:
            b, a = before.category_counts.get(category, 0), after.category_counts.get(category, 0)
            category_rows.append(CategoryDeltaRow(file_id=file_id, category=category, before=b, after=a, delta=a - b))
    return rule_rows, category_rows
