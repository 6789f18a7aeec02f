# repair.py
# LLM detection (chunk verdicts aggregated per page) and repair: single-shot and the
# iterative analyze / repair / refine loop driven by validator feedback.

import json
import logging
import re
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple

from errors import ExtractionError, MetricsInputError, ParseFailureError, ProviderError
from html_core import DomTree, chunk, clean, estimate_tokens, parse_html, parse_valid
from llm import CallSession
from prompts import PromptSet, build_detection_prompt, build_feedback_prompt, build_repair_prompt
from schemas import (
    Category,
    Chunk,
    ChunkVerdict,
    LlmDetection,
    RepairAttempt,
    RepairResult,
    ScanReport,
    Strategy,
    UsageRecord,
    ValidationVerdict,
    Violation,
)
from validator import check_repair

logger = logging.getLogger(__name__)

DEFAULT_PARSE_RETRIES = 2
DEFAULT_MAX_ITERATIONS = 3
DEFAULT_CHUNK_BUDGET = 6000

_FENCE = re.compile(r"```[ \t]*([A-Za-z0-9_-]*)[ \t]*\n(.*?)(?:\n[ \t]*```|\Z)", re.S)
_JSON_OBJECT = re.compile(r"\{.*\}", re.S)
_CATEGORIES = {c.value.lower(): c for c in Category}

# (original tree, candidate html, scan_before=..., document_id=...) -> (verdict, scan after)
RepairCheck = Callable[..., Tuple[ValidationVerdict, Optional[ScanReport]]]


# --- Completion parsing ---

def extract_html(text: str) -> str:
    """
    HTML carried by a completion: the first fenced code block, else the largest well-parsing
    HTML-looking substring.

    Raises:
        ExtractionError: When neither yields any markup
    """
    for match in _FENCE.finditer(text or ""):
        language, body = match.group(1).lower(), match.group(2)
        if language in ("", "html", "xhtml", "htm") and body.strip():
            return body

    text = text or ""
    candidates = []
    lowered = text.lower()
    end_html = lowered.rfind("</html>")
    for opener in ("<!doctype", "<html"):
        start = lowered.find(opener)
        if start >= 0 and end_html > start:
            candidates.append(text[start:end_html + len("</html>")])
    first, last = text.find("<"), text.rfind(">")
    if 0 <= first < last:
        candidates.append(text[first:last + 1])
    valid = [c for c in candidates if parse_valid(c)]
    if not valid:
        raise ExtractionError("Completion holds no extractable HTML")
    return max(valid, key=len)


def _extract_fragment(text: str) -> Optional[str]:
    for match in _FENCE.finditer(text or ""):
        if match.group(1).lower() in ("", "html", "xhtml", "htm") and match.group(2).strip():
            return match.group(2)
    stripped = (text or "").strip()
    return stripped if stripped.startswith("<") else None


def parse_detection(text: str) -> Optional[Tuple[int, List[Category], str]]:
    """Read the structured detection answer; None when the completion does not follow the format."""
    fenced = _FENCE.search(text or "")
    body = fenced.group(2) if fenced else (text or "")
    match = _JSON_OBJECT.search(body)
    if not match:
        return None
    try:
        data = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict):
        return None
    verdict = data.get("violation")
    if isinstance(verdict, bool):
        verdict = int(verdict)
    if verdict not in (0, 1):
        return None
    categories = []
    for name in data.get("categories") or []:
        category = _CATEGORIES.get(str(name).strip().lower())
        if category is not None and category not in categories:
            categories.append(category)
    categories.sort(key=list(Category).index)
    return verdict, categories, str(data.get("rationale", ""))


# --- Detection ---

def detect_chunk(piece: Chunk, session: CallSession, file_id: str,
                 parse_retries: int = DEFAULT_PARSE_RETRIES, prompts: Optional[PromptSet] = None) -> ChunkVerdict:
    """
    Ask the provider whether one chunk contains a violation.

    Raises:
        ProviderError: Transport failure
        ParseFailureError: No parseable answer after parse_retries extra calls
    """
    prompt = build_detection_prompt(piece.content, prompts)
    key = f"detect/{file_id}/{piece.index}"
    for attempt in range(parse_retries + 1):
        result = session.complete(prompt, key, retry=attempt > 0)
        parsed = parse_detection(result.text)
        if parsed is not None:
            verdict, categories, rationale = parsed
            return ChunkVerdict(index=piece.index, verdict=verdict, categories=categories,
                                rationale=rationale, retries=attempt)
        logger.warning(f"{file_id}: unparseable detection answer for chunk {piece.index} (attempt {attempt + 1})")
    raise ParseFailureError(f"{file_id}: chunk {piece.index} gave no parseable answer in {parse_retries + 1} calls",
                            attempts=parse_retries + 1)


def aggregate_page(verdicts: Sequence[int]) -> int:
    """A page violates iff any of its chunks does."""
    if not verdicts:
        raise MetricsInputError("Cannot aggregate an empty list of chunk verdicts")
    if any(v not in (0, 1) for v in verdicts):
        raise MetricsInputError(f"Chunk verdicts must be 0 or 1: {list(verdicts)}")
    return max(verdicts)


def detect_page(doc: DomTree, session: CallSession, file_id: str, budget: int = DEFAULT_CHUNK_BUDGET,
                parse_retries: int = DEFAULT_PARSE_RETRIES, prompts: Optional[PromptSet] = None) -> LlmDetection:
    """
    Chunk the cleaned document, classify every chunk and aggregate.

    Provider and parse failures end the page early; the detection then carries the error and no page verdict.
    """
    verdicts: List[ChunkVerdict] = []
    try:
        for piece in chunk(clean(doc), budget):
            verdicts.append(detect_chunk(piece, session, file_id, parse_retries, prompts))
    except ProviderError as e:
        return LlmDetection(chunk_verdicts=verdicts, retries=sum(v.retries for v in verdicts), error=str(e))
    categories = sorted({c for v in verdicts for c in v.categories}, key=list(Category).index)
    return LlmDetection(
        page_verdict=aggregate_page([v.verdict for v in verdicts]),
        chunk_verdicts=verdicts,
        categories=categories,
        retries=sum(v.retries for v in verdicts),
    )


# --- Repair ---

def _generate(html: str, violations: Sequence[Violation], session: CallSession, key: str, retry: bool,
              budget: int, prompts: Optional[PromptSet], feedback: Optional[ValidationVerdict] = None
              ) -> Tuple[str, List[UsageRecord], Optional[str]]:
    """
    One repair step over a whole document: a single call, or one call per chunk when the document
    is above the chunk budget.

    Returns:
        (output html, usage records, extraction error or None)
    """
    if estimate_tokens(html) <= budget:
        if feedback is None:
            prompt = build_repair_prompt(html, violations, prompts)
        else:
            prompt = build_feedback_prompt(html, feedback, violations, prompts)
        result = session.complete(prompt, key, retry=retry)
        try:
            return extract_html(result.text), [result.usage], None
        except ExtractionError as e:
            logger.warning(f"{key}: {e}")
            return "", [result.usage], str(e)

    pieces = chunk(parse_html(html), budget)
    logger.info(f"{key}: repairing {len(pieces)} chunks separately")
    outputs, usage, failures = [], [], []
    for piece in pieces:
        paths = set(piece.node_paths)
        local = [v for v in violations if v.node_path in paths]
        prompt = build_repair_prompt(piece.content, local, prompts, fragment=True)
        result = session.complete(prompt, f"{key}/chunk-{piece.index}", retry=retry)
        usage.append(result.usage)
        fragment = _extract_fragment(result.text)
        if fragment is None:
            failures.append(piece.index)
            outputs.append(piece.content)
        else:
            outputs.append(fragment)
    error = f"no HTML extracted for chunks {failures}; originals kept" if failures else None
    return "".join(outputs), usage, error


def repair_zero_shot(doc_html: str, scan_before: ScanReport, session: CallSession, file_id: str,
                     check: RepairCheck = check_repair, budget: int = DEFAULT_CHUNK_BUDGET,
                     prompts: Optional[PromptSet] = None, original: Optional[DomTree] = None) -> RepairResult:
    """
    Single repair call from the document and its violation list, validated once.

    Args:
        doc_html: Raw document text
        scan_before: Rule scan of the document; must have at least one violation
        session: Call accounting for this file's zero-shot stage
        file_id: Identifier used in call keys and logs
        check: Validation gate runner
        budget: Documents above this token estimate are repaired chunk by chunk
        original: Parsed doc_html, when the caller already has it

    Returns:
        RepairResult: One attempt, or none with error set when the provider failed
    """
    if scan_before.violation_count == 0:
        raise ValueError(f"{file_id} has no violations to repair")
    original = original or parse_html(doc_html)
    try:
        output, usage, error = _generate(doc_html, scan_before.violations, session, f"zero_shot/{file_id}",
                                         False, budget, prompts)
    except ProviderError as e:
        return RepairResult(strategy=Strategy.ZERO_SHOT, final_html=doc_html, error=str(e))
    verdict, _ = check(original, output, scan_before=scan_before, document_id=file_id)
    attempt = RepairAttempt(iteration=1, input_html=doc_html, output_html=output, usage=usage,
                            verdict=verdict, error=error)
    return RepairResult(
        strategy=Strategy.ZERO_SHOT,
        attempts=[attempt],
        final_html=output,
        accepted=verdict.accepted,
        iterations_used=1,
        selected_iteration=1,
    )


def _best_attempt(attempts: Sequence[RepairAttempt]) -> RepairAttempt:
    """Fewest remaining violations, then highest similarity, then earliest."""
    return min(attempts, key=lambda a: (a.verdict.v_after, -a.verdict.structural_similarity, a.iteration))


def repair_agentic(doc_html: str, scan_before: ScanReport, session: CallSession, file_id: str,
                   check: RepairCheck = check_repair, max_iterations: int = DEFAULT_MAX_ITERATIONS,
                   budget: int = DEFAULT_CHUNK_BUDGET, prompts: Optional[PromptSet] = None,
                   original: Optional[DomTree] = None) -> RepairResult:
    """
    Repair, validate and refine until every gate passes or the iteration limit is reached.

    Each refinement sees the validator's failed gates, the similarity score and the violations still
    present. A parse-valid output becomes the next input; otherwise the previous input is retried.
    Validation always compares against the original document. On exhaustion the best attempt is
    selected; a provider error stops the loop and keeps the attempts made so far.
    """
    if scan_before.violation_count == 0:
        raise ValueError(f"{file_id} has no violations to repair")
    if max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")
    original = original or parse_html(doc_html)

    attempts: List[RepairAttempt] = []
    current = doc_html
    remaining: Sequence[Violation] = scan_before.violations
    feedback: Optional[ValidationVerdict] = None
    provider_error: Optional[str] = None

    for iteration in range(1, max_iterations + 1):
        try:
            output, usage, error = _generate(current, remaining, session, f"agent/{file_id}",
                                             iteration > 1, budget, prompts, feedback)
        except ProviderError as e:
            provider_error = str(e)
            logger.warning(f"{file_id}: agent loop stopped at iteration {iteration}: {e}")
            break
        verdict, after = check(original, output, scan_before=scan_before, document_id=file_id)
        attempts.append(RepairAttempt(iteration=iteration, input_html=current, output_html=output,
                                      usage=usage, verdict=verdict, error=error))
        if verdict.accepted:
            logger.info(f"{file_id}: accepted at iteration {iteration}")
            break
        feedback = verdict
        if after is not None:
            current, remaining = output, after.violations

    if not attempts:
        return RepairResult(strategy=Strategy.AGENT, final_html=doc_html, error=provider_error)

    selected = attempts[-1] if attempts[-1].verdict.accepted else _best_attempt(attempts)
    return RepairResult(
        strategy=Strategy.AGENT,
        attempts=attempts,
        final_html=selected.output_html,
        accepted=selected.verdict.accepted,
        iterations_used=len(attempts),
        selected_iteration=selected.iteration,
        error=provider_error,
    )


def repairer(strategy: Strategy, max_iterations: int = DEFAULT_MAX_ITERATIONS) -> Callable[..., RepairResult]:
    """The repair function for a strategy with its iteration limit bound."""
    if strategy is Strategy.ZERO_SHOT:
        return repair_zero_shot
    return partial(repair_agentic, max_iterations=max_iterations)
