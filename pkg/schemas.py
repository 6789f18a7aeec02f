# schemas.py
# This file contains the Pydantic data models (the "blueprints") for a11yfix.
# Everything that is written to disk or crosses a module boundary is one of these.

from datetime import datetime, timezone
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


# --- Enumerations ---

class Category(str, Enum):
    """Violation taxonomy: structural HTML errors, meaning/ARIA errors, visual/interaction errors."""

    SYNTAX = "Syntax"
    SEMANTIC = "Semantic"
    LAYOUT = "Layout"


class Impact(str, Enum):
    MINOR = "minor"
    MODERATE = "moderate"
    SERIOUS = "serious"
    CRITICAL = "critical"


class Principle(str, Enum):
    PERCEIVABLE = "Perceivable"
    OPERABLE = "Operable"
    UNDERSTANDABLE = "Understandable"
    ROBUST = "Robust"


class Strategy(str, Enum):
    ZERO_SHOT = "zero_shot"
    AGENT = "agent"


class Stage(str, Enum):
    """Which part of the pipeline made a provider call."""

    DETECT = "detect"
    ZERO_SHOT = "zero_shot"
    AGENT = "agent"


class StrategyChoice(str, Enum):
    ZERO_SHOT = "zero-shot"
    AGENT = "agent"
    BOTH = "both"

    def strategies(self) -> List[Strategy]:
        if self is StrategyChoice.ZERO_SHOT:
            return [Strategy.ZERO_SHOT]
        if self is StrategyChoice.AGENT:
            return [Strategy.AGENT]
        return [Strategy.ZERO_SHOT, Strategy.AGENT]


class ProviderKind(str, Enum):
    NONE = "none"
    MOCK = "mock"
    OPENAI = "openai"


# --- Documents ---

class Chunk(BaseModel):
    """A contiguous slice of a serialized document, cut on element boundaries."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    content: str
    token_estimate: int = Field(ge=0)
    # Element paths whose open tag (or whole subtree) lives in this chunk
    node_paths: List[str] = []
    start_path: Optional[str] = None
    end_path: Optional[str] = None
    over_budget: bool = False


# --- Rule engine ---

class RuleMeta(BaseModel):
    """One row of the rule catalog."""

    model_config = ConfigDict(frozen=True)

    id: str
    category: Category
    impact: Impact
    wcag: str
    description: str
    principle: Principle
    note: Optional[str] = None


class Violation(BaseModel):
    """One rule hit located at a DOM node."""

    model_config = ConfigDict(frozen=True)

    rule_id: str
    category: Category
    impact: Impact
    # Root-to-node element path, e.g. "/0:html/1:body/0:img"
    node_path: str
    message: str
    source_span: Optional[Tuple[int, int]] = None


class SkippedRule(BaseModel):
    """A rule (or part of one) that could not be evaluated statically."""

    rule_id: str
    reason: str
    count: int = Field(ge=0)


class ScanReport(BaseModel):
    document_id: str
    violations: List[Violation] = []
    category_counts: Dict[Category, int] = {}
    skipped_rules: List[SkippedRule] = []
    catalog_version: int = 1
    scanned_at: datetime = Field(default_factory=utc_now)

    @model_validator(mode="after")
    def _counts_match(self):
        if sum(self.category_counts.values()) != len(self.violations):
            raise ValueError("category counts must sum to the number of violations")
        return self

    @property
    def violation_count(self) -> int:
        """V(x): the number of violations in the document."""
        return len(self.violations)

    def rule_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for violation in self.violations:
            counts[violation.rule_id] = counts.get(violation.rule_id, 0) + 1
        return counts


# --- Cost accounting ---

class UsageRecord(BaseModel):
    """One provider interaction."""

    file_id: str
    stage: Stage
    call_index: int = Field(ge=0)
    model_id: str
    prompt_tokens: int = Field(ge=0)
    completion_tokens: int = Field(ge=0)
    latency_ms: float = Field(ge=0)
    retry: bool = False
    timestamp: datetime = Field(default_factory=utc_now)
    error: Optional[str] = None

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


class PriceEntry(BaseModel):
    """Prices in USD per one million tokens."""

    prompt_per_million: Decimal = Field(ge=0)
    completion_per_million: Decimal = Field(ge=0)


class CostSummary(BaseModel):
    """Aggregate resource usage of one ledger (one column of the cost table)."""

    label: str
    calls: int
    prompt_tokens: int
    completion_tokens: int
    total_tokens: int
    cost: Decimal
    mean_latency_ms: float
    retries: int


class RatioRow(BaseModel):
    metric: str
    a: float
    b: float
    ratio: Optional[float] = None
    degenerate: bool = False


class PerFileCost(BaseModel):
    label: str
    files: int
    cost_per_file: Decimal
    tokens_per_file: float
    calls_per_file: float


# --- LLM interaction ---

class DecodingParams(BaseModel):
    temperature: float = 0.0
    max_tokens: Optional[int] = None
    seed: Optional[int] = None


class RawCompletion(BaseModel):
    """What a provider returns before the call is attributed to a file and stage."""

    text: str
    prompt_tokens: int = Field(ge=0)
    completion_tokens: int = Field(ge=0)
    latency_ms: float = Field(ge=0)
    model_id: str


class CompletionResult(BaseModel):
    text: str
    usage: UsageRecord
    latency_ms: float = Field(ge=0)


class ChunkVerdict(BaseModel):
    index: int
    verdict: Literal[0, 1]
    categories: List[Category] = []
    rationale: str = ""
    retries: int = 0


class LlmDetection(BaseModel):
    page_verdict: Optional[Literal[0, 1]] = None
    chunk_verdicts: List[ChunkVerdict] = []
    categories: List[Category] = []
    retries: int = 0
    error: Optional[str] = None


# --- Validation ---

class ValidationVerdict(BaseModel):
    """Outcome of the three acceptance gates for one repaired document."""

    v_before: int = Field(ge=0)
    v_after: int = Field(ge=0)
    compliance_improved: bool
    fully_fixed: bool
    parse_valid: bool
    structural_similarity: float = Field(ge=0.0, le=1.0)
    similarity_threshold: float
    similarity_method: Literal["exact", "top-down", "none"] = "exact"
    similarity_truncated: bool = False
    structure_preserved: bool
    short_circuited: bool = False
    new_violations: List[Violation] = []
    hook_results: Dict[str, bool] = {}
    failed_gates: List[str] = []
    accepted: bool


# --- Repair ---

class RepairAttempt(BaseModel):
    iteration: int = Field(ge=1)
    input_html: str
    output_html: str
    # One record per provider call; more than one when the document was repaired chunk by chunk
    usage: List[UsageRecord] = []
    verdict: Optional[ValidationVerdict] = None
    error: Optional[str] = None


class RepairResult(BaseModel):
    strategy: Strategy
    attempts: List[RepairAttempt] = []
    final_html: str = ""
    accepted: bool = False
    iterations_used: int = 0
    selected_iteration: Optional[int] = None
    error: Optional[str] = None

    @model_validator(mode="after")
    def _attempt_shape(self):
        if self.iterations_used != len(self.attempts):
            raise ValueError("iterations_used must equal the number of attempts")
        if self.error is None:
            if self.strategy is Strategy.ZERO_SHOT and len(self.attempts) != 1:
                raise ValueError("a zero-shot repair has exactly one attempt")
            if self.strategy is Strategy.AGENT and len(self.attempts) < 1:
                raise ValueError("an agent repair has at least one attempt")
        return self

    @property
    def final_verdict(self) -> Optional[ValidationVerdict]:
        if self.selected_iteration is None:
            return None
        return self.attempts[self.selected_iteration - 1].verdict


# --- Metrics ---

class ConfusionMatrix(BaseModel):
    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class DetectionScores(BaseModel):
    precision: float
    recall: float
    f1: float
    # Names of metrics whose denominator was zero (reported as 0)
    degenerate: List[str] = []


class CategoryAgreement(BaseModel):
    category: Category
    rate_a: float
    rate_b: float
    agreement: float


class CategoryScores(BaseModel):
    category: Category
    precision: float
    recall: float
    f1: float
    degenerate: List[str] = []


class RemediationSummary(BaseModel):
    strategy: Strategy
    n_files: int
    syntactic_valid_rate: float
    structure_preserved_rate: float
    avg_structure_similarity: float
    compliance_improved_rate: float
    fully_fixed_rate: float
    accepted_rate: float
    avg_violations_before: float
    avg_violations_after: float
    avg_violations_reduced: float
    avg_violations_reduced_clamped: float
    avg_iterations: float


class IterationBucket(BaseModel):
    strategy: Strategy
    iterations: int
    files: int
    accepted: int


class ComparisonRow(BaseModel):
    """One metric across strategies (the strategy comparison table)."""

    metric: str
    values: Dict[Strategy, float]


class DetectionSummaryRow(BaseModel):
    system: str
    files: int
    precision: float
    recall: float
    f1: float
    degenerate: List[str] = []


class RuleDeltaRow(BaseModel):
    file_id: str
    rule_id: str
    category: Category
    impact: Impact
    before: int
    after: int
    delta: int


class CategoryDeltaRow(BaseModel):
    file_id: str
    category: Category
    before: int
    after: int
    delta: int


class RuleFrequencyRow(BaseModel):
    rule_id: str
    category: Category
    impact: Impact
    description: str
    nodes: int
    pages: int
    wcag: str


class NewViolationRow(BaseModel):
    file_id: str
    strategy: Strategy
    number: int
    category: Category
    rule_id: str
    description: str
    element: str


# --- Dataset and configuration ---

class DatasetPair(BaseModel):
    file_id: str
    violated_path: Path
    fixed_path: Optional[Path] = None


class LabeledSample(BaseModel):
    file_id: str
    path: Path
    label: Literal[0, 1]
    source: str


class Dataset(BaseModel):
    root: Path
    pairs: List[DatasetPair]
    samples: List[LabeledSample]

    @property
    def detection_only(self) -> bool:
        return all(pair.fixed_path is None for pair in self.pairs)


class ProviderSettings(BaseModel):
    kind: ProviderKind = ProviderKind.NONE
    model: str = "mock-a11y"
    base_url: Optional[str] = None
    script: Optional[Path] = None
    temperature: float = Field(default=0.0, ge=0.0)
    max_tokens: Optional[int] = Field(default=None, gt=0)
    timeout_s: float = Field(default=60.0, gt=0)
    transport_retries: int = Field(default=3, gt=0)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    provider: ProviderSettings = ProviderSettings()
    strategy: StrategyChoice = StrategyChoice.BOTH
    max_iterations: int = Field(default=3, gt=0)
    chunk_budget: int = Field(default=6000, gt=0)
    similarity_threshold: float = Field(default=0.85, gt=0.0, le=1.0)
    price_table: Optional[Path] = None
    workers: int = Field(default=4, gt=0)
    out: Path = Path("a11yfix_out")
    seed: int = Field(default=0, ge=0)
    freeze_clock: bool = False
    parse_retries: int = Field(default=2, ge=0)
    ted_exact_cap: int = Field(default=400, gt=0)
    ted_hard_cap: int = Field(default=5000, gt=0)
    ted_max_depth: int = Field(default=256, gt=0)

    @field_validator("ted_hard_cap")
    @classmethod
    def _hard_cap_above_exact(cls, value, info):
        exact = info.data.get("ted_exact_cap")
        if exact is not None and value < exact:
            raise ValueError("ted_hard_cap must be at least ted_exact_cap")
        return value


# --- Per-file reports ---

FILE_REPORT_SCHEMA = "a11yfix.file-report/v1"
DETECTION_REPORT_SCHEMA = "a11yfix.detection-report/v1"


class FileReport(BaseModel):
    """Everything known about one repaired file: scans, attempts, verdict and usage."""

    schema_id: Literal["a11yfix.file-report/v1"] = FILE_REPORT_SCHEMA
    file_id: str
    strategy: Strategy
    scan_before: ScanReport
    scan_after: Optional[ScanReport] = None
    repair: RepairResult
    verdict: Optional[ValidationVerdict] = None
    usage: List[UsageRecord] = []


class DetectionFileReport(BaseModel):
    schema_id: Literal["a11yfix.detection-report/v1"] = DETECTION_REPORT_SCHEMA
    file_id: str
    source: str
    label: Literal[0, 1]
    rule_scan: ScanReport
    rule_label: Literal[0, 1]
    llm: Optional[LlmDetection] = None
