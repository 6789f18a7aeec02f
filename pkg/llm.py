# llm.py
# LLM providers: an OpenAI-compatible chat-completion client and a scripted, replayable mock.
# CallSession attributes every call to a file and stage and appends it to the cost ledger.

import fnmatch
import hashlib
import json
import logging
import threading
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Protocol

import openai
import yaml
from tenacity import RetryError, retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from config import get_api_key, API_KEY_ENV
from cost import CostLedger
from errors import ConfigError, ProviderError
from html_core import estimate_tokens, parse_html
from prompts import embedded_document
from rules import scan
from schemas import (
    Category,
    CompletionResult,
    DecodingParams,
    ProviderKind,
    ProviderSettings,
    RawCompletion,
    Stage,
    UsageRecord,
    utc_now,
)

logger = logging.getLogger(__name__)


class LlmProvider(Protocol):
    model_id: str

    def complete(self, prompt: str, params: DecodingParams, key: str = "") -> RawCompletion:
        """Return one completion; raise ProviderError on transport failure."""
        ...


# --- HTTP provider ---

_TRANSIENT_ERRORS = (
    openai.APIConnectionError,
    openai.APITimeoutError,
    openai.RateLimitError,
    openai.InternalServerError,
)


class OpenAIProvider:
    """Chat-completion client for any OpenAI-compatible endpoint."""

    def __init__(self, settings: ProviderSettings, api_key: str):
        self.model_id = settings.model
        self.settings = settings
        # Retries are handled by tenacity so that each logical call is one ledger entry
        self.client = openai.OpenAI(
            api_key=api_key,
            base_url=settings.base_url,
            timeout=settings.timeout_s,
            max_retries=0,
        )

    def _request(self, prompt: str, params: DecodingParams):
        kwargs: Dict[str, Any] = {
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
        }
        if params.max_tokens is not None:
            kwargs["max_tokens"] = params.max_tokens
        if params.seed is not None:
            kwargs["seed"] = params.seed
        return self.client.chat.completions.create(**kwargs)

    def complete(self, prompt: str, params: DecodingParams, key: str = "") -> RawCompletion:
        sender = retry(
            stop=stop_after_attempt(self.settings.transport_retries),
            wait=wait_exponential(multiplier=1, min=1, max=30),
            retry=retry_if_exception_type(_TRANSIENT_ERRORS),
            reraise=False,
        )(self._request)

        started = time.perf_counter()
        try:
            response = sender(prompt, params)
        except RetryError as e:
            error = ProviderError(f"Provider call failed after {self.settings.transport_retries} attempts: "
                                  f"{e.last_attempt.exception()}")
            error.latency_ms = (time.perf_counter() - started) * 1000
            raise error from e
        except openai.APIError as e:
            error = ProviderError(f"Provider call failed: {e}")
            error.latency_ms = (time.perf_counter() - started) * 1000
            raise error from e
        latency_ms = (time.perf_counter() - started) * 1000

        text = ""
        if response.choices and response.choices[0].message.content:
            text = response.choices[0].message.content
        usage = getattr(response, "usage", None)
        prompt_tokens = getattr(usage, "prompt_tokens", None)
        completion_tokens = getattr(usage, "completion_tokens", None)
        return RawCompletion(
            text=text,
            prompt_tokens=prompt_tokens if prompt_tokens is not None else estimate_tokens(prompt),
            completion_tokens=completion_tokens if completion_tokens is not None else estimate_tokens(text),
            latency_ms=latency_ms,
            model_id=self.model_id,
        )


# --- Scripted mock provider ---

MOCK_MODES = ("text", "echo", "mirror_rules", "flag_all", "clean", "malformed")


def _detection_answer(violation: int, categories: List[str], rationale: str) -> str:
    return json.dumps({"violation": violation, "categories": categories, "rationale": rationale})


class MockProvider:
    """
    Deterministic provider driven by a script.

    Steps are chosen by prompt hash (responses), then by the first scenario whose glob matches the
    call key (advancing one step per call on that key and sticking at the last), then the default step.
    """

    def __init__(self, script: Optional[Dict[str, Any]] = None, model_id: Optional[str] = None):
        script = script or {}
        self.model_id = model_id or script.get("model") or "mock-a11y"
        self.default: Dict[str, Any] = script.get("default") or {"mode": "echo"}
        self.responses: Dict[str, Dict[str, Any]] = script.get("responses") or {}
        self.scenarios: List[Dict[str, Any]] = script.get("scenarios") or []
        self._counters: Dict[str, int] = {}
        self._lock = threading.Lock()
        for step in [self.default, *self.responses.values(), *(s for sc in self.scenarios for s in sc.get("steps", []))]:
            if not isinstance(step, dict):
                raise ConfigError(f"Mock script step must be a mapping: {step!r}")
            mode = step.get("mode", "text")
            if mode not in MOCK_MODES:
                raise ConfigError(f"Unknown mock mode '{mode}'")

    @classmethod
    def from_file(cls, path: Path, model_id: Optional[str] = None) -> "MockProvider":
        path = Path(path)
        try:
            raw = path.read_text(encoding="utf-8")
            data = json.loads(raw) if path.suffix == ".json" else yaml.safe_load(raw)
        except (OSError, ValueError, yaml.YAMLError) as e:
            raise ConfigError(f"Could not read mock script {path}: {e}") from e
        return cls(data or {}, model_id=model_id)

    def _select(self, prompt: str, key: str) -> Dict[str, Any]:
        digest = hashlib.sha256(prompt.encode("utf-8", errors="replace")).hexdigest()
        if digest in self.responses:
            return self.responses[digest]
        for scenario in self.scenarios:
            if fnmatch.fnmatchcase(key, scenario.get("match", "*")):
                steps = scenario.get("steps") or [self.default]
                with self._lock:
                    position = self._counters.get(key, 0)
                    self._counters[key] = position + 1
                return steps[min(position, len(steps) - 1)]
        return self.default

    def _render(self, step: Dict[str, Any], prompt: str) -> str:
        mode = step.get("mode", "text")
        if mode == "text":
            return str(step.get("text", ""))
        if mode == "echo":
            document = embedded_document(prompt)
            return f"```html\n{document}\n```" if document is not None else ""
        if mode == "flag_all":
            return _detection_answer(1, [c.value for c in Category], "flagged by script")
        if mode == "clean":
            return _detection_answer(0, [], "no issues found")
        if mode == "malformed":
            return "{violation: maybe"
        # mirror_rules: answer what the rule engine says about the embedded document
        document = embedded_document(prompt) or ""
        report = scan(parse_html(document))
        categories = [c.value for c, n in report.category_counts.items() if n > 0]
        return _detection_answer(1 if report.violation_count else 0, categories,
                                 f"{report.violation_count} rule violations")

    def complete(self, prompt: str, params: DecodingParams, key: str = "") -> RawCompletion:
        step = self._select(prompt, key)
        if step.get("fail"):
            raise ProviderError(f"Scripted transport failure for {key or 'call'}")
        text = self._render(step, prompt)
        return RawCompletion(
            text=text,
            prompt_tokens=int(step.get("prompt_tokens", estimate_tokens(prompt))),
            completion_tokens=int(step.get("completion_tokens", estimate_tokens(text))),
            latency_ms=float(step.get("latency_ms", 0.0)),
            model_id=self.model_id,
        )


def make_provider(settings: ProviderSettings) -> Optional[LlmProvider]:
    """Build the configured provider; None when the run has no LLM."""
    if settings.kind is ProviderKind.NONE:
        return None
    if settings.kind is ProviderKind.MOCK:
        if settings.script is None:
            return MockProvider(model_id=settings.model)
        return MockProvider.from_file(settings.script, model_id=settings.model)
    api_key = get_api_key()
    if not api_key:
        raise ConfigError(f"Provider '{settings.kind.value}' needs an API key in ${API_KEY_ENV}")
    return OpenAIProvider(settings, api_key)


# --- Call accounting ---

class CallSession:
    """All provider calls of one file at one stage; every call, failed or not, lands in the ledger."""

    def __init__(self, provider: LlmProvider, ledger: CostLedger, file_id: str, stage: Stage,
                 params: Optional[DecodingParams] = None, clock: Callable = utc_now):
        self.provider = provider
        self.ledger = ledger
        self.file_id = file_id
        self.stage = stage
        self.params = params or DecodingParams()
        self.clock = clock
        self.calls = 0

    def complete(self, prompt: str, key: str, retry: bool = False) -> CompletionResult:
        index = self.calls
        self.calls += 1
        try:
            raw = self.provider.complete(prompt, self.params, key)
        except ProviderError as e:
            record = UsageRecord(
                file_id=self.file_id, stage=self.stage, call_index=index,
                model_id=self.provider.model_id, prompt_tokens=0, completion_tokens=0,
                latency_ms=getattr(e, "latency_ms", 0.0), retry=retry, timestamp=self.clock(), error=str(e),
            )
            self.ledger.append(record)
            logger.warning(f"{self.file_id}: provider call {key} failed: {e}")
            raise
        record = UsageRecord(
            file_id=self.file_id, stage=self.stage, call_index=index, model_id=raw.model_id,
            prompt_tokens=raw.prompt_tokens, completion_tokens=raw.completion_tokens,
            latency_ms=raw.latency_ms, retry=retry, timestamp=self.clock(),
        )
        self.ledger.append(record)
        return CompletionResult(text=raw.text, usage=record, latency_ms=raw.latency_ms)
