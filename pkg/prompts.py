# prompts.py
# Versioned prompt templates and the detection / repair / feedback prompt builders.

import logging
from pathlib import Path
from string import Template
from typing import Dict, Optional, Sequence

import yaml

from config import PROMPTS_PATH
from errors import ConfigError
from schemas import ValidationVerdict, Violation

logger = logging.getLogger(__name__)

DOCUMENT_FENCE = "```html\n"
FENCE_CLOSE = "\n```"

REQUIRED_TEMPLATES = ("detection", "repair", "repair_chunk", "feedback")


class PromptSet:
    """Templates loaded from the prompts file, plus the shared taxonomy text."""

    def __init__(self, version: int, taxonomy: str, templates: Dict[str, str]):
        missing = [name for name in REQUIRED_TEMPLATES if name not in templates]
        if missing:
            raise ConfigError(f"Prompt templates missing: {', '.join(missing)}")
        self.version = version
        self.taxonomy = taxonomy.strip()
        self.templates = {name: Template(text) for name, text in templates.items()}

    @classmethod
    def load(cls, path: Path = PROMPTS_PATH) -> "PromptSet":
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
            return cls(int(data["version"]), data.get("taxonomy", ""), dict(data["templates"]))
        except ConfigError:
            raise
        except Exception as e:
            raise ConfigError(f"Could not load prompt templates from {path}: {e}") from e

    def render(self, name: str, **values) -> str:
        return self.templates[name].substitute(taxonomy=self.taxonomy, **values)


_DEFAULT: Optional[PromptSet] = None


def default_prompts() -> PromptSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PromptSet.load()
    return _DEFAULT


def format_issues(violations: Sequence[Violation]) -> str:
    """One numbered line per violation."""
    if not violations:
        return "(none)"
    return "\n".join(
        f"{i}. [{v.rule_id}] ({v.category.value}, {v.impact.value}) at {v.node_path}: {v.message}"
        for i, v in enumerate(violations, 1)
    )


def build_detection_prompt(chunk_html: str, prompts: Optional[PromptSet] = None) -> str:
    return (prompts or default_prompts()).render("detection", document=chunk_html)


def build_repair_prompt(doc_html: str, violations: Sequence[Violation], prompts: Optional[PromptSet] = None,
                        fragment: bool = False) -> str:
    """Repair prompt for a whole document, or for one chunk of it when fragment is set."""
    return (prompts or default_prompts()).render(
        "repair_chunk" if fragment else "repair",
        document=doc_html,
        count=len(violations),
        issues=format_issues(violations),
    )


def build_feedback_prompt(doc_html: str, verdict: ValidationVerdict,
                          remaining: Sequence[Violation] = (), prompts: Optional[PromptSet] = None) -> str:
    """Next-iteration prompt naming the failed gates, the similarity score and what is still wrong."""
    return (prompts or default_prompts()).render(
        "feedback",
        document=doc_html,
        failed_gates=", ".join(verdict.failed_gates) or "none",
        v_before=verdict.v_before,
        v_after=verdict.v_after,
        similarity=f"{verdict.structural_similarity:.4f}",
        threshold=f"{verdict.similarity_threshold:.2f}",
        parse_valid="yes" if verdict.parse_valid else "no",
        count=len(remaining),
        issues=format_issues(remaining),
    )


def embedded_document(prompt: str) -> Optional[str]:
    """The HTML a prompt carries in its first ```html fence."""
    start = prompt.find(DOCUMENT_FENCE)
    if start < 0:
        return None
    start += len(DOCUMENT_FENCE)
    end = prompt.find(FENCE_CLOSE, start)
    if end < 0:
        return prompt[start:]
    return prompt[start:end]
