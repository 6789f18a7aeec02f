# rules.py
# Deterministic rule engine: the catalog-driven registry, the rule checks and scan().

import logging
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import yaml

from config import RULE_CATALOG_PATH
from contrast import StyleResolver, Unresolvable, element_contrast, has_own_text
from errors import ConfigError, RuleLookupError
from html_core import DomNode, DomTree, node_path, text_content
from schemas import (
    Category,
    Principle,
    RuleFrequencyRow,
    RuleMeta,
    ScanReport,
    SkippedRule,
    Violation,
    utc_now,
)

logger = logging.getLogger(__name__)

Hit = Tuple[DomNode, str]
CheckFn = Callable[["ScanContext"], List[Hit]]

HEADINGS = {"h1": 1, "h2": 2, "h3": 3, "h4": 4, "h5": 5, "h6": 6}
LANDMARK_ROLES = {"main", "navigation", "complementary", "banner", "contentinfo", "region", "form", "search"}
SECTIONING = {"article", "aside", "main", "nav", "section"}
HIDDEN_CONTENT_TAGS = {"script", "style", "noscript", "template", "head", "title", "meta", "link"}
PRESENTATIONAL = {"presentation", "none"}
GLOBAL_ARIA = {
    "aria-atomic", "aria-busy", "aria-controls", "aria-current", "aria-describedby", "aria-details",
    "aria-disabled", "aria-dropeffect", "aria-flowto", "aria-grabbed", "aria-haspopup", "aria-invalid",
    "aria-keyshortcuts", "aria-label", "aria-labelledby", "aria-live", "aria-owns", "aria-relevant",
    "aria-roledescription",
}
REQUIRED_ARIA = {
    "checkbox": ("aria-checked",),
    "radio": ("aria-checked",),
    "switch": ("aria-checked",),
    "menuitemcheckbox": ("aria-checked",),
    "menuitemradio": ("aria-checked",),
    "slider": ("aria-valuenow",),
    "heading": ("aria-level",),
    "combobox": ("aria-expanded",),
    "scrollbar": ("aria-controls", "aria-valuenow"),
}
UNLABELLED_INPUT_TYPES = {"hidden", "submit", "reset", "button", "image"}
INTERACTIVE_TAGS = {"a", "button"}
NESTING_RECOVERIES = {"misnested-block", "misnested-end-tag"}

# Roles an element may carry besides its implicit one; tags not listed accept any role
_LINK_ROLES = {"button", "checkbox", "menuitem", "menuitemcheckbox", "menuitemradio", "option", "radio",
               "switch", "tab", "treeitem"}
_BUTTON_ROLES = {"checkbox", "combobox", "link", "menuitem", "menuitemcheckbox", "menuitemradio",
                 "option", "radio", "switch", "tab"}
ALLOWED_ROLES: Dict[str, set] = {
    "a": _LINK_ROLES,
    "button": _BUTTON_ROLES,
    "ul": {"directory", "group", "listbox", "menu", "menubar", "none", "presentation", "radiogroup",
           "tablist", "toolbar", "tree"},
    "li": {"menuitem", "menuitemcheckbox", "menuitemradio", "option", "none", "presentation", "radio",
           "separator", "tab", "treeitem"},
    "nav": {"menu", "menubar", "tablist", "none", "presentation"},
    "header": {"group", "none", "presentation"},
    "footer": {"group", "none", "presentation"},
    "main": set(),
    **{h: {"none", "presentation", "tab"} for h in HEADINGS},
}
ALLOWED_ROLES["ol"] = ALLOWED_ROLES["ul"]
INPUT_ALLOWED_ROLES: Dict[str, set] = {
    "checkbox": {"button", "menuitemcheckbox", "option", "switch"},
    "button": _BUTTON_ROLES,
    "text": {"combobox", "searchbox", "spinbutton"},
    "image": {"link", "menuitem", "menuitemcheckbox", "menuitemradio", "radio", "switch"},
    "radio": {"menuitemradio"},
}
IMPLICIT_ROLES = {
    "button": "button", "nav": "navigation", "main": "main", "header": "banner", "footer": "contentinfo",
    "ul": "list", "ol": "list", "li": "listitem", "aside": "complementary",
    **{h: "heading" for h in HEADINGS},
}


# --- Catalog and registry ---

class Rule:
    """A catalog row bound to its check function."""

    def __init__(self, meta: RuleMeta, check: CheckFn):
        self.meta = meta
        self.check = check

    @property
    def id(self) -> str:
        return self.meta.id

    def __repr__(self):
        return f"Rule({self.meta.id!r}, {self.meta.category.value})"


_CHECKS: Dict[str, CheckFn] = {}


def rule_check(rule_id: str):
    """Decorator that binds a check to a catalog rule id.

    The decorated function can also be called directly with a DomTree and returns Violations.
    """
    def decorator(func: CheckFn):
        _CHECKS[rule_id] = func

        def run(doc, registry: Optional["RuleRegistry"] = None) -> List[Violation]:
            ctx = doc if isinstance(doc, ScanContext) else ScanContext(doc)
            meta = (registry or default_registry()).get(rule_id).meta
            return [ctx.violation(meta, node, message) for node, message in func(ctx)]

        run.__name__ = func.__name__
        run.__doc__ = func.__doc__
        run.rule_id = rule_id
        return run
    return decorator


class RuleRegistry:
    """Immutable set of rules keyed by id, in catalog order."""

    def __init__(self, rules: Sequence[Rule], version: int = 1):
        self._rules: Dict[str, Rule] = {}
        for r in rules:
            if r.id in self._rules:
                raise ConfigError(f"Duplicate rule id in catalog: {r.id}")
            self._rules[r.id] = r
        self.version = version

    def __iter__(self):
        return iter(self._rules.values())

    def __len__(self):
        return len(self._rules)

    def __contains__(self, rule_id: str) -> bool:
        return rule_id in self._rules

    def ids(self) -> List[str]:
        return list(self._rules)

    def get(self, rule_id: str) -> Rule:
        try:
            return self._rules[rule_id]
        except KeyError:
            raise RuleLookupError(f"Unknown rule id: {rule_id}") from None

    def subset(self, rule_ids: Iterable[str]) -> "RuleRegistry":
        wanted = set(rule_ids)
        return RuleRegistry([r for r in self if r.id in wanted], self.version)


def load_catalog(path: Path = RULE_CATALOG_PATH) -> Tuple[int, List[RuleMeta]]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Could not read rule catalog {path}: {e}") from e
    try:
        version = int(data["version"])
        rows = [RuleMeta.model_validate(row) for row in data["rules"]]
    except Exception as e:
        raise ConfigError(f"Invalid rule catalog {path}: {e}") from e
    return version, rows


def build_registry(path: Path = RULE_CATALOG_PATH) -> RuleRegistry:
    """Bind every catalog row to its check; a row without a check is a configuration error."""
    version, rows = load_catalog(path)
    rules = []
    for meta in rows:
        if meta.id not in _CHECKS:
            raise ConfigError(f"Catalog rule '{meta.id}' has no check implementation")
        rules.append(Rule(meta, _CHECKS[meta.id]))
    logger.debug(f"Loaded {len(rules)} rules from catalog version {version}")
    return RuleRegistry(rules, version)


_DEFAULT_REGISTRY: Optional[RuleRegistry] = None


def default_registry() -> RuleRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = build_registry()
    return _DEFAULT_REGISTRY


def categorize(rule_id: str, registry: Optional[RuleRegistry] = None) -> Category:
    """Catalog category of a rule id; raises RuleLookupError for unknown ids."""
    return (registry or default_registry()).get(rule_id).meta.category


# --- Scan context ---

class ScanContext:
    """Per-document state shared by the checks: element order, styles, id index, skipped work."""

    def __init__(self, doc: DomTree):
        self.doc = doc
        self.elements = doc.elements()
        self.order = {id(node): i for i, node in enumerate(self.elements)}
        self._paths: Dict[int, str] = {}
        self._styles: Optional[StyleResolver] = None
        self._ids: Optional[Dict[str, DomNode]] = None
        self.skipped: Dict[Tuple[str, str], int] = {}

    @property
    def styles(self) -> StyleResolver:
        if self._styles is None:
            self._styles = StyleResolver(self.doc)
        return self._styles

    def by_id(self, element_id: str) -> Optional[DomNode]:
        if self._ids is None:
            self._ids = {}
            for node in self.elements:
                value = node.get("id")
                if value is not None:
                    self._ids.setdefault(value, node)
        return self._ids.get(element_id)

    def path(self, node: DomNode) -> str:
        key = id(node)
        if key not in self._paths:
            self._paths[key] = node_path(node)
        return self._paths[key]

    def skip(self, rule_id: str, reason: str):
        key = (rule_id, reason)
        self.skipped[key] = self.skipped.get(key, 0) + 1

    def violation(self, meta: RuleMeta, node: DomNode, message: str) -> Violation:
        return Violation(
            rule_id=meta.id,
            category=meta.category,
            impact=meta.impact,
            node_path=self.path(node),
            message=message,
            source_span=node.span,
        )

    # Element helpers
    def role(self, node: DomNode) -> Optional[str]:
        value = (node.get("role") or "").strip().lower()
        return value.split()[0] if value else None

    def is_hidden(self, node: DomNode) -> bool:
        """Hidden from assistive technology by the node itself or an ancestor."""
        current: Optional[DomNode] = node
        while current is not None:
            if current.get("aria-hidden", "").strip().lower() == "true" or "hidden" in current.attrs:
                return True
            current = current.parent
        return False

    def labelled_by_text(self, node: DomNode) -> str:
        parts = []
        for ref in (node.get("aria-labelledby") or "").split():
            target = self.by_id(ref)
            if target is not None:
                parts.append(text_content(target))
        return " ".join(parts).strip()

    def accessible_name(self, node: DomNode) -> str:
        """Static approximation: aria-labelledby, aria-label, content (text and img alt), title."""
        name = self.labelled_by_text(node)
        if name:
            return name
        name = (node.get("aria-label") or "").strip()
        if name:
            return name
        name = content_name(node)
        if name:
            return name
        return (node.get("title") or "").strip()


def content_name(node: DomNode) -> str:
    parts = []
    stack = [node]
    while stack:
        current = stack.pop()
        if current.tag == "#text":
            parts.append(current.text)
        elif current.is_element and current.tag not in HIDDEN_CONTENT_TAGS:
            if current is not node and current.get("aria-hidden", "").lower() == "true":
                continue
            if current.tag in ("img", "area") or (current.tag == "input" and current.get("type") == "image"):
                parts.append(current.get("alt") or "")
            elif current is not node and current.get("aria-label"):
                parts.append(current.get("aria-label"))
                continue
            stack.extend(reversed(current.children))
    return " ".join(p.strip() for p in parts if p.strip())


def tabindex(node: DomNode) -> Optional[int]:
    value = node.get("tabindex")
    if value is None:
        return None
    try:
        return int(value.strip())
    except ValueError:
        return None


def is_focusable(node: DomNode) -> bool:
    """a[href], button, input (not hidden), select, textarea or tabindex >= 0; tabindex < 0 and disabled exempt."""
    index = tabindex(node)
    if index is not None and index < 0:
        return False
    if index is not None:
        return True
    if "disabled" in node.attrs and node.tag in ("button", "input", "select", "textarea"):
        return False
    if node.tag == "a":
        return "href" in node.attrs
    if node.tag == "input":
        return (node.get("type") or "text").strip().lower() != "hidden"
    return node.tag in ("button", "select", "textarea")


def focusable_within(node: DomNode) -> List[DomNode]:
    found = [node] if is_focusable(node) else []
    found.extend(n for n in node.iter_descendants() if n.is_element and is_focusable(n))
    return found


def heading_level(ctx: ScanContext, node: DomNode) -> Optional[int]:
    if ctx.role(node) == "heading":
        try:
            return max(1, int((node.get("aria-level") or "2").strip()))
        except ValueError:
            return 2
    if node.tag in HEADINGS and ctx.role(node) not in PRESENTATIONAL:
        return HEADINGS[node.tag]
    return None


def landmark_role(ctx: ScanContext, node: DomNode) -> Optional[str]:
    """The landmark role of a node, or None when it does not define one."""
    role = ctx.role(node)
    named = bool((node.get("aria-label") or "").strip() or (node.get("aria-labelledby") or "").strip())
    if role is not None:
        if role in ("region", "form"):
            return role if named else None
        return role if role in LANDMARK_ROLES else None
    if node.tag == "main":
        return "main"
    if node.tag == "nav":
        return "navigation"
    if node.tag == "aside":
        return "complementary"
    if node.tag in ("header", "footer"):
        if any(a.tag in SECTIONING for a in node.ancestors()):
            return None
        return "banner" if node.tag == "header" else "contentinfo"
    if node.tag == "section" and named:
        return "region"
    if node.tag == "form" and named:
        return "form"
    return None


def _is_rendered_element(ctx: ScanContext, node: DomNode) -> bool:
    if node.tag in HIDDEN_CONTENT_TAGS or "hidden" in node.attrs:
        return False
    return node.get("aria-hidden", "").strip().lower() != "true"


def _has_rendered_text(ctx: ScanContext, node: DomNode) -> bool:
    stack = [node]
    while stack:
        current = stack.pop()
        if current.tag == "#text":
            if current.text.strip():
                return True
        elif current.is_element and _is_rendered_element(ctx, current):
            stack.extend(current.children)
    return False


def _has_landmark_descendant(ctx: ScanContext, node: DomNode) -> bool:
    return any(n.is_element and landmark_role(ctx, n) for n in node.iter_descendants())


# --- Rule checks ---

@rule_check("region")
def check_region(ctx: ScanContext) -> List[Hit]:
    """Flags the highest rendered-text-bearing element outside every landmark, once per offender."""
    body = ctx.doc.body
    if body is None:
        return []
    hits: List[Hit] = []
    containers = [body]
    while containers:
        container = containers.pop(0)
        bare_text = False
        for child in container.children:
            if child.tag == "#text":
                bare_text = bare_text or bool(child.text.strip())
                continue
            if not child.is_element or not _is_rendered_element(ctx, child):
                continue
            if landmark_role(ctx, child):
                continue
            if _has_landmark_descendant(ctx, child):
                containers.append(child)
            elif _has_rendered_text(ctx, child):
                hits.append((child, "Content is not contained by a landmark region"))
        if bare_text:
            hits.append((container, "Text is not contained by a landmark region"))
    return hits


@rule_check("color-contrast")
def check_color_contrast(ctx: ScanContext) -> List[Hit]:
    """
    Text whose declared colours fall below the AA ratio (3:1 for large text).

    Only elements with their own non-blank text are measured; an empty element has nothing to read.
    """
    hits: List[Hit] = []
    for node in ctx.elements:
        if not has_own_text(node) or not _is_rendered_element(ctx, node):
            continue
        try:
            result = element_contrast(ctx.styles, node)
        except Unresolvable as e:
            ctx.skip("color-contrast", "colour not statically resolvable")
            logger.debug(f"Skipping contrast at {ctx.path(node)}: {e}")
            continue
        if result is None:
            continue
        ratio, threshold = result
        if ratio < threshold:
            hits.append((node, f"Contrast ratio {ratio:.2f}:1 is below {threshold}:1"))
    if ctx.styles.sheet.ignored_selectors:
        ctx.skip("color-contrast", "complex stylesheet selectors ignored")
    return hits


@rule_check("link-name")
def check_link_name(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        is_link = (node.tag == "a" and "href" in node.attrs) or ctx.role(node) == "link"
        if not is_link or ctx.is_hidden(node):
            continue
        if not ctx.accessible_name(node):
            hits.append((node, "Link has no discernible text"))
    return hits


@rule_check("image-alt")
def check_image_alt(ctx: ScanContext) -> List[Hit]:
    """Every img needs a non-empty alt unless its role is presentation or none."""
    hits: List[Hit] = []
    for node in ctx.elements:
        if node.tag != "img" or ctx.role(node) in PRESENTATIONAL:
            continue
        if not (node.get("alt") or "").strip():
            hits.append((node, "Image has no alternative text"))
    return hits


@rule_check("button-name")
def check_button_name(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        if ctx.is_hidden(node):
            continue
        input_type = (node.get("type") or "").strip().lower()
        if node.tag == "input":
            # submit and reset carry a default label
            if input_type == "button" and not ((node.get("value") or "").strip() or ctx.accessible_name(node)):
                hits.append((node, "Button has no discernible text"))
            continue
        if node.tag == "button" or ctx.role(node) == "button":
            if not ctx.accessible_name(node):
                hits.append((node, "Button has no discernible text"))
    return hits


@rule_check("aria-allowed-role")
def check_aria_allowed_role(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        role = ctx.role(node)
        if role is None:
            continue
        if node.tag == "input":
            allowed = INPUT_ALLOWED_ROLES.get((node.get("type") or "text").strip().lower(), set())
        elif node.tag == "a" and "href" not in node.attrs:
            continue
        elif node.tag in ALLOWED_ROLES:
            allowed = ALLOWED_ROLES[node.tag]
        else:
            continue
        implicit = "link" if node.tag == "a" else IMPLICIT_ROLES.get(node.tag)
        if role != implicit and role not in allowed:
            hits.append((node, f"Role '{role}' is not allowed on <{node.tag}>"))
    return hits


@rule_check("heading-order")
def check_heading_order(ctx: ScanContext) -> List[Hit]:
    """A heading may go at most one level deeper than the heading before it."""
    hits: List[Hit] = []
    previous: Optional[int] = None
    for node in ctx.elements:
        level = heading_level(ctx, node)
        if level is None:
            continue
        if previous is not None and level > previous + 1:
            hits.append((node, f"Heading level jumps from {previous} to {level}"))
        previous = level
    return hits


@rule_check("landmark-unique")
def check_landmark_unique(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    seen = set()
    for node in ctx.elements:
        role = landmark_role(ctx, node)
        if role is None:
            continue
        name = ctx.labelled_by_text(node) or (node.get("aria-label") or "").strip()
        key = (role, name.lower())
        if key in seen:
            hits.append((node, f"Landmark '{role}' is not unique"))
        seen.add(key)
    return hits


@rule_check("presentation-role-conflict")
def check_presentation_role_conflict(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        if ctx.role(node) not in PRESENTATIONAL:
            continue
        if is_focusable(node):
            hits.append((node, "Presentational element is focusable"))
        elif any(name in GLOBAL_ARIA for name in node.attrs):
            hits.append((node, "Presentational element has global ARIA attributes"))
    return hits


@rule_check("empty-heading")
def check_empty_heading(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        if heading_level(ctx, node) is None or ctx.is_hidden(node):
            continue
        if not ctx.accessible_name(node):
            hits.append((node, "Heading has no discernible text"))
    return hits


@rule_check("aria-hidden-focus")
def check_aria_hidden_focus(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        if node.get("aria-hidden", "").strip().lower() != "true":
            continue
        # Only the outermost aria-hidden element is reported
        if any(a.get("aria-hidden", "").strip().lower() == "true" for a in node.ancestors()):
            continue
        if focusable_within(node):
            hits.append((node, "aria-hidden element contains focusable content"))
    return hits


@rule_check("listitem")
def check_listitem(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        if node.tag != "li" or ctx.role(node) in PRESENTATIONAL:
            continue
        parent = node.parent
        if parent is None or not (parent.tag in ("ul", "ol", "menu") or ctx.role(parent) == "list"):
            hits.append((node, "<li> is not contained in a <ul>, <ol> or <menu>"))
    return hits


@rule_check("duplicate-id")
def check_duplicate_id(ctx: ScanContext) -> List[Hit]:
    """Second and later occurrences of an id value."""
    hits: List[Hit] = []
    seen = set()
    for node in ctx.elements:
        value = node.get("id")
        if value is None or not value.strip():
            continue
        if value in seen:
            hits.append((node, f"Duplicate id '{value}'"))
        seen.add(value)
    return hits


@rule_check("label")
def check_label(ctx: ScanContext) -> List[Hit]:
    explicit = set()
    for node in ctx.elements:
        if node.tag == "label" and node.get("for") and text_content(node).strip():
            explicit.add(node.get("for"))
    hits: List[Hit] = []
    for node in ctx.elements:
        if node.tag == "input":
            if (node.get("type") or "text").strip().lower() in UNLABELLED_INPUT_TYPES:
                continue
        elif node.tag not in ("select", "textarea"):
            continue
        if ctx.is_hidden(node):
            continue
        if ctx.labelled_by_text(node) or (node.get("aria-label") or "").strip():
            continue
        if node.get("id") in explicit:
            continue
        if any(a.tag == "label" and text_content(a).strip() for a in node.ancestors()):
            continue
        if (node.get("title") or "").strip() or (node.get("placeholder") or "").strip():
            continue
        hits.append((node, "Form element has no label"))
    return hits


@rule_check("invalid-nesting")
def check_invalid_nesting(ctx: ScanContext) -> List[Hit]:
    """Content-model breaks the parser had to repair, plus interactive elements nested in each other."""
    hits: List[Hit] = []
    for recovery in ctx.doc.recoveries:
        if recovery.kind not in NESTING_RECOVERIES:
            continue
        node = ctx.doc.resolve(recovery.path)
        if node is None:
            ctx.skip("invalid-nesting", "repaired node not present in this tree")
            continue
        hits.append((node, f"Invalid HTML nesting ({recovery.kind}) at <{node.tag}>"))
    for node in ctx.elements:
        if node.tag not in INTERACTIVE_TAGS or (node.tag == "a" and "href" not in node.attrs):
            continue
        parent_interactive = next(
            (a for a in node.ancestors() if a.tag == "button" or (a.tag == "a" and "href" in a.attrs)), None
        )
        if parent_interactive is not None:
            hits.append((node, f"Interactive <{node.tag}> nested inside <{parent_interactive.tag}>"))
    return hits


@rule_check("aria-required-attr")
def check_aria_required_attr(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        role = ctx.role(node)
        if role not in REQUIRED_ARIA or node.tag == "input":
            continue
        if role == "heading" and node.tag in HEADINGS:
            continue
        missing = [attr for attr in REQUIRED_ARIA[role] if not (node.get(attr) or "").strip()]
        if missing:
            hits.append((node, f"Role '{role}' requires {', '.join(missing)}"))
    return hits


@rule_check("scrollable-region-focusable")
def check_scrollable_region_focusable(ctx: ScanContext) -> List[Hit]:
    hits: List[Hit] = []
    for node in ctx.elements:
        styles = ctx.styles.declared(node)
        overflow = " ".join(styles.get(name, "") for name in ("overflow", "overflow-x", "overflow-y")).lower()
        if "auto" not in overflow and "scroll" not in overflow:
            continue
        if not (node.n_elements or text_content(node).strip()):
            continue
        if not focusable_within(node):
            hits.append((node, "Scrollable region is not keyboard accessible"))
    return hits


# --- Scanning ---

def scan(doc: DomTree, registry: Optional[RuleRegistry] = None, document_id: str = "",
         clock: Callable = utc_now) -> ScanReport:
    """
    Run every rule over a document.

    Args:
        doc: Raw or cleaned DomTree
        registry: Rule set (the shipped catalog when omitted)
        document_id: Identifier recorded on the report
        clock: Timestamp source for scanned_at

    Returns:
        ScanReport: Violations ordered by document position then rule id
    """
    registry = registry or default_registry()
    ctx = ScanContext(doc)
    found: List[Tuple[int, str, Violation]] = []
    for rule in registry:
        try:
            hits = list(rule.check(ctx))
        except Exception as e:
            logger.warning(f"{document_id}: rule {rule.id} failed and was skipped: {e}")
            ctx.skip(rule.id, f"check raised {type(e).__name__}")
            continue
        for node, message in hits:
            found.append((ctx.order.get(id(node), 0), rule.id, ctx.violation(rule.meta, node, message)))
    found.sort(key=lambda item: (item[0], item[1]))
    violations = [v for _, _, v in found]

    counts = {category: 0 for category in Category}
    for violation in violations:
        counts[violation.category] += 1
    skipped = [
        SkippedRule(rule_id=rule_id, reason=reason, count=count)
        for (rule_id, reason), count in sorted(ctx.skipped.items())
    ]
    for item in skipped:
        logger.debug(f"{document_id}: skipped {item.count} x {item.rule_id} ({item.reason})")
    return ScanReport(
        document_id=document_id,
        violations=violations,
        category_counts=counts,
        skipped_rules=skipped,
        catalog_version=registry.version,
        scanned_at=clock(),
    )


def page_label(report: ScanReport) -> int:
    """1 iff the report has at least one violation."""
    return 1 if report.violation_count > 0 else 0


def category_flags(report: ScanReport) -> Dict[Category, int]:
    """Per-category 0/1 flags for one document."""
    return {category: 1 if report.category_counts.get(category, 0) > 0 else 0 for category in Category}


def rule_frequency(reports: Sequence[ScanReport], registry: Optional[RuleRegistry] = None) -> List[RuleFrequencyRow]:
    """Per rule: violating nodes and pages across reports, most frequent first."""
    registry = registry or default_registry()
    nodes: Dict[str, int] = {}
    pages: Dict[str, int] = {}
    for report in reports:
        counts = report.rule_counts()
        for rule_id, count in counts.items():
            nodes[rule_id] = nodes.get(rule_id, 0) + count
            pages[rule_id] = pages.get(rule_id, 0) + 1
    rows = []
    for rule in registry:
        if rule.id not in nodes:
            continue
        rows.append(RuleFrequencyRow(
            rule_id=rule.id,
            category=rule.meta.category,
            impact=rule.meta.impact,
            description=rule.meta.description,
            nodes=nodes[rule.id],
            pages=pages[rule.id],
            wcag=rule.meta.wcag,
        ))
    rows.sort(key=lambda row: (-row.nodes, row.rule_id))
    return rows


def principle_distribution(reports: Sequence[ScanReport], registry: Optional[RuleRegistry] = None) -> Dict[Principle, int]:
    registry = registry or default_registry()
    distribution = {principle: 0 for principle in Principle}
    for report in reports:
        for violation in report.violations:
            if violation.rule_id in registry:
                distribution[registry.get(violation.rule_id).meta.principle] += 1
    return distribution
