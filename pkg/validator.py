# validator.py
# Acceptance gates for a repaired document: parse validity, compliance improvement and
# structure preservation, plus diffing of violations the repair introduced.

import logging
from functools import partial
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import zss

from html_core import DomNode, DomTree, parse_html, parse_valid, path_tags
from rules import RuleRegistry, default_registry, scan
from schemas import RunConfig, ScanReport, ValidationVerdict, Violation, utc_now

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.85
DEFAULT_EXACT_CAP = 400
DEFAULT_HARD_CAP = 5000
DEFAULT_MAX_DEPTH = 256

GATE_PARSE = "parse"
GATE_COMPLIANCE = "compliance"
GATE_STRUCTURE = "structure"

# Extra gate: (original tree, repaired tree, scan of the repaired tree) -> passed
ValidationHook = Callable[[DomTree, DomTree, ScanReport], bool]


# --- Tag trees ---

def _tag_tree(node: DomNode, max_depth: Optional[int] = None) -> Tuple[zss.Node, int]:
    """Element-only copy of a subtree as zss nodes labelled by tag, cut below max_depth."""
    root = zss.Node(node.tag)
    size = 1
    stack: List[Tuple[DomNode, zss.Node, int]] = [(node, root, 0)]
    while stack:
        source, target, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        for child in source.element_children():
            copy = zss.Node(child.tag)
            target.addkid(copy)
            size += 1
            stack.append((child, copy, depth + 1))
    return root, size


def _level_sizes(node: DomNode) -> List[int]:
    """Element count at each depth below (and including) node."""
    levels: List[int] = []
    frontier = [node]
    while frontier:
        levels.append(len(frontier))
        frontier = [child for n in frontier for child in n.element_children()]
    return levels


def _truncation_depth(a: DomNode, b: DomNode, hard_cap: int, max_depth: int) -> Optional[int]:
    """Deepest cut keeping both trees within the caps, or None when no cut is needed."""
    levels_a, levels_b = _level_sizes(a), _level_sizes(b)
    if sum(levels_a) <= hard_cap and sum(levels_b) <= hard_cap and max(len(levels_a), len(levels_b)) - 1 <= max_depth:
        return None
    depth = min(max_depth, max(len(levels_a), len(levels_b)) - 1)
    while depth > 0 and (sum(levels_a[:depth + 1]) > hard_cap or sum(levels_b[:depth + 1]) > hard_cap):
        depth -= 1
    return depth


def _unit_cost(a: str, b: str) -> int:
    return 0 if a == b else 1


def tree_edit_distance(a: DomNode, b: DomNode) -> int:
    """Exact unit-cost tree edit distance between the element tag trees below a and b."""
    tree_a, _ = _tag_tree(a)
    tree_b, _ = _tag_tree(b)
    return _zss_distance(tree_a, tree_b)


def _zss_distance(tree_a: zss.Node, tree_b: zss.Node) -> int:
    distance = zss.simple_distance(
        tree_a, tree_b,
        get_children=zss.Node.get_children,
        get_label=zss.Node.get_label,
        label_dist=_unit_cost,
    )
    return int(round(distance))


def top_down_distance(tree_a: zss.Node, tree_b: zss.Node) -> int:
    """
    Edit distance restricted to mappings that keep parents matched with parents.

    Children are aligned as sequences where matching two subtrees costs their own top-down distance
    and inserting or deleting costs the subtree size. Every such mapping is a valid edit script, so the
    result is an upper bound on the exact distance.
    """
    sizes: Dict[int, int] = {}

    def size(node: zss.Node) -> int:
        key = id(node)
        if key not in sizes:
            total, stack = 0, [node]
            while stack:
                current = stack.pop()
                total += 1
                stack.extend(current.children)
            sizes[key] = total
        return sizes[key]

    memo: Dict[Tuple[int, int], int] = {}

    def distance(x: zss.Node, y: zss.Node) -> int:
        key = (id(x), id(y))
        if key in memo:
            return memo[key]
        xs, ys = x.children, y.children
        # Sequence alignment over the two child lists
        previous = [0]
        for child in ys:
            previous.append(previous[-1] + size(child))
        for cx in xs:
            current = [previous[0] + size(cx)]
            for j, cy in enumerate(ys, 1):
                current.append(min(
                    previous[j] + size(cx),
                    current[j - 1] + size(cy),
                    previous[j - 1] + distance(cx, cy),
                ))
            previous = current
        memo[key] = _unit_cost(x.label, y.label) + previous[-1]
        return memo[key]

    return distance(tree_a, tree_b)


def tag_tree_similarity(a: DomNode, b: DomNode, exact_cap: int = DEFAULT_EXACT_CAP,
                        hard_cap: int = DEFAULT_HARD_CAP, max_depth: int = DEFAULT_MAX_DEPTH) -> Tuple[float, str, bool]:
    """
    Similarity of two element tag trees: max(0, 1 - TED / max(|a|, |b|)).

    Returns:
        (similarity, method, truncated) where method is "exact" or "top-down"
    """
    cut = _truncation_depth(a, b, hard_cap, max_depth)
    tree_a, size_a = _tag_tree(a, cut)
    tree_b, size_b = _tag_tree(b, cut)
    if cut is not None:
        logger.warning(f"Tag trees truncated at depth {cut} for similarity ({size_a} vs {size_b} nodes)")
    if size_a <= exact_cap and size_b <= exact_cap:
        distance, method = _zss_distance(tree_a, tree_b), "exact"
    else:
        distance, method = top_down_distance(tree_a, tree_b), "top-down"
    similarity = max(0.0, 1.0 - distance / max(size_a, size_b))
    return similarity, method, cut is not None


def structural_similarity(a: DomTree, b: DomTree, **caps) -> float:
    """Tag-structure similarity of two documents in [0, 1]; attributes and text are ignored."""
    return tag_tree_similarity(a.root, b.root, **caps)[0]


# --- Violation diffing ---

def new_violations(before: ScanReport, after: ScanReport) -> List[Violation]:
    """
    Violations of `after` not accounted for in `before`.

    Matching is on (rule id, tag sequence of the node path) with occurrence counting, so sibling
    index shifts do not count as new and a second copy of an old violation does.
    """
    remaining: Dict[Tuple[str, Tuple[str, ...]], int] = {}
    for violation in before.violations:
        key = (violation.rule_id, path_tags(violation.node_path))
        remaining[key] = remaining.get(key, 0) + 1
    introduced = []
    for violation in after.violations:
        key = (violation.rule_id, path_tags(violation.node_path))
        if remaining.get(key, 0) > 0:
            remaining[key] -= 1
        else:
            introduced.append(violation)
    return introduced


# --- Gates ---

def check_repair(original: DomTree, repaired_text: str, registry: Optional[RuleRegistry] = None,
                 threshold: float = DEFAULT_THRESHOLD, scan_before: Optional[ScanReport] = None,
                 hooks: Mapping[str, ValidationHook] = None, exact_cap: int = DEFAULT_EXACT_CAP,
                 hard_cap: int = DEFAULT_HARD_CAP, max_depth: int = DEFAULT_MAX_DEPTH,
                 document_id: str = "", clock: Callable = utc_now) -> Tuple[ValidationVerdict, Optional[ScanReport]]:
    """
    Run the gates in order parse, rescan, similarity, then any extra hooks.

    Args:
        original: The tree the repair started from
        repaired_text: Candidate HTML
        registry: Rule set used for both scans
        threshold: Minimum similarity for structure preservation
        scan_before: Existing scan of original (rescanned when omitted)
        hooks: Extra named gates, all of which must pass for acceptance

    Returns:
        (verdict, scan of the repaired document or None when the parse gate failed)
    """
    registry = registry or default_registry()
    hooks = hooks or {}
    before = scan_before if scan_before is not None else scan(original, registry, document_id, clock)
    v_before = before.violation_count

    if not parse_valid(repaired_text):
        logger.info(f"{document_id or 'document'}: repaired output failed the parse gate")
        verdict = ValidationVerdict(
            v_before=v_before, v_after=v_before, compliance_improved=False, fully_fixed=v_before == 0,
            parse_valid=False, structural_similarity=0.0, similarity_threshold=threshold,
            similarity_method="none", structure_preserved=False, short_circuited=True,
            failed_gates=[GATE_PARSE, GATE_COMPLIANCE, GATE_STRUCTURE], accepted=False,
        )
        return verdict, None

    repaired = parse_html(repaired_text)
    after = scan(repaired, registry, document_id, clock)
    v_after = after.violation_count
    similarity, method, truncated = tag_tree_similarity(original.root, repaired.root, exact_cap, hard_cap, max_depth)

    improved = v_after < v_before
    preserved = similarity >= threshold
    hook_results = {name: bool(hook(original, repaired, after)) for name, hook in hooks.items()}

    failed = []
    if not improved:
        failed.append(GATE_COMPLIANCE)
    if not preserved:
        failed.append(GATE_STRUCTURE)
    failed.extend(f"hook:{name}" for name, passed in hook_results.items() if not passed)

    verdict = ValidationVerdict(
        v_before=v_before,
        v_after=v_after,
        compliance_improved=improved,
        fully_fixed=v_after == 0,
        parse_valid=True,
        structural_similarity=similarity,
        similarity_threshold=threshold,
        similarity_method=method,
        similarity_truncated=truncated,
        structure_preserved=preserved,
        new_violations=new_violations(before, after),
        hook_results=hook_results,
        failed_gates=failed,
        accepted=not failed,
    )
    return verdict, after


def validate(original: DomTree, repaired_text: str, registry: Optional[RuleRegistry] = None, **options) -> ValidationVerdict:
    """Verdict for a candidate repair; failures are verdict states, never exceptions."""
    return check_repair(original, repaired_text, registry, **options)[0]


def validator_from_config(config: RunConfig, registry: Optional[RuleRegistry] = None,
                          hooks: Mapping[str, ValidationHook] = None, clock: Callable = utc_now):
    """check_repair with thresholds and caps bound from a run config."""
    return partial(
        check_repair,
        registry=registry or default_registry(),
        threshold=config.similarity_threshold,
        hooks=hooks,
        exact_cap=config.ted_exact_cap,
        hard_cap=config.ted_hard_cap,
        max_depth=config.ted_max_depth,
        clock=clock,
    )
