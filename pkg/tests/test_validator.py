"""Tests for the acceptance gates and tag-tree similarity."""

import random
from functools import lru_cache

import pytest

from conftest import make_page
from html_core import DomNode, parse_html, parse_valid
from rules import scan
from schemas import RunConfig
from validator import (
    GATE_COMPLIANCE,
    GATE_PARSE,
    GATE_STRUCTURE,
    check_repair,
    new_violations,
    structural_similarity,
    tag_tree_similarity,
    tree_edit_distance,
    validate,
    validator_from_config,
)


# --- Reference edit distance ---

def forest_size(forest) -> int:
    return sum(1 + forest_size(children) for _, children in forest)


@lru_cache(maxsize=None)
def forest_distance(f, g) -> int:
    """Unit-cost ordered forest edit distance by recursion on the rightmost roots."""
    if not f:
        return forest_size(g)
    if not g:
        return forest_size(f)
    (label_v, children_v), (label_w, children_w) = f[-1], g[-1]
    return min(
        forest_distance(f[:-1] + children_v, g) + 1,
        forest_distance(f, g[:-1] + children_w) + 1,
        forest_distance(children_v, children_w) + forest_distance(f[:-1], g[:-1]) + (label_v != label_w),
    )


def random_tree(rng: random.Random, max_nodes: int = 6):
    """The same random tree as a DomNode and as nested (label, children) tuples."""
    n = rng.randint(1, max_nodes)
    labels = [rng.choice("abc") for _ in range(n)]
    children = {i: [] for i in range(n)}
    for i in range(1, n):
        children[rng.randrange(i)].append(i)

    def dom(i):
        node = DomNode(labels[i])
        for c in children[i]:
            node.append(dom(c))
        return node

    def nested(i):
        return labels[i], tuple(nested(c) for c in children[i])

    return dom(0), nested(0)


def build(shape):
    """DomNode from (tag, [children...]) tuples."""
    tag, kids = shape
    node = DomNode(tag)
    for kid in kids:
        node.append(build(kid))
    return node


def test_exact_distance_matches_reference_on_small_trees():
    rng = random.Random(2024)
    for _ in range(500):
        dom_a, ref_a = random_tree(rng)
        dom_b, ref_b = random_tree(rng)
        expected = forest_distance((ref_a,), (ref_b,))

        assert tree_edit_distance(dom_a, dom_b) == expected
        similarity, method, truncated = tag_tree_similarity(dom_a, dom_b)
        assert method == "exact"
        assert not truncated
        size = max(forest_size((ref_a,)), forest_size((ref_b,)))
        assert similarity == max(0.0, 1.0 - expected / size)


def test_top_down_distance_never_underestimates():
    rng = random.Random(77)
    for _ in range(200):
        dom_a, _ = random_tree(rng, max_nodes=9)
        dom_b, _ = random_tree(rng, max_nodes=9)
        exact, _, _ = tag_tree_similarity(dom_a, dom_b)
        approx, method, _ = tag_tree_similarity(dom_a, dom_b, exact_cap=0)

        assert method == "top-down"
        assert approx <= exact + 1e-12


def test_single_node_relabel_is_zero():
    assert tag_tree_similarity(DomNode("div"), DomNode("span"))[0] == 0.0


def test_one_relabel_in_five_nodes():
    a = build(("div", [("p", []), ("p", []), ("ul", [("li", [])])]))
    b = build(("div", [("p", []), ("span", []), ("ul", [("li", [])])]))

    assert tag_tree_similarity(a, b)[0] == pytest.approx(0.8)
    assert tag_tree_similarity(a, b, exact_cap=0)[0] == pytest.approx(0.8)


def test_large_trees_are_truncated_by_depth():
    chain = ("div", [])
    for _ in range(9):
        chain = ("div", [chain])

    similarity, method, truncated = tag_tree_similarity(build(chain), build(chain), exact_cap=4, hard_cap=4)

    assert truncated
    assert method == "exact"
    assert similarity == 1.0


def test_identical_documents_are_fully_similar():
    html = make_page("<h1>T</h1><ul><li>a</li><li>b</li></ul>")

    assert structural_similarity(parse_html(html), parse_html(html)) == 1.0


# --- Gates ---

def test_good_repair_is_accepted(registry):
    original = parse_html(make_page('<img src="a.png">'))
    verdict, after = check_repair(original, make_page('<img src="a.png" alt="Logo">'), registry)

    assert verdict.accepted
    assert verdict.v_before == 1 and verdict.v_after == 0
    assert verdict.fully_fixed and verdict.compliance_improved and verdict.structure_preserved
    assert verdict.structural_similarity == 1.0
    assert verdict.failed_gates == []
    assert after.violation_count == 0


def test_parse_failure_short_circuits(registry):
    original = parse_html(make_page('<img src="a.png">'))
    verdict, after = check_repair(original, "<p>Intro<div>x</div></p>", registry)

    assert after is None
    assert not verdict.parse_valid
    assert verdict.short_circuited
    assert verdict.v_after == verdict.v_before == 1
    assert verdict.structural_similarity == 0.0
    assert verdict.similarity_method == "none"
    assert verdict.failed_gates == [GATE_PARSE, GATE_COMPLIANCE, GATE_STRUCTURE]
    assert not verdict.accepted


def test_empty_output_fails_parse_gate(registry):
    original = parse_html(make_page('<img src="a.png">'))

    assert not validate(original, "", registry).parse_valid


def test_structure_gate_uses_threshold(registry):
    original = parse_html(make_page('<img src="a.png">'))
    repaired = make_page('<img src="a.png" alt="Logo"><span>x</span>')

    loose = validator_from_config(RunConfig(), registry)(original, repaired)[0]
    strict = validator_from_config(RunConfig(similarity_threshold=0.9), registry)(original, repaired)[0]

    assert loose.structural_similarity == pytest.approx(1 - 1 / 7)
    assert loose.accepted
    assert not strict.accepted
    assert strict.failed_gates == [GATE_STRUCTURE]


def test_hooks_can_veto(registry):
    original = parse_html(make_page('<img src="a.png">'))
    repaired = make_page('<img src="a.png" alt="Logo">')
    verdict = validate(original, repaired, registry, hooks={"always-no": lambda o, r, s: False,
                                                            "always-yes": lambda o, r, s: True})

    assert verdict.hook_results == {"always-no": False, "always-yes": True}
    assert verdict.failed_gates == ["hook:always-no"]
    assert not verdict.accepted


def test_introduced_violations_are_listed(registry):
    original = parse_html(make_page('<img src="a.png">'))
    verdict = validate(original, make_page('<img src="a.png" alt="Logo"><button></button>'), registry)

    assert verdict.v_after == 1
    assert not verdict.compliance_improved
    assert [v.rule_id for v in verdict.new_violations] == ["button-name"]


def test_new_violations_ignore_index_shifts(registry):
    before = scan(parse_html(make_page('<img src="a.png">')), registry)
    after = scan(parse_html(make_page('<p>x</p><img src="a.png"><img src="b.png">')), registry)

    introduced = new_violations(before, after)

    assert len(introduced) == 1
    assert introduced[0].node_path.endswith("2:img")


# --- Gate conformance over random repairs ---

VIOLATING = ['<img src="a.png">', '<a href="/x"></a>', "<button></button>", "<h2></h2>",
             '<input type="text">', "<div><li>Orphan</li></div>"]
CLEAN = ['<img src="a.png" alt="Logo">', '<a href="/x">Home</a>', "<button>Save</button>", "<h2>About</h2>",
         "<p>Text</p>", "<ul><li>One</li></ul>"]
MALFORMED = ["<p>Intro<div>Block</div></p>", "<div><span>x</div>"]


def mutate(rng: random.Random, parts):
    parts = list(parts)
    for _ in range(rng.randint(0, 3)):
        op = rng.random()
        if op < 0.35 and parts:
            parts[rng.randrange(len(parts))] = rng.choice(VIOLATING + CLEAN)
        elif op < 0.6:
            parts.insert(rng.randint(0, len(parts)), rng.choice(VIOLATING + CLEAN))
        elif op < 0.8 and parts:
            parts.pop(rng.randrange(len(parts)))
        else:
            parts = ["<div>"] + parts + ["</div>"]
    roll = rng.random()
    if roll < 0.1:
        parts.append(rng.choice(MALFORMED))
    elif roll < 0.15:
        return "no markup at all"
    return make_page("".join(parts))


def test_acceptance_is_exactly_the_three_gates(registry):
    rng = random.Random(31337)
    for i in range(1000):
        parts = [rng.choice(VIOLATING + CLEAN) for _ in range(rng.randint(1, 6))]
        original_html = make_page("".join(parts))
        original = parse_html(original_html)
        before = scan(original, registry)
        repaired = mutate(rng, parts)

        verdict, after = check_repair(original, repaired, registry, scan_before=before)

        assert verdict.v_before == before.violation_count
        assert verdict.parse_valid == parse_valid(repaired)
        assert verdict.accepted == (verdict.parse_valid and verdict.compliance_improved
                                    and verdict.structure_preserved), f"pair {i}"
        assert verdict.accepted == (not verdict.failed_gates)
        if verdict.parse_valid:
            assert verdict.v_after == after.violation_count
            assert verdict.compliance_improved == (verdict.v_after < verdict.v_before)
            assert verdict.structure_preserved == (verdict.structural_similarity >= 0.85)
            assert verdict.fully_fixed == (verdict.v_after == 0)
        else:
            assert after is None
            assert verdict.short_circuited
            assert verdict.v_after == verdict.v_before
            assert verdict.structural_similarity == 0.0

        if before.violation_count > 0:
            assert not validate(original, original_html, registry, scan_before=before).accepted
