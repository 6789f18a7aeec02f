"""Tests for parsing, serialization and chunking."""

import random

import pytest

from errors import ChunkBudgetError, SizeLimitError
from html_core import (
    MAJOR,
    MINOR,
    chunk,
    clean,
    estimate_tokens,
    node_path,
    parse_html,
    parse_valid,
    path_tags,
    reassemble,
    serialize,
    tag_signature,
    text_content,
)


def kinds(tree):
    return [(r.kind, r.severity) for r in tree.recoveries]


def test_implied_wrappers_are_recorded():
    tree = parse_html("<p>hello</p>")

    assert tree.root.tag == "html"
    assert tree.head is not None
    assert [n.tag for n in tree.body.element_children()] == ["p"]
    assert ("implied-html", MINOR) in kinds(tree)
    assert ("implied-body", MINOR) in kinds(tree)
    assert not tree.major_recoveries()


def test_node_paths_use_element_indexes():
    tree = parse_html("<html><body><div></div><!-- c -->text<img src='a.png'></body></html>")
    img = tree.body.element_children()[1]

    assert node_path(img) == "/0:html/1:body/1:img"
    assert tree.resolve("/0:html/1:body/1:img") is img
    assert tree.resolve("/0:html/1:body/1:div") is None
    assert path_tags("/0:html/1:body/1:img") == ("html", "body", "img")


def test_optional_end_tags_are_minor():
    tree = parse_html("<ul><li>one<li>two</ul>")

    items = tree.body.element_children()[0].element_children()
    assert [n.tag for n in items] == ["li", "li"]
    assert ("implied-end", MINOR) in kinds(tree)
    assert parse_valid("<ul><li>one<li>two</ul>")


def test_block_inside_paragraph_is_major():
    tree = parse_html("<p>intro<div>block</div></p>")

    assert ("misnested-block", MAJOR) in kinds(tree)
    assert ("stray-end-tag", MAJOR) in kinds(tree)
    assert [n.tag for n in tree.body.element_children()] == ["p", "div"]
    assert not parse_valid("<p>intro<div>block</div></p>")


def test_misnested_end_tag_is_major():
    tree = parse_html("<div><span>x</div>")

    assert ("misnested-end-tag", MAJOR) in kinds(tree)
    assert not parse_valid("<div><span>x</div>")


def test_unclosed_elements_at_end_are_minor():
    tree = parse_html("<div><span>x")

    assert ("unclosed-at-end", MINOR) in kinds(tree)
    assert parse_valid("<div><span>x")


def test_parse_valid_rejects_blank_text():
    assert not parse_valid("")
    assert not parse_valid("   \n")
    assert parse_valid("<main><p>ok</p></main>")


def test_self_closing_non_void_closes_immediately():
    tree = parse_html("<div/><p>after</p>")

    assert [n.tag for n in tree.body.element_children()] == ["div", "p"]


def test_head_elements_go_to_head():
    tree = parse_html("<title>T</title><meta charset='utf-8'><p>body</p>")

    assert [n.tag for n in tree.head.element_children()] == ["title", "meta"]
    assert [n.tag for n in tree.body.element_children()] == ["p"]


def test_serialize_is_canonical():
    tree = parse_html('<div b="2" a="1">x &amp; y<img src="a.png"><br></div>')

    assert serialize(tree) == (
        '<html><head></head><body><div a="1" b="2">x &amp; y<img src="a.png"><br></div></body></html>'
    )


def test_serialize_keeps_doctype_and_raw_text():
    tree = parse_html("<!DOCTYPE html><script>if (a < b) {}</script><p title='say \"hi\"'>x</p>")
    html = serialize(tree)

    assert html.startswith("<!DOCTYPE html><html>")
    assert "<script>if (a < b) {}</script>" in html
    assert 'title="say &quot;hi&quot;"' in html


def test_clean_drops_script_and_style_without_mutating():
    tree = parse_html("<style>p{color:red}</style><p>text</p><script>x()</script>")
    cleaned = clean(tree)

    assert "script" not in serialize(cleaned)
    assert "style" not in serialize(cleaned)
    assert "<script>" in serialize(tree)
    assert text_content(cleaned.root) == "text"


def test_size_limit():
    with pytest.raises(SizeLimitError):
        parse_html("<p>" + "x" * 100 + "</p>", max_bytes=50)


def test_invalid_utf8_is_replaced():
    tree = parse_html(b"<p>caf\xff</p>")

    assert "�" in text_content(tree.body)


def test_spans_are_utf8_byte_offsets():
    tree = parse_html("<p>é</p><img>")
    img = tree.body.element_children()[1]

    assert img.span == (9, 14)


def test_estimate_tokens_is_subadditive():
    rng = random.Random(7)
    for _ in range(200):
        a = "x" * rng.randint(0, 50)
        b = "y" * rng.randint(0, 50)
        assert estimate_tokens(a + b) <= estimate_tokens(a) + estimate_tokens(b)


def test_chunk_budget_minimum():
    with pytest.raises(ChunkBudgetError):
        chunk(parse_html("<p>x</p>"), 7)


def test_chunks_reassemble_and_respect_budget():
    body = "".join(f"<section><h2>Part {i}</h2><p>{'word ' * 12}</p></section>" for i in range(12))
    tree = parse_html(f"<!DOCTYPE html><html><head><title>T</title></head><body>{body}</body></html>")
    chunks = chunk(tree, 40)

    assert len(chunks) > 1
    assert reassemble(chunks) == serialize(tree)
    assert [c.index for c in chunks] == list(range(len(chunks)))
    for piece in chunks:
        assert piece.over_budget or piece.token_estimate <= 40
    # The html and body wrappers belong to the first chunk
    assert "/0:html" in chunks[0].node_paths
    assert "/0:html/1:body" in chunks[0].node_paths


def test_atomic_piece_over_budget_gets_own_chunk():
    tree = parse_html("<p>short</p><p>" + "x" * 400 + "</p><p>tail</p>")
    chunks = chunk(tree, 20)

    flagged = [c for c in chunks if c.over_budget]
    assert len(flagged) == 1
    assert flagged[0].content == "<p>" + "x" * 400 + "</p>"
    assert reassemble(chunks) == serialize(tree)


# --- Fuzz corpus ---

FUZZ_TAGS = [
    "div", "p", "span", "a", "b", "em", "ul", "ol", "li", "table", "tr", "td", "th", "h1", "h2", "section",
    "main", "nav", "img", "br", "input", "button", "label", "form", "select", "option", "dl", "dt", "dd",
    "title", "meta", "head", "body", "html",
]
FUZZ_ATTRS = ["id", "class", "href", "alt", "role", "aria-label", "style", "data-x"]
FUZZ_VALUES = ["a", "main nav", "1", "", "x&y", "red; color: blue"]
FUZZ_TEXT = ["hello", "  ", "a < b", "fish & chips", "\n", "café", "&lt;tag&gt;"]
FUZZ_JUNK = ["<", "&amp", "</>", "<!-- note -->", ">", "<<", "<script>var x = 1;</script>",
             "<style>p { color: red; }</style>"]


def random_document(rng: random.Random) -> str:
    parts = ["<!DOCTYPE html>"] if rng.random() < 0.5 else []
    for _ in range(rng.randint(0, 40)):
        roll = rng.random()
        tag = rng.choice(FUZZ_TAGS)
        if roll < 0.4:
            attrs = "".join(f' {rng.choice(FUZZ_ATTRS)}="{rng.choice(FUZZ_VALUES)}"' for _ in range(rng.randint(0, 2)))
            parts.append(f"<{tag}{attrs}{'/' if rng.random() < 0.05 else ''}>")
        elif roll < 0.7:
            parts.append(f"</{tag}>")
        elif roll < 0.9:
            parts.append(rng.choice(FUZZ_TEXT))
        else:
            parts.append(rng.choice(FUZZ_JUNK))
    return "".join(parts)


def test_round_trip_keeps_tag_structure_on_fuzz_corpus():
    rng = random.Random(1234)
    for i in range(1000):
        source = random_document(rng)
        tree = parse_html(source)
        again = parse_html(serialize(tree))
        assert tag_signature(again) == tag_signature(tree), f"document {i}: {source!r}"


def test_chunking_reassembles_fuzz_corpus():
    rng = random.Random(99)
    for i in range(200):
        tree = parse_html(random_document(rng))
        budget = rng.randint(8, 120)
        assert reassemble(chunk(tree, budget)) == serialize(tree), f"document {i} at budget {budget}"
