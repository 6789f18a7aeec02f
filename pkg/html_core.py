# html_core.py
# Lenient HTML parsing, cleaning, chunking and canonical serialization.
# Every other module works on the DomTree produced here.

import bisect
import logging
import re
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

from config import MAX_DOCUMENT_BYTES
from errors import ChunkBudgetError, SizeLimitError
from schemas import Chunk

logger = logging.getLogger(__name__)

TEXT = "#text"
COMMENT = "#comment"

MINOR = "minor"
MAJOR = "major"

VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link",
    "meta", "param", "source", "track", "wbr",
})
RAW_TEXT_ELEMENTS = frozenset({"script", "style"})
HEAD_ELEMENTS = frozenset({"title", "meta", "link", "style", "script", "base", "noscript", "template"})

# Opening one of these while a p is open closes the p
BLOCK_ELEMENTS = frozenset({
    "address", "article", "aside", "blockquote", "center", "details", "dialog", "dir", "div",
    "dl", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5",
    "h6", "header", "hgroup", "hr", "main", "menu", "nav", "ol", "pre", "section", "summary",
    "table", "ul", "li", "dd", "dt", "listing", "search",
})
P_SCOPE_BOUNDARY = frozenset({
    "applet", "caption", "html", "head", "body", "table", "td", "th", "marquee", "object",
    "template", "button",
})
LIST_SCOPE_BOUNDARY = frozenset({
    "ul", "ol", "menu", "dl", "html", "head", "body", "table", "td", "th", "caption", "template", "button",
})
TABLE_SCOPE_BOUNDARY = frozenset({"table", "html", "head", "body", "template"})
OPTIONAL_END_TAGS = frozenset({
    "li", "p", "dt", "dd", "option", "optgroup", "tr", "td", "th", "tbody", "thead", "tfoot",
    "rb", "rp", "rt", "rtc", "colgroup", "caption",
})

_TAG_NAME = re.compile(r"^[a-z][a-z0-9-]*$")
_ATTR_NAME = re.compile(r"^[a-z_:][-a-z0-9_:.]*$")

MIN_CHUNK_BUDGET = 8

TokenEstimator = Callable[[str], int]


class Recovery(NamedTuple):
    """One deterministic repair the tree builder made to malformed input."""

    kind: str
    severity: str
    path: str


class DomNode:
    """An element, text or comment node. Text and comment nodes use the tags '#text' / '#comment'."""

    __slots__ = ("tag", "attrs", "children", "text", "span", "parent", "index", "n_elements")

    def __init__(self, tag: str, attrs: Optional[Dict[str, str]] = None, text: str = ""):
        self.tag = tag
        self.attrs: Dict[str, str] = dict(attrs or {})
        self.children: List["DomNode"] = []
        self.text = text
        self.span: Optional[Tuple[int, int]] = None
        self.parent: Optional["DomNode"] = None
        # Element-only position among the parent's element children
        self.index = 0
        self.n_elements = 0

    @property
    def is_element(self) -> bool:
        return not self.tag.startswith("#")

    def element_children(self) -> List["DomNode"]:
        return [child for child in self.children if child.is_element]

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        return self.attrs.get(name, default)

    def append(self, child: "DomNode") -> "DomNode":
        """Attach child as the last child, merging adjacent text nodes."""
        if child.tag == TEXT and self.children and self.children[-1].tag == TEXT:
            self.children[-1].text += child.text
            return self.children[-1]
        child.parent = self
        if child.is_element:
            child.index = self.n_elements
            self.n_elements += 1
        self.children.append(child)
        return child

    def ancestors(self) -> Iterator["DomNode"]:
        node = self.parent
        while node is not None:
            yield node
            node = node.parent

    def iter_descendants(self) -> Iterator["DomNode"]:
        """Pre-order walk of everything below this node."""
        stack = list(reversed(self.children))
        while stack:
            node = stack.pop()
            yield node
            if node.children:
                stack.extend(reversed(node.children))

    def __repr__(self):
        if self.is_element:
            return f"DomNode({self.tag!r}, {self.attrs!r})"
        return f"DomNode({self.tag!r}, {self.text[:20]!r})"


def node_path(node: DomNode) -> str:
    """Root-to-node locator, e.g. '/0:html/1:body/2:div'."""
    parts = []
    current: Optional[DomNode] = node
    while current is not None:
        parts.append(f"{current.index}:{current.tag}")
        current = current.parent
    return "/" + "/".join(reversed(parts))


def path_tags(path: str) -> Tuple[str, ...]:
    """The tag sequence of a node path; stable under sibling index shifts."""
    return tuple(step.split(":", 1)[1] for step in path.strip("/").split("/") if ":" in step)


class DomTree:
    """A parsed document: the html root plus what the builder had to repair."""

    def __init__(self, root: DomNode, doctype: Optional[str] = None,
                 recoveries: Tuple[Recovery, ...] = (), source_bytes: int = 0):
        self.root = root
        self.doctype = doctype
        self.recoveries = tuple(recoveries)
        self.source_bytes = source_bytes

    @property
    def head(self) -> Optional[DomNode]:
        return next((c for c in self.root.children if c.tag == "head"), None)

    @property
    def body(self) -> Optional[DomNode]:
        return next((c for c in self.root.children if c.tag == "body"), None)

    def elements(self) -> List[DomNode]:
        """All element nodes in document order, root first."""
        return [self.root] + [n for n in self.root.iter_descendants() if n.is_element]

    def node_count(self) -> int:
        return len(self.elements())

    def resolve(self, path: str) -> Optional[DomNode]:
        steps = path.strip("/").split("/")
        if not steps or steps[0] != f"0:{self.root.tag}":
            return None
        node = self.root
        for step in steps[1:]:
            try:
                index_text, tag = step.split(":", 1)
                child = node.element_children()[int(index_text)]
            except (ValueError, IndexError):
                return None
            if child.tag != tag:
                return None
            node = child
        return node

    def major_recoveries(self) -> List[Recovery]:
        return [r for r in self.recoveries if r.severity == MAJOR]


# --- Parsing ---

class _SpanIndex:
    """Maps HTMLParser (line, column) positions to UTF-8 byte offsets."""

    def __init__(self, text: str):
        self.text = text
        self.ascii = text.isascii()
        self.line_starts = [0]
        for match in re.finditer("\n", text):
            self.line_starts.append(match.end())
        if not self.ascii:
            self.line_byte_starts = [0]
            for i in range(1, len(self.line_starts)):
                segment = text[self.line_starts[i - 1]:self.line_starts[i]]
                self.line_byte_starts.append(self.line_byte_starts[-1] + len(segment.encode("utf-8", errors="replace")))

    def char_offset(self, line: int, column: int) -> int:
        return self.line_starts[line - 1] + column

    def byte_offset(self, char_offset: int) -> int:
        if self.ascii:
            return char_offset
        line = bisect.bisect_right(self.line_starts, char_offset) - 1
        start = self.line_starts[line]
        return self.line_byte_starts[line] + len(self.text[start:char_offset].encode("utf-8", errors="replace"))


class _TreeBuilder(HTMLParser):
    """Builds a DomTree from html.parser tokens with a fixed recovery policy."""

    def __init__(self, text: str):
        super().__init__(convert_charrefs=True)
        self.source = text
        self.spans = _SpanIndex(text)
        self.html = DomNode("html")
        self.head: Optional[DomNode] = None
        self.body: Optional[DomNode] = None
        self.stack: List[DomNode] = [self.html]
        self.doctype: Optional[str] = None
        self.recoveries: List[Recovery] = []
        self._html_explicit = False

    # Helpers
    def _record(self, kind: str, severity: str, node: Optional[DomNode] = None):
        path = node_path(node if node is not None else self.stack[-1])
        self.recoveries.append(Recovery(kind, severity, path))
        logger.debug(f"Recovery {kind} ({severity}) at {path}")

    def _position(self) -> int:
        line, column = self.getpos()
        return self.spans.char_offset(line, column)

    def _byte(self, char_offset: int) -> int:
        return self.spans.byte_offset(min(char_offset, len(self.source)))

    def _close(self, node: DomNode, end_char: int):
        start = node.span[0] if node.span else self._byte(end_char)
        node.span = (start, max(start, self._byte(end_char)))

    def _pop_implied(self, end_char: int):
        node = self.stack.pop()
        self._record("implied-end", MINOR, node)
        self._close(node, end_char)

    def _find_open(self, tag: str, boundary: frozenset) -> Optional[int]:
        for i in range(len(self.stack) - 1, 0, -1):
            node = self.stack[i]
            if node.tag == tag:
                return i
            if node.tag in boundary:
                return None
        return None

    def _ensure_head(self) -> DomNode:
        if self.head is None:
            self.head = self.html.append(DomNode("head"))
            self._record("implied-head", MINOR, self.head)
        if self.head not in self.stack:
            self._unwind_to_html()
            self.stack.append(self.head)
        return self.head

    def _ensure_body(self) -> DomNode:
        if self.body is None:
            self._unwind_to_html()
            if self.head is None:
                self.head = self.html.append(DomNode("head"))
                self._record("implied-head", MINOR, self.head)
            self.body = self.html.append(DomNode("body"))
            self.body.span = (self._byte(self._position()), self._byte(self._position()))
            self._record("implied-body", MINOR, self.body)
            self.stack.append(self.body)
        return self.body

    def _unwind_to_html(self):
        end = self._position()
        while len(self.stack) > 1:
            node = self.stack.pop()
            if node.tag != "head":
                self._record("implied-end", MINOR, node)
            self._close(node, end)

    def _clean_attrs(self, attrs) -> Dict[str, str]:
        cleaned: Dict[str, str] = {}
        for name, value in attrs:
            name = (name or "").lower()
            if not _ATTR_NAME.match(name):
                self._record("invalid-attribute-name", MINOR)
                continue
            # First occurrence wins
            cleaned.setdefault(name, value if value is not None else "")
        return cleaned

    # HTMLParser callbacks
    def handle_decl(self, decl: str):
        if decl.lower().startswith("doctype") and self.doctype is None:
            self.doctype = decl

    def handle_starttag(self, tag, attrs):
        self._start(tag, attrs, self_closing=False)

    def handle_startendtag(self, tag, attrs):
        self._start(tag, attrs, self_closing=True)

    def _start(self, tag: str, attrs, self_closing: bool):
        tag = tag.lower()
        if not _TAG_NAME.match(tag):
            self._record("invalid-tag-name", MINOR)
            return
        attrs = self._clean_attrs(attrs)
        start = self._position()
        tag_text = self.get_starttag_text() or ""
        tag_end = start + len(tag_text)

        if tag == "html":
            if self._html_explicit or self.html.children:
                self._record("duplicate-html", MINOR, self.html)
            self._html_explicit = True
            for name, value in attrs.items():
                self.html.attrs.setdefault(name, value)
            if self.html.span is None:
                self.html.span = (self._byte(start), self._byte(start))
            return
        if tag == "head":
            if self.head is None and self.body is None:
                self._unwind_to_html()
                self.head = self.html.append(DomNode("head", attrs))
                self.head.span = (self._byte(start), self._byte(start))
                if not self_closing:
                    self.stack.append(self.head)
            else:
                self._record("duplicate-head", MINOR)
            return
        if tag == "body":
            if self.body is None:
                self._unwind_to_html()
                if self.head is None:
                    self.head = self.html.append(DomNode("head"))
                    self._record("implied-head", MINOR, self.head)
                self.body = self.html.append(DomNode("body", attrs))
                self.body.span = (self._byte(start), self._byte(start))
                self.stack.append(self.body)
            else:
                self._record("duplicate-body", MINOR, self.body)
                for name, value in attrs.items():
                    self.body.attrs.setdefault(name, value)
            return

        if self.body is None:
            if tag in HEAD_ELEMENTS and (self.stack[-1] is self.html or self.stack[-1] is self.head):
                self._ensure_head()
            else:
                self._ensure_body()
        self._implied_closes(tag, start)

        node = self.stack[-1].append(DomNode(tag, attrs))
        node.span = (self._byte(start), self._byte(tag_end))
        if tag not in VOID_ELEMENTS and not self_closing:
            self.stack.append(node)

    def _implied_closes(self, tag: str, start: int):
        if tag == "li":
            self._close_optional(("li",), LIST_SCOPE_BOUNDARY, start)
        elif tag in ("dt", "dd"):
            self._close_optional(("dt", "dd"), LIST_SCOPE_BOUNDARY, start)
        elif tag in ("option", "optgroup"):
            if self.stack[-1].tag == "option":
                self._pop_implied(start)
            if tag == "optgroup" and self.stack[-1].tag == "optgroup":
                self._pop_implied(start)
        elif tag == "tr":
            self._close_optional(("tr",), TABLE_SCOPE_BOUNDARY | {"tbody", "thead", "tfoot"}, start)
        elif tag in ("td", "th"):
            self._close_optional(("td", "th"), TABLE_SCOPE_BOUNDARY | {"tr"}, start)
        elif tag in ("tbody", "thead", "tfoot"):
            self._close_optional(("tbody", "thead", "tfoot"), TABLE_SCOPE_BOUNDARY, start)

        if tag in BLOCK_ELEMENTS or tag == "p":
            index = self._find_open("p", P_SCOPE_BOUNDARY)
            if index is not None:
                p_node = self.stack[index]
                if tag == "p":
                    self._record("implied-end", MINOR, p_node)
                else:
                    self._record("misnested-block", MAJOR, p_node)
                while len(self.stack) > index:
                    self._close(self.stack.pop(), start)

    def _close_optional(self, tags: Tuple[str, ...], boundary: frozenset, start: int):
        for i in range(len(self.stack) - 1, 0, -1):
            node = self.stack[i]
            if node.tag in tags:
                self._record("implied-end", MINOR, node)
                while len(self.stack) > i:
                    self._close(self.stack.pop(), start)
                return
            if node.tag in boundary:
                return

    def handle_endtag(self, tag):
        tag = tag.lower()
        if not _TAG_NAME.match(tag):
            self._record("invalid-tag-name", MINOR)
            return
        start = self._position()
        close_at = self.source.find(">", start)
        end = len(self.source) if close_at < 0 else close_at + 1

        if tag in VOID_ELEMENTS:
            self._record("void-end-tag", MINOR)
            return
        if tag in ("html", "body"):
            if self.body is not None:
                index = self.stack.index(self.body)
                while len(self.stack) > index + 1:
                    node = self.stack.pop()
                    self._record("implied-end", MINOR, node)
                    self._close(node, start)
                self._close(self.body, end)
            self._close(self.html, end)
            return
        if tag == "head":
            if self.head is not None and self.head in self.stack:
                index = self.stack.index(self.head)
                while len(self.stack) > index:
                    node = self.stack.pop()
                    if node is not self.head:
                        self._record("implied-end", MINOR, node)
                    self._close(node, end)
            else:
                self._record("stray-end-tag", MINOR)
            return

        boundary = 0
        for marker in (self.body, self.head):
            if marker is not None and marker in self.stack:
                boundary = self.stack.index(marker)
                break
        for i in range(len(self.stack) - 1, boundary, -1):
            if self.stack[i].tag == tag:
                target = self.stack[i]
                while len(self.stack) > i + 1:
                    node = self.stack.pop()
                    if node.tag in OPTIONAL_END_TAGS:
                        self._record("implied-end", MINOR, node)
                    else:
                        self._record("misnested-end-tag", MAJOR, node)
                    self._close(node, start)
                self.stack.pop()
                self._close(target, end)
                return
        self._record("stray-end-tag", MAJOR)

    def handle_data(self, data: str):
        if not data:
            return
        top = self.stack[-1]
        if self.body is None and (top is self.html or top is self.head):
            if not data.strip():
                if top is self.head:
                    top.append(DomNode(TEXT, text=data))
                return
            self._ensure_body()
        self.stack[-1].append(DomNode(TEXT, text=data))

    def handle_comment(self, data: str):
        self.stack[-1].append(DomNode(COMMENT, text=data))

    def finish(self) -> DomTree:
        end = len(self.source)
        if self.body is None:
            self._ensure_body()
        while len(self.stack) > 2:
            node = self.stack.pop()
            self._record("unclosed-at-end", MINOR, node)
            self._close(node, end)
        for node in (self.head, self.body, self.html):
            if node is not None:
                if node.span is None:
                    node.span = (0, 0)
                if node.span[1] == node.span[0] or node is self.html:
                    self._close(node, end)
        if not self._html_explicit:
            self.recoveries.insert(0, Recovery("implied-html", MINOR, "/0:html"))
        return DomTree(self.html, self.doctype, tuple(self.recoveries), len(self.source.encode("utf-8", errors="replace")))


def _decode(source: Union[str, bytes]) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8", errors="replace")
    return source


def parse_html(source: Union[str, bytes], max_bytes: Optional[int] = None) -> DomTree:
    """
    Parse arbitrary text into a DomTree. Malformed markup never raises; recoveries are recorded.

    Args:
        source: HTML text, or raw bytes decoded as UTF-8 with replacement
        max_bytes: Size limit in UTF-8 bytes (defaults to MAX_DOCUMENT_BYTES)

    Returns:
        DomTree: The parsed tree, always holding html, head and body

    Raises:
        SizeLimitError: When the document exceeds the size limit
    """
    limit = MAX_DOCUMENT_BYTES if max_bytes is None else max_bytes
    size = len(source) if isinstance(source, bytes) else len(source.encode("utf-8", errors="replace"))
    if size > limit:
        raise SizeLimitError(f"Document is {size} bytes, above the {limit} byte limit")
    text = _decode(source)

    builder = _TreeBuilder(text)
    try:
        builder.feed(text)
        builder.close()
    except Exception as e:
        # html.parser gives up on a few pathological declarations; keep what was built
        logger.warning(f"Tokenizer stopped early: {e}")
        builder.recoveries.append(Recovery("tokenizer-error", MAJOR, node_path(builder.stack[-1])))
    return builder.finish()


def parse_file(path: Path, max_bytes: Optional[int] = None) -> DomTree:
    return parse_html(Path(path).read_bytes(), max_bytes=max_bytes)


def parse_valid(text: str) -> bool:
    """True iff the text is non-blank and parsing needed no major (misnesting) repairs."""
    if not text or not text.strip():
        return False
    try:
        tree = parse_html(text)
    except SizeLimitError:
        return False
    return not tree.major_recoveries()


# --- Cleaning ---

def clean(doc: DomTree) -> DomTree:
    """
    Return a copy of the tree without script and style subtrees. The input is not mutated.

    Recovery paths are rewritten to the copy's element indices; recoveries located inside a
    removed subtree are dropped.
    """
    root = DomNode(doc.root.tag, doc.root.attrs)
    root.span = doc.root.span
    copies: Dict[int, DomNode] = {id(doc.root): root}
    stack: List[Tuple[DomNode, DomNode]] = [(doc.root, root)]
    while stack:
        source, target = stack.pop()
        for child in source.children:
            if child.tag in RAW_TEXT_ELEMENTS:
                continue
            copy = DomNode(child.tag, child.attrs, child.text)
            copy.span = child.span
            target.append(copy)
            copies[id(child)] = copy
            if child.children:
                stack.append((child, copy))

    recoveries: List[Recovery] = []
    for recovery in doc.recoveries:
        original = doc.resolve(recovery.path)
        if original is None:
            recoveries.append(recovery)
        elif id(original) in copies:
            recoveries.append(recovery._replace(path=node_path(copies[id(original)])))
    return DomTree(root, doc.doctype, recoveries, doc.source_bytes)


# --- Serialization ---

def _escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(value: str) -> str:
    return value.replace("&", "&amp;").replace('"', "&quot;")


def start_tag(node: DomNode) -> str:
    attrs = "".join(f' {name}="{_escape_attr(node.attrs[name])}"' for name in sorted(node.attrs))
    return f"<{node.tag}{attrs}>"


def end_tag(node: DomNode) -> str:
    return "" if node.tag in VOID_ELEMENTS else f"</{node.tag}>"


def serialize_node(node: DomNode) -> str:
    """Canonical HTML for one node and its subtree."""
    out: List[str] = []
    stack: List[Tuple[DomNode, bool]] = [(node, False)]
    while stack:
        current, closing = stack.pop()
        if closing:
            out.append(f"</{current.tag}>")
        elif current.tag == TEXT:
            raw = current.parent is not None and current.parent.tag in RAW_TEXT_ELEMENTS
            out.append(current.text if raw else _escape_text(current.text))
        elif current.tag == COMMENT:
            out.append(f"<!--{current.text}-->")
        else:
            out.append(start_tag(current))
            if current.tag in VOID_ELEMENTS:
                continue
            stack.append((current, True))
            stack.extend((child, False) for child in reversed(current.children))
    return "".join(out)


def doctype_prefix(doc: DomTree) -> str:
    return "<!DOCTYPE html>" if doc.doctype else ""


def serialize(doc: DomTree) -> str:
    """Deterministic canonical HTML: sorted attributes, explicit end tags, escaped text."""
    return doctype_prefix(doc) + serialize_node(doc.root)


def tag_signature(doc: DomTree) -> List[Tuple[int, str]]:
    """Pre-order (depth, tag) list of elements; equal signatures mean tag-structure-identical trees."""
    signature: List[Tuple[int, str]] = []
    stack: List[Tuple[DomNode, int]] = [(doc.root, 0)]
    while stack:
        node, depth = stack.pop()
        signature.append((depth, node.tag))
        stack.extend((child, depth + 1) for child in reversed(node.children) if child.is_element)
    return signature


def text_content(node: DomNode) -> str:
    """Concatenated text below node, skipping script and style."""
    parts: List[str] = []
    stack = [node]
    while stack:
        current = stack.pop()
        if current.tag == TEXT:
            parts.append(current.text)
        elif current.is_element and current.tag not in RAW_TEXT_ELEMENTS:
            stack.extend(reversed(current.children))
    return "".join(parts)


# --- Tokens and chunking ---

def estimate_tokens(text: str) -> int:
    """ceil(characters / 4); subadditive, so chunk packing can sum piece estimates."""
    return (len(text) + 3) // 4


class _Piece(NamedTuple):
    text: str
    paths: Tuple[str, ...]
    opens: Optional[str]


def _subtree_paths(node: DomNode) -> Tuple[str, ...]:
    if not node.is_element:
        return ()
    paths: List[str] = []
    stack: List[Tuple[DomNode, str]] = [(node, node_path(node))]
    while stack:
        current, path = stack.pop()
        paths.append(path)
        stack.extend(
            (child, f"{path}/{child.index}:{child.tag}")
            for child in reversed(current.children) if child.is_element
        )
    return tuple(paths)


def _linearize(doc: DomTree, budget: int, estimator: TokenEstimator) -> List[_Piece]:
    pieces: List[_Piece] = []
    prefix = doctype_prefix(doc)
    if prefix:
        pieces.append(_Piece(prefix, (), None))
    stack: List[Tuple[DomNode, bool]] = [(doc.root, False)]
    while stack:
        node, closing = stack.pop()
        if closing:
            pieces.append(_Piece(end_tag(node), (), None))
            continue
        if not node.is_element:
            pieces.append(_Piece(serialize_node(node), (), None))
            continue
        whole = None
        split = node.tag in ("html", "body")
        if not split and node.tag not in VOID_ELEMENTS and node.n_elements > 0:
            whole = serialize_node(node)
            split = estimator(whole) > budget
        if split:
            path = node_path(node)
            pieces.append(_Piece(start_tag(node), (path,), path))
            stack.append((node, True))
            stack.extend((child, False) for child in reversed(node.children))
        else:
            text = whole if whole is not None else serialize_node(node)
            pieces.append(_Piece(text, _subtree_paths(node), None))
    return pieces


def chunk(doc: DomTree, budget: int, estimator: TokenEstimator = estimate_tokens) -> List[Chunk]:
    """
    Split a document into chunks on element boundaries.

    Top-level body children are packed greedily; an element is opened up only when it alone
    exceeds the budget. An atomic piece above budget becomes its own chunk flagged over_budget.
    Concatenating chunk contents in index order reproduces serialize(doc).

    Args:
        doc: A (cleaned) DomTree
        budget: Maximum token estimate per chunk
        estimator: Token estimator; must be subadditive

    Returns:
        List[Chunk]: Chunks in document order

    Raises:
        ChunkBudgetError: When budget is below MIN_CHUNK_BUDGET
    """
    if budget < MIN_CHUNK_BUDGET:
        raise ChunkBudgetError(f"Chunk budget {budget} is below the minimum of {MIN_CHUNK_BUDGET} tokens")

    chunks: List[Chunk] = []
    parts: List[str] = []
    paths: List[str] = []
    tokens = 0

    def flush(over_budget: bool = False):
        nonlocal parts, paths, tokens
        if not parts:
            return
        content = "".join(parts)
        chunks.append(Chunk(
            index=len(chunks),
            content=content,
            token_estimate=estimator(content),
            node_paths=list(paths),
            start_path=paths[0] if paths else None,
            end_path=paths[-1] if paths else None,
            over_budget=over_budget,
        ))
        parts, paths, tokens = [], [], 0

    for piece in _linearize(doc, budget, estimator):
        cost = estimator(piece.text)
        if cost > budget:
            flush()
            parts, paths = [piece.text], list(piece.paths)
            flush(over_budget=True)
            continue
        if tokens + cost > budget:
            flush()
        parts.append(piece.text)
        paths.extend(piece.paths)
        tokens += cost
    flush()
    logger.debug(f"Chunked document into {len(chunks)} chunks at budget {budget}")
    return chunks


def reassemble(chunks: List[Chunk]) -> str:
    return "".join(c.content for c in sorted(chunks, key=lambda c: c.index))
