# contrast.py
# CSS colour parsing and WCAG contrast computation over inline styles and flat stylesheets.

import math
import re
from typing import Dict, List, Optional, Tuple

from html_core import DomNode, DomTree

RGB = Tuple[int, int, int]

AA_NORMAL = 4.5
AA_LARGE = 3.0
LARGE_TEXT_PX = 24.0
LARGE_BOLD_TEXT_PX = 18.66

DEFAULT_FOREGROUND: RGB = (0, 0, 0)
DEFAULT_BACKGROUND: RGB = (255, 255, 255)

NAMED_COLORS: Dict[str, RGB] = {
    "black": (0, 0, 0), "white": (255, 255, 255), "red": (255, 0, 0), "green": (0, 128, 0),
    "blue": (0, 0, 255), "yellow": (255, 255, 0), "gray": (128, 128, 128), "grey": (128, 128, 128),
    "silver": (192, 192, 192), "maroon": (128, 0, 0), "navy": (0, 0, 128), "purple": (128, 0, 128),
    "teal": (0, 128, 128), "olive": (128, 128, 0), "lime": (0, 255, 0), "aqua": (0, 255, 255),
    "cyan": (0, 255, 255), "fuchsia": (255, 0, 255), "magenta": (255, 0, 255),
    "orange": (255, 165, 0), "lightgray": (211, 211, 211), "lightgrey": (211, 211, 211),
    "darkgray": (169, 169, 169), "darkgrey": (169, 169, 169), "whitesmoke": (245, 245, 245),
    "gainsboro": (220, 220, 220), "dimgray": (105, 105, 105), "dimgrey": (105, 105, 105),
}

_HEX = re.compile(r"^#([0-9a-f]{3,4}|[0-9a-f]{6}|[0-9a-f]{8})$")
_RGB_FUNC = re.compile(r"^rgba?\((.*)\)$")


class Unresolvable(Exception):
    """A colour or style that cannot be evaluated without rendering."""


# --- Colour math ---

def srgb_to_linear(channel: int) -> float:
    s = channel / 255.0
    return s / 12.92 if s <= 0.04045 else math.pow((s + 0.055) / 1.055, 2.4)


def relative_luminance(rgb: RGB) -> float:
    r, g, b = rgb
    return 0.2126 * srgb_to_linear(r) + 0.7152 * srgb_to_linear(g) + 0.0722 * srgb_to_linear(b)


def contrast_ratio(first: RGB, second: RGB) -> float:
    """WCAG contrast ratio (L1 + 0.05) / (L2 + 0.05), symmetric, in [1, 21]."""
    l1 = relative_luminance(first)
    l2 = relative_luminance(second)
    return (max(l1, l2) + 0.05) / (min(l1, l2) + 0.05)


def _channel(token: str) -> int:
    token = token.strip()
    if token.endswith("%"):
        return round(max(0.0, min(100.0, float(token[:-1]))) * 2.55)
    return max(0, min(255, round(float(token))))


def parse_color(value: str) -> RGB:
    """
    Parse a static CSS colour.

    Raises:
        Unresolvable: For transparency, variables, functions we do not evaluate, or unknown names
    """
    value = value.strip().lower()
    if value in NAMED_COLORS:
        return NAMED_COLORS[value]
    match = _HEX.match(value)
    if match:
        digits = match.group(1)
        if len(digits) in (3, 4):
            digits = "".join(d * 2 for d in digits)
        if len(digits) == 8 and digits[6:] != "ff":
            raise Unresolvable(f"translucent colour {value}")
        return int(digits[0:2], 16), int(digits[2:4], 16), int(digits[4:6], 16)
    match = _RGB_FUNC.match(value)
    if match:
        parts = [p for p in re.split(r"[,\s/]+", match.group(1).strip()) if p]
        try:
            if len(parts) == 4:
                alpha = parts[3]
                alpha_value = float(alpha[:-1]) / 100 if alpha.endswith("%") else float(alpha)
                if alpha_value < 1:
                    raise Unresolvable(f"translucent colour {value}")
            if len(parts) in (3, 4):
                return _channel(parts[0]), _channel(parts[1]), _channel(parts[2])
        except ValueError as e:
            raise Unresolvable(f"bad colour {value}") from e
    raise Unresolvable(f"unsupported colour {value}")


def background_color(value: str) -> RGB:
    """The colour part of a background / background-color declaration."""
    lowered = value.lower()
    if "url(" in lowered or "gradient(" in lowered or "var(" in lowered:
        raise Unresolvable(f"background {value}")
    try:
        return parse_color(lowered)
    except Unresolvable:
        pass
    for token in re.findall(r"rgba?\([^)]*\)|#[0-9a-f]+|[a-z]+", lowered):
        try:
            return parse_color(token)
        except Unresolvable:
            continue
    raise Unresolvable(f"background {value}")


# --- Declarations and flat stylesheets ---

def parse_declarations(style: str) -> Dict[str, str]:
    declarations: Dict[str, str] = {}
    for part in style.split(";"):
        if ":" not in part:
            continue
        name, value = part.split(":", 1)
        name = name.strip().lower()
        value = value.replace("!important", "").strip()
        if name and value:
            declarations[name] = value
    return declarations


class StyleSheet:
    """Rules from embedded <style> elements whose selectors are a bare tag, #id or .class."""

    _SIMPLE = re.compile(r"^(#|\.)?([a-zA-Z][-a-zA-Z0-9_]*)$")

    def __init__(self):
        # (specificity, order, kind, name, declarations)
        self.rules: List[Tuple[int, int, str, str, Dict[str, str]]] = []
        self.ignored_selectors = 0

    @classmethod
    def from_tree(cls, doc: DomTree) -> "StyleSheet":
        sheet = cls()
        for node in doc.elements():
            if node.tag == "style":
                sheet.add(text_content_raw(node))
        return sheet

    def add(self, css: str):
        css = re.sub(r"/\*.*?\*/", "", css, flags=re.S)
        # Drop at-rule blocks (media queries and friends); only top-level rules are flat
        css = _strip_at_rules(css)
        for selector_text, body in re.findall(r"([^{}]+)\{([^{}]*)\}", css):
            declarations = parse_declarations(body)
            for selector in selector_text.split(","):
                match = self._SIMPLE.match(selector.strip())
                if not match:
                    self.ignored_selectors += 1
                    continue
                prefix, name = match.groups()
                if prefix == "#":
                    kind, specificity = "id", 100
                elif prefix == ".":
                    kind, specificity = "class", 10
                else:
                    kind, specificity, name = "tag", 1, name.lower()
                self.rules.append((specificity, len(self.rules), kind, name, declarations))

    def declarations_for(self, node: DomNode) -> Dict[str, str]:
        classes = set((node.get("class") or "").split())
        element_id = node.get("id")
        matched = []
        for specificity, order, kind, name, declarations in self.rules:
            if (kind == "tag" and name == node.tag) or (kind == "class" and name in classes) or (
                    kind == "id" and name == element_id):
                matched.append((specificity, order, declarations))
        merged: Dict[str, str] = {}
        for _, _, declarations in sorted(matched, key=lambda m: (m[0], m[1])):
            merged.update(declarations)
        return merged


def _strip_at_rules(css: str) -> str:
    out: List[str] = []
    i = 0
    while i < len(css):
        at = css.find("@", i)
        if at < 0:
            out.append(css[i:])
            break
        out.append(css[i:at])
        brace = css.find("{", at)
        semi = css.find(";", at)
        if brace < 0 or (0 <= semi < brace):
            i = len(css) if semi < 0 else semi + 1
            continue
        depth, j = 0, brace
        while j < len(css):
            if css[j] == "{":
                depth += 1
            elif css[j] == "}":
                depth -= 1
                if depth == 0:
                    break
            j += 1
        i = j + 1
    return "".join(out)


def text_content_raw(node: DomNode) -> str:
    return "".join(child.text for child in node.children if child.tag == "#text")


class StyleResolver:
    """Declared (not computed) styles per element: flat stylesheet first, inline style on top."""

    def __init__(self, doc: DomTree):
        self.sheet = StyleSheet.from_tree(doc)
        self._cache: Dict[int, Dict[str, str]] = {}

    def declared(self, node: DomNode) -> Dict[str, str]:
        key = id(node)
        if key not in self._cache:
            styles = self.sheet.declarations_for(node) if self.sheet.rules else {}
            inline = node.get("style")
            if inline:
                styles = {**styles, **parse_declarations(inline)}
            self._cache[key] = styles
        return self._cache[key]

    def nearest(self, node: DomNode, names: Tuple[str, ...]) -> Optional[Tuple[str, str]]:
        """The closest (self or ancestor) declaration among names, as (name, value)."""
        current: Optional[DomNode] = node
        while current is not None:
            styles = self.declared(current)
            for name in names:
                if name in styles:
                    return name, styles[name]
            current = current.parent
        return None


def font_size_px(value: str) -> Optional[float]:
    match = re.match(r"^\s*([0-9.]+)\s*(px|pt)\s*$", value.lower())
    if not match:
        return None
    size = float(match.group(1))
    return size * 4 / 3 if match.group(2) == "pt" else size


def is_large_text(resolver: StyleResolver, node: DomNode) -> bool:
    size_decl = resolver.nearest(node, ("font-size",))
    if size_decl is None:
        return False
    size = font_size_px(size_decl[1])
    if size is None:
        return False
    weight_decl = resolver.nearest(node, ("font-weight",))
    bold = node.tag in ("b", "strong", "h1", "h2", "h3", "h4", "h5", "h6")
    if weight_decl is not None:
        weight = weight_decl[1].strip().lower()
        bold = weight in ("bold", "bolder") or (weight.isdigit() and int(weight) >= 700)
    return size >= LARGE_TEXT_PX or (bold and size >= LARGE_BOLD_TEXT_PX)


def element_contrast(resolver: StyleResolver, node: DomNode) -> Optional[Tuple[float, float]]:
    """
    Contrast of an element's own text against its nearest declared background.

    Returns:
        (ratio, required threshold), or None when neither colour is declared anywhere up the tree

    Raises:
        Unresolvable: When a declared colour cannot be evaluated statically
    """
    fg_decl = resolver.nearest(node, ("color",))
    bg_decl = resolver.nearest(node, ("background-color", "background"))
    if fg_decl is None and bg_decl is None:
        return None
    fg = parse_color(fg_decl[1]) if fg_decl else DEFAULT_FOREGROUND
    bg = background_color(bg_decl[1]) if bg_decl else DEFAULT_BACKGROUND
    threshold = AA_LARGE if is_large_text(resolver, node) else AA_NORMAL
    return contrast_ratio(fg, bg), threshold


def has_own_text(node: DomNode) -> bool:
    return any(child.tag == "#text" and child.text.strip() for child in node.children)


