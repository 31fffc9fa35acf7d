"""MathML document model: parse, serialize, and locate formula islands.

The parser is a deliberately small recursive-descent XML subset: no DTDs,
no processing-instruction semantics, namespace prefixes stripped to local
names.  Host documents (XHTML/HTML) are never parsed as a whole; only the
``<math>`` islands inside them are held to strict rules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import MalformedXml

# Named entities the pipeline accepts: XML builtins, the MathML operator set
# used by canonicalization, and the Greek alphabet.  Anything else raises.
ENTITIES: dict[str, str] = {
    "amp": "&",
    "lt": "<",
    "gt": ">",
    "quot": '"',
    "apos": "'",
    # invisible operators
    "InvisibleTimes": "⁢",
    "it": "⁢",
    "ApplyFunction": "⁡",
    "af": "⁡",
    "InvisibleComma": "⁣",
    "ic": "⁣",
    # arithmetic / relations
    "minus": "−",
    "times": "×",
    "sdot": "⋅",
    "middot": "·",
    "plusmn": "±",
    "divide": "÷",
    "le": "≤",
    "leq": "≤",
    "ge": "≥",
    "geq": "≥",
    "ne": "≠",
    "NotEqual": "≠",
    "prime": "′",
    "Prime": "″",
    "infin": "∞",
    "infty": "∞",
    "sum": "∑",
    "prod": "∏",
    "int": "∫",
    "part": "∂",
    "nabla": "∇",
    "radic": "√",
    "forall": "∀",
    "exist": "∃",
    "isin": "∈",
    "notin": "∉",
    "sub": "⊂",
    "sup": "⊃",
    "sube": "⊆",
    "supe": "⊇",
    "cap": "∩",
    "cup": "∪",
    "and": "∧",
    "or": "∨",
    "not": "¬",
    "rarr": "→",
    "larr": "←",
    "harr": "↔",
    "rArr": "⇒",
    "lArr": "⇐",
    "hArr": "⇔",
    "cdots": "⋯",
    "hellip": "…",
    "lowast": "∗",
    "oplus": "⊕",
    "otimes": "⊗",
    "perp": "⊥",
    "sim": "∼",
    "simeq": "≃",
    "cong": "≅",
    "asymp": "≈",
    "approx": "≈",
    "equiv": "≡",
    "propto": "∝",
    "emptyset": "∅",
    "empty": "∅",
    "angle": "∠",
}

_GREEK_LOWER = {
    "alpha": "α", "beta": "β", "gamma": "γ", "delta": "δ",
    "epsilon": "ε", "zeta": "ζ", "eta": "η", "theta": "θ",
    "iota": "ι", "kappa": "κ", "lambda": "λ", "mu": "μ",
    "nu": "ν", "xi": "ξ", "omicron": "ο", "pi": "π",
    "rho": "ρ", "sigma": "σ", "sigmaf": "ς", "tau": "τ",
    "upsilon": "υ", "phi": "φ", "chi": "χ", "psi": "ψ",
    "omega": "ω",
}
_GREEK_UPPER = {
    "Alpha": "Α", "Beta": "Β", "Gamma": "Γ", "Delta": "Δ",
    "Epsilon": "Ε", "Zeta": "Ζ", "Eta": "Η", "Theta": "Θ",
    "Iota": "Ι", "Kappa": "Κ", "Lambda": "Λ", "Mu": "Μ",
    "Nu": "Ν", "Xi": "Ξ", "Omicron": "Ο", "Pi": "Π",
    "Rho": "Ρ", "Sigma": "Σ", "Tau": "Τ", "Upsilon": "Υ",
    "Phi": "Φ", "Chi": "Χ", "Psi": "Ψ", "Omega": "Ω",
}
ENTITIES.update(_GREEK_LOWER)
ENTITIES.update(_GREEK_UPPER)

# Content MathML markers used to classify a representation.
CONTENT_ELEMENTS = frozenset({"apply", "ci", "cn", "csymbol"})

_NAME_START = re.compile(r"[A-Za-z_]")
_WS = " \t\r\n"


class FormulaKind(str, Enum):
    PRESENTATION = "presentation"
    CONTENT = "content"


@dataclass(frozen=True, slots=True)
class MathNode:
    """One element of a MathML tree.

    ``attributes`` is kept sorted by name so structural equality and the
    canonical serialization agree.  ``text`` is only meaningful on leaves.
    """

    name: str
    attributes: tuple[tuple[str, str], ...] = ()
    children: tuple["MathNode", ...] = ()
    text: str | None = None

    def __post_init__(self):
        if self.text is not None and self.children:
            raise ValueError(f"<{self.name}> cannot carry both text and children")
        attrs = tuple(sorted(self.attributes))
        names = [a for a, _ in attrs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute on <{self.name}>")
        object.__setattr__(self, "attributes", attrs)

    def attr(self, name: str, default: str | None = None) -> str | None:
        for k, v in self.attributes:
            if k == name:
                return v
        return default

    def with_children(self, children: tuple["MathNode", ...]) -> "MathNode":
        return MathNode(self.name, self.attributes, children, None)

    def with_text(self, text: str | None) -> "MathNode":
        return MathNode(self.name, self.attributes, (), text)


@dataclass(frozen=True, slots=True)
class Formula:
    """A formula occurrence extracted from a host document.

    ``doc_span`` is the byte range of the whole ``<math>`` island; the two
    representations of an annotated formula share it, and share ``ordinal``
    (the 0-based island index within the document).
    """

    root: MathNode
    kind: FormulaKind
    doc_span: tuple[int, int]
    ordinal: int


def _local_name(raw: str) -> str:
    return raw.rsplit(":", 1)[-1]


def _check_char(ch: str, pos_chars: int, text: str):
    o = ord(ch)
    if o < 0x20 and ch not in "\t\n\r":
        raise _err(text, pos_chars, f"illegal character U+{o:04X}")


def _byte_offset(text: str, pos_chars: int) -> int:
    return len(text[:pos_chars].encode("utf-8"))


def _err(text: str, pos_chars: int, reason: str) -> MalformedXml:
    return MalformedXml(_byte_offset(text, pos_chars), reason)


class _Parser:
    """Recursive-descent parser over a decoded string."""

    __slots__ = ("s", "pos", "n")

    def __init__(self, s: str):
        self.s = s
        self.pos = 0
        self.n = len(s)

    def skip_ws(self):
        while self.pos < self.n and self.s[self.pos] in _WS:
            self.pos += 1

    def skip_misc(self):
        """Skip whitespace, comments, PIs, and doctype-style declarations."""
        while True:
            self.skip_ws()
            if self.s.startswith("<!--", self.pos):
                end = self.s.find("-->", self.pos + 4)
                if end < 0:
                    raise _err(self.s, self.pos, "unterminated comment")
                self.pos = end + 3
            elif self.s.startswith("<?", self.pos):
                end = self.s.find("?>", self.pos + 2)
                if end < 0:
                    raise _err(self.s, self.pos, "unterminated processing instruction")
                self.pos = end + 2
            elif self.s.startswith("<!", self.pos) and not self.s.startswith("<![CDATA[", self.pos):
                end = self.s.find(">", self.pos + 2)
                if end < 0:
                    raise _err(self.s, self.pos, "unterminated declaration")
                self.pos = end + 1
            else:
                return

    def parse_document(self) -> MathNode:
        self.skip_misc()
        if self.pos >= self.n or self.s[self.pos] != "<":
            raise _err(self.s, self.pos, "expected element")
        node = self.parse_element()
        self.skip_misc()
        if self.pos != self.n:
            raise _err(self.s, self.pos, "trailing content after root element")
        return node

    def parse_name(self) -> str:
        start = self.pos
        if self.pos >= self.n or not _NAME_START.match(self.s[self.pos]):
            raise _err(self.s, self.pos, "expected name")
        self.pos += 1
        while self.pos < self.n and (self.s[self.pos].isalnum() or self.s[self.pos] in "_-.:·"):
            self.pos += 1
        return self.s[start:self.pos]

    def parse_entity(self) -> str:
        # positioned at '&'
        start = self.pos
        end = self.s.find(";", self.pos + 1, self.pos + 64)
        if end < 0:
            raise _err(self.s, start, "unterminated entity reference")
        body = self.s[self.pos + 1:end]
        self.pos = end + 1
        if body.startswith("#x") or body.startswith("#X"):
            try:
                cp = int(body[2:], 16)
            except ValueError:
                raise _err(self.s, start, f"bad character reference &{body};") from None
        elif body.startswith("#"):
            try:
                cp = int(body[1:], 10)
            except ValueError:
                raise _err(self.s, start, f"bad character reference &{body};") from None
        else:
            if body not in ENTITIES:
                raise _err(self.s, start, f"unknown entity &{body};")
            return ENTITIES[body]
        if cp > 0x10FFFF or (cp < 0x20 and chr(cp) not in "\t\n\r"):
            raise _err(self.s, start, f"character reference &{body}; out of range")
        return chr(cp)

    def parse_attributes(self) -> list[tuple[str, str]]:
        attrs: list[tuple[str, str]] = []
        raw_seen: set[str] = set()
        local_seen: set[str] = set()
        while True:
            self.skip_ws()
            if self.pos >= self.n or self.s[self.pos] in "/>":
                return attrs
            astart = self.pos
            raw = self.parse_name()
            if raw in raw_seen:
                raise _err(self.s, astart, f"duplicate attribute {raw!r}")
            raw_seen.add(raw)
            self.skip_ws()
            if self.pos >= self.n or self.s[self.pos] != "=":
                raise _err(self.s, self.pos, "expected '=' in attribute")
            self.pos += 1
            self.skip_ws()
            if self.pos >= self.n or self.s[self.pos] not in "\"'":
                raise _err(self.s, self.pos, "expected quoted attribute value")
            quote = self.s[self.pos]
            self.pos += 1
            buf: list[str] = []
            while True:
                if self.pos >= self.n:
                    raise _err(self.s, astart, "unterminated attribute value")
                ch = self.s[self.pos]
                if ch == quote:
                    self.pos += 1
                    break
                if ch == "&":
                    buf.append(self.parse_entity())
                    continue
                if ch == "<":
                    raise _err(self.s, self.pos, "'<' in attribute value")
                _check_char(ch, self.pos, self.s)
                buf.append(ch)
                self.pos += 1
            if raw == "xmlns" or raw.startswith("xmlns:"):
                continue
            local = _local_name(raw)
            if local in local_seen:
                continue
            local_seen.add(local)
            attrs.append((local, "".join(buf)))

    def parse_element(self) -> MathNode:
        # positioned at '<'
        start = self.pos
        self.pos += 1
        name = _local_name(self.parse_name())
        attrs = self.parse_attributes()
        if self.pos < self.n and self.s[self.pos] == "/":
            if not self.s.startswith("/>", self.pos):
                raise _err(self.s, self.pos, "expected '/>'")
            self.pos += 2
            return MathNode(name, tuple(attrs))
        if self.pos >= self.n or self.s[self.pos] != ">":
            raise _err(self.s, self.pos, "expected '>'")
        self.pos += 1

        children: list[MathNode] = []
        text_parts: list[str] = []
        has_text = False
        while True:
            if self.pos >= self.n:
                raise _err(self.s, start, f"unclosed element <{name}>")
            ch = self.s[self.pos]
            if ch == "<":
                if self.s.startswith("</", self.pos):
                    close_at = self.pos
                    self.pos += 2
                    close = _local_name(self.parse_name())
                    self.skip_ws()
                    if self.pos >= self.n or self.s[self.pos] != ">":
                        raise _err(self.s, self.pos, "expected '>' in closing tag")
                    self.pos += 1
                    if close != name:
                        raise _err(self.s, close_at, f"mismatched closing tag </{close}> for <{name}>")
                    break
                if self.s.startswith("<!--", self.pos):
                    end = self.s.find("-->", self.pos + 4)
                    if end < 0:
                        raise _err(self.s, self.pos, "unterminated comment")
                    self.pos = end + 3
                    continue
                if self.s.startswith("<![CDATA[", self.pos):
                    end = self.s.find("]]>", self.pos + 9)
                    if end < 0:
                        raise _err(self.s, self.pos, "unterminated CDATA section")
                    text_parts.append(self.s[self.pos + 9:end])
                    has_text = True
                    self.pos = end + 3
                    continue
                if self.s.startswith("<?", self.pos):
                    end = self.s.find("?>", self.pos + 2)
                    if end < 0:
                        raise _err(self.s, self.pos, "unterminated processing instruction")
                    self.pos = end + 2
                    continue
                children.append(self.parse_element())
            elif ch == "&":
                text_parts.append(self.parse_entity())
                has_text = True
            else:
                _check_char(ch, self.pos, self.s)
                text_parts.append(ch)
                has_text = True
                self.pos += 1

        text = _normalize_text("".join(text_parts)) if has_text else None
        if text and children:
            raise _err(self.s, start, f"mixed text and element content in <{name}>")
        if children:
            return MathNode(name, tuple(attrs), tuple(children))
        return MathNode(name, tuple(attrs), (), text if text else None)


def _normalize_text(raw: str) -> str:
    """Trim and collapse whitespace the way MathML token elements do."""
    return " ".join(raw.split())


def _decode(data: bytes | str) -> str:
    if isinstance(data, str):
        return data.lstrip("﻿")
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedXml(e.start, "invalid UTF-8") from None


def parse_mathml(data: bytes | str) -> MathNode:
    """Parse one XML element (typically a ``<math>`` subtree) into a MathNode.

    Raises MalformedXml with a byte position for unbalanced tags, unknown
    named entities, or illegal characters.
    """
    return _Parser(_decode(data)).parse_document()


_TEXT_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;"}
_ATTR_ESCAPES = {"&": "&amp;", "<": "&lt;", '"': "&quot;"}
_TEXT_RE = re.compile(r"[&<>]")
_ATTR_RE = re.compile(r'[&<"]')


def _esc_text(s: str) -> str:
    return _TEXT_RE.sub(lambda m: _TEXT_ESCAPES[m.group()], s)


def _esc_attr(s: str) -> str:
    return _ATTR_RE.sub(lambda m: _ATTR_ESCAPES[m.group()], s)


def serialize(node: MathNode) -> str:
    """Deterministic canonical text form: sorted attributes, no insignificant
    whitespace, non-ASCII emitted as raw UTF-8."""
    out: list[str] = []
    _serialize_into(node, out)
    return "".join(out)


def _serialize_into(node: MathNode, out: list[str]):
    out.append("<")
    out.append(node.name)
    for k, v in node.attributes:
        out.append(f' {k}="{_esc_attr(v)}"')
    if not node.children and node.text is None:
        out.append("/>")
        return
    out.append(">")
    if node.text is not None:
        out.append(_esc_text(node.text))
    else:
        for child in node.children:
            _serialize_into(child, out)
    out.append(f"</{node.name}>")


# --- formula island extraction -------------------------------------------

_MATH_OPEN = re.compile(rb"<(?:[A-Za-z_][\w.-]*:)?math(?=[\s/>])")
_MATH_CLOSE = re.compile(rb"</(?:[A-Za-z_][\w.-]*:)?math\s*>")
_COMMENT_OPEN = b"<!--"


def find_islands(document: bytes) -> list[tuple[int, int]]:
    """Byte spans of <math>...</math> islands, skipping host comments."""
    spans: list[tuple[int, int]] = []
    pos = 0
    n = len(document)
    while pos < n:
        c = document.find(_COMMENT_OPEN, pos)
        m = _MATH_OPEN.search(document, pos)
        if m is None:
            break
        if 0 <= c < m.start():
            end = document.find(b"-->", c + 4)
            pos = n if end < 0 else end + 3
            continue
        start = m.start()
        # locate the matching close tag; <math> does not nest in practice,
        # but guard against it anyway
        depth = 1
        scan = m.end()
        # self-closing island
        tag_end = document.find(b">", m.end())
        if tag_end < 0:
            break
        if document[m.end():tag_end].endswith(b"/"):
            spans.append((start, tag_end + 1))
            pos = tag_end + 1
            continue
        end_pos = None
        while depth > 0:
            nxt_open = _MATH_OPEN.search(document, scan)
            nxt_close = _MATH_CLOSE.search(document, scan)
            if nxt_close is None:
                break
            if nxt_open is not None and nxt_open.start() < nxt_close.start():
                depth += 1
                scan = nxt_open.end()
            else:
                depth -= 1
                scan = nxt_close.end()
                end_pos = nxt_close.end()
        if depth != 0 or end_pos is None:
            raise MalformedXml(start, "unclosed <math> island")
        spans.append((start, end_pos))
        pos = end_pos
    return spans


def _wrap_content(nodes: tuple[MathNode, ...]) -> MathNode | None:
    if not nodes:
        return None
    if len(nodes) == 1:
        return nodes[0]
    return MathNode("mrow", (), nodes)


def classify(root: MathNode) -> FormulaKind:
    """A subtree is content MathML iff it uses apply/ci/cn/csymbol."""
    stack = [root]
    while stack:
        node = stack.pop()
        if node.name in CONTENT_ELEMENTS:
            return FormulaKind.CONTENT
        stack.extend(node.children)
    return FormulaKind.PRESENTATION


def representations(math_root: MathNode) -> list[MathNode]:
    """Split a parsed ``<math>`` element into its representation subtrees.

    A ``semantics`` child with an ``annotation-xml`` MathML annotation yields
    one subtree per encoding; text annotations are ignored.  An empty island
    yields no representations.
    """
    body = math_root.children if math_root.name == "math" else (math_root,)
    if len(body) == 1 and body[0].name == "semantics":
        sem = body[0]
        main = tuple(c for c in sem.children if c.name not in ("annotation", "annotation-xml"))
        reps: list[MathNode] = []
        wrapped = _wrap_content(main)
        if wrapped is not None:
            reps.append(wrapped)
        for child in sem.children:
            if child.name == "annotation-xml" and "MathML" in (child.attr("encoding") or ""):
                extra = _wrap_content(child.children)
                if extra is not None:
                    reps.append(extra)
        return reps
    wrapped = _wrap_content(body)
    return [wrapped] if wrapped is not None else []


def extract_formulae(document: bytes, format: str = "xhtml") -> list[Formula]:
    """Locate every ``<math>`` island and return one Formula per available
    representation.

    The host document is scanned, not parsed, so malformed host markup never
    blocks extraction; only the islands themselves must be well-formed.  Both
    ``xhtml`` and ``html`` hosts use the same lenient scan.
    """
    if format not in ("xhtml", "html"):
        raise ValueError(f"unknown host format {format!r}")
    formulae: list[Formula] = []
    for ordinal, (start, end) in enumerate(find_islands(document)):
        try:
            math_root = parse_mathml(document[start:end])
        except MalformedXml as e:
            raise MalformedXml(start + e.position, e.reason) from None
        for rep in representations(math_root):
            formulae.append(Formula(rep, classify(rep), (start, end), ordinal))
    return formulae
