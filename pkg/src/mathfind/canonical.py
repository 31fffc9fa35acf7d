"""Canonicalization: collapse distinct MathML encodings of one formula.

The rule set is fixed and ordered; it runs bottom-up in a single pass that
repeats until the tree stops changing (at most four passes, by construction
of the rules).  Unknown elements pass through untouched, so content MathML
is only affected by the representation-neutral rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .mathml import MathNode

# Glyph normalization map shared with the LaTeX converter: every spelling of
# multiplication collapses to one times token, both minus signs to one.
TIMES = "×"
MINUS = "−"
OPERATOR_GLYPHS: dict[str, str] = {
    "*": TIMES,
    "×": TIMES,
    "⁢": TIMES,   # invisible times
    "⋅": TIMES,   # dot operator (\cdot)
    "·": TIMES,   # middle dot
    "-": MINUS,
    "−": MINUS,
}

# Invisible function application carries no retrieval value and differs
# between generated and hand-written markup, so it is dropped outright.
_APPLY_FUNCTION = "⁡"

_STRIP_ATTRS = frozenset({"style", "class", "id"})
_FENCE_DEFAULTS = {"open": "(", "close": ")", "separators": ","}

_MAX_PASSES = 4


def _rule_attrs(node: MathNode) -> MathNode:
    """C1: drop style/class/id everywhere; mathvariant survives only on mi."""
    kept = tuple(
        (k, v)
        for k, v in node.attributes
        if k not in _STRIP_ATTRS and (k != "mathvariant" or node.name == "mi")
    )
    if kept == node.attributes:
        return node
    return MathNode(node.name, kept, node.children, node.text)


def _rule_semantics(node: MathNode) -> MathNode:
    """C5: drop annotation children, unwrap semantics wrappers."""
    if any(c.name in ("annotation", "annotation-xml") for c in node.children):
        node = node.with_children(
            tuple(c for c in node.children if c.name not in ("annotation", "annotation-xml"))
        )
    if node.name == "semantics":
        if len(node.children) == 1:
            return node.children[0]
        return MathNode("mrow", (), node.children)
    return node


def _rule_mfenced(node: MathNode) -> MathNode:
    """C3: expand mfenced into an mrow with explicit mo fences/separators.

    A lone mrow child is spliced between the fences so the result matches a
    hand-written flat `(...)` row.
    """
    if node.name != "mfenced":
        return node
    opening = node.attr("open", _FENCE_DEFAULTS["open"]) or ""
    closing = node.attr("close", _FENCE_DEFAULTS["close"]) or ""
    separators = (node.attr("separators", _FENCE_DEFAULTS["separators"]) or "").replace(" ", "")
    body = node.children
    if len(body) == 1 and body[0].name == "mrow" and not body[0].attributes:
        body = body[0].children
        separators = ""
    out: list[MathNode] = []
    if opening:
        out.append(MathNode("mo", (), (), opening))
    for i, child in enumerate(body):
        if i > 0 and separators:
            sep = separators[min(i - 1, len(separators) - 1)]
            out.append(MathNode("mo", (), (), sep))
        out.append(child)
    if closing:
        out.append(MathNode("mo", (), (), closing))
    return MathNode("mrow", (), tuple(out))


def _rule_scripts(node: MathNode) -> MathNode:
    """C6: msubsup(base, sub, sup) becomes msup(msub(base, sub), sup)."""
    if node.name != "msubsup" or len(node.children) != 3:
        return node
    base, sub, sup = node.children
    return MathNode("msup", (), (MathNode("msub", (), (base, sub)), sup))


def _rule_operators(node: MathNode) -> MathNode:
    """C4: normalize operator glyphs on mo leaves."""
    if node.name != "mo" or node.text is None:
        return node
    norm = OPERATOR_GLYPHS.get(node.text)
    if norm is None or norm == node.text:
        return node
    return node.with_text(norm)


def _rule_mrow(node: MathNode) -> MathNode:
    """C2: an mrow with exactly one child is replaced by that child."""
    if node.name == "mrow" and len(node.children) == 1:
        return node.children[0]
    return node


@dataclass(frozen=True)
class CanonicalizationRule:
    id: str
    description: str
    transform: Callable[[MathNode], MathNode]


# Applied per node in this order, children first.  Appending new rules keeps
# existing canonical forms stable.
RULES: tuple[CanonicalizationRule, ...] = (
    CanonicalizationRule("C1", "strip presentational attributes", _rule_attrs),
    CanonicalizationRule("C5", "drop annotations, unwrap semantics", _rule_semantics),
    CanonicalizationRule("C3", "expand mfenced to explicit fences", _rule_mfenced),
    CanonicalizationRule("C6", "split msubsup into msup over msub", _rule_scripts),
    CanonicalizationRule("C4", "normalize operator glyphs", _rule_operators),
    CanonicalizationRule("C2", "flatten single-child mrow", _rule_mrow),
)


def _apply_once(node: MathNode) -> MathNode:
    if node.children:
        new_children = []
        for child in node.children:
            done = _apply_once(child)
            # invisible function application disappears entirely
            if done.name == "mo" and done.text == _APPLY_FUNCTION:
                continue
            new_children.append(done)
        if tuple(new_children) != node.children:
            node = node.with_children(tuple(new_children))
    for rule in RULES:
        node = rule.transform(node)
    return node


def canonicalize(root: MathNode) -> MathNode:
    """Rewrite a parsed MathML tree to its canonical form.

    Stable: canonicalize(canonicalize(x)) == canonicalize(x).
    """
    node = root
    for _ in range(_MAX_PASSES):
        after = _apply_once(node)
        if after == node:
            return node
        node = after
    raise AssertionError("canonicalization did not reach a fixpoint in 4 passes")
