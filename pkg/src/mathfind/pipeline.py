"""Formula-to-index-terms expansion: ordering, subformula extraction, and
variable/constant unification with depth-decayed weights.

Every subformula of a formula becomes an index term; each term is emitted in
up to four variants (exact, variables renamed positionally, constants
wildcarded, both), at a weight that decays with subtree depth and with each
generalization applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .canonical import TIMES
from .mathml import Formula, MathNode, serialize

VAR_MARK = "§"    # §k positional variable placeholder
CONST_MARK = "¤"  # ¤ constant wildcard

COMMUTATIVE_OPS = frozenset({"+", TIMES, "="})

_VAR_LEAVES = frozenset({"mi", "ci"})
_CONST_LEAVES = frozenset({"mn", "cn"})
_LEAF_ELEMENTS = _VAR_LEAVES | _CONST_LEAVES

# step budget for the canonical-ordering search of one unified term; beyond
# it the deterministic key order is kept without exploring alternatives
_SEARCH_BUDGET = 200_000


class TokenVariant(str, Enum):
    EXACT = "exact"
    VAR_UNIFIED = "var_unified"
    CONST_UNIFIED = "const_unified"
    BOTH_UNIFIED = "both_unified"


@dataclass(frozen=True, slots=True)
class MathToken:
    """One weighted index term derived from a formula occurrence."""

    term: str
    weight: float
    variant: TokenVariant
    depth: int
    formula_ordinal: int
    doc_span: tuple[int, int]


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for subformula expansion and unification weighting.

    alpha damps weight per tree level; beta and gamma are the penalties for
    variable and constant generalization.  All must lie strictly in (0, 1).
    """

    alpha: float = 0.7
    beta: float = 0.8
    gamma: float = 0.8
    max_depth: int | None = None
    index_leaves: bool = True

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ValueError(f"{name} must be in (0, 1), got {value}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 when finite, got {self.max_depth}")


_OPEN_FENCES = frozenset("([{")
_CLOSE_FENCES = frozenset(")]}")


@dataclass(frozen=True, slots=True)
class _FlatApp:
    op: MathNode
    operands: tuple[MathNode, ...]
    opening: MathNode | None
    closing: MathNode | None


def _flat_application(node: MathNode) -> _FlatApp | None:
    """Match mrow([fence] e0 op e1 op ... ek [fence]) with one commutative
    operator; fences from expanded/parenthesized groups are seen through."""
    if node.name != "mrow":
        return None
    kids = node.children
    opening = closing = None
    if kids and kids[0].name == "mo" and kids[0].text in _OPEN_FENCES:
        opening, kids = kids[0], kids[1:]
    if kids and kids[-1].name == "mo" and kids[-1].text in _CLOSE_FENCES:
        closing, kids = kids[-1], kids[:-1]
    if len(kids) < 3 or len(kids) % 2 == 0:
        return None
    ops = kids[1::2]
    first = ops[0]
    if first.name != "mo" or first.text not in COMMUTATIVE_OPS:
        return None
    if any(o.name != "mo" or o.text != first.text for o in ops[1:]):
        return None
    if any(c.name == "mo" for c in kids[0::2]):
        return None
    return _FlatApp(first, kids[0::2], opening, closing)


def _rebuild_application(app: _FlatApp, operands: list[MathNode]) -> MathNode:
    children: list[MathNode] = []
    if app.opening is not None:
        children.append(app.opening)
    for i, operand in enumerate(operands):
        if i > 0:
            children.append(app.op)
        children.append(operand)
    if app.closing is not None:
        children.append(app.closing)
    return MathNode("mrow", (), tuple(children))


def order_operands(root: MathNode) -> MathNode:
    """Sort the operands of flat commutative applications, bottom-up, by the
    lexicographic order of their canonical serializations."""
    if root.children:
        kids = tuple(order_operands(c) for c in root.children)
        if kids != root.children:
            root = root.with_children(kids)
    flat = _flat_application(root)
    if flat is None:
        return root
    ordered = sorted(flat.operands, key=serialize)
    if tuple(ordered) == flat.operands:
        return root
    return _rebuild_application(flat, ordered)


def _indexable(node: MathNode, index_leaves: bool) -> bool:
    if node.name == "mo":
        return False
    if node.name in _LEAF_ELEMENTS:
        return index_leaves
    return True


def extract_subformulae(
    root: MathNode, config: PipelineConfig | None = None
) -> list[tuple[MathNode, int]]:
    """All indexable subtrees with their depths, in document order.

    Bare operators and fence tokens are never terms; identifier/number
    leaves are terms only when config.index_leaves is set.  The formula
    itself is always the first entry, at depth 0.
    """
    config = config or PipelineConfig()
    out: list[tuple[MathNode, int]] = []

    def walk(node: MathNode, depth: int):
        if config.max_depth is not None and depth > config.max_depth:
            return
        if depth == 0 or _indexable(node, config.index_leaves):
            out.append((node, depth))
        for child in node.children:
            walk(child, depth + 1)

    walk(root, 0)
    return out


def _substitute_constants(node: MathNode) -> MathNode:
    if node.name in _CONST_LEAVES and node.text is not None:
        return node.with_text(CONST_MARK)
    if node.children:
        kids = tuple(_substitute_constants(c) for c in node.children)
        if kids != node.children:
            return node.with_children(kids)
    return node


def _renumber(node: MathNode, mapping: dict[str, int]) -> MathNode:
    if node.name in _VAR_LEAVES and node.text is not None:
        k = mapping.get(node.text)
        if k is None:
            k = len(mapping) + 1
            mapping[node.text] = k
        return node.with_text(f"{VAR_MARK}{k}")
    if node.children:
        return node.with_children(tuple(_renumber(c, mapping) for c in node.children))
    return node


def unify_variables(root: MathNode) -> MathNode:
    """Replace each identifier leaf with §k, where k numbers variables by
    first occurrence in a left-to-right traversal."""
    return _renumber(root, {})


def unify_constants(root: MathNode) -> MathNode:
    """Replace each number leaf with the ¤ wildcard."""
    return _substitute_constants(root)


def _canon_consts(node: MathNode, memo: dict[int, tuple[MathNode, str]]) -> tuple[MathNode, str]:
    """Re-sort commutative operands of a constant-wildcarded tree.

    With no variable numbering in play a plain bottom-up sort by
    serialization is already canonical.  The memo is keyed by node identity,
    so nodes passed in must outlive it.
    """
    memo_key = id(node)
    cached = memo.get(memo_key)
    if cached is not None:
        return cached

    if node.children:
        rebuilt = tuple(_canon_consts(c, memo)[0] for c in node.children)
        if rebuilt != node.children:
            node = node.with_children(rebuilt)
    flat = _flat_application(node)
    if flat is not None:
        ordered = sorted(flat.operands, key=serialize)
        if tuple(ordered) != flat.operands:
            node = _rebuild_application(flat, ordered)
    result = (node, serialize(node))
    memo[memo_key] = result
    return result


class _BudgetExceeded(Exception):
    pass


class _VarCanon:
    """Canonical var-unified serialization of subtrees.

    The serialization must be invariant under injective renaming of the
    identifiers, so operand order cannot come from the original names.
    Operands of a commutative application are ordered by their standalone
    canonical serials; operands tied on that key are locally isomorphic, and
    the surviving freedom is resolved by a depth-first search over their
    placements that keeps the lexicographically smallest globally numbered
    serialization.  Candidates whose variables all live inside the candidate
    itself are interchangeable and explored once.

    Keyed by node identity: source trees must outlive the instance.
    """

    def __init__(self):
        self.keys: dict[int, str] = {}

    def key(self, node: MathNode) -> str:
        cached = self.keys.get(id(node))
        if cached is not None:
            return cached
        for child in node.children:
            self.key(child)
        occ: dict[str, int] = {}
        _count_vars(node, occ)
        try:
            best = _Search(self, node, occ).run()
        except _BudgetExceeded:
            best = self._fallback(node)
        self.keys[id(node)] = best
        return best

    def _fallback(self, node: MathNode) -> str:
        ordered = self._order_deterministic(node)
        return serialize(_renumber(ordered, {}))

    def _order_deterministic(self, node: MathNode) -> MathNode:
        if node.children:
            node = node.with_children(
                tuple(self._order_deterministic(c) for c in node.children)
            )
        flat = _flat_application(node)
        if flat is None:
            return node
        operands = sorted(
            flat.operands, key=lambda o: (self.keys.get(id(o), ""), serialize(o))
        )
        return _rebuild_application(flat, operands)


def _count_vars(node: MathNode, occ: dict[str, int]):
    if node.name in _VAR_LEAVES and node.text is not None:
        occ[node.text] = occ.get(node.text, 0) + 1
    for child in node.children:
        _count_vars(child, occ)


class _Search:
    """One lexicographic-minimum search over the orderings of tied operands."""

    def __init__(self, canon: _VarCanon, root: MathNode, occ: dict[str, int]):
        self.canon = canon
        self.root = root
        self.occ = occ
        self.best: str | None = None
        self.steps = 0
        self._member_keys: dict[int, str] = {}

    def run(self) -> str:
        self._walk((("node", self.root),), {}, "")
        assert self.best is not None
        return self.best

    # a work item is ("lit", str) or ("node", MathNode) or
    # ("choice", op_literal, remaining_members)
    def _walk(self, work, mapping: dict[str, int], out: str):
        while work:
            self.steps += 1
            if self.steps > _SEARCH_BUDGET:
                raise _BudgetExceeded
            item, work = work[0], work[1:]
            kind = item[0]
            if kind == "lit":
                out += item[1]
                continue
            if kind == "node":
                node = item[1]
                if node.name in _VAR_LEAVES and node.text is not None:
                    k = mapping.get(node.text)
                    if k is None:
                        k = len(mapping) + 1
                        mapping = {**mapping, node.text: k}
                    out += serialize(node.with_text(f"{VAR_MARK}{k}"))
                    continue
                if not node.children:
                    out += serialize(node)
                    continue
                work = self._expand(node) + work
                continue
            # choice point: try each distinct next member
            _, op_lit, members = item
            if self.best is not None and not self.best.startswith(out):
                if out > self.best[: len(out)]:
                    return  # prefix already loses
            seen: set[str] = set()
            for i, member in enumerate(members):
                sig = self._member_key(member)
                if sig in seen:
                    continue
                seen.add(sig)
                rest = members[:i] + members[i + 1:]
                branch = (("node", member),)
                if rest:
                    branch += (("lit", op_lit), ("choice", op_lit, rest))
                self._walk(branch + work, mapping, out)
            return
        if self.best is None or out < self.best:
            self.best = out

    def _expand(self, node: MathNode):
        attrs = "".join(f' {k}="{v}"' for k, v in node.attributes)
        open_tag = f"<{node.name}{attrs}>"
        close_tag = f"</{node.name}>"
        flat = _flat_application(node)
        if flat is not None:
            op_lit = serialize(flat.op)
            decorated = sorted(
                ((self.canon.key(o), serialize(o), o) for o in flat.operands),
                key=lambda t: (t[0], t[1]),
            )
            items: list = [("lit", open_tag)]
            if flat.opening is not None:
                items.append(("lit", serialize(flat.opening)))
            i = 0
            first = True
            while i < len(decorated):
                j = i
                while j + 1 < len(decorated) and decorated[j + 1][0] == decorated[i][0]:
                    j += 1
                if not first:
                    items.append(("lit", op_lit))
                run = decorated[i:j + 1]
                if j > i and len({t[1] for t in run}) > 1:
                    items.append(("choice", op_lit, tuple(t[2] for t in run)))
                else:
                    for k, t in enumerate(run):
                        if k:
                            items.append(("lit", op_lit))
                        items.append(("node", t[2]))
                first = False
                i = j + 1
            if flat.closing is not None:
                items.append(("lit", serialize(flat.closing)))
            items.append(("lit", close_tag))
            return tuple(items)
        items = [("lit", open_tag)]
        for child in node.children:
            items.append(("node", child))
        items.append(("lit", close_tag))
        return tuple(items)

    def _member_key(self, member: MathNode) -> str:
        """Dedup signature: variables fully local to the member are masked by
        their local pattern, escaping variables keep their names.  Equal
        signatures mean the branches are interchangeable."""
        cached = self._member_keys.get(id(member))
        if cached is not None:
            return cached
        local: dict[str, int] = {}
        _count_vars(member, local)
        mask: dict[str, int] = {}

        def render(node: MathNode) -> MathNode:
            if node.name in _VAR_LEAVES and node.text is not None:
                name = node.text
                if local.get(name) == self.occ.get(name):
                    k = mask.get(name)
                    if k is None:
                        k = len(mask) + 1
                        mask[name] = k
                    return node.with_text(f"!{k}")
                return node
            if node.children:
                return node.with_children(tuple(render(c) for c in node.children))
            return node

        sig = serialize(render(member))
        self._member_keys[id(member)] = sig
        return sig


def unified_term(node: MathNode, with_vars: bool, with_consts: bool) -> str:
    """Canonical serialization of a subformula under the requested
    generalizations; stable under variable renaming and operand permutation."""
    if with_consts:
        node = _substitute_constants(node)
    if with_vars:
        return _VarCanon().key(node)
    _, key = _canon_consts(node, {})
    return key


def tokenize_formula(formula: Formula, config: PipelineConfig | None = None) -> list[MathToken]:
    """Expand one canonicalized formula into its weighted index terms.

    Per subformula at depth d: the exact term at alpha^d, then each unified
    variant at its extra penalty, suppressed when generalization changes
    nothing.  Every occurrence is emitted; frequency accumulation is the
    indexer's job.
    """
    config = config or PipelineConfig()
    ordered = order_operands(formula.root)
    # the constant-wildcarded twin has identical shape, so its subformula
    # walk lines up 1:1 with the exact walk
    wildcarded = _substitute_constants(ordered)
    subs = extract_subformulae(ordered, config)
    wild_subs = extract_subformulae(wildcarded, config)

    tokens: list[MathToken] = []
    var_canon = _VarCanon()
    both_canon = _VarCanon()
    const_memo: dict[int, tuple[MathNode, str]] = {}

    for (sub, depth), (csub, _) in zip(subs, wild_subs):
        base = config.alpha ** depth
        exact = serialize(sub)
        tokens.append(MathToken(exact, base, TokenVariant.EXACT, depth,
                                formula.ordinal, formula.doc_span))
        var_term = var_canon.key(sub)
        if var_term != exact:
            tokens.append(MathToken(var_term, base * config.beta, TokenVariant.VAR_UNIFIED,
                                    depth, formula.ordinal, formula.doc_span))
        const_term = _canon_consts(csub, const_memo)[1]
        if const_term != exact:
            tokens.append(MathToken(const_term, base * config.gamma, TokenVariant.CONST_UNIFIED,
                                    depth, formula.ordinal, formula.doc_span))
        both_term = both_canon.key(csub)
        if both_term not in (exact, var_term, const_term):
            tokens.append(MathToken(both_term, base * config.beta * config.gamma,
                                    TokenVariant.BOTH_UNIFIED, depth,
                                    formula.ordinal, formula.doc_span))
    return tokens
