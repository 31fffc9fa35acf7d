"""LaTeX math fragments to presentation MathML, for query input.

The grammar is a deliberately small recursive-descent subset; anything
outside it fails loudly with a position instead of mis-parsing.  Converted
trees are re-canonicalized by callers so a LaTeX query and a MathML spelling
of the same formula produce identical index terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .canonical import OPERATOR_GLYPHS, TIMES, canonicalize
from .errors import UnbalancedGroup, UnsupportedCommand
from .mathml import MathNode


class AstKind(str, Enum):
    SYMBOL = "symbol"
    NUMBER = "number"
    GROUP = "group"
    FRACTION = "fraction"
    SQRT = "sqrt"
    SUPERSCRIPT = "superscript"
    SUBSCRIPT = "subscript"
    OPERATOR = "operator"
    FUNCTION = "function"
    BIG_OPERATOR = "big_operator"


_CHILD_COUNTS = {
    AstKind.FRACTION: 2,
    AstKind.SQRT: 1,
    AstKind.SUPERSCRIPT: 2,
    AstKind.SUBSCRIPT: 2,
}


@dataclass(frozen=True, slots=True)
class LatexAst:
    kind: AstKind
    children: tuple["LatexAst", ...] = ()
    literal: str | None = None

    def __post_init__(self):
        want = _CHILD_COUNTS.get(self.kind)
        if want is not None and len(self.children) != want:
            raise ValueError(f"{self.kind.value} expects {want} children, got {len(self.children)}")


_GREEK = {
    "alpha": "α", "beta": "β", "gamma": "γ", "delta": "δ",
    "epsilon": "ε", "zeta": "ζ", "eta": "η", "theta": "θ",
    "iota": "ι", "kappa": "κ", "lambda": "λ", "mu": "μ",
    "nu": "ν", "xi": "ξ", "omicron": "ο", "pi": "π",
    "rho": "ρ", "sigma": "σ", "tau": "τ", "upsilon": "υ",
    "phi": "φ", "chi": "χ", "psi": "ψ", "omega": "ω",
    "Gamma": "Γ", "Delta": "Δ", "Theta": "Θ", "Lambda": "Λ",
    "Xi": "Ξ", "Pi": "Π", "Sigma": "Σ", "Upsilon": "Υ",
    "Phi": "Φ", "Psi": "Ψ", "Omega": "Ω",
}
_SYMBOL_COMMANDS = {"infty": "∞", **_GREEK}
_OPERATOR_COMMANDS = {
    "cdot": "⋅",
    "times": "×",
    "leq": "≤",
    "geq": "≥",
    "neq": "≠",
}
_FUNCTIONS = {"sin", "cos", "tan", "log", "ln", "exp", "lim"}
_BIG_OPERATORS = {"sum": "∑", "int": "∫", "prod": "∏"}
# | is reachable both bare and via \left| / \right|
_PLAIN_OPERATORS = set("+-*/=<>|")
_CLOSERS = {"(": ")", "[": "]"}

# atoms that participate in implied multiplication when juxtaposed
_MULTIPLICAND = {
    AstKind.SYMBOL, AstKind.NUMBER, AstKind.GROUP, AstKind.FRACTION,
    AstKind.SQRT, AstKind.SUPERSCRIPT, AstKind.SUBSCRIPT,
}


class _Lexer:
    __slots__ = ("s", "pos", "n")

    def __init__(self, s: str):
        self.s = s
        self.pos = 0
        self.n = len(s)

    def skip_ws(self):
        """Skip whitespace and the \\left/\\right prefixes, which only mark
        stretchiness; their delimiter char stays, a null '.' vanishes."""
        while True:
            while self.pos < self.n and self.s[self.pos].isspace():
                self.pos += 1
            for marker in ("\\left", "\\right"):
                if self.s.startswith(marker, self.pos):
                    after = self.pos + len(marker)
                    if after >= self.n or not self.s[after].isalpha():
                        self.pos = after
                        while self.pos < self.n and self.s[self.pos].isspace():
                            self.pos += 1
                        if self.pos < self.n and self.s[self.pos] == ".":
                            self.pos += 1
                        break
            else:
                return

    def peek(self) -> str | None:
        self.skip_ws()
        return self.s[self.pos] if self.pos < self.n else None

    def command(self) -> tuple[str, int]:
        """Consume a backslash command, returning (name, start position)."""
        start = self.pos
        self.pos += 1
        name_start = self.pos
        while self.pos < self.n and self.s[self.pos].isalpha():
            self.pos += 1
        if self.pos == name_start:
            # single-character control sequence like \{ or \|
            if self.pos < self.n:
                self.pos += 1
            return self.s[name_start:self.pos], start
        return self.s[name_start:self.pos], start


class _LatexParser:
    def __init__(self, s: str):
        self.lx = _Lexer(s)

    def parse(self) -> LatexAst:
        if self.lx.peek() is None:
            raise UnbalancedGroup(0, "empty math fragment")
        seq = self.parse_sequence(stops=frozenset())
        ch = self.lx.peek()
        if ch is not None:
            raise UnbalancedGroup(self.lx.pos, f"unexpected {ch!r}")
        return seq if len(seq.children) != 1 else seq.children[0]

    def parse_sequence(self, stops: frozenset[str]) -> LatexAst:
        atoms: list[LatexAst] = []
        while True:
            ch = self.lx.peek()
            if ch is None or ch in stops:
                return LatexAst(AstKind.GROUP, tuple(atoms))
            atoms.append(self.parse_atom())

    def parse_atom(self) -> LatexAst:
        node = self.parse_base()
        sub: LatexAst | None = None
        sup: LatexAst | None = None
        while True:
            ch = self.lx.peek()
            if ch == "^":
                if sup is not None:
                    raise UnsupportedCommand("^", self.lx.pos)
                self.lx.pos += 1
                sup = self.parse_argument()
            elif ch == "_":
                if sub is not None:
                    raise UnsupportedCommand("_", self.lx.pos)
                self.lx.pos += 1
                sub = self.parse_argument()
            else:
                break
        if sub is not None:
            node = LatexAst(AstKind.SUBSCRIPT, (node, sub))
        if sup is not None:
            node = LatexAst(AstKind.SUPERSCRIPT, (node, sup))
        return node

    def parse_argument(self) -> LatexAst:
        ch = self.lx.peek()
        if ch is None:
            raise UnbalancedGroup(self.lx.pos, "missing argument")
        if ch == "{":
            open_at = self.lx.pos
            self.lx.pos += 1
            seq = self.parse_sequence(stops=frozenset("}"))
            if self.lx.peek() != "}":
                raise UnbalancedGroup(open_at, "unclosed '{'")
            self.lx.pos += 1
            return seq if len(seq.children) != 1 else seq.children[0]
        return self.parse_base()

    def parse_base(self) -> LatexAst:
        ch = self.lx.peek()
        assert ch is not None
        pos = self.lx.pos
        if ch == "{":
            self.lx.pos += 1
            seq = self.parse_sequence(stops=frozenset("}"))
            if self.lx.peek() != "}":
                raise UnbalancedGroup(pos, "unclosed '{'")
            self.lx.pos += 1
            return seq
        if ch in _CLOSERS:
            # parenthesized content keeps its fences inside one group so the
            # tree matches expanded mfenced markup
            closer = _CLOSERS[ch]
            self.lx.pos += 1
            seq = self.parse_sequence(stops=frozenset(closer))
            if self.lx.peek() != closer:
                raise UnbalancedGroup(pos, "unclosed fence")
            self.lx.pos += 1
            return LatexAst(
                AstKind.GROUP,
                (
                    LatexAst(AstKind.OPERATOR, (), ch),
                    *seq.children,
                    LatexAst(AstKind.OPERATOR, (), closer),
                ),
            )
        if ch in ")]}":
            raise UnbalancedGroup(pos, f"unmatched {ch!r}")
        if ch == "\\":
            return self.parse_command()
        if ch.isalpha():
            self.lx.pos += 1
            return LatexAst(AstKind.SYMBOL, (), ch)
        if ch.isdigit():
            start = self.lx.pos
            while self.lx.pos < self.lx.n and self.lx.s[self.lx.pos].isdigit():
                self.lx.pos += 1
            if (
                self.lx.pos + 1 < self.lx.n
                and self.lx.s[self.lx.pos] == "."
                and self.lx.s[self.lx.pos + 1].isdigit()
            ):
                self.lx.pos += 1
                while self.lx.pos < self.lx.n and self.lx.s[self.lx.pos].isdigit():
                    self.lx.pos += 1
            return LatexAst(AstKind.NUMBER, (), self.lx.s[start:self.lx.pos])
        if ch in _PLAIN_OPERATORS:
            self.lx.pos += 1
            return LatexAst(AstKind.OPERATOR, (), ch)
        raise UnsupportedCommand(ch, pos)

    def parse_command(self) -> LatexAst:
        name, start = self.lx.command()
        if name == "frac":
            num = self.parse_argument()
            den = self.parse_argument()
            return LatexAst(AstKind.FRACTION, (num, den))
        if name == "sqrt":
            return LatexAst(AstKind.SQRT, (self.parse_argument(),))
        if name in _SYMBOL_COMMANDS:
            return LatexAst(AstKind.SYMBOL, (), _SYMBOL_COMMANDS[name])
        if name in _OPERATOR_COMMANDS:
            return LatexAst(AstKind.OPERATOR, (), _OPERATOR_COMMANDS[name])
        if name in _FUNCTIONS:
            return LatexAst(AstKind.FUNCTION, (), name)
        if name in _BIG_OPERATORS:
            return LatexAst(AstKind.BIG_OPERATOR, (), _BIG_OPERATORS[name])
        raise UnsupportedCommand("\\" + name, start)


def parse_latex(input: str) -> LatexAst:
    """Parse a math-mode fragment (no surrounding dollar signs).

    Raises UnsupportedCommand or UnbalancedGroup with character positions.
    """
    return _LatexParser(input).parse()


def _to_mathml(ast: LatexAst) -> MathNode:
    kind = ast.kind
    if kind == AstKind.SYMBOL:
        return MathNode("mi", (), (), ast.literal)
    if kind == AstKind.NUMBER:
        return MathNode("mn", (), (), ast.literal)
    if kind == AstKind.OPERATOR:
        glyph = ast.literal or ""
        return MathNode("mo", (), (), OPERATOR_GLYPHS.get(glyph, glyph))
    if kind == AstKind.FUNCTION:
        return MathNode("mi", (), (), ast.literal)
    if kind == AstKind.BIG_OPERATOR:
        return MathNode("mo", (), (), ast.literal)
    if kind == AstKind.FRACTION:
        return MathNode("mfrac", (), (_to_mathml(ast.children[0]), _to_mathml(ast.children[1])))
    if kind == AstKind.SQRT:
        return MathNode("msqrt", (), (_to_mathml(ast.children[0]),))
    if kind == AstKind.SUPERSCRIPT:
        return MathNode("msup", (), (_to_mathml(ast.children[0]), _to_mathml(ast.children[1])))
    if kind == AstKind.SUBSCRIPT:
        return MathNode("msub", (), (_to_mathml(ast.children[0]), _to_mathml(ast.children[1])))
    assert kind == AstKind.GROUP
    parts: list[MathNode] = []
    prev: LatexAst | None = None
    for child in ast.children:
        if (
            prev is not None
            and prev.kind in _MULTIPLICAND
            and child.kind in _MULTIPLICAND
        ):
            # juxtaposition means multiplication: ab == a*b == a<it>b
            parts.append(MathNode("mo", (), (), TIMES))
        parts.append(_to_mathml(child))
        prev = child
    if len(parts) == 1:
        return parts[0]
    return MathNode("mrow", (), tuple(parts))


def latex_to_mathml(ast: LatexAst) -> MathNode:
    """Convert a parsed fragment to presentation MathML (not yet canonical)."""
    return _to_mathml(ast)


def latex_to_canonical(input: str) -> MathNode:
    """Full query path: parse, convert, canonicalize."""
    return canonicalize(latex_to_mathml(parse_latex(input)))
