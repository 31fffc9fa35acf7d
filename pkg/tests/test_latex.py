from collections import Counter

import pytest

from mathfind.canonical import canonicalize
from mathfind.errors import UnbalancedGroup, UnsupportedCommand
from mathfind.latex import (
    AstKind,
    LatexAst,
    latex_to_canonical,
    latex_to_mathml,
    parse_latex,
)
from mathfind.mathml import Formula, FormulaKind, parse_mathml, serialize
from mathfind.pipeline import tokenize_formula


def mathml_of(latex: str) -> str:
    return serialize(latex_to_mathml(parse_latex(latex)))


class TestParse:
    def test_simple_sum(self):
        ast = parse_latex("a+b")
        assert ast.kind == AstKind.GROUP
        assert [c.kind for c in ast.children] == [
            AstKind.SYMBOL, AstKind.OPERATOR, AstKind.SYMBOL,
        ]

    def test_fraction(self):
        ast = parse_latex("\\frac{a}{b}")
        assert ast.kind == AstKind.FRACTION
        assert [c.literal for c in ast.children] == ["a", "b"]

    def test_fraction_single_char_args(self):
        assert parse_latex("\\frac ab") == parse_latex("\\frac{a}{b}")

    def test_unsupported_command_position(self):
        with pytest.raises(UnsupportedCommand) as exc:
            parse_latex("\\foo{x}")
        assert exc.value.command == "\\foo"
        assert exc.value.position == 0

    def test_unsupported_command_mid_string(self):
        with pytest.raises(UnsupportedCommand) as exc:
            parse_latex("a+\\blah")
        assert exc.value.position == 2

    def test_unbalanced_group(self):
        with pytest.raises(UnbalancedGroup) as exc:
            parse_latex("{a+b")
        assert exc.value.position == 0
        with pytest.raises(UnbalancedGroup) as exc:
            parse_latex("a}b")
        assert exc.value.position == 1

    def test_empty_fragment(self):
        with pytest.raises(UnbalancedGroup):
            parse_latex("   ")

    def test_double_superscript_rejected(self):
        with pytest.raises(UnsupportedCommand):
            parse_latex("x^2^3")

    def test_ast_child_count_invariants(self):
        with pytest.raises(ValueError):
            LatexAst(AstKind.FRACTION, (LatexAst(AstKind.SYMBOL, (), "a"),))
        with pytest.raises(ValueError):
            LatexAst(AstKind.SQRT, ())


class TestConvert:
    def test_power(self):
        assert mathml_of("x^2") == "<msup><mi>x</mi><mn>2</mn></msup>"

    def test_fraction(self):
        assert mathml_of("\\frac{a}{b}") == "<mfrac><mi>a</mi><mi>b</mi></mfrac>"

    def test_sqrt(self):
        assert mathml_of("\\sqrt{x}") == "<msqrt><mi>x</mi></msqrt>"

    def test_subscript(self):
        assert mathml_of("x_i") == "<msub><mi>x</mi><mi>i</mi></msub>"

    def test_both_scripts_nest_sub_inside_sup(self):
        assert mathml_of("x_i^2") == mathml_of("x^2_i") == (
            "<msup><msub><mi>x</mi><mi>i</mi></msub><mn>2</mn></msup>"
        )

    def test_greek_to_unicode_identifier(self):
        assert mathml_of("\\alpha") == "<mi>α</mi>"
        assert mathml_of("\\Omega") == "<mi>Ω</mi>"

    def test_operators_normalized_like_canonicalizer(self):
        assert "<mo>×</mo>" in mathml_of("a\\cdot b")
        assert "<mo>×</mo>" in mathml_of("a\\times b")
        assert "<mo>−</mo>" in mathml_of("a-b")

    def test_juxtaposition_is_multiplication(self):
        assert mathml_of("ab") == mathml_of("a*b")
        assert mathml_of("2x") == mathml_of("2*x")

    def test_function_application_no_times(self):
        got = mathml_of("\\sin x")
        assert got == "<mrow><mi>sin</mi><mi>x</mi></mrow>"

    def test_big_operator_with_bounds(self):
        got = mathml_of("\\sum_{i=1}^n x_i")
        assert got.startswith("<mrow><msup><msub><mo>∑</mo>")

    def test_left_right_are_plain_fences(self):
        assert latex_to_canonical("\\left(a+b\\right)") == latex_to_canonical("(a+b)")

    def test_null_delimiter_disappears(self):
        assert latex_to_canonical("\\left.a\\right|") == latex_to_canonical("a|")

    def test_decimal_number(self):
        assert mathml_of("3.14") == "<mn>3.14</mn>"

    def test_relations(self):
        assert mathml_of("a\\leq b") == "<mrow><mi>a</mi><mo>≤</mo><mi>b</mi></mrow>"


def token_multiset(root) -> Counter:
    formula = Formula(canonicalize(root), FormulaKind.PRESENTATION, (0, 1), 0)
    return Counter((t.term, t.variant, t.depth, t.weight) for t in tokenize_formula(formula))


# LaTeX spelling paired with an equivalent MathML spelling; the full math
# pipeline must produce identical token multisets for each pair.
CROSS_REPRESENTATION_PAIRS = [
    ("b+a", "<mrow><mi>a</mi><mo>+</mo><mi>b</mi></mrow>"),
    ("x^2", "<msup><mi>x</mi><mn>2</mn></msup>"),
    ("\\frac{a}{b}", "<mfrac><mi>a</mi><mi>b</mi></mfrac>"),
    ("\\sqrt{x+y}", "<msqrt><mrow><mi>x</mi><mo>+</mo><mi>y</mi></mrow></msqrt>"),
    ("a\\cdot b", "<mrow><mi>a</mi><mo>&#x2062;</mo><mi>b</mi></mrow>"),
    ("ab", "<mrow><mi>a</mi><mo>*</mo><mi>b</mi></mrow>"),
    ("(a+b)", "<mfenced><mrow><mi>a</mi><mo>+</mo><mi>b</mi></mrow></mfenced>"),
    ("x_i", "<msub><mi>x</mi><mi>i</mi></msub>"),
    ("x_i^2", "<msubsup><mi>x</mi><mi>i</mi><mn>2</mn></msubsup>"),
    ("\\alpha+\\beta", "<mrow><mi>&alpha;</mi><mo>+</mo><mi>&beta;</mi></mrow>"),
    ("a-b", "<mrow><mi>a</mi><mo>&minus;</mo><mi>b</mi></mrow>"),
    ("a\\leq b", "<mrow><mi>a</mi><mo>&le;</mo><mi>b</mi></mrow>"),
    ("\\sin x", "<mrow><mi>sin</mi><mo>&af;</mo><mi>x</mi></mrow>"),
    ("\\frac{x+1}{2}",
     "<mfrac><mrow><mn>1</mn><mo>+</mo><mi>x</mi></mrow><mn>2</mn></mfrac>"),
    ("c(b+a)",
     "<mrow><mi>c</mi><mo>&it;</mo><mfenced><mrow><mi>b</mi><mo>+</mo><mi>a</mi></mrow></mfenced></mrow>"),
    ("\\frac{\\alpha}{2}+z", "<mrow><mi>z</mi><mo>+</mo><mfrac><mi>α</mi><mn>2</mn></mfrac></mrow>"),
    ("y=x", "<mrow><mi>x</mi><mo>=</mo><mi>y</mi></mrow>"),
]


class TestCrossRepresentation:
    @pytest.mark.parametrize("latex,mathml", CROSS_REPRESENTATION_PAIRS)
    def test_identical_token_multisets(self, latex, mathml):
        latex_tokens = token_multiset(latex_to_mathml(parse_latex(latex)))
        mathml_tokens = token_multiset(parse_mathml(mathml.encode()))
        assert latex_tokens == mathml_tokens

    def test_enough_pairs(self):
        assert len(CROSS_REPRESENTATION_PAIRS) >= 15

    def test_supported_commands_all_round_trip(self):
        fragments = [
            "\\alpha", "\\beta", "\\gamma", "\\delta", "\\epsilon", "\\zeta",
            "\\eta", "\\theta", "\\iota", "\\kappa", "\\lambda", "\\mu",
            "\\nu", "\\xi", "\\omicron", "\\pi", "\\rho", "\\sigma", "\\tau",
            "\\upsilon", "\\phi", "\\chi", "\\psi", "\\omega",
            "\\Gamma", "\\Delta", "\\Theta", "\\Lambda", "\\Xi", "\\Pi",
            "\\Sigma", "\\Upsilon", "\\Phi", "\\Psi", "\\Omega",
            "\\frac{a}{b}", "\\sqrt{x}", "\\sum x", "\\int x", "\\prod x",
            "a\\cdot b", "a\\times b", "a\\leq b", "a\\geq b", "a\\neq b",
            "\\infty", "\\sin x", "\\cos x", "\\tan x", "\\log x", "\\ln x",
            "\\exp x", "\\lim x", "x^2", "x_i", "a+b", "a-b", "a*b", "a/b",
            "a=b", "a<b", "a>b", "(a)", "[a]", "{a}", "\\left(a\\right)",
            "3.14", "42",
        ]
        for fragment in fragments:
            node = latex_to_canonical(fragment)
            assert serialize(node)
