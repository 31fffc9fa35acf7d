import math
import random

import pytest

from mathfind.errors import EmptyQuery, MalformedXml, UnbalancedGroup, UnsupportedCommand
from mathfind.index import create_index, open_index, prepare_document
from mathfind.latex import latex_to_canonical
from mathfind.mathml import Formula, FormulaKind
from mathfind.pipeline import PipelineConfig, tokenize_formula
from mathfind.search import (
    HighlightKind,
    Query,
    execute,
    highlight,
    parse_query,
)
from oracles import reference_ranking

VOCAB = [
    "energy", "momentum", "theorem", "integral", "boundary", "spectrum",
    "kernel", "lattice", "gradient", "manifold", "operator", "tensor",
]
LATEX_POOL = [
    "x+y", "x^2", "\\frac{a}{b}", "\\sqrt{z}", "a\\cdot b", "x+2",
    "\\alpha+\\beta", "p_i", "\\frac{x+y}{2}", "k=n+1",
]


def xhtml_doc(title: str, text: str, formulas: list[str]) -> bytes:
    maths = " ".join(
        f'<math xmlns="http://www.w3.org/1998/Math/MathML">{m}</math>' for m in formulas
    )
    return (
        f'<?xml version="1.0"?><html xmlns="http://www.w3.org/1999/xhtml">'
        f"<head><title>{title}</title></head>"
        f"<body><p>{text} {maths}</p></body></html>"
    ).encode()


def latex_islands(fragments: list[str]) -> list[str]:
    from mathfind.mathml import serialize

    return [serialize(latex_to_canonical(f)) for f in fragments]


def build_index(tmp_path, docs: list[bytes], name="idx", config=None):
    writer = create_index(tmp_path / name, config=config)
    prepared_all = []
    for i, body in enumerate(docs):
        prepared = prepare_document(body, config)
        prepared_all.append((prepared.text_tokens, prepared.math_tokens))
        writer.add_document(
            f"doc{i}.xhtml",
            prepared.text_tokens,
            prepared.math_tokens,
            title=prepared.title,
            body=body,
            formula_count=prepared.formula_count,
        )
    writer.commit()
    return open_index(tmp_path / name), prepared_all


class TestParseQuery:
    def test_text_only(self):
        q = parse_query("continuous function")
        assert len(q.text_terms) == 2
        assert q.math_terms == ()

    def test_mixed_latex(self):
        q = parse_query("norm $\\frac{a}{b}$")
        assert [t for t, _ in q.text_terms] == ["norm"]
        root = latex_to_canonical("\\frac{a}{b}")
        expected = [
            (t.term, t.weight)
            for t in tokenize_formula(Formula(root, FormulaKind.PRESENTATION, (6, 17), 0))
        ]
        assert list(q.math_terms) == expected

    def test_mathml_mode(self):
        q = parse_query(
            "energy <math><mrow><mi>a</mi><mo>+</mo><mi>b</mi></mrow></math>",
            math_format="mathml",
        )
        assert [t for t, _ in q.text_terms] == ["energi"]
        assert any("<mrow>" in t for t, _ in q.math_terms)

    def test_unsupported_command_offset_rebased(self):
        with pytest.raises(UnsupportedCommand) as exc:
            parse_query("norm $\\foo$")
        assert exc.value.position == 6

    def test_malformed_mathml_offset_rebased(self):
        query = "pad <math><mi>x</mo></math>"
        with pytest.raises(MalformedXml) as exc:
            parse_query(query, math_format="mathml")
        assert exc.value.position >= query.find("<math>")

    def test_unterminated_dollar(self):
        with pytest.raises(UnbalancedGroup) as exc:
            parse_query("energy $x+y")
        assert exc.value.position == 7

    def test_empty_and_stopword_only(self):
        with pytest.raises(EmptyQuery):
            parse_query("   ")
        with pytest.raises(EmptyQuery):
            parse_query("of the")

    def test_weights_positive_bounded(self):
        q = parse_query("$\\frac{x+y}{2}$")
        assert all(0 < w <= 1.0 for _, w in q.math_terms)


class TestExecute:
    def test_absent_term_zero_hits(self, tmp_path):
        reader, _ = build_index(tmp_path, [xhtml_doc("t", "energy theorem", [])])
        results, total = execute(reader, parse_query("xylophone"))
        assert results == [] and total == 0

    def test_three_doc_hand_scores(self, tmp_path):
        # single-letter titles drop out of the token stream, so lengths are
        # exactly the body word counts
        reader, _ = build_index(
            tmp_path,
            [
                xhtml_doc("x", "energy theorem", []),
                xhtml_doc("x", "energy energy", []),
                xhtml_doc("x", "momentum", []),
            ],
        )
        results, total = execute(reader, parse_query("energy"))
        assert total == 2
        idf = 1.0 + math.log(4 / 3)
        expected_d1 = idf * idf * math.sqrt(2.0) / math.sqrt(3.0)
        expected_d0 = idf * idf * math.sqrt(1.0) / math.sqrt(3.0)
        assert [r.doc_id for r in results] == [1, 0]
        assert results[0].score == pytest.approx(expected_d1, rel=1e-12)
        assert results[1].score == pytest.approx(expected_d0, rel=1e-12)

    def test_exact_match_outranks_unified(self, tmp_path):
        reader, _ = build_index(
            tmp_path,
            [
                xhtml_doc("exact", "pad", latex_islands(["x+y"])),
                xhtml_doc("unified", "pad", latex_islands(["a+b"])),
            ],
        )
        results, total = execute(reader, parse_query("$x+y$"))
        assert total == 2
        assert [r.doc_id for r in results] == [0, 1]
        assert results[0].score > results[1].score

    def test_adding_matching_term_never_lowers_score(self, tmp_path):
        reader, _ = build_index(
            tmp_path,
            [
                xhtml_doc("d0", "energy", []),
                xhtml_doc("d1", "energy momentum", []),
            ],
        )
        one, _ = execute(reader, parse_query("energy momentum"))
        only_energy, _ = execute(reader, parse_query("energy"))
        score_one = {r.doc_id: r.score for r in one}
        score_energy = {r.doc_id: r.score for r in only_energy}
        assert score_one[1] >= score_energy[1]

    def test_deterministic_across_runs(self, tmp_path):
        docs = [
            xhtml_doc(f"d{i}", " ".join(VOCAB[i % 4: i % 4 + 3]), latex_islands([LATEX_POOL[i % 5]]))
            for i in range(12)
        ]
        reader, _ = build_index(tmp_path, docs)
        q = parse_query("energy $x+y$")
        first = [(r.doc_id, r.score) for r in execute(reader, q, top_k=12)[0]]
        for _ in range(3):
            again = [(r.doc_id, r.score) for r in execute(reader, q, top_k=12)[0]]
            assert again == first

    def test_pagination_concatenation(self, tmp_path):
        docs = [
            xhtml_doc(f"d{i}", "shared " + VOCAB[i % len(VOCAB)], [])
            for i in range(17)
        ]
        reader, _ = build_index(tmp_path, docs)
        q = parse_query("shared")
        full, total = execute(reader, q, top_k=17)
        assert total == 17
        pages = []
        for off in range(0, 17, 5):
            page, page_total = execute(reader, q, top_k=5, offset=off)
            assert page_total == 17
            pages.extend(page)
        assert [r.doc_id for r in pages] == [r.doc_id for r in full]

    def test_offset_beyond_hits(self, tmp_path):
        reader, _ = build_index(tmp_path, [xhtml_doc("d", "energy", [])])
        results, total = execute(reader, parse_query("energy"), top_k=10, offset=50)
        assert results == [] and total == 1

    def test_ranking_matches_reference_scorer(self, tmp_path):
        rng = random.Random(90210)
        for case in range(25):
            n_docs = rng.randint(1, 14)
            bodies = []
            for d in range(n_docs):
                words = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 12)))
                formulas = latex_islands(
                    [rng.choice(LATEX_POOL) for _ in range(rng.randint(0, 3))]
                )
                bodies.append(xhtml_doc(f"d{d}", words, formulas))
            reader, prepared = build_index(tmp_path, bodies, name=f"idx{case}")
            parts = [rng.choice(VOCAB) for _ in range(rng.randint(0, 2))]
            if rng.random() < 0.8:
                parts.append(f"${rng.choice(LATEX_POOL)}$")
            if not parts:
                parts = ["energy"]
            query = parse_query(" ".join(parts))
            engine = [r.doc_id for r in execute(reader, query, top_k=n_docs)[0]]
            assert engine == reference_ranking(prepared, query)[: len(engine)]
            expected_total = len(reference_ranking(prepared, query))
            assert execute(reader, query, top_k=n_docs)[1] == expected_total
            reader.close()


THREE_FORMULAS = ["a+b", "x^2", "\\frac{p}{q}"]


class TestHighlight:
    def test_no_match_leading_snippet(self, tmp_path):
        body = xhtml_doc("d", "energy " * 50, [])
        reader, _ = build_index(tmp_path, [body])
        detail = highlight(reader, 0, parse_query("unmatched"))
        assert detail.doc_spans == ()
        assert detail.snippet
        assert body.decode().startswith(detail.snippet[:20])

    def test_text_term_matched_twice(self, tmp_path):
        body = xhtml_doc("d", "energy flows where energy goes", [])
        reader, _ = build_index(tmp_path, [body])
        detail = highlight(reader, 0, parse_query("energy"))
        text_spans = [s for s, k in detail.doc_spans if k == HighlightKind.TEXT]
        assert len(text_spans) == 2
        for start, end in text_spans:
            assert body[start:end] == b"energy"

    def test_math_query_hits_second_island_only(self, tmp_path):
        # leaf indexing off keeps single-variable/digit tokens from
        # cross-matching the other islands
        config = PipelineConfig(index_leaves=False)
        body = xhtml_doc("d", "pad words", latex_islands(THREE_FORMULAS))
        reader, _ = build_index(tmp_path, [body], config=config)
        detail = highlight(reader, 0, parse_query("$x^2$", config=config))
        math_spans = [s for s, k in detail.doc_spans if k == HighlightKind.MATH]
        assert len(math_spans) == 1
        start, end = math_spans[0]
        island = body[start:end]
        assert island.startswith(b"<math") and island.endswith(b"</math>")
        assert b"msup" in island

    def test_snippet_contains_highlight(self, tmp_path):
        body = xhtml_doc("d", "x " * 200 + " energy appears late", [])
        reader, _ = build_index(tmp_path, [body])
        result, _ = execute(reader, parse_query("energy"))
        top = result[0]
        assert top.highlights
        (start, end), kind = top.highlights[0]
        assert top.snippet.encode()[start:end] == b"energy"
        assert kind == HighlightKind.TEXT

    def test_snippet_bounded(self, tmp_path):
        body = xhtml_doc("d", "energy " * 400, [])
        reader, _ = build_index(tmp_path, [body])
        detail = highlight(reader, 0, parse_query("energy"))
        assert len(detail.snippet.encode()) <= 300
        for (start, end), _ in detail.snippet_spans:
            assert 0 <= start < end <= len(detail.snippet.encode())

    def test_representation_invariant_rankings(self, tmp_path):
        docs = [
            xhtml_doc(f"d{i}", "pad", latex_islands([LATEX_POOL[i % len(LATEX_POOL)]]))
            for i in range(8)
        ]
        reader, _ = build_index(tmp_path, docs)
        latex_q = parse_query("$\\frac{a}{b}$")
        mathml_q = parse_query(
            "<math><mfrac><mi>a</mi><mi>b</mi></mfrac></math>", math_format="mathml"
        )
        latex_rank = [(r.doc_id, r.score) for r in execute(reader, latex_q, top_k=8)[0]]
        mathml_rank = [(r.doc_id, r.score) for r in execute(reader, mathml_q, top_k=8)[0]]
        assert latex_rank == mathml_rank
