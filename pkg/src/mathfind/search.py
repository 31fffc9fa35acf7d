"""Mixed text+math queries: parsing, ranked retrieval, and highlighting.

The math half of a query runs through the identical pipeline used at
indexing (canonicalize, order, tokenize, unify), so documents and queries
meet in the same term space.  Scoring is the classic tf-idf family with
length normalization, fixed so an exhaustive reference scorer can reproduce
it exactly:

    score(d) = sum_t qw(t) * sqrt(weighted_tf(t, d)) * idf(t)^2
               / sqrt(length_text(d) + length_math(d) + 1)
    idf(t)   = 1 + ln((N + 1) / (df(t) + 1))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .canonical import canonicalize
from .errors import EmptyQuery, MalformedXml, UnbalancedGroup, UnsupportedCommand
from .index import IndexReader
from .latex import latex_to_canonical
from .mathml import Formula, classify, find_islands, parse_mathml, representations
from .pipeline import PipelineConfig, tokenize_formula
from .text import tokenize_text

SNIPPET_BYTES = 300


class HighlightKind(str, Enum):
    TEXT = "text"
    MATH = "math"


@dataclass(frozen=True, slots=True)
class Query:
    text_terms: tuple[tuple[str, float], ...]
    math_terms: tuple[tuple[str, float], ...]
    raw: str


@dataclass(frozen=True, slots=True)
class SearchResult:
    doc_id: int
    score: float
    title: str
    path: str
    snippet: str
    highlights: tuple[tuple[tuple[int, int], HighlightKind], ...]


@dataclass(frozen=True, slots=True)
class HighlightResult:
    doc_spans: tuple[tuple[tuple[int, int], HighlightKind], ...]
    snippet: str
    snippet_spans: tuple[tuple[tuple[int, int], HighlightKind], ...]


def _math_terms_from_root(root, span: tuple[int, int], ordinal: int, config: PipelineConfig):
    formula = Formula(canonicalize(root), classify(root), span, ordinal)
    return [(t.term, t.weight) for t in tokenize_formula(formula, config)]


def parse_query(input: str, math_format: str = "latex", config: PipelineConfig | None = None) -> Query:
    """Split a query into text and delimited math segments and analyze both.

    latex mode delimits math with $...$; mathml mode with inline
    <math>...</math> islands.  Parse errors carry offsets rebased to the
    whole query string.
    """
    if math_format not in ("latex", "mathml"):
        raise ValueError(f"unknown math format {math_format!r}")
    config = config or PipelineConfig()
    if not input.strip():
        raise EmptyQuery("query is empty")

    math_terms: list[tuple[str, float]] = []
    if math_format == "latex":
        text_only, segments = _split_dollars(input)
        for ordinal, (fragment, offset) in enumerate(segments):
            try:
                root = latex_to_canonical(fragment)
            except UnsupportedCommand as e:
                raise UnsupportedCommand(e.command, e.position + offset) from None
            except UnbalancedGroup as e:
                raise UnbalancedGroup(e.position + offset, e.detail) from None
            math_terms.extend(
                _math_terms_from_root(root, (offset, offset + len(fragment)), ordinal, config)
            )
    else:
        data = input.encode("utf-8")
        islands = find_islands(data)
        blanked = bytearray(data)
        for ordinal, (start, end) in enumerate(islands):
            try:
                math_root = parse_mathml(data[start:end])
            except MalformedXml as e:
                raise MalformedXml(start + e.position, e.reason) from None
            for rep in representations(math_root):
                math_terms.extend(_math_terms_from_root(rep, (start, end), ordinal, config))
            blanked[start:end] = b" " * (end - start)
        text_only = blanked.decode("utf-8", errors="replace")

    text_terms = tuple((t.term, 1.0) for t in tokenize_text(text_only))
    if not text_terms and not math_terms:
        raise EmptyQuery("query has no searchable terms after analysis")
    return Query(text_terms, tuple(math_terms), input)


def _split_dollars(input: str) -> tuple[str, list[tuple[str, int]]]:
    """Replace $...$ segments with spaces; return (text remainder, [(fragment,
    offset in query)])."""
    segments: list[tuple[str, int]] = []
    out = list(input)
    pos = 0
    while True:
        start = input.find("$", pos)
        if start < 0:
            break
        end = input.find("$", start + 1)
        if end < 0:
            raise UnbalancedGroup(start, "unterminated math delimiter '$'")
        segments.append((input[start + 1:end], start + 1))
        for i in range(start, end + 1):
            out[i] = " "
        pos = end + 1
    return "".join(out), segments


def _collapsed_weights(reader: IndexReader, query: Query) -> dict[bytes, float]:
    """Query weight per namespaced term, summed over occurrences, in first
    occurrence order."""
    weights: dict[bytes, float] = {}
    for term, weight in query.text_terms:
        key = reader.term_key(term, math=False)
        weights[key] = weights.get(key, 0.0) + weight
    for term, weight in query.math_terms:
        key = reader.term_key(term, math=True)
        weights[key] = weights.get(key, 0.0) + weight
    return weights


def execute(
    reader: IndexReader, query: Query, top_k: int = 10, offset: int = 0
) -> tuple[list[SearchResult], int]:
    """Rank documents against the query; returns (page of results, total hit
    count).  Deterministic: ties break by ascending doc id."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    offset = max(0, offset)
    n_docs = reader.doc_count
    if n_docs == 0:
        return [], 0

    acc = np.zeros(n_docs, dtype=np.float64)
    matched = np.zeros(n_docs, dtype=bool)
    for key, qw in _collapsed_weights(reader, query).items():
        arrays = reader.term_arrays(key)
        if arrays is None:
            continue
        ids, tfs = arrays
        idf = 1.0 + math.log((n_docs + 1) / (ids.size + 1))
        acc[ids] += (qw * idf * idf) * np.sqrt(tfs)
        matched[ids] = True

    doc_ids = np.flatnonzero(matched)
    if doc_ids.size == 0:
        return [], 0
    scores = acc[doc_ids] / np.sqrt(reader.doc_lengths[doc_ids] + 1.0)
    order = np.lexsort((doc_ids, -scores))
    ranked_ids = doc_ids[order]
    ranked_scores = scores[order]

    total = int(ranked_ids.size)
    page = range(offset, min(offset + top_k, total))
    results: list[SearchResult] = []
    for i in page:
        doc_id = int(ranked_ids[i])
        detail = highlight(reader, doc_id, query)
        results.append(
            SearchResult(
                doc_id=doc_id,
                score=float(ranked_scores[i]),
                title=reader.titles[doc_id],
                path=reader.paths[doc_id],
                snippet=detail.snippet,
                highlights=detail.snippet_spans,
            )
        )
    return results, total


def _snap_utf8(body: bytes, pos: int, forward: bool) -> int:
    """Move pos onto a UTF-8 character boundary."""
    n = len(body)
    pos = max(0, min(pos, n))
    while 0 < pos < n and (body[pos] & 0xC0) == 0x80:
        pos += 1 if forward else -1
    return pos


def highlight(reader: IndexReader, doc_id: int, query: Query) -> HighlightResult:
    """Occurrence spans for every matched query term plus a snippet window
    chosen to cover as many distinct matched terms as possible.

    Math hits always cover the whole <math> island recorded at indexing.
    """
    record = reader.doc(doc_id)
    body = record.stored_body

    found: list[tuple[tuple[int, int], HighlightKind, bytes]] = []
    seen_keys: set[bytes] = set()
    for terms, math_kind in ((query.text_terms, False), (query.math_terms, True)):
        for term, _ in terms:
            key = reader.term_key(term, math=math_kind)
            if key in seen_keys:
                continue
            seen_keys.add(key)
            for span in reader.term_spans(key, doc_id):
                found.append((span, HighlightKind.MATH if math_kind else HighlightKind.TEXT, key))

    if not found:
        end = _snap_utf8(body, SNIPPET_BYTES, forward=False)
        return HighlightResult((), body[:end].decode("utf-8", errors="replace"), ())

    # distinct (span, kind); math islands matched by several tokens collapse
    uniq: dict[tuple[tuple[int, int], HighlightKind], None] = {}
    for span, kind, _ in found:
        uniq.setdefault((span, kind))
    doc_spans = tuple(sorted(uniq, key=lambda sk: (sk[0], sk[1].value)))

    window_start = _best_window(sorted(found, key=lambda f: f[0]))
    window_start = _snap_utf8(body, window_start, forward=True)
    window_end = _snap_utf8(body, window_start + SNIPPET_BYTES, forward=False)
    snippet = body[window_start:window_end].decode("utf-8", errors="replace")

    snippet_spans: list[tuple[tuple[int, int], HighlightKind]] = []
    for (start, end), kind in doc_spans:
        clip_start = max(start, window_start)
        clip_end = min(end, window_end)
        if clip_start < clip_end:
            snippet_spans.append(((clip_start - window_start, clip_end - window_start), kind))
    return HighlightResult(doc_spans, snippet, tuple(snippet_spans))


def _best_window(found: list[tuple[tuple[int, int], HighlightKind, bytes]]) -> int:
    """Start byte of a SNIPPET_BYTES window maximizing distinct matched terms
    (earliest window wins ties); spans are sorted by start."""
    best_start = found[0][0][0]
    best_count = -1
    for i in range(len(found)):
        anchor = found[i][0][0]
        terms: set[bytes] = set()
        for span, _, key in found[i:]:
            if span[1] - anchor > SNIPPET_BYTES:
                break
            terms.add(key)
        if len(terms) > best_count:
            best_count = len(terms)
            best_start = anchor
    # leave a little leading context when the window has room
    span_end_max = max(
        (e for (s, e), _, _ in found if s >= best_start and e - best_start <= SNIPPET_BYTES),
        default=best_start,
    )
    slack = SNIPPET_BYTES - (span_end_max - best_start)
    return max(0, best_start - min(40, max(0, slack)))
