"""Independent reference implementations used as test oracles.

The reference scorer consumes the same analyzed token lists handed to the
index writer and computes rankings by direct arithmetic over dictionaries,
touching none of the index or search machinery.
"""

from __future__ import annotations

import math

import numpy as np

from mathfind.pipeline import MathToken
from mathfind.search import Query
from mathfind.text import TextToken


def reference_ranking(
    docs: list[tuple[list[TextToken], list[MathToken]]], query: Query
) -> list[int]:
    """Exhaustive scorer: returns matched doc ids ranked like the engine.

    Weighted term frequencies quantize through float32 exactly as the index
    stores them.
    """
    n = len(docs)
    doc_tfs: list[dict[tuple[str, str], float]] = []
    lengths: list[int] = []
    for text_tokens, math_tokens in docs:
        tf: dict[tuple[str, str], float] = {}
        for token in text_tokens:
            key = ("t", token.term)
            tf[key] = tf.get(key, 0.0) + 1.0
        sums: dict[tuple[str, str], float] = {}
        for token in math_tokens:
            key = ("m", token.term)
            sums[key] = sums.get(key, 0.0) + token.weight
        for key, value in sums.items():
            tf[key] = float(np.float32(value))
        for key in list(tf):
            if key[0] == "t":
                tf[key] = float(np.float32(tf[key]))
        doc_tfs.append(tf)
        lengths.append(len(text_tokens) + len(math_tokens))

    df: dict[tuple[str, str], int] = {}
    for tf in doc_tfs:
        for key in tf:
            df[key] = df.get(key, 0) + 1

    weights: dict[tuple[str, str], float] = {}
    for term, weight in query.text_terms:
        key = ("t", term)
        weights[key] = weights.get(key, 0.0) + weight
    for term, weight in query.math_terms:
        key = ("m", term)
        weights[key] = weights.get(key, 0.0) + weight

    scored: list[tuple[float, int]] = []
    for doc_id in range(n):
        tf = doc_tfs[doc_id]
        acc = 0.0
        hit = False
        for key, qw in weights.items():
            wtf = tf.get(key)
            if wtf is None:
                continue
            hit = True
            idf = 1.0 + math.log((n + 1) / (df[key] + 1))
            acc += (qw * idf * idf) * math.sqrt(wtf)
        if hit:
            scored.append((acc / math.sqrt(lengths[doc_id] + 1.0), doc_id))

    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [doc_id for _, doc_id in scored]
