"""Deterministic synthetic XHTML+MathML corpora for tests and benchmarks.

Same seed, same bytes.  The manifest records, per document, the exact
formula count and the expected number of index terms per formula, computed
by a brute-force counter that never touches the tokenization pipeline, so
index statistics can be checked against ground truth.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .canonical import MINUS, TIMES
from .errors import IoFailure, MathfindError
from .mathml import MathNode, serialize
from .pipeline import PipelineConfig

MANIFEST_FILENAME = "manifest.json"

# word list chosen so every stem is a fixed point of the stemmer
VOCABULARY = """energy conservation momentum theorem integral derivative
matrix vector tensor polynomial equation function boundary condition
solution numerical analysis algebra geometry topology calculus sequence
series convergence limit continuity measure probability statistics random
variable distribution density kernel operator spectrum eigenvalue norm
metric space linear transform gradient divergence flux potential field wave
particle quantum classical symmetry group ring lattice graph network node
edge path cycle optimal bound estimate error approximation iteration stable
proof lemma corollary axiom""".split()

_IDENTIFIERS = "abcdefghkmnpqrstuvwxyz"
_OPERATORS = ["+", MINUS, TIMES, "+", "+"]


class NonEmptyDir(MathfindError):
    """Target directory already contains files."""


@dataclass(frozen=True)
class CorpusProfile:
    mean_formulae_per_doc: float = 4.0
    mean_words_per_doc: float = 60.0
    max_formula_depth: int = 3


def _leaf(rng: random.Random) -> MathNode:
    if rng.random() < 0.65:
        return MathNode("mi", (), (), rng.choice(_IDENTIFIERS))
    return MathNode("mn", (), (), str(rng.randint(0, 99)))


def _formula(rng: random.Random, depth: int) -> MathNode:
    if depth <= 0 or rng.random() < 0.3:
        return _leaf(rng)
    pick = rng.random()
    if pick < 0.5:
        arity = rng.randint(2, 3)
        op = rng.choice(_OPERATORS)
        children: list[MathNode] = []
        for i in range(arity):
            if i:
                children.append(MathNode("mo", (), (), op))
            children.append(_formula(rng, depth - 1))
        return MathNode("mrow", (), tuple(children))
    if pick < 0.75:
        return MathNode("mfrac", (), (_formula(rng, depth - 1), _formula(rng, depth - 1)))
    return MathNode("msup", (), (_formula(rng, depth - 1), _leaf(rng)))


def expected_token_count(root: MathNode, config: PipelineConfig | None = None) -> int:
    """Brute-force count of the index terms one formula will produce.

    Walks subtrees with an explicit queue and applies the variant-suppression
    arithmetic directly: a subtree yields one exact term, one more per
    generalization that changes it, and a fourth when both do.
    """
    config = config or PipelineConfig()
    total = 0
    queue = deque([(root, 0)])
    while queue:
        node, depth = queue.popleft()
        if config.max_depth is not None and depth > config.max_depth:
            continue
        countable = (
            depth == 0
            or (node.name not in ("mo",)
                and (node.name not in ("mi", "mn", "ci", "cn") or config.index_leaves))
        )
        if countable:
            has_var = False
            has_const = False
            stack = [node]
            while stack:
                inner = stack.pop()
                if inner.name in ("mi", "ci"):
                    has_var = True
                elif inner.name in ("mn", "cn"):
                    has_const = True
                stack.extend(inner.children)
            total += 1 + int(has_var) + int(has_const) + int(has_var and has_const)
        for child in node.children:
            queue.append((child, depth + 1))
    return total


_DOC_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<html xmlns="http://www.w3.org/1999/xhtml">
<head><title>{title}</title></head>
<body>
{paragraphs}
</body>
</html>
"""


def generate_corpus(
    seed: int,
    num_docs: int,
    out_dir: str | Path,
    profile: CorpusProfile | None = None,
) -> dict:
    """Write num_docs synthetic documents plus manifest.json; returns the
    manifest."""
    profile = profile or CorpusProfile()
    out = Path(out_dir)
    try:
        if out.exists():
            if any(out.iterdir()):
                raise NonEmptyDir(f"{out} is not empty")
        else:
            out.mkdir(parents=True)
    except OSError as e:
        raise IoFailure(f"cannot prepare corpus directory: {e}") from None

    rng = random.Random(seed)
    documents = []
    total_formulae = 0
    total_tokens = 0
    for doc_no in range(num_docs):
        n_formulae = _spread(rng, profile.mean_formulae_per_doc)
        n_words = max(4, _spread(rng, profile.mean_words_per_doc))
        formulas = [_formula(rng, profile.max_formula_depth) for _ in range(n_formulae)]
        token_counts = [expected_token_count(f) for f in formulas]

        words = [rng.choice(VOCABULARY) for _ in range(n_words)]
        paragraphs = _layout(rng, words, formulas)
        title = f"Synthetic document {doc_no}"
        content = _DOC_TEMPLATE.format(title=title, paragraphs=paragraphs)

        name = f"doc-{doc_no:05d}.xhtml"
        try:
            (out / name).write_bytes(content.encode("utf-8"))
        except OSError as e:
            raise IoFailure(f"cannot write {name}: {e}") from None

        documents.append(
            {
                "path": name,
                "formulae": n_formulae,
                "math_tokens": sum(token_counts),
                "tokens_per_formula": token_counts,
            }
        )
        total_formulae += n_formulae
        total_tokens += sum(token_counts)

    manifest = {
        "seed": seed,
        "num_docs": num_docs,
        "profile": {
            "mean_formulae_per_doc": profile.mean_formulae_per_doc,
            "mean_words_per_doc": profile.mean_words_per_doc,
            "max_formula_depth": profile.max_formula_depth,
        },
        "total_formulae": total_formulae,
        "total_math_tokens": total_tokens,
        "documents": documents,
    }
    try:
        (out / MANIFEST_FILENAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as e:
        raise IoFailure(f"cannot write manifest: {e}") from None
    return manifest


def _spread(rng: random.Random, mean: float) -> int:
    low = int(mean * 0.5)
    high = int(mean * 1.5)
    if high <= low:
        return max(0, int(mean))
    return rng.randint(low, high)


def _layout(rng: random.Random, words: list[str], formulas: list[MathNode]) -> str:
    """Interleave word runs and math islands into <p> paragraphs."""
    islands = [
        f'<math xmlns="http://www.w3.org/1998/Math/MathML">{serialize(f)}</math>'
        for f in formulas
    ]
    pieces: list[str] = []
    word_idx = 0
    slots = len(islands) + 1
    per_slot = max(1, len(words) // slots)
    for island in islands:
        take = min(per_slot, len(words) - word_idx)
        pieces.append(" ".join(words[word_idx:word_idx + take]))
        word_idx += take
        pieces.append(island)
    pieces.append(" ".join(words[word_idx:]))

    text = " ".join(p for p in pieces if p)
    # split into a few paragraphs at word boundaries for realistic hosts
    n_paras = rng.randint(1, 3)
    if n_paras == 1:
        return f"<p>{text}</p>"
    parts = text.split("</math>")
    if len(parts) < n_paras:
        return f"<p>{text}</p>"
    chunk = len(parts) // n_paras
    paras = []
    for i in range(n_paras):
        start = i * chunk
        end = None if i == n_paras - 1 else (i + 1) * chunk
        segment = "</math>".join(parts[start:end])
        if end is not None and segment:
            segment += "</math>"
        if segment.strip():
            paras.append(f"<p>{segment}</p>")
    return "\n".join(paras)
