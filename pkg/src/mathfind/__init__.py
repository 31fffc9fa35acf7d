"""mathfind: math-aware full-text search with a self-contained inverted index.

Documents carrying MathML formulae are indexed alongside their text; queries
mix free text with LaTeX or MathML math fragments and return ranked,
highlight-annotated results.
"""

__version__ = "0.1.0"

from .canonical import canonicalize
from .errors import (
    DocNotFound,
    EmptyQuery,
    IndexCorrupt,
    IndexExists,
    IoFailure,
    MalformedXml,
    MathfindError,
    UnbalancedGroup,
    UnsupportedCommand,
)
from .index import (
    DocumentRecord,
    IndexReader,
    IndexStats,
    IndexWriter,
    Posting,
    create_index,
    open_index,
    prepare_document,
)
from .latex import latex_to_canonical, latex_to_mathml, parse_latex
from .mathml import Formula, FormulaKind, MathNode, extract_formulae, parse_mathml, serialize
from .pipeline import (
    MathToken,
    PipelineConfig,
    TokenVariant,
    extract_subformulae,
    order_operands,
    tokenize_formula,
    unify_constants,
    unify_variables,
)
from .search import Query, SearchResult, execute, highlight, parse_query
from .text import TextToken, stem, tokenize_text

__all__ = [
    "DocNotFound",
    "DocumentRecord",
    "EmptyQuery",
    "Formula",
    "FormulaKind",
    "IndexCorrupt",
    "IndexExists",
    "IndexReader",
    "IndexStats",
    "IndexWriter",
    "IoFailure",
    "MalformedXml",
    "MathNode",
    "MathToken",
    "MathfindError",
    "PipelineConfig",
    "Posting",
    "Query",
    "SearchResult",
    "TextToken",
    "TokenVariant",
    "UnbalancedGroup",
    "UnsupportedCommand",
    "canonicalize",
    "create_index",
    "execute",
    "extract_formulae",
    "extract_subformulae",
    "highlight",
    "latex_to_canonical",
    "latex_to_mathml",
    "open_index",
    "order_operands",
    "parse_latex",
    "parse_mathml",
    "parse_query",
    "prepare_document",
    "serialize",
    "stem",
    "tokenize_formula",
    "tokenize_text",
    "unify_constants",
    "unify_variables",
]
