"""Command-line interface: index a dataset directory, search it, inspect
stats, generate synthetic corpora, run pipeline debug stages, and serve."""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .canonical import canonicalize
from .corpus import CorpusProfile, NonEmptyDir, generate_corpus
from .errors import (
    EmptyQuery,
    IndexCorrupt,
    IndexExists,
    IoFailure,
    MalformedXml,
    MathfindError,
    UnbalancedGroup,
    UnsupportedCommand,
)
from .index import IndexStats, create_index, open_index, prepare_document
from .latex import latex_to_canonical
from .mathml import parse_mathml, serialize
from .pipeline import PipelineConfig, tokenize_formula
from .search import execute, parse_query

logger = logging.getLogger("mathfind")

DATASET_SUFFIXES = {".xhtml", ".html", ".xml"}


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        max_depth=args.max_depth,
        index_leaves=not args.no_index_leaves,
    )


def _add_pipeline_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--alpha", type=float, default=0.7, help="depth decay factor")
    parser.add_argument("--beta", type=float, default=0.8, help="variable-unification penalty")
    parser.add_argument("--gamma", type=float, default=0.8, help="constant-unification penalty")
    parser.add_argument("--max-depth", type=int, default=None, help="deepest subformula level to index")
    parser.add_argument("--no-index-leaves", action="store_true", help="skip identifier/number leaf terms")


def _prepare_file(payload: tuple[str, dict]) -> tuple[str, bytes, object] | tuple[str, None, str]:
    """Worker: read and analyze one file; returns an error string on failure."""
    path, config_dict = payload
    config = PipelineConfig(**config_dict)
    try:
        body = Path(path).read_bytes()
        prepared = prepare_document(body, config, host_format="html" if path.endswith(".html") else "xhtml")
        return path, body, prepared
    except (MathfindError, OSError) as e:
        return path, None, str(e)


def cmd_index(args) -> int:
    dataset = Path(args.dataset)
    index_dir = Path(args.index)
    try:
        config = _pipeline_config(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    if not dataset.is_dir():
        print(f"error: no indexable documents: dataset directory {dataset} not found", file=sys.stderr)
        return 1
    files = sorted(p for p in dataset.rglob("*") if p.suffix.lower() in DATASET_SUFFIXES)
    if not files:
        print("error: no indexable documents in dataset", file=sys.stderr)
        return 1

    if index_dir.exists() and any(index_dir.iterdir()):
        if not args.overwrite:
            print(f"error: index directory {index_dir} is not empty (use --overwrite)", file=sys.stderr)
            return 2
        shutil.rmtree(index_dir)
    try:
        writer = create_index(index_dir, config=config)
    except (IndexExists, IoFailure) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    from dataclasses import asdict

    payloads = [(str(p), asdict(config)) for p in files]
    indexed = 0
    skipped = 0

    def consume(result):
        nonlocal indexed, skipped
        path, body, prepared = result
        if body is None:
            logger.warning("skipping %s: %s", path, prepared)
            skipped += 1
            return
        rel = os.path.relpath(path, dataset)
        writer.add_document(
            rel,
            prepared.text_tokens,
            prepared.math_tokens,
            title=prepared.title or Path(path).stem,
            body=body,
            formula_count=prepared.formula_count,
        )
        indexed += 1

    threads = max(1, args.threads)
    if threads == 1:
        for payload in payloads:
            consume(_prepare_file(payload))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for result in pool.map(_prepare_file, payloads, chunksize=8):
                consume(result)

    if indexed == 0:
        print("error: no indexable documents could be parsed", file=sys.stderr)
        return 1
    stats = writer.commit()
    writer.close()
    _print_stats(stats, skipped)
    return 0


def _print_stats(stats: IndexStats, skipped: int | None = None):
    print(f"documents            {stats.documents}")
    print(f"input formulae       {stats.input_formulae}")
    print(f"indexed subformulae  {stats.indexed_subformulae}")
    print(f"wall time (s)        {stats.wall_time_seconds:.2f}")
    print(f"cpu time (s)         {stats.cpu_time_seconds:.2f}")
    if skipped:
        print(f"skipped files        {skipped}")


def _color_enabled() -> bool:
    return sys.stdout.isatty() and not os.environ.get("NO_COLOR")


def _mark_snippet(snippet: str, highlights, color: bool) -> str:
    data = snippet.encode("utf-8")
    pieces: list[bytes] = []
    open_mark = b"\x1b[1;33m>>" if color else b">>"
    close_mark = b"<<\x1b[0m" if color else b"<<"
    last = 0
    for (start, end), _kind in sorted(highlights, key=lambda h: h[0]):
        start = max(start, last)
        if start >= end:
            continue
        pieces.append(data[last:start])
        pieces.append(open_mark + data[start:end] + close_mark)
        last = end
    pieces.append(data[last:])
    merged = b"".join(pieces).decode("utf-8", errors="replace")
    return " ".join(merged.split())


def cmd_search(args) -> int:
    try:
        reader = open_index(args.index)
    except (IndexCorrupt, IoFailure) as e:
        print(f"error: cannot open index: {e}", file=sys.stderr)
        return 2
    try:
        query = parse_query(args.query, math_format=args.query_format, config=reader.pipeline_config)
    except (UnsupportedCommand, UnbalancedGroup, MalformedXml, EmptyQuery) as e:
        offset = getattr(e, "position", None)
        where = f" (offset {offset})" if offset is not None else ""
        print(f"error: invalid query{where}: {e}", file=sys.stderr)
        return 1
    results, total = execute(reader, query, top_k=args.top_k, offset=args.offset)

    if args.json:
        payload = [
            {
                "rank": args.offset + i + 1,
                "doc_id": r.doc_id,
                "score": r.score,
                "title": r.title,
                "path": r.path,
                "snippet": r.snippet,
                "highlights": [
                    {"start": s, "end": e, "kind": kind.value} for (s, e), kind in r.highlights
                ],
            }
            for i, r in enumerate(results)
        ]
        print(json.dumps(payload, indent=2))
    else:
        color = _color_enabled()
        print(f"{total} hit(s)")
        for i, r in enumerate(results):
            snippet = _mark_snippet(r.snippet, r.highlights, color)
            print(f"{args.offset + i + 1:3d}. {r.score:.4f} {r.path} — {snippet}")
    reader.close()
    return 0


def cmd_stats(args) -> int:
    try:
        reader = open_index(args.index)
    except (IndexCorrupt, IoFailure) as e:
        print(f"error: cannot open index: {e}", file=sys.stderr)
        return 2
    _print_stats(reader.stats())
    reader.close()
    return 0


def cmd_gen_corpus(args) -> int:
    profile = CorpusProfile(
        mean_formulae_per_doc=args.mean_formulae,
        mean_words_per_doc=args.mean_words,
        max_formula_depth=args.max_formula_depth,
    )
    try:
        manifest = generate_corpus(args.seed, args.docs, args.out, profile)
    except (NonEmptyDir, IoFailure) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {manifest['num_docs']} documents, {manifest['total_formulae']} formulae to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    index_dir = os.environ.get("MATHFIND_INDEX", args.index)
    bind = os.environ.get("MATHFIND_BIND", args.bind)
    if not index_dir:
        print("error: no index directory (flag --index or MATHFIND_INDEX)", file=sys.stderr)
        return 2
    ui_dir = os.environ.get("MATHFIND_UI", args.ui_dir)
    return serve(index_dir, bind, ui_dir)


def _read_stdin() -> str:
    data = sys.stdin.buffer.read()
    return data.decode("utf-8")


def cmd_canonicalize(_args) -> int:
    try:
        node = parse_mathml(_read_stdin().encode("utf-8"))
        print(serialize(canonicalize(node)))
        return 0
    except MalformedXml as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def cmd_tokenize(args) -> int:
    from .mathml import Formula, classify, representations

    try:
        config = _pipeline_config(args)
        source = _read_stdin().strip()
        if args.format == "latex":
            roots = [latex_to_canonical(source)]
        else:
            parsed = parse_mathml(source.encode("utf-8"))
            roots = [canonicalize(rep) for rep in representations(parsed)] or [canonicalize(parsed)]
        print(f"{'term':<60} {'variant':<14} {'depth':>5} {'weight':>8}")
        for root in roots:
            formula = Formula(root, classify(root), (0, len(source)), 0)
            for token in tokenize_formula(formula, config):
                print(f"{token.term:<60} {token.variant.value:<14} {token.depth:>5} {token.weight:>8.4f}")
        return 0
    except (MalformedXml, UnsupportedCommand, UnbalancedGroup, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def cmd_latex(_args) -> int:
    try:
        print(serialize(latex_to_canonical(_read_stdin().strip())))
        return 0
    except (UnsupportedCommand, UnbalancedGroup) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mathfind",
        description="Math-aware full-text search over XHTML/HTML documents with MathML formulae.",
    )
    parser.add_argument("--version", action="version", version=f"mathfind {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="index a dataset directory")
    p.add_argument("--dataset", required=True, help="directory of .xhtml/.html/.xml files")
    p.add_argument("--index", required=True, help="index directory to create")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="parallel document-preparation workers")
    p.add_argument("--overwrite", action="store_true", help="replace an existing index")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="run a mixed text+math query")
    p.add_argument("--index", required=True)
    p.add_argument("query", help="query string; math inside $...$ (latex) or <math>...</math> (mathml)")
    p.add_argument("--query-format", choices=("latex", "mathml"), default="latex")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("stats", help="print index statistics")
    p.add_argument("--index", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-corpus", help="generate a synthetic test corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-formulae", type=float, default=4.0)
    p.add_argument("--mean-words", type=float, default=60.0)
    p.add_argument("--max-formula-depth", type=int, default=3)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("serve", help="serve the HTTP search API and web UI")
    p.add_argument("--index", default=os.environ.get("MATHFIND_INDEX"))
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--ui-dir", default=None, help="static web UI bundle directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("canonicalize", help="debug: canonical MathML of stdin MathML")
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("tokenize", help="debug: token table for a stdin formula")
    p.add_argument("--format", choices=("latex", "mathml"), default="latex")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("latex", help="debug: MathML for a stdin LaTeX fragment")
    p.set_defaults(func=cmd_latex)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
