"""Persistent inverted index: incremental writes, crash-safe commits, and
snapshot readers.

One index directory holds a checksummed MANIFEST naming immutable segment
files.  A commit flushes the in-memory segment, merges down to one segment
when more than eight accumulate, and swaps the manifest in two phases, so a
reader always sees the last committed state.  Text and math terms share one
dictionary behind a one-byte namespace prefix.
"""

from __future__ import annotations

import html
import logging
import mmap
import os
import re
import time
from bisect import bisect_left, bisect_right
from collections import OrderedDict
from dataclasses import asdict, dataclass, replace
from heapq import merge as heap_merge
from pathlib import Path
from threading import Lock
from typing import Callable, Iterator

import numpy as np

from .canonical import canonicalize
from .errors import DocNotFound, IndexCorrupt, IndexExists, IoFailure
from .mathml import extract_formulae
from .pipeline import MathToken, PipelineConfig, tokenize_formula
from .storage import (
    MANIFEST_NAME,
    decode_manifest,
    decode_postings,
    decode_terms,
    encode_manifest,
    encode_postings,
    encode_terms,
    fsync_dir,
    read_varint,
    write_varint,
)
from .text import TextToken, tokenize_text

logger = logging.getLogger(__name__)

TEXT_NS = b"t"
MATH_NS = b"m"

MAX_SEGMENTS = 8
FLUSH_DOC_LIMIT = 2048
FLUSH_POSTING_LIMIT = 600_000

STATS_NAME = "stats.json"

_TITLE_RE = re.compile(rb"<title[^>]*>(.*?)</title>", re.IGNORECASE | re.DOTALL)
_MARKUP_RE = re.compile(rb"<[^>]*>|&[#A-Za-z0-9]+;")


@dataclass
class IndexStats:
    documents: int = 0
    input_formulae: int = 0
    indexed_subformulae: int = 0
    wall_time_seconds: float = 0.0
    cpu_time_seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "IndexStats":
        return cls(**{k: data[k] for k in cls().to_dict()})


@dataclass(frozen=True, slots=True)
class DocumentRecord:
    doc_id: int
    path: str
    title: str
    length_text: int
    length_math: int
    stored_body: bytes


@dataclass(frozen=True, slots=True)
class Posting:
    doc_id: int
    weighted_tf: float
    occurrences: tuple[tuple[int, int], ...]


@dataclass(frozen=True, slots=True)
class PreparedDocument:
    """Analysis output for one file, ready for the sequential writer."""

    title: str
    text_tokens: list[TextToken]
    math_tokens: list[MathToken]
    formula_count: int


def extract_title(body: bytes) -> str | None:
    match = _TITLE_RE.search(body)
    if not match:
        return None
    raw = match.group(1).decode("utf-8", errors="replace")
    cleaned = " ".join(html.unescape(re.sub(r"<[^>]*>", " ", raw)).split())
    return cleaned or None


def prepare_document(
    body: bytes, config: PipelineConfig | None = None, host_format: str = "xhtml"
) -> PreparedDocument:
    """Run the full analysis pipeline over one host document.

    Math islands are tokenized through canonicalize/order/unify; the
    remaining text is tokenized with islands blanked out so byte spans still
    reference the original file.
    """
    config = config or PipelineConfig()
    formulae = extract_formulae(body, format=host_format)

    math_tokens: list[MathToken] = []
    for formula in formulae:
        canonical = replace(formula, root=canonicalize(formula.root))
        math_tokens.extend(tokenize_formula(canonical, config))

    # blank islands, then tags and entity refs, all length-preserving so
    # token spans still index the original bytes
    blanked = bytearray(body)
    islands = {f.doc_span for f in formulae}
    for start, end in islands:
        blanked[start:end] = b" " * (end - start)
    for match in _MARKUP_RE.finditer(bytes(blanked)):
        blanked[match.start():match.end()] = b" " * (match.end() - match.start())
    text_tokens = tokenize_text(blanked.decode("utf-8", errors="replace"))

    ordinals = {f.ordinal for f in formulae}
    return PreparedDocument(
        title=extract_title(body) or "",
        text_tokens=text_tokens,
        math_tokens=math_tokens,
        formula_count=len(ordinals),
    )


def _seg_paths(directory: Path, sid: int) -> dict[str, Path]:
    base = f"seg_{sid:06d}"
    return {ext: directory / f"{base}.{ext}" for ext in ("terms", "post", "docs", "didx")}


def _encode_doc_record(path: str, title: str, length_text: int, length_math: int, body: bytes) -> bytes:
    out = bytearray()
    for blob in (path.encode("utf-8"), title.encode("utf-8")):
        write_varint(out, len(blob))
        out += blob
    write_varint(out, length_text)
    write_varint(out, length_math)
    write_varint(out, len(body))
    out += body
    return bytes(out)


class IndexWriter:
    """Single-writer handle produced by create_index.

    Documents accumulate in memory and spill to disk segments; nothing is
    visible to readers until commit().  ``crash_hook`` is a test seam invoked
    between the IO steps of flush/commit.
    """

    def __init__(
        self,
        directory: str | os.PathLike,
        crash_hook: Callable[[str], None] | None = None,
        config: PipelineConfig | None = None,
    ):
        self.directory = Path(directory)
        self._hook = crash_hook or (lambda stage: None)
        self.config = config or PipelineConfig()
        self._stats = IndexStats()
        self._committed: list[dict] = []
        self._flushed: list[dict] = []
        self._next_doc_id = 0
        self._next_segment_id = 0
        self._postings: dict[bytes, list[tuple[int, float, tuple[tuple[int, int], ...]]]] = {}
        self._pending_docs: list[bytes] = []
        self._pending_entries = 0
        self._wall_mark = time.perf_counter()
        self._cpu_mark = time.process_time()
        self._closed = False

    # -- ingest ---------------------------------------------------------

    def add_document(
        self,
        path: str,
        text_tokens: list[TextToken],
        math_tokens: list[MathToken],
        *,
        title: str = "",
        body: bytes = b"",
        formula_count: int | None = None,
    ) -> int:
        if self._closed:
            raise IoFailure("writer is closed")
        doc_id = self._next_doc_id
        self._next_doc_id += 1

        text_groups: dict[bytes, list[tuple[int, int]]] = {}
        for token in text_tokens:
            key = TEXT_NS + token.term.encode("utf-8")
            text_groups.setdefault(key, []).append(token.raw_span)
        for key, spans in text_groups.items():
            self._postings.setdefault(key, []).append((doc_id, float(len(spans)), tuple(spans)))

        math_groups: dict[bytes, tuple[float, set[tuple[int, int]]]] = {}
        for token in math_tokens:
            key = MATH_NS + token.term.encode("utf-8")
            weight, spans = math_groups.get(key, (0.0, set()))
            math_groups[key] = (weight + token.weight, spans | {token.doc_span})
        for key, (weight, spans) in math_groups.items():
            self._postings.setdefault(key, []).append((doc_id, weight, tuple(sorted(spans))))

        self._pending_entries += len(text_groups) + len(math_groups)
        self._pending_docs.append(
            _encode_doc_record(path, title, len(text_tokens), len(math_tokens), body)
        )

        if formula_count is None:
            formula_count = len({t.formula_ordinal for t in math_tokens})
        self._stats.documents += 1
        self._stats.input_formulae += formula_count
        self._stats.indexed_subformulae += len(math_tokens)

        if len(self._pending_docs) >= FLUSH_DOC_LIMIT or self._pending_entries >= FLUSH_POSTING_LIMIT:
            self._flush()
        return doc_id

    # -- segment IO -----------------------------------------------------

    def _write_file(self, path: Path, data: bytes, stage: str) -> dict:
        try:
            with open(path, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as e:
            raise IoFailure(f"cannot write {path}: {e}") from None
        self._hook(stage)
        return {"size": len(data)}

    def _flush(self):
        if not self._pending_docs:
            return
        sid = self._next_segment_id
        self._next_segment_id += 1
        doc_count = len(self._pending_docs)
        doc_base = self._next_doc_id - doc_count
        paths = _seg_paths(self.directory, sid)

        post = bytearray()
        entries: list[tuple[bytes, int, int, int]] = []
        for term in sorted(self._postings):
            record = encode_postings(self._postings[term])
            entries.append((term, len(self._postings[term]), len(post), len(record)))
            post += record

        docs = bytearray()
        offsets = np.empty(doc_count, dtype="<u8")
        for i, record in enumerate(self._pending_docs):
            offsets[i] = len(docs)
            docs += record

        meta = {"id": sid, "doc_base": doc_base, "doc_count": doc_count, "files": {}}
        meta["files"]["post"] = self._write_file(paths["post"], bytes(post), f"seg{sid}:post")
        meta["files"]["terms"] = self._write_file(paths["terms"], encode_terms(entries), f"seg{sid}:terms")
        meta["files"]["docs"] = self._write_file(paths["docs"], bytes(docs), f"seg{sid}:docs")
        meta["files"]["didx"] = self._write_file(paths["didx"], offsets.tobytes(), f"seg{sid}:didx")

        self._flushed.append(meta)
        self._postings = {}
        self._pending_docs = []
        self._pending_entries = 0

    def _merge(self, segments: list[dict]) -> tuple[dict, list[dict]]:
        """Merge every segment into one; returns (new meta, replaced metas)."""
        sid = self._next_segment_id
        self._next_segment_id += 1
        paths = _seg_paths(self.directory, sid)
        readers = [_Segment.load(self.directory, meta, verify=False) for meta in segments]
        try:
            post = bytearray()
            entries: list[tuple[bytes, int, int, int]] = []
            streams = [reader.iter_terms() for reader in readers]
            pending_term: bytes | None = None
            pending: list[tuple[int, float, tuple[tuple[int, int], ...]]] = []
            for term, postings in heap_merge(*streams, key=lambda item: item[0]):
                if term != pending_term:
                    if pending_term is not None:
                        record = encode_postings(pending)
                        entries.append((pending_term, len(pending), len(post), len(record)))
                        post += record
                    pending_term = term
                    pending = []
                pending.extend(postings)
            if pending_term is not None:
                record = encode_postings(pending)
                entries.append((pending_term, len(pending), len(post), len(record)))
                post += record

            docs = bytearray()
            offset_parts = []
            for reader in readers:
                offset_parts.append(reader.doc_offsets.astype("<u8") + len(docs))
                docs += reader.docs_raw()
            offsets = np.concatenate(offset_parts) if offset_parts else np.empty(0, dtype="<u8")

            meta = {
                "id": sid,
                "doc_base": segments[0]["doc_base"],
                "doc_count": sum(m["doc_count"] for m in segments),
                "files": {},
            }
            meta["files"]["post"] = self._write_file(paths["post"], bytes(post), f"seg{sid}:post")
            meta["files"]["terms"] = self._write_file(paths["terms"], encode_terms(entries), f"seg{sid}:terms")
            meta["files"]["docs"] = self._write_file(paths["docs"], bytes(docs), f"seg{sid}:docs")
            meta["files"]["didx"] = self._write_file(paths["didx"], offsets.astype("<u8").tobytes(), f"seg{sid}:didx")
        finally:
            for reader in readers:
                reader.close()
        self._hook("merge:done")
        return meta, segments

    def _write_manifest(self, segments: list[dict]):
        body = {
            "segments": segments,
            "doc_count": self._next_doc_id,
            "next_segment_id": self._next_segment_id,
            "stats": self._stats.to_dict(),
            "pipeline": asdict(self.config),
        }
        raw = encode_manifest(body)
        tmp = self.directory / (MANIFEST_NAME + ".tmp")
        target = self.directory / MANIFEST_NAME
        try:
            with open(tmp, "wb") as fh:
                fh.write(raw)
                fh.flush()
                os.fsync(fh.fileno())
            self._hook("manifest:tmp_written")
            os.replace(tmp, target)
            self._hook("manifest:renamed")
            fsync_dir(str(self.directory))
        except OSError as e:
            raise IoFailure(f"cannot write manifest: {e}") from None
        self._hook("manifest:dir_synced")

    def commit(self) -> IndexStats:
        """Flush, merge if needed, and atomically publish the new state."""
        if self._closed:
            raise IoFailure("writer is closed")
        if not self._pending_docs and not self._flushed:
            return replace(self._stats)

        now_wall = time.perf_counter()
        now_cpu = time.process_time()
        self._stats.wall_time_seconds += now_wall - self._wall_mark
        self._stats.cpu_time_seconds += now_cpu - self._cpu_mark
        self._wall_mark = now_wall
        self._cpu_mark = now_cpu

        self._flush()
        segments = self._committed + self._flushed
        replaced: list[dict] = []
        if len(segments) > MAX_SEGMENTS:
            merged, replaced = self._merge(segments)
            segments = [merged]

        self._write_manifest(segments)
        self._committed = segments
        self._flushed = []

        stats_path = self.directory / STATS_NAME
        try:
            stats_path.write_text(
                _stats_json(self._stats), encoding="utf-8"
            )
        except OSError as e:
            raise IoFailure(f"cannot write {stats_path}: {e}") from None
        self._hook("stats:written")

        for meta in replaced:
            for path in _seg_paths(self.directory, meta["id"]).values():
                try:
                    path.unlink(missing_ok=True)
                except OSError:
                    logger.warning("could not remove stale segment file %s", path)
            self._hook(f"cleanup:seg{meta['id']}")

        return replace(self._stats)

    def close(self):
        self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _stats_json(stats: IndexStats) -> str:
    import json

    return json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n"


def create_index(
    directory: str | os.PathLike,
    *,
    config: PipelineConfig | None = None,
    crash_hook: Callable[[str], None] | None = None,
) -> IndexWriter:
    """Create a fresh index in an empty or absent directory."""
    path = Path(directory)
    try:
        if path.exists():
            if not path.is_dir():
                raise IoFailure(f"{path} is not a directory")
            if any(path.iterdir()):
                raise IndexExists(f"{path} is not empty")
        else:
            path.mkdir(parents=True)
    except OSError as e:
        raise IoFailure(f"cannot create index directory: {e}") from None
    writer = IndexWriter(path, crash_hook, config)
    writer._write_manifest([])
    return writer


class _Segment:
    """Reader view of one immutable segment."""

    def __init__(self, directory: Path, meta: dict):
        self.meta = meta
        self.doc_base: int = meta["doc_base"]
        self.doc_count: int = meta["doc_count"]
        paths = _seg_paths(directory, meta["id"])
        self._files = []
        try:
            self._post_mm = self._map(paths["post"])
            terms_mm = self._map(paths["terms"])
            docs_mm = self._map(paths["docs"])
            didx_mm = self._map(paths["didx"])
        except OSError as e:
            raise IndexCorrupt(f"segment {meta['id']} unreadable: {e}") from None
        self.terms, self.dfs, self.post_offsets, self.post_lens = decode_terms(
            memoryview(terms_mm) if terms_mm else b""
        )
        self._docs_mm = docs_mm
        self.doc_offsets = (
            np.frombuffer(didx_mm, dtype="<u8").astype(np.int64)
            if didx_mm
            else np.empty(0, dtype=np.int64)
        )
        if self.doc_offsets.size != self.doc_count:
            raise IndexCorrupt(f"segment {meta['id']} doc index count mismatch")

    @classmethod
    def load(cls, directory: Path, meta: dict, verify: bool = True) -> "_Segment":
        if verify:
            for ext, info in meta["files"].items():
                path = _seg_paths(directory, meta["id"])[ext]
                try:
                    size = path.stat().st_size
                except OSError:
                    raise IndexCorrupt(f"missing segment file {path.name}") from None
                if size != info["size"]:
                    raise IndexCorrupt(
                        f"segment file {path.name} size {size} != recorded {info['size']}"
                    )
        return cls(directory, meta)

    def _map(self, path: Path):
        with open(path, "rb") as fh:
            size = os.fstat(fh.fileno()).st_size
            if size == 0:
                return b""
            mm = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
            self._files.append(mm)
            return mm

    def find(self, term: bytes) -> int | None:
        i = bisect_left(self.terms, term)
        if i < len(self.terms) and self.terms[i] == term:
            return i
        return None

    def postings_block(self, i: int):
        off = int(self.post_offsets[i])
        return decode_postings(memoryview(self._post_mm)[off:off + int(self.post_lens[i])])

    def iter_terms(self) -> Iterator[tuple[bytes, list[tuple[int, float, tuple[tuple[int, int], ...]]]]]:
        for i, term in enumerate(self.terms):
            block = self.postings_block(i)
            entries = [
                (int(block.doc_ids[k]), float(block.tfs[k]), tuple(block.spans_for(k)))
                for k in range(block.doc_ids.size)
            ]
            yield term, entries

    def doc_record(self, doc_id: int) -> DocumentRecord:
        local = doc_id - self.doc_base
        buf = memoryview(self._docs_mm)
        pos = int(self.doc_offsets[local])
        path_len, pos = read_varint(buf, pos)
        path = bytes(buf[pos:pos + path_len]).decode("utf-8")
        pos += path_len
        title_len, pos = read_varint(buf, pos)
        title = bytes(buf[pos:pos + title_len]).decode("utf-8")
        pos += title_len
        length_text, pos = read_varint(buf, pos)
        length_math, pos = read_varint(buf, pos)
        body_len, pos = read_varint(buf, pos)
        body = bytes(buf[pos:pos + body_len])
        return DocumentRecord(doc_id, path, title, length_text, length_math, body)

    def doc_header(self, local: int) -> tuple[str, str, int, int]:
        buf = memoryview(self._docs_mm)
        pos = int(self.doc_offsets[local])
        path_len, pos = read_varint(buf, pos)
        path = bytes(buf[pos:pos + path_len]).decode("utf-8")
        pos += path_len
        title_len, pos = read_varint(buf, pos)
        title = bytes(buf[pos:pos + title_len]).decode("utf-8")
        pos += title_len
        length_text, pos = read_varint(buf, pos)
        length_math, pos = read_varint(buf, pos)
        return path, title, length_text, length_math

    def docs_raw(self) -> bytes:
        return bytes(self._docs_mm) if self._docs_mm else b""

    def close(self):
        for mm in self._files:
            try:
                mm.close()
            except (BufferError, OSError):
                pass
        self._files = []


class IndexReader:
    """Snapshot view over the committed segments; safe for concurrent reads."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        if not self.directory.exists():
            raise IoFailure(f"index directory {self.directory} does not exist")
        manifest_path = self.directory / MANIFEST_NAME
        try:
            raw = manifest_path.read_bytes()
        except FileNotFoundError:
            raise IndexCorrupt(f"no manifest in {self.directory}") from None
        except OSError as e:
            raise IoFailure(f"cannot read manifest: {e}") from None
        body = decode_manifest(raw)
        self._stats = IndexStats.from_dict(body["stats"])
        self.pipeline_config = PipelineConfig(**body.get("pipeline", {}))
        self.doc_count: int = body["doc_count"]
        self.segments = [_Segment.load(self.directory, meta) for meta in body["segments"]]
        self._bases = [seg.doc_base for seg in self.segments]

        paths: list[str] = []
        titles: list[str] = []
        lengths = np.zeros(self.doc_count, dtype=np.int64)
        for seg in self.segments:
            for local in range(seg.doc_count):
                path, title, lt, lm = seg.doc_header(local)
                paths.append(path)
                titles.append(title)
                lengths[seg.doc_base + local] = lt + lm
        self.paths = paths
        self.titles = titles
        self.doc_lengths = lengths

        self._cache: OrderedDict[bytes, tuple[np.ndarray, np.ndarray]] = OrderedDict()
        self._cache_cap = 8192
        self._lock = Lock()

    # -- term access ----------------------------------------------------

    @staticmethod
    def term_key(term: str, math: bool) -> bytes:
        return (MATH_NS if math else TEXT_NS) + term.encode("utf-8")

    def lookup(self, term: str, math: bool = False) -> list[Posting]:
        """Full postings for one term; [] when absent."""
        out: list[Posting] = []
        for seg in self.segments:
            i = seg.find(self.term_key(term, math))
            if i is None:
                continue
            block = seg.postings_block(i)
            for k in range(block.doc_ids.size):
                out.append(
                    Posting(int(block.doc_ids[k]), float(block.tfs[k]), tuple(block.spans_for(k)))
                )
        return out

    def term_df(self, key: bytes) -> int:
        total = 0
        for seg in self.segments:
            i = seg.find(key)
            if i is not None:
                total += int(seg.dfs[i])
        return total

    def term_arrays(self, key: bytes) -> tuple[np.ndarray, np.ndarray] | None:
        """(doc_ids, weighted_tfs) across segments, cached; None if absent."""
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        ids_parts = []
        tf_parts = []
        for seg in self.segments:
            i = seg.find(key)
            if i is None:
                continue
            block = seg.postings_block(i)
            ids_parts.append(block.doc_ids)
            tf_parts.append(block.tfs)
        if not ids_parts:
            return None
        value = (np.concatenate(ids_parts), np.concatenate(tf_parts))
        with self._lock:
            self._cache[key] = value
            if len(self._cache) > self._cache_cap:
                self._cache.popitem(last=False)
        return value

    def term_spans(self, key: bytes, doc_id: int) -> list[tuple[int, int]]:
        """Occurrence spans of a term within one document."""
        for seg in self.segments:
            if not (seg.doc_base <= doc_id < seg.doc_base + seg.doc_count):
                continue
            i = seg.find(key)
            if i is None:
                return []
            block = seg.postings_block(i)
            k = int(np.searchsorted(block.doc_ids, doc_id))
            if k < block.doc_ids.size and block.doc_ids[k] == doc_id:
                return block.spans_for(k)
            return []
        return []

    # -- documents ------------------------------------------------------

    def doc(self, doc_id: int) -> DocumentRecord:
        if not 0 <= doc_id < self.doc_count:
            raise DocNotFound(f"document {doc_id} not in index (0..{self.doc_count - 1})")
        seg_idx = bisect_right(self._bases, doc_id) - 1
        return self.segments[seg_idx].doc_record(doc_id)

    def stats(self) -> IndexStats:
        return replace(self._stats)

    def close(self):
        for seg in self.segments:
            seg.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_index(directory: str | os.PathLike) -> IndexReader:
    """Open a committed index for reading."""
    return IndexReader(directory)
