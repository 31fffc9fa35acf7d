"""On-disk codecs for the index: varints, postings records, front-coded term
dictionaries, and the checksummed manifest envelope.

Layout documented in docs/index-format.md.  All integers are LEB128 varints
unless noted; weighted term frequencies are little-endian float32.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import IndexCorrupt

MAGIC = b"MFI1"
FORMAT_VERSION = 1
MANIFEST_NAME = "MANIFEST"

_HEADER = struct.Struct("<4sIQ")  # magic, version, body length
_SHA_LEN = 32


# --- varints ----------------------------------------------------------------


def write_varint(out: bytearray, value: int):
    if value < 0:
        raise ValueError("varints are unsigned")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def read_varint(buf, pos: int) -> tuple[int, int]:
    """Decode one varint at pos; returns (value, next_pos)."""
    result = 0
    shift = 0
    while True:
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7


def decode_varints(buf) -> np.ndarray:
    """Decode a buffer of back-to-back varints into an int64 array."""
    a = np.frombuffer(buf, dtype=np.uint8)
    if a.size == 0:
        return np.empty(0, dtype=np.int64)
    ends = np.flatnonzero(a < 0x80)
    if ends.size == 0 or ends[-1] != a.size - 1:
        raise IndexCorrupt("truncated varint stream")
    starts = np.empty_like(ends)
    starts[0] = 0
    starts[1:] = ends[:-1] + 1
    payload = (a & 0x7F).astype(np.int64)
    values = np.zeros(ends.size, dtype=np.int64)
    width = int((ends - starts).max()) + 1
    for k in range(width):
        idx = starts + k
        mask = idx <= ends
        values[mask] |= payload[idx[mask]] << (7 * k)
    return values


# --- postings records --------------------------------------------------------


def encode_postings(postings: list[tuple[int, float, tuple[tuple[int, int], ...]]]) -> bytes:
    """Serialize one term's postings: (doc_id, weighted_tf, spans) sorted by
    doc_id.  Section layout: count, doc deltas, float32 tfs, span-blob
    lengths, span blobs."""
    out = bytearray()
    write_varint(out, len(postings))

    docs = bytearray()
    prev = 0
    for doc_id, _, _ in postings:
        write_varint(docs, doc_id - prev)
        prev = doc_id
    write_varint(out, len(docs))
    out += docs

    tfs = np.array([p[1] for p in postings], dtype="<f4")
    out += tfs.tobytes()

    blobs: list[bytes] = []
    lens = bytearray()
    for _, _, spans in postings:
        blob = bytearray()
        write_varint(blob, len(spans))
        prev_start = 0
        for start, end in spans:
            write_varint(blob, start - prev_start)
            write_varint(blob, end - start)
            prev_start = start
        blobs.append(bytes(blob))
        write_varint(lens, len(blob))
    write_varint(out, len(lens))
    out += lens
    for blob in blobs:
        out += blob
    return bytes(out)


@dataclass(slots=True)
class PostingsBlock:
    """Lazily decoded postings record."""

    doc_ids: np.ndarray
    tfs: np.ndarray
    _span_lens: np.ndarray
    _blob_base: int
    _raw: memoryview
    _span_offsets: np.ndarray | None = None

    def spans_for(self, index: int) -> list[tuple[int, int]]:
        """Spans of the posting at local position ``index``."""
        if self._span_offsets is None:
            self._span_offsets = np.zeros(self._span_lens.size, dtype=np.int64)
            np.cumsum(self._span_lens[:-1], out=self._span_offsets[1:])
        offset = self._blob_base + int(self._span_offsets[index])
        buf = self._raw
        count, pos = read_varint(buf, offset)
        spans: list[tuple[int, int]] = []
        prev_start = 0
        for _ in range(count):
            delta, pos = read_varint(buf, pos)
            length, pos = read_varint(buf, pos)
            start = prev_start + delta
            spans.append((start, start + length))
            prev_start = start
        return spans


def decode_postings(raw: memoryview) -> PostingsBlock:
    count, pos = read_varint(raw, 0)
    docs_len, pos = read_varint(raw, pos)
    deltas = decode_varints(raw[pos:pos + docs_len])
    if deltas.size != count:
        raise IndexCorrupt("postings doc count mismatch")
    doc_ids = np.cumsum(deltas)
    pos += docs_len
    tfs = np.frombuffer(raw[pos:pos + 4 * count], dtype="<f4").astype(np.float64)
    pos += 4 * count
    lens_len, pos = read_varint(raw, pos)
    span_lens = decode_varints(raw[pos:pos + lens_len])
    if span_lens.size != count:
        raise IndexCorrupt("postings span-length count mismatch")
    pos += lens_len
    return PostingsBlock(doc_ids, tfs, span_lens, pos, raw)


# --- term dictionary ----------------------------------------------------------


def encode_terms(entries: list[tuple[bytes, int, int, int]]) -> bytes:
    """Front-code a sorted term dictionary.

    Entries are (term, df, postings_offset, postings_len), term-sorted.
    """
    out = bytearray()
    write_varint(out, len(entries))
    prev = b""
    for term, df, offset, length in entries:
        shared = 0
        limit = min(len(prev), len(term))
        while shared < limit and prev[shared] == term[shared]:
            shared += 1
        suffix = term[shared:]
        write_varint(out, shared)
        write_varint(out, len(suffix))
        out += suffix
        write_varint(out, df)
        write_varint(out, offset)
        write_varint(out, length)
        prev = term
    return bytes(out)


def decode_terms(buf) -> tuple[list[bytes], np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of encode_terms: (terms, dfs, offsets, lengths)."""
    if len(buf) == 0:
        empty = np.empty(0, dtype=np.int64)
        return [], empty, empty, empty
    count, pos = read_varint(buf, 0)
    terms: list[bytes] = []
    dfs = np.empty(count, dtype=np.int64)
    offsets = np.empty(count, dtype=np.int64)
    lengths = np.empty(count, dtype=np.int64)
    prev = b""
    for i in range(count):
        shared, pos = read_varint(buf, pos)
        suffix_len, pos = read_varint(buf, pos)
        term = prev[:shared] + bytes(buf[pos:pos + suffix_len])
        pos += suffix_len
        dfs[i], pos = read_varint(buf, pos)
        offsets[i], pos = read_varint(buf, pos)
        lengths[i], pos = read_varint(buf, pos)
        terms.append(term)
        prev = term
    if pos != len(buf):
        raise IndexCorrupt("trailing bytes in term dictionary")
    return terms, dfs, offsets, lengths


# --- manifest ------------------------------------------------------------------


def encode_manifest(body: dict) -> bytes:
    payload = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(payload)) + payload + hashlib.sha256(payload).digest()


def decode_manifest(raw: bytes) -> dict:
    if len(raw) < _HEADER.size + _SHA_LEN:
        raise IndexCorrupt("manifest too short")
    magic, version, body_len = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise IndexCorrupt(f"bad manifest magic {magic!r}")
    if version != FORMAT_VERSION:
        raise IndexCorrupt(f"unsupported index format version {version}")
    body_end = _HEADER.size + body_len
    if len(raw) != body_end + _SHA_LEN:
        raise IndexCorrupt("manifest length mismatch")
    payload = raw[_HEADER.size:body_end]
    if hashlib.sha256(payload).digest() != raw[body_end:]:
        raise IndexCorrupt("manifest checksum mismatch")
    try:
        return json.loads(payload)
    except ValueError as e:
        raise IndexCorrupt(f"manifest body is not valid JSON: {e}") from None


def fsync_file(path: str):
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def fsync_dir(path: str):
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)
