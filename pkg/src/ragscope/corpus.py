"""Document corpus: JSONL ingestion, deterministic tokenization, id lookup.

The store is a directory with two files:

* ``docs.bin`` — length-prefixed UTF-8 records (u32 little-endian byte
  length, then the text bytes), appended in line order.
* ``docs.idx`` — one u64 little-endian byte offset into ``docs.bin`` per
  document, so ``get_document`` is a single seek.

A ``meta.json`` sidecar records the counts so stats do not require a
full rescan. Documents are immutable once ingested; re-ingesting into
the same directory replaces the corpus wholesale.
"""

from __future__ import annotations

import json
import os
import re
import string
import struct
from dataclasses import dataclass
from pathlib import Path

from .errors import DocumentNotFoundError, IngestError

_CHUNK_RE = re.compile(r"\S+")
_PUNCT = frozenset(string.punctuation)

DOCS_BIN = "docs.bin"
DOCS_IDX = "docs.idx"
META_JSON = "meta.json"


@dataclass(frozen=True)
class Token:
    """One display token with its character span in the source text."""

    surface: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class CorpusStats:
    num_documents: int
    num_tokens: int


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: int
    text: str
    tokens: tuple[Token, ...]


def tokenize(text: str) -> tuple[Token, ...]:
    """Split text into tokens on Unicode whitespace, detaching ASCII punctuation.

    Each whitespace-free chunk is scanned from both ends: leading and
    trailing ASCII punctuation characters each become their own token,
    and whatever remains in the middle is one token (so "don't" and
    "3.14" stay whole while "HTML?" splits into "HTML", "?"). Pure
    function: equal inputs give equal tokens and spans, and every
    non-whitespace character of ``text`` is covered by exactly one span.
    """
    tokens: list[Token] = []
    for m in _CHUNK_RE.finditer(text):
        chunk = m.group()
        base = m.start()
        i, j = 0, len(chunk)
        lead: list[Token] = []
        trail: list[Token] = []
        while i < j and chunk[i] in _PUNCT:
            lead.append(Token(chunk[i], base + i, base + i + 1))
            i += 1
        while j > i and chunk[j - 1] in _PUNCT:
            trail.append(Token(chunk[j - 1], base + j - 1, base + j))
            j -= 1
        tokens.extend(lead)
        if j > i:
            tokens.append(Token(chunk[i:j], base + i, base + j))
        tokens.extend(reversed(trail))
    return tuple(tokens)


class CorpusStore:
    """Read side of the corpus directory; safe for concurrent readers."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        bin_path = self.root / DOCS_BIN
        idx_path = self.root / DOCS_IDX
        if not bin_path.exists() or not idx_path.exists():
            raise FileNotFoundError(f"no corpus store at {self.root}")
        self._fd = os.open(bin_path, os.O_RDONLY)
        raw = idx_path.read_bytes()
        if len(raw) % 8 != 0:
            raise IngestError(f"{idx_path} length {len(raw)} is not a multiple of 8")
        self._offsets = struct.unpack(f"<{len(raw) // 8}Q", raw)

    def __len__(self) -> int:
        return len(self._offsets)

    def __del__(self):  # pragma: no cover - interpreter-shutdown ordering
        try:
            os.close(self._fd)
        except Exception:
            pass

    def get_document(self, doc_id: int) -> DocumentRecord:
        if not isinstance(doc_id, int) or doc_id < 0 or doc_id >= len(self._offsets):
            raise DocumentNotFoundError(
                f"doc_id {doc_id} not in [0, {len(self._offsets)})"
            )
        offset = self._offsets[doc_id]
        header = os.pread(self._fd, 4, offset)
        (length,) = struct.unpack("<I", header)
        data = os.pread(self._fd, length, offset + 4)
        text = data.decode("utf-8")
        return DocumentRecord(doc_id=doc_id, text=text, tokens=tokenize(text))

    def iter_documents(self):
        for doc_id in range(len(self)):
            yield self.get_document(doc_id)

    def stats(self) -> CorpusStats:
        meta_path = self.root / META_JSON
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            return CorpusStats(meta["num_documents"], meta["num_tokens"])
        total = sum(len(doc.tokens) for doc in self.iter_documents())
        return CorpusStats(len(self), total)


def ingest(jsonl_path: str | Path, store_dir: str | Path, field: str = "text") -> CorpusStats:
    """Ingest a JSONL corpus into ``store_dir``, one document per line.

    ``doc_id`` equals the 0-based line index. Any existing store in the
    directory is replaced. Errors name the offending line (1-based).
    """
    jsonl_path = Path(jsonl_path)
    store_dir = Path(store_dir)
    store_dir.mkdir(parents=True, exist_ok=True)

    num_docs = 0
    num_tokens = 0
    offsets: list[int] = []
    bin_tmp = store_dir / (DOCS_BIN + ".tmp")
    with open(jsonl_path, "r", encoding="utf-8") as src, open(bin_tmp, "wb") as out:
        pos = 0
        for lineno, line in enumerate(src, start=1):
            stripped = line.strip()
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise IngestError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or field not in obj:
                raise IngestError(f"line {lineno}: missing field {field!r}")
            text = obj[field]
            if not isinstance(text, str):
                raise IngestError(f"line {lineno}: field {field!r} is not a string")
            payload = text.encode("utf-8")
            offsets.append(pos)
            out.write(struct.pack("<I", len(payload)))
            out.write(payload)
            pos += 4 + len(payload)
            num_docs += 1
            num_tokens += len(tokenize(text))

    os.replace(bin_tmp, store_dir / DOCS_BIN)
    (store_dir / DOCS_IDX).write_bytes(struct.pack(f"<{len(offsets)}Q", *offsets))
    (store_dir / META_JSON).write_text(
        json.dumps(
            {"num_documents": num_docs, "num_tokens": num_tokens, "field": field}
        )
    )
    return CorpusStats(num_documents=num_docs, num_tokens=num_tokens)
