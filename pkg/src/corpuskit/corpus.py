"""Document data model, text normalization, segmentation, and JSONL streaming.

The document is the unit every other stage consumes: a unique id, a source
tag ("web", "book", "transcript", ...), optional URL, UTF-8 text, optional
OCR pages with per-word confidences, and a free-form string metadata map.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import IngestError, RecordError

# Pages are joined with a form feed so page boundaries survive round-trips;
# the character never appears in extracted prose.
PAGE_JOIN = ""

# Sentence terminators: western full stop set plus the Bangla danda.
DEFAULT_TERMINALS = (".", "!", "?", "।")


@dataclass(frozen=True)
class Page:
    """One OCR page: 0-based index, text, optional (word, confidence) pairs."""

    index: int
    text: str
    word_confidences: tuple[tuple[str, float], ...] | None = None

    def __post_init__(self):
        if self.word_confidences is not None:
            for word, conf in self.word_confidences:
                if not 0.0 <= conf <= 1.0:
                    raise ValueError(f"confidence {conf!r} for {word!r} outside [0, 1]")


@dataclass(frozen=True)
class Document:
    """One corpus unit. When pages are present, text is the page join."""

    id: str
    source: str
    text: str
    url: str | None = None
    pages: tuple[Page, ...] | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")
        if self.pages is not None:
            for pos, page in enumerate(self.pages):
                if page.index != pos:
                    raise ValueError(f"page indices must be contiguous from 0, got {page.index} at {pos}")
            joined = PAGE_JOIN.join(p.text for p in self.pages)
            if joined != self.text:
                raise ValueError("text must equal page texts joined by form feed")

    @classmethod
    def from_pages(cls, id: str, source: str, pages: Iterable[Page], **kw) -> "Document":
        pages = tuple(pages)
        return cls(id=id, source=source, text=PAGE_JOIN.join(p.text for p in pages), pages=pages, **kw)


@dataclass(frozen=True)
class NormalizedView:
    """NFC text with its line, word, and sentence segmentations.

    Words are maximal runs of non-whitespace code points; joining lines
    with LF reproduces text exactly.
    """

    text: str
    lines: tuple[str, ...]
    words: tuple[str, ...]
    sentences: tuple[str, ...]


def segment_sentences(text: str, terminals: Iterable[str] = DEFAULT_TERMINALS) -> list[str]:
    """Split at sentence terminators, keeping the terminator attached.

    Runs of consecutive terminators stay on one sentence; sentences are
    stripped of surrounding whitespace and empty pieces are dropped.
    """
    terminal_set = frozenset(terminals)
    sentences: list[str] = []
    buf: list[str] = []
    prev_terminal = False
    for ch in text:
        if prev_terminal and ch not in terminal_set:
            piece = "".join(buf).strip()
            if piece:
                sentences.append(piece)
            buf = []
        buf.append(ch)
        prev_terminal = ch in terminal_set
    piece = "".join(buf).strip()
    if piece:
        sentences.append(piece)
    return sentences


def normalize(
    text: str | bytes,
    terminals: Iterable[str] = DEFAULT_TERMINALS,
    word_segmenter=None,
    sentence_segmenter=None,
) -> NormalizedView:
    """NFC-normalize text and segment it into lines, words, and sentences.

    The default word segmenter (maximal non-whitespace runs) and sentence
    segmenter are deterministic and language-neutral; language-specific
    segmenters plug in as callables taking the normalized text.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"invalid UTF-8 byte sequence at byte offset {exc.start}", exc.start) from exc
    if not unicodedata.is_normalized("NFC", text):
        text = unicodedata.normalize("NFC", text)
    words = word_segmenter(text) if word_segmenter else text.split()
    sentences = sentence_segmenter(text) if sentence_segmenter else segment_sentences(text, terminals)
    return NormalizedView(
        text=text,
        lines=tuple(text.split("\n")),
        words=tuple(words),
        sentences=tuple(sentences),
    )


# --- JSONL serialization ------------------------------------------------
#
# One object per line, UTF-8, LF, no BOM:
# {"id": str, "source": str, "url": str|null, "text": str,
#  "pages": [{"index": int, "text": str,
#             "word_confidences": [[str, float], ...]|null}]|null,
#  "meta": {str: str}}

def doc_to_json(doc: Document) -> str:
    """Canonical single-line JSON for a document (stable key order)."""
    pages = None
    if doc.pages is not None:
        pages = [
            {
                "index": p.index,
                "text": p.text,
                "word_confidences": [[w, c] for w, c in p.word_confidences]
                if p.word_confidences is not None
                else None,
            }
            for p in doc.pages
        ]
    obj = {
        "id": doc.id,
        "source": doc.source,
        "url": doc.url,
        "text": doc.text,
        "pages": pages,
        "meta": doc.meta,
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def doc_from_json(line: str) -> Document:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("corpus line is not a JSON object")
    for key, kind in (("id", str), ("source", str), ("text", str)):
        if not isinstance(obj.get(key), kind):
            raise ValueError(f"field {key!r} missing or not a {kind.__name__}")
    url = obj.get("url")
    if url is not None and not isinstance(url, str):
        raise ValueError("field 'url' must be a string or null")
    raw_pages = obj.get("pages")
    pages = None
    if raw_pages is not None:
        pages = tuple(
            Page(
                index=p["index"],
                text=p["text"],
                word_confidences=tuple((w, float(c)) for w, c in p["word_confidences"])
                if p.get("word_confidences") is not None
                else None,
            )
            for p in raw_pages
        )
    meta = obj.get("meta") or {}
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise ValueError("field 'meta' must map strings to strings")
    return Document(id=obj["id"], source=obj["source"], text=obj["text"], url=url, pages=pages, meta=meta)


class CorpusReader:
    """Streaming JSONL reader yielding documents in file order.

    Strict mode raises RecordError at the first malformed line; lenient
    mode skips malformed lines and counts them in ``skipped``.
    """

    def __init__(self, path: str | Path, lenient: bool = False):
        self.path = Path(path)
        self.lenient = lenient
        self.skipped = 0

    def __iter__(self) -> Iterator[Document]:
        self.skipped = 0
        try:
            with self.path.open("r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.rstrip("\n")
                    try:
                        yield doc_from_json(line)
                    except (ValueError, KeyError, TypeError) as exc:
                        if self.lenient:
                            self.skipped += 1
                            continue
                        raise RecordError(f"line {lineno}: {exc}", lineno) from exc
        except UnicodeDecodeError as exc:
            raise IngestError(f"invalid UTF-8 byte sequence at byte offset {exc.start}", exc.start) from exc


def read_corpus(path: str | Path, lenient: bool = False) -> CorpusReader:
    return CorpusReader(path, lenient=lenient)


def write_corpus(path: str | Path, docs: Iterable[Document]) -> int:
    """Write documents as JSONL; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(doc_to_json(doc))
            fh.write("\n")
            count += 1
    return count
