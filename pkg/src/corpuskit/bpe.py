"""Byte-level BPE: training, encode/decode, base-vocabulary merging, TPW.

Ids 0-255 are the single bytes; merge i produces id 256 + i; special
tokens sit above all merge ids. The pretokenizer splits text into chunks
at whitespace boundaries, attaching each whitespace run to the following
chunk, and merges never cross chunk boundaries — so concatenating chunks
reproduces the text and decode(encode(x)) == x for any valid UTF-8 x.

Merging a trained extension into a base vocabulary appends the extension
merges after all base merges, drops any extension token whose byte
sequence the base already has, and keeps every base id unchanged, so a
merged tokenizer never produces more tokens than its base.
"""

from __future__ import annotations

import base64
import heapq
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from . import corpus as cm
from ._util import sha256_file
from .errors import ConfigError, DecodeError, EmptyCorpusError, ModelFormatError, TrainError

_PRETOKEN_RE = re.compile(r"\s*\S+|\s+")

Pretokenizer = Callable[[str], list[bytes]]


def pretokenize(text: str) -> list[bytes]:
    """Whitespace-attached chunks: each run of whitespace leads the
    following chunk; a trailing run stands alone. Lossless."""
    return [m.group().encode("utf-8") for m in _PRETOKEN_RE.finditer(text)]


def _encode_chunk(data: bytes | list[int], ranks: dict[tuple[int, int], tuple[int, int]]) -> list[int]:
    """Apply merges in ascending rank order within one chunk."""
    parts = list(data)
    while len(parts) > 1:
        best_rank = None
        best_pos = -1
        for i in range(len(parts) - 1):
            hit = ranks.get((parts[i], parts[i + 1]))
            if hit is not None and (best_rank is None or hit[0] < best_rank):
                best_rank, best_pos = hit[0], i
        if best_rank is None:
            break
        left, right = parts[best_pos], parts[best_pos + 1]
        new_id = ranks[(left, right)][1]
        out = []
        i = 0
        while i < len(parts):
            if i + 1 < len(parts) and parts[i] == left and parts[i + 1] == right:
                out.append(new_id)
                i += 2
            else:
                out.append(parts[i])
                i += 1
        parts = out
    return parts


class _EncoderMixin:
    """Shared encode/decode over a (ranks, vocab) view with a chunk cache."""

    _ranks: dict[tuple[int, int], tuple[int, int]]
    _vocab: dict[int, bytes]

    def __init__(self):
        self._cache: dict[bytes, tuple[int, ...]] = {}

    def encode(self, text: str, pretokenizer: Pretokenizer = pretokenize) -> list[int]:
        out: list[int] = []
        cache = self._cache
        ranks = self._ranks
        for chunk in pretokenizer(text):
            ids = cache.get(chunk)
            if ids is None:
                ids = tuple(_encode_chunk(chunk, ranks))
                if len(cache) < (1 << 20):
                    cache[chunk] = ids
            out.extend(ids)
        return out

    def token_bytes(self, token_id: int) -> bytes:
        try:
            return self._vocab[token_id]
        except KeyError:
            raise DecodeError(f"unknown token id {token_id}") from None

    def decode(self, ids: Iterable[int]) -> str:
        buf = bytearray()
        for token_id in ids:
            buf += self.token_bytes(token_id)
        try:
            return buf.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"decoded bytes are not valid UTF-8 at offset {exc.start}") from exc


class ByteBpeModel(_EncoderMixin):
    """A trained byte-level BPE vocabulary.

    merges: ordered (left_id, right_id) pairs; rank == position.
    specials: name -> id, ids above all merge-produced ids.
    """

    def __init__(self, merges: Iterable[tuple[int, int]], specials: dict[str, int] | None = None):
        super().__init__()
        self.merges = tuple((int(l), int(r)) for l, r in merges)
        self.specials = dict(specials or {})
        self._vocab = {i: bytes([i]) for i in range(256)}
        self._ranks: dict[tuple[int, int], tuple[int, int]] = {}
        for rank, (left, right) in enumerate(self.merges):
            new_id = 256 + rank
            if left >= new_id or right >= new_id:
                raise ConfigError(f"merge {rank} references undefined ids ({left}, {right})")
            self._vocab[new_id] = self._vocab[left] + self._vocab[right]
            self._ranks[(left, right)] = (rank, new_id)
        first_special = 256 + len(self.merges)
        for name, token_id in self.specials.items():
            if token_id < first_special:
                raise ConfigError(f"special {name!r} id {token_id} collides with merge ids")
            self._vocab[token_id] = name.encode("utf-8")

    @property
    def vocab_size(self) -> int:
        return 256 + len(self.merges) + len(self.specials)

    def truncated(self, n_merges: int) -> "ByteBpeModel":
        """The model that training would have produced with a smaller
        merge budget: the greedy loop is deterministic, so the first n
        merges are a prefix."""
        if n_merges > len(self.merges):
            raise ConfigError(f"model has only {len(self.merges)} merges")
        return ByteBpeModel(self.merges[:n_merges])

    def __eq__(self, other):
        return (
            isinstance(other, ByteBpeModel)
            and self.merges == other.merges
            and self.specials == other.specials
        )

    def __hash__(self):
        return hash((self.merges, tuple(sorted(self.specials.items()))))


class MergedTokenizer(_EncoderMixin):
    """A base vocabulary extended with new merges appended after it.

    Base ids and segmentations are untouched; extension token ids start
    at the base vocab size, extension ranks after all base ranks.
    """

    def __init__(self, base: ByteBpeModel, ext_merges: tuple[tuple[int, int], ...], ext_vocab: dict[int, bytes]):
        super().__init__()
        self.base = base
        self.ext_merges = ext_merges
        self._vocab = dict(base._vocab)
        self._vocab.update(ext_vocab)
        self._ranks = dict(base._ranks)
        first_ext_id = base.vocab_size
        for offset, pair in enumerate(ext_merges):
            self._ranks[pair] = (len(base.merges) + offset, first_ext_id + offset)

    @property
    def vocab_size(self) -> int:
        return self.base.vocab_size + len(self.ext_merges)

    @property
    def extension_size(self) -> int:
        return len(self.ext_merges)


def merge_tokenizers(base: ByteBpeModel, extension: ByteBpeModel) -> MergedTokenizer:
    """Append an extension's merges to a base vocabulary.

    Extension merges whose produced byte sequence already exists in the
    base are dropped (the base segmentation wins); survivors are remapped
    into the merged id space in extension rank order. Extension specials
    are dropped, base specials retained.
    """
    base_bytes: dict[bytes, int] = {}
    for token_id, raw in base._vocab.items():
        if token_id not in base.specials.values():
            base_bytes.setdefault(raw, token_id)

    id_map: dict[int, int] = {i: i for i in range(256)}
    ext_merges: list[tuple[int, int]] = []
    ext_vocab: dict[int, bytes] = {}
    merged_bytes = dict(base._vocab)
    pair_to_id: dict[tuple[int, int], int] = {}
    next_id = base.vocab_size

    for rank, (left, right) in enumerate(extension.merges):
        ext_token = 256 + rank
        mapped = (id_map[left], id_map[right])
        produced = merged_bytes[mapped[0]] + merged_bytes[mapped[1]]
        existing = base_bytes.get(produced)
        if existing is not None:
            id_map[ext_token] = existing
            continue
        if mapped in pair_to_id:
            # distinct extension tokens collapsed onto the same merged pair
            id_map[ext_token] = pair_to_id[mapped]
            continue
        ext_merges.append(mapped)
        ext_vocab[next_id] = produced
        merged_bytes[next_id] = produced
        pair_to_id[mapped] = next_id
        id_map[ext_token] = next_id
        next_id += 1

    return MergedTokenizer(base, tuple(ext_merges), ext_vocab)


# --- training ------------------------------------------------------------

def train_bpe(
    docs: Iterable[cm.Document],
    target_vocab: int,
    pretokenizer: Pretokenizer = pretokenize,
    specials: Iterable[str] = (),
) -> ByteBpeModel:
    """Learn merges until the vocabulary reaches target_vocab or no
    adjacent pair occurs twice.

    The most frequent pair wins each round; ties break to the smaller
    (left_id, right_id), which makes training independent of document
    order. target_vocab counts bytes, merges, and specials together.
    """
    specials = tuple(specials)
    if target_vocab < 256 + len(specials):
        raise ConfigError(f"target vocab {target_vocab} is below the 256 byte tokens")
    chunk_freqs: Counter[bytes] = Counter()
    saw_doc = False
    for doc in docs:
        saw_doc = True
        chunk_freqs.update(pretokenizer(doc.text))
    if not saw_doc or not chunk_freqs:
        raise TrainError("training corpus is empty")
    merges = _learn_merges(chunk_freqs, target_vocab - 256 - len(specials))
    first_special = 256 + len(merges)
    return ByteBpeModel(merges, {name: first_special + i for i, name in enumerate(specials)})


def _learn_merges(chunk_freqs: Counter[bytes], max_merges: int) -> list[tuple[int, int]]:
    words: list[tuple[list[int], int]] = [(list(chunk), freq) for chunk, freq in chunk_freqs.items()]
    pair_counts: dict[tuple[int, int], int] = {}
    pair_words: dict[tuple[int, int], set[int]] = {}
    for wi, (syms, freq) in enumerate(words):
        for pair in zip(syms, syms[1:]):
            pair_counts[pair] = pair_counts.get(pair, 0) + freq
            pair_words.setdefault(pair, set()).add(wi)

    # Lazy max-heap: entries may be stale; a popped entry whose recorded
    # count no longer matches is reinserted with the current count.
    heap = [(-count, pair) for pair, count in pair_counts.items()]
    heapq.heapify(heap)
    merges: list[tuple[int, int]] = []

    while len(merges) < max_merges and heap:
        neg_count, pair = heapq.heappop(heap)
        current = pair_counts.get(pair, 0)
        if current != -neg_count:
            if current > 1:
                heapq.heappush(heap, (-current, pair))
            continue
        if current < 2:
            break
        new_id = 256 + len(merges)
        merges.append(pair)
        for wi in sorted(pair_words.get(pair, ())):
            syms, freq = words[wi]
            for old in zip(syms, syms[1:]):
                pair_counts[old] -= freq
                if pair_counts[old] <= 0:
                    del pair_counts[old]
                    pair_words.pop(old, None)
                else:
                    bucket = pair_words.get(old)
                    if bucket is not None:
                        bucket.discard(wi)
            left, right = pair
            out: list[int] = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == left and syms[i + 1] == right:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            words[wi] = (out, freq)
            for new in zip(out, out[1:]):
                pair_counts[new] = pair_counts.get(new, 0) + freq
                pair_words.setdefault(new, set()).add(wi)
                heapq.heappush(heap, (-pair_counts[new], new))
        pair_counts.pop(pair, None)
        pair_words.pop(pair, None)
    return merges


# --- model files ---------------------------------------------------------
#
# Plain model: UTF-8 text, one line per merge-produced token in rank
# order, "base64(bytes) rank"; specials trail as "#special base64(name) id".
# Merged model: "#base sha256-of-base-file" header, then extension lines
# "base64(bytes) rank left_id right_id" (pairs are explicit because base
# merges could otherwise re-segment the extension token's bytes).

def save_bpe(model: ByteBpeModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rank in range(len(model.merges)):
            raw = model._vocab[256 + rank]
            fh.write(f"{base64.b64encode(raw).decode('ascii')} {rank}\n")
        for name, token_id in sorted(model.specials.items(), key=lambda kv: kv[1]):
            fh.write(f"#special {base64.b64encode(name.encode('utf-8')).decode('ascii')} {token_id}\n")


def load_bpe(path: str | Path) -> ByteBpeModel:
    """Rebuild merges from ranked byte sequences.

    Each token's pair is recovered by encoding its bytes with the merges
    of lower rank, which must yield exactly two tokens.
    """
    merges: list[tuple[int, int]] = []
    ranks: dict[tuple[int, int], tuple[int, int]] = {}
    specials: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#special "):
                _, b64, token_id = line.split(" ")
                specials[base64.b64decode(b64).decode("utf-8")] = int(token_id)
                continue
            try:
                b64, rank_text = line.split(" ")
                raw = base64.b64decode(b64, validate=True)
                rank = int(rank_text)
            except (ValueError, TypeError) as exc:
                raise ModelFormatError(f"{path}:{lineno}: bad vocab line") from exc
            if rank != len(merges):
                raise ModelFormatError(f"{path}:{lineno}: ranks must be dense, expected {len(merges)}")
            parts = _encode_chunk(raw, ranks)
            if len(parts) != 2:
                raise ModelFormatError(f"{path}:{lineno}: token does not split into a merge pair")
            pair = (parts[0], parts[1])
            ranks[pair] = (rank, 256 + rank)
            merges.append(pair)
    return ByteBpeModel(merges, specials)


def save_merged(merged: MergedTokenizer, path: str | Path, base_path: str | Path) -> None:
    base_hash = sha256_file(base_path)
    base_merge_count = len(merged.base.merges)
    first_ext_id = merged.base.vocab_size
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#base {base_hash}\n")
        for offset, (left, right) in enumerate(merged.ext_merges):
            raw = merged._vocab[first_ext_id + offset]
            fh.write(
                f"{base64.b64encode(raw).decode('ascii')} {base_merge_count + offset} {left} {right}\n"
            )


def load_merged(path: str | Path, base_path: str | Path) -> MergedTokenizer:
    base_hash = sha256_file(base_path)
    base = load_bpe(base_path)
    ext_merges: list[tuple[int, int]] = []
    ext_vocab: dict[int, bytes] = {}
    vocab = dict(base._vocab)
    next_id = base.vocab_size
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#base "):
            raise ModelFormatError(f"{path}: missing #base header")
        if header.split(" ")[1] != base_hash:
            raise ModelFormatError(f"{path}: base model file hash mismatch")
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                b64, rank_text, left_text, right_text = line.split(" ")
                raw = base64.b64decode(b64, validate=True)
                rank, left, right = int(rank_text), int(left_text), int(right_text)
            except (ValueError, TypeError) as exc:
                raise ModelFormatError(f"{path}:{lineno}: bad extension line") from exc
            if rank != len(base.merges) + len(ext_merges):
                raise ModelFormatError(f"{path}:{lineno}: extension ranks must continue the base ranks")
            if vocab[left] + vocab[right] != raw:
                raise ModelFormatError(f"{path}:{lineno}: pair bytes do not produce the token bytes")
            ext_merges.append((left, right))
            ext_vocab[next_id] = raw
            vocab[next_id] = raw
            next_id += 1
    return MergedTokenizer(base, tuple(ext_merges), ext_vocab)


def load_tokenizer(path: str | Path, base_path: str | Path | None = None):
    """Load a plain or merged model file; merged files need the base."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#base "):
        if base_path is None:
            raise ConfigError(f"{path} is a merged model; the base model file is required")
        return load_merged(path, base_path)
    return load_bpe(path)


# --- evaluation ----------------------------------------------------------

@dataclass
class TpwReport:
    """Tokens-per-word over a corpus, with a per-source breakdown."""

    corpus_id: str
    total_words: int
    total_tokens: int
    per_source: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def tpw(self) -> float:
        return self.total_tokens / self.total_words

    def to_obj(self) -> dict:
        per_source = {
            source: {**counts, "tpw": counts["tokens"] / counts["words"]}
            for source, counts in sorted(self.per_source.items())
        }
        return {
            "corpus_id": self.corpus_id,
            "total_words": self.total_words,
            "total_tokens": self.total_tokens,
            "tpw": self.tpw,
            "per_source": per_source,
        }


def tokens_per_word(tokenizer, docs: Iterable[cm.Document], corpus_id: str = "") -> TpwReport:
    """tpw = total encoded tokens / total whitespace words."""
    report = TpwReport(corpus_id, 0, 0)
    for doc in docs:
        words = len(doc.text.split())
        tokens = len(tokenizer.encode(doc.text))
        report.total_words += words
        report.total_tokens += tokens
        bucket = report.per_source.setdefault(doc.source, {"words": 0, "tokens": 0})
        bucket["words"] += words
        bucket["tokens"] += tokens
    if report.total_words == 0:
        raise EmptyCorpusError("corpus has no words to measure")
    return report
