"""Word n-gram language model with interpolated Kneser-Ney smoothing.

A model trained on high-quality reference text scores candidate documents
by length-normalized log-probability; rank filtering keeps the best
fraction of a corpus, which is how noisy OCR text gets pruned.

Smoothing uses a single fixed discount D per order. The top order
interpolates raw counts, middle orders interpolate continuation counts,
and the unigram level interpolates bigram continuation counts with a
uniform distribution over the vocabulary, so <unk> always has positive
mass and every conditional distribution sums to one exactly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import corpus as cm
from ._util import exact_ceil_mul
from .errors import EmptyCorpusError, EmptyDocumentError, ModelFormatError, TrainError

BOS, EOS, UNK = 0, 1, 2
_SPECIAL_WORDS = ("<s>", "</s>", "<unk>")

_MAGIC = b"CKNLM\x00"
_VERSION = 1


@dataclass(frozen=True)
class ScoredDocument:
    doc_id: str
    log_prob: float  # nats, summed over all sentence tokens incl. </s>
    token_count: int

    @property
    def per_word_log_prob(self) -> float:
        return self.log_prob / self.token_count

    @property
    def perplexity(self) -> float:
        return math.exp(-self.per_word_log_prob)


class NGramModel:
    """Count tables plus derived Kneser-Ney structures for fast queries."""

    def __init__(self, order: int, discount: float, vocab: dict[str, int], counts: list[dict[tuple[int, ...], int]]):
        if order < 1:
            raise TrainError("order must be at least 1")
        if not 0.0 < discount <= 1.0:
            raise TrainError("discount must be in (0, 1]")
        self.order = order
        self.discount = discount
        self.vocab = vocab
        self.id_to_word = {i: w for w, i in vocab.items()}
        self.counts = counts  # counts[k] maps k-tuples of ids to raw counts, k in 1..order
        self._build_tables()

    # -- derived tables ---------------------------------------------------

    def _build_tables(self):
        # Raw follow table for the top order: context -> (denom, types, {word: count})
        self._ctx: list[dict] = [dict() for _ in range(self.order + 1)]
        top = self.counts[self.order]
        ctx_top = self._ctx[self.order]
        for key, count in top.items():
            h, w = key[:-1], key[-1]
            entry = ctx_top.get(h)
            if entry is None:
                entry = ctx_top[h] = [0, {}]
            entry[0] += count
            entry[1][w] = entry[1].get(w, 0) + count

        # Continuation follow tables for middle orders, from the table one
        # order up: each distinct (k+1)-gram (v, h, w) adds one to cont(h, w).
        for k in range(self.order - 1, 1, -1):
            ctx_k = self._ctx[k]
            for key in self.counts[k + 1]:
                h, w = key[1:-1], key[-1]
                entry = ctx_k.get(h)
                if entry is None:
                    entry = ctx_k[h] = [0, {}]
                entry[0] += 1
                entry[1][w] = entry[1].get(w, 0) + 1

        # Unigram continuation counts from bigram types; for order-1 models
        # fall back to raw unigram counts.
        if self.order >= 2:
            uni: dict[int, int] = {}
            for key in self.counts[2]:
                uni[key[1]] = uni.get(key[1], 0) + 1
            self._uni = uni
            self._uni_total = len(self.counts[2])
        else:
            self._uni = {key[0]: c for key, c in self.counts[1].items()}
            self._uni_total = sum(self._uni.values())
        self._uni_types = len(self._uni)

    # -- queries ----------------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def word_id(self, word: str) -> int:
        return self.vocab.get(word, UNK)

    def prob_ids(self, w: int, context: tuple[int, ...]) -> float:
        return self._p(min(len(context) + 1, self.order), w, context[-(self.order - 1) :] if self.order > 1 else ())

    def prob(self, word: str, context: Sequence[str] = ()) -> float:
        """p(word | context words); unknown words map to <unk>."""
        ids = tuple(self.word_id(w) for w in context)
        return self.prob_ids(self.word_id(word), ids)

    def _p(self, k: int, w: int, h: tuple[int, ...]) -> float:
        if k == 1:
            return self._p1(w)
        entry = self._ctx[k].get(h)
        if entry is None or entry[0] == 0:
            return self._p(k - 1, w, h[1:])
        denom, follow = entry
        c = follow.get(w, 0)
        d = self.discount
        interp = d * len(follow) / denom
        return max(c - d, 0.0) / denom + interp * self._p(k - 1, w, h[1:])

    def _p1(self, w: int) -> float:
        uniform = 1.0 / self.vocab_size
        if self._uni_total == 0:
            return uniform
        d = self.discount
        c = self._uni.get(w, 0)
        interp = d * self._uni_types / self._uni_total
        return max(c - d, 0.0) / self._uni_total + interp * uniform


def _sentence_ids(words: Sequence[str], vocab: dict[str, int], order: int) -> list[int]:
    ids = [vocab.get(w, UNK) for w in words]
    return [BOS] * (order - 1) + ids + [EOS]


def train(docs: Iterable[cm.Document], order: int = 3, discount: float = 0.75) -> NGramModel:
    """Train interpolated Kneser-Ney counts from the documents' sentences.

    Sentences are padded with order-1 <s> and one </s>; no count pruning.
    """
    if order < 1:
        raise TrainError("order must be at least 1")
    vocab: dict[str, int] = dict(zip(_SPECIAL_WORDS, (BOS, EOS, UNK)))
    counts: list[dict[tuple[int, ...], int]] = [dict() for _ in range(order + 1)]
    n_sentences = 0
    for doc in docs:
        view = cm.normalize(doc.text)
        for sentence in view.sentences:
            words = sentence.split()
            if not words:
                continue
            for w in words:
                if w not in vocab:
                    vocab[w] = len(vocab)
            padded = _sentence_ids(words, vocab, order)
            for k in range(1, order + 1):
                table = counts[k]
                for i in range(len(padded) - k + 1):
                    key = tuple(padded[i : i + k])
                    table[key] = table.get(key, 0) + 1
            n_sentences += 1
    if n_sentences == 0:
        raise TrainError("training corpus has no sentences")
    return NGramModel(order, discount, vocab, counts)


def perplexity(model: NGramModel, doc: cm.Document) -> ScoredDocument:
    """Score every sentence token including </s>; OOV words become <unk>."""
    view = cm.normalize(doc.text)
    sentence_words = [s.split() for s in view.sentences]
    sentence_words = [w for w in sentence_words if w]
    if not sentence_words:
        raise EmptyDocumentError(f"document {doc.id!r} has no sentences")
    log = math.log
    total = 0.0
    tokens = 0
    hist = model.order - 1
    for words in sentence_words:
        padded = _sentence_ids(words, model.vocab, model.order)
        for i in range(hist, len(padded)):
            context = tuple(padded[i - hist : i]) if hist else ()
            total += log(model._p(model.order, padded[i], context))
            tokens += 1
    return ScoredDocument(doc.id, total, tokens)


def rank_filter(
    docs: Iterable[cm.Document],
    model: NGramModel,
    retain_fraction: float,
    group_by_source: bool = False,
) -> tuple[list[cm.Document], float]:
    """Keep the best ceil(retain_fraction * N) documents by per-word
    log-probability (ties broken by id), preserving input order.

    Documents that cannot be scored rank last. With group_by_source the
    retention quota applies within each source tag separately. Returns
    the kept documents and the score threshold actually used.
    """
    if not 0.0 < retain_fraction <= 1.0:
        raise ValueError("retain_fraction must be in (0, 1]")
    docs = list(docs)
    if not docs:
        raise EmptyCorpusError("rank filter needs at least one document")

    scored = []
    for pos, doc in enumerate(docs):
        try:
            score = perplexity(model, doc).per_word_log_prob
        except EmptyDocumentError:
            score = float("-inf")
        scored.append((score, doc.id, pos, doc.source))

    keep_positions: set[int] = set()
    threshold = float("inf")
    groups: dict[str | None, list] = {}
    for item in scored:
        groups.setdefault(item[3] if group_by_source else None, []).append(item)
    for items in groups.values():
        items.sort(key=lambda it: (-it[0], it[1]))
        quota = exact_ceil_mul(retain_fraction, len(items))
        for score, _, pos, _ in items[:quota]:
            keep_positions.add(pos)
            threshold = min(threshold, score)
    return [doc for pos, doc in enumerate(docs) if pos in keep_positions], threshold


# --- model file io -------------------------------------------------------
#
# Binary layout: magic, u16 version, u8 order, f64 discount, u32 vocab
# size, length-prefixed UTF-8 words in id order, then per order a u64
# entry count followed by sorted (ids..., count) records (u32 ids, u64
# count). Fully deterministic for a given model.

def save_model(model: NGramModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HBd", _VERSION, model.order, model.discount))
        fh.write(struct.pack("<I", len(model.vocab)))
        for i in range(len(model.vocab)):
            raw = model.id_to_word[i].encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        for k in range(1, model.order + 1):
            table = model.counts[k]
            fh.write(struct.pack("<Q", len(table)))
            fmt = struct.Struct(f"<{k}IQ")
            for key in sorted(table):
                fh.write(fmt.pack(*key, table[key]))


def load_model(path: str | Path) -> NGramModel:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ModelFormatError(f"{path}: not an n-gram model file")
        version, order, discount = struct.unpack("<HBd", fh.read(11))
        if version != _VERSION:
            raise ModelFormatError(f"{path}: unsupported version {version}")
        (vocab_size,) = struct.unpack("<I", fh.read(4))
        vocab: dict[str, int] = {}
        for i in range(vocab_size):
            (length,) = struct.unpack("<H", fh.read(2))
            vocab[fh.read(length).decode("utf-8")] = i
        counts: list[dict[tuple[int, ...], int]] = [dict() for _ in range(order + 1)]
        for k in range(1, order + 1):
            (n_entries,) = struct.unpack("<Q", fh.read(8))
            fmt = struct.Struct(f"<{k}IQ")
            for _ in range(n_entries):
                row = fmt.unpack(fh.read(fmt.size))
                counts[k][row[:-1]] = row[-1]
    return NGramModel(order, discount, vocab, counts)


def export_arpa(model: NGramModel, path: str | Path) -> None:
    """ARPA-style text export: per-order lines of log10 prob, n-gram, and
    log10 backoff weight for n-grams that also serve as contexts.

    The listed probabilities are the model's full interpolated
    conditionals, so external consumers reproduce the model's scores for
    observed n-grams.
    """
    log10 = math.log10

    def backoff(k: int, gram: tuple[int, ...]) -> float | None:
        # weight applied when extending gram as a context at order k+1
        if k + 1 > model.order:
            return None
        entry = model._ctx[k + 1].get(gram)
        if entry is None or entry[0] == 0:
            return None
        denom, follow = entry
        return log10(model.discount * len(follow) / denom)

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(model.counts[k])}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for key in sorted(model.counts[k]):
                p = model._p(min(k, model.order), key[-1], key[:-1])
                words = " ".join(model.id_to_word[i] for i in key)
                bow = backoff(k, key)
                if bow is None:
                    fh.write(f"{log10(p):.7f}\t{words}\n")
                else:
                    fh.write(f"{log10(p):.7f}\t{words}\t{bow:.7f}\n")
        fh.write("\n\\end\\\n")
