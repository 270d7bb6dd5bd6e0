"""The 18 hand-crafted document quality metrics.

Everything here is a pure function of (document view, resources): line
shape statistics, lexical diversity, symbol/bracket ratios, stopword and
bad-word ratios, language mix, and URL flags. Thresholding lives in
``filtering``; this module only measures.
"""

from __future__ import annotations

import heapq
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple
from urllib.parse import urlsplit

from .corpus import NormalizedView
from .errors import EmptyDocumentError, ResourceError

# Line-final punctuation that marks a complete sentence.
TERMINAL_LINE_ENDINGS = frozenset({".", "!", "?", "”", "।"})

# Bullet glyphs that mark a list line on their own; "-" and "*" count only
# when followed by a space.
BULLET_CHARS = frozenset({"•", "‣", "▶", "⁃", "∙"})
ASCII_BULLETS = frozenset({"-", "*"})

SYMBOLS = ("#", "...", "…")
ELLIPSES = ("...", "…")
BRACKETS = frozenset("()[]{}")

DEFAULT_NGRAM_SIZES = (2, 3, 4)

_WS_RE = re.compile(r"\s+")
_DIGIT_RE = re.compile(r"\d")  # Unicode category Nd in str patterns

# RuleMetrics fields a Threshold may reference.
NUMERIC_METRICS = frozenset(
    {
        "terminal_punct_fraction",
        "mean_line_word_count",
        "bullet_line_fraction",
        "mean_line_numeric_fraction",
        "sentence_count",
        "word_count",
        "mean_word_length",
        "symbol_to_word_ratio",
        "ellipsis_line_fraction",
        "unique_word_fraction",
        "unigram_entropy",
        "stopword_fraction",
        "top_ngram_char_fraction",
        "content_flag_score",
        "bad_word_count",
        "bracket_ratio",
    }
)
BOOLEAN_METRICS = frozenset({"is_adult_url"})


class LineMetrics(NamedTuple):
    ends_terminal: bool
    word_count: int
    starts_bullet: bool
    numeric_fraction: float


@dataclass(frozen=True)
class RuleMetrics:
    """One measurement vector per document.

    Word-denominated fields are None for documents with zero words; such
    documents are flagged by the filter layer instead of crashing it.
    """

    terminal_punct_fraction: float
    mean_line_word_count: float
    bullet_line_fraction: float
    mean_line_numeric_fraction: float
    is_adult_url: bool
    language_fractions: dict[str, float]
    sentence_count: int
    word_count: int
    mean_word_length: float | None
    symbol_to_word_ratio: float | None
    ellipsis_line_fraction: float
    unique_word_fraction: float | None
    unigram_entropy: float | None
    stopword_fraction: float | None
    top_ngram_char_fraction: float
    content_flag_score: float | None
    bad_word_count: int
    bracket_ratio: float
    # Per-n coverage values behind the scalar (which is their max).
    top_ngram_char_fractions: dict[int, float] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return self.word_count == 0


def line_metrics(
    line: str,
    terminal_endings: frozenset[str] = TERMINAL_LINE_ENDINGS,
    bullet_chars: frozenset[str] = BULLET_CHARS,
    ascii_bullets: frozenset[str] = ASCII_BULLETS,
) -> LineMetrics:
    """Shape statistics for a single line (no LF inside).

    ends_terminal: last non-whitespace code point is terminal punctuation.
    starts_bullet: first non-whitespace code point is a bullet glyph, or a
    dash/star followed by a space.
    numeric_fraction: decimal-digit code points over non-whitespace code
    points (0 for whitespace-only lines).
    """
    stripped = line.strip()
    ends_terminal = bool(stripped) and stripped[-1] in terminal_endings
    starts_bullet = False
    if stripped:
        first = stripped[0]
        if first in bullet_chars:
            starts_bullet = True
        elif first in ascii_bullets and len(stripped) > 1 and stripped[1] == " ":
            starts_bullet = True
    compact = _WS_RE.sub("", line)
    if compact:
        digits = len(compact) - len(_DIGIT_RE.sub("", compact))
        numeric_fraction = digits / len(compact)
    else:
        numeric_fraction = 0.0
    return LineMetrics(ends_terminal, len(line.split()), starts_bullet, numeric_fraction)


def unigram_entropy(words: Iterable[str]) -> float:
    """Shannon entropy (nats) of the word frequency distribution."""
    counts = Counter(words)
    total = sum(counts.values())
    if total == 0:
        raise EmptyDocumentError("unigram entropy needs at least one word")
    log = math.log
    return -sum(c * (log(c) - log(total)) for c in counts.values()) / total


def stopword_fraction(words: Iterable[str], stoplist: frozenset[str] | set[str]) -> float:
    """Fraction of words that are exact members of the stoplist."""
    words = list(words)
    if not words:
        raise EmptyDocumentError("stopword fraction needs at least one word")
    return sum(1 for w in words if w in stoplist) / len(words)


def top_ngram_char_fraction(words: Iterable[str], n: int, k: int = 1) -> float:
    """Character coverage of the k most frequent word n-grams.

    A word position covered by any occurrence of a selected n-gram counts
    its characters once; ties between equally frequent n-grams go to the
    lexicographically smaller one. 0 when there are fewer than n words.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if k < 1:
        raise ValueError("k must be at least 1")
    words = list(words)
    total_chars = sum(len(w) for w in words)
    if len(words) < n or total_chars == 0:
        return 0.0
    grams = Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))
    top = heapq.nsmallest(k, grams.items(), key=lambda item: (-item[1], item[0]))
    chosen = {gram for gram, _ in top}
    covered = bytearray(len(words))
    for i in range(len(words) - n + 1):
        if tuple(words[i : i + n]) in chosen:
            for j in range(i, i + n):
                covered[j] = 1
    covered_chars = sum(len(w) for w, hit in zip(words, covered) if hit)
    return covered_chars / total_chars


def is_adult_url(url: str | None, adult_domains: frozenset[str] | set[str]) -> bool:
    """True when the URL's host matches a blocklisted registered domain.

    A host matches when it equals a blocklist entry or is a subdomain of
    one (suffix match on dot boundaries).
    """
    if not url or not adult_domains:
        return False
    try:
        host = urlsplit(url).hostname
    except ValueError:
        return False
    if not host:
        return False
    host = host.lower().rstrip(".")
    labels = host.split(".")
    return any(".".join(labels[i:]) in adult_domains for i in range(len(labels)))


def language_fractions(view: NormalizedView, classifier) -> dict[str, float]:
    """Character-weighted per-language fractions from per-line classification.

    Lines are weighted by their non-whitespace character count; fractions
    sum to 1 over the detected languages, and an empty document yields an
    empty map.
    """
    if classifier is None:
        raise ResourceError("no language classifier configured")
    weights: dict[str, int] = {}
    total = 0
    for line in view.lines:
        chars = len(_WS_RE.sub("", line))
        if chars == 0:
            continue
        lang = classifier.classify(line)
        weights[lang] = weights.get(lang, 0) + chars
        total += chars
    if total == 0:
        return {}
    return {lang: count / total for lang, count in sorted(weights.items())}


def doc_metrics(
    view: NormalizedView,
    resources,
    url: str | None = None,
    ngram_sizes: tuple[int, ...] = DEFAULT_NGRAM_SIZES,
    top_k: int = 1,
    symbols: tuple[str, ...] = SYMBOLS,
    brackets: frozenset[str] = BRACKETS,
) -> RuleMetrics:
    """Compute the full 18-metric vector for one document."""
    lines = view.lines
    words = view.words
    text = view.text
    word_count = len(words)
    line_count = len(lines)

    terminal = bullets = 0
    ellipsis_lines = 0
    numeric_total = 0.0
    for line in lines:
        lm = line_metrics(line)
        terminal += lm.ends_terminal
        bullets += lm.starts_bullet
        numeric_total += lm.numeric_fraction
        if line.rstrip().endswith(ELLIPSES):
            ellipsis_lines += 1

    compact_len = len(_WS_RE.sub("", text))
    bracket_count = sum(1 for ch in text if ch in brackets)
    symbol_count = sum(text.count(sym) for sym in symbols)

    if word_count:
        unique = len(set(words))
        mean_word_length = sum(len(w) for w in words) / word_count
        symbol_to_word_ratio = symbol_count / word_count
        unique_word_fraction = unique / word_count
        entropy = unigram_entropy(words)
        stop_frac = stopword_fraction(words, resources.stopwords)
        bad_count = sum(1 for w in words if w in resources.bad_words)
        content_score = resources.content_classifier.score(view) if resources.content_classifier else bad_count / word_count
    else:
        mean_word_length = None
        symbol_to_word_ratio = None
        unique_word_fraction = None
        entropy = None
        stop_frac = None
        bad_count = 0
        content_score = None

    per_n = {n: top_ngram_char_fraction(words, n, top_k) for n in ngram_sizes}
    langs = language_fractions(view, resources.language_classifier) if resources.language_classifier else {}

    return RuleMetrics(
        terminal_punct_fraction=terminal / line_count,
        mean_line_word_count=word_count / line_count,
        bullet_line_fraction=bullets / line_count,
        mean_line_numeric_fraction=numeric_total / line_count,
        is_adult_url=is_adult_url(url, resources.adult_domains),
        language_fractions=langs,
        sentence_count=len(view.sentences),
        word_count=word_count,
        mean_word_length=mean_word_length,
        symbol_to_word_ratio=symbol_to_word_ratio,
        ellipsis_line_fraction=ellipsis_lines / line_count,
        unique_word_fraction=unique_word_fraction,
        unigram_entropy=entropy,
        stopword_fraction=stop_frac,
        top_ngram_char_fraction=max(per_n.values()) if per_n else 0.0,
        content_flag_score=content_score,
        bad_word_count=bad_count,
        bracket_ratio=bracket_count / compact_len if compact_len else 0.0,
        top_ngram_char_fractions=per_n,
    )
