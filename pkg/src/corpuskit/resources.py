"""Runtime resources: word lists, domain blocklist, and classifiers.

The published rule thresholds depend on unpublished lists, so every list
is a runtime input: stopwords and bad words one word per line, adult
domains one registered domain per line, and language seed text one file
per language tag (``<tag>.txt``). Example files ship under resources/.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol

from .corpus import NormalizedView
from .errors import EmptyDocumentError, ResourceError

_WS_RE = re.compile(r"\s+")


class LanguageClassifier(Protocol):
    def classify(self, line: str) -> str: ...


class ContentClassifier(Protocol):
    def score(self, view: NormalizedView) -> float: ...


@dataclass(frozen=True)
class LexiconRatioClassifier:
    """Baseline content classifier: flagged-word count over word count."""

    lexicon: frozenset[str]

    def score(self, view: NormalizedView) -> float:
        if not view.words:
            raise EmptyDocumentError("content score needs at least one word")
        return sum(1 for w in view.words if w in self.lexicon) / len(view.words)


class TrigramLanguageClassifier:
    """Character-trigram profile classifier trained from seed text.

    Each language gets a log-frequency profile over its most common
    trigrams; a line is assigned to the language with the highest summed
    trigram log-likelihood, ties going to the lexicographically smaller
    tag. Lines are sampled to a fixed character budget so classification
    cost stays bounded for pathological single-line documents.
    """

    LINE_SAMPLE_CHARS = 400

    def __init__(self, log_profiles: dict[str, dict[str, float]], floors: dict[str, float]):
        if not log_profiles:
            raise ResourceError("classifier needs at least one language profile")
        self._langs = sorted(log_profiles)
        # One lookup per trigram: tuple of per-language log-probs.
        combined: dict[str, tuple[float, ...]] = {}
        for pos, lang in enumerate(self._langs):
            for tri, logp in log_profiles[lang].items():
                if tri not in combined:
                    combined[tri] = tuple(floors[l] for l in self._langs)
                row = list(combined[tri])
                row[pos] = logp
                combined[tri] = tuple(row)
        self._combined = combined
        self._floor_row = tuple(floors[l] for l in self._langs)

    @classmethod
    def train(cls, seed_texts: Mapping[str, str], profile_size: int = 8000) -> "TrigramLanguageClassifier":
        profiles: dict[str, dict[str, float]] = {}
        floors: dict[str, float] = {}
        for lang, text in seed_texts.items():
            counts = Counter(cls._trigrams(text))
            if not counts:
                raise ResourceError(f"seed text for {lang!r} has no trigrams")
            top = counts.most_common(profile_size)
            total = sum(c for _, c in top)
            profiles[lang] = {tri: math.log(c / total) for tri, c in top}
            floors[lang] = math.log(0.1 / total)
        return cls(profiles, floors)

    @staticmethod
    def _trigrams(text: str):
        text = _WS_RE.sub(" ", unicodedata.normalize("NFC", text)).strip().lower()
        return (text[i : i + 3] for i in range(len(text) - 2))

    def classify(self, line: str) -> str:
        if len(line) > self.LINE_SAMPLE_CHARS:
            line = line[: self.LINE_SAMPLE_CHARS]
        scores = [0.0] * len(self._langs)
        combined = self._combined
        floor_row = self._floor_row
        for tri in self._trigrams(line):
            row = combined.get(tri, floor_row)
            for i, logp in enumerate(row):
                scores[i] += logp
        best = max(range(len(self._langs)), key=lambda i: (scores[i], -i))
        return self._langs[best]


@dataclass
class Resources:
    """Read-only bundle handed to the metric layer."""

    stopwords: frozenset[str] = frozenset()
    bad_words: frozenset[str] = frozenset()
    adult_domains: frozenset[str] = frozenset()
    language_classifier: TrigramLanguageClassifier | None = None
    content_classifier: ContentClassifier | None = None


EMPTY_RESOURCES = Resources()


def load_wordlist(path: str | Path) -> frozenset[str]:
    """One entry per line, UTF-8; blank lines are skipped."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return frozenset(line.strip() for line in fh if line.strip())
    except OSError as exc:
        raise ResourceError(f"cannot read word list {path}: {exc}") from exc


def load_language_seeds(directory: str | Path) -> dict[str, str]:
    """Read ``<tag>.txt`` seed files from a directory."""
    directory = Path(directory)
    seeds: dict[str, str] = {}
    for path in sorted(directory.glob("*.txt")):
        seeds[path.stem] = path.read_text(encoding="utf-8")
    if not seeds:
        raise ResourceError(f"no language seed files in {directory}")
    return seeds


def load_resources(
    stopwords: str | Path | None = None,
    bad_words: str | Path | None = None,
    adult_domains: str | Path | None = None,
    lang_seeds: str | Path | None = None,
) -> Resources:
    res = Resources()
    if stopwords:
        res.stopwords = load_wordlist(stopwords)
    if bad_words:
        res.bad_words = load_wordlist(bad_words)
    if adult_domains:
        res.adult_domains = frozenset(d.lower() for d in load_wordlist(adult_domains))
    if lang_seeds:
        res.language_classifier = TrigramLanguageClassifier.train(load_language_seeds(lang_seeds))
    return res
