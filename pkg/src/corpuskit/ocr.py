"""Book-level OCR quality statistics and filtering.

Per-book statistics: average words and sentences per page, coverage of a
common-word lexicon, and the count of OCR words above a confidence
cutoff (strictly greater than 0.8 by default). Filtering applies minimum
bounds, optionally deriving the confidence bound from a percentile of
the corpus distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from . import corpus as cm
from .errors import NotPaginatedError
from .filtering import nearest_rank

NO_CONFIDENCE = -1  # sentinel for books without OCR confidence data


@dataclass(frozen=True)
class BookStats:
    doc_id: str
    pages: int
    avg_words_per_page: float
    avg_sentences_per_page: float
    lexicon_coverage: float
    high_confidence_words: int  # NO_CONFIDENCE when absent

    def to_obj(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "pages": self.pages,
            "avg_words_per_page": self.avg_words_per_page,
            "avg_sentences_per_page": self.avg_sentences_per_page,
            "lexicon_coverage": self.lexicon_coverage,
            "high_confidence_words": self.high_confidence_words,
        }


def book_stats(
    doc: cm.Document,
    lexicon: frozenset[str] | set[str],
    confidence_cutoff: float = 0.8,
) -> BookStats:
    """Page-level statistics for one paginated document.

    Coverage is lexicon hits over all words in the book; the confidence
    count uses strict inequality (confidence > cutoff) and is
    NO_CONFIDENCE when no page carries confidence data.
    """
    if not doc.pages:
        raise NotPaginatedError(f"document {doc.id!r} has no pages")
    total_words = total_sentences = lexicon_hits = 0
    high_conf = 0
    any_confidence = False
    for page in doc.pages:
        view = cm.normalize(page.text)
        total_words += len(view.words)
        total_sentences += len(view.sentences)
        lexicon_hits += sum(1 for w in view.words if w in lexicon)
        if page.word_confidences is not None:
            any_confidence = True
            high_conf += sum(1 for _, conf in page.word_confidences if conf > confidence_cutoff)
    n_pages = len(doc.pages)
    return BookStats(
        doc_id=doc.id,
        pages=n_pages,
        avg_words_per_page=total_words / n_pages,
        avg_sentences_per_page=total_sentences / n_pages,
        lexicon_coverage=lexicon_hits / total_words if total_words else 0.0,
        high_confidence_words=high_conf if any_confidence else NO_CONFIDENCE,
    )


@dataclass
class OcrFilterReport:
    input_count: int
    kept_count: int
    rejections: dict[str, int]
    confidence_bound: float | None

    def to_obj(self) -> dict:
        return {
            "input_count": self.input_count,
            "kept_count": self.kept_count,
            "rejections": self.rejections,
            "confidence_bound": self.confidence_bound,
        }


def ocr_filter(
    docs: Iterable[cm.Document],
    lexicon: frozenset[str] | set[str],
    min_words_per_page: float = 0.0,
    min_sentences_per_page: float = 0.0,
    min_coverage: float = 0.0,
    confidence_percentile: float | None = None,
    confidence_side: str = "lower",
    confidence_cutoff: float = 0.8,
) -> tuple[list[cm.Document], OcrFilterReport]:
    """Apply minimum bounds per book, in input order (bounds inclusive).

    With a percentile rule, the high-confidence-word bound is calibrated
    at that nearest-rank percentile over books that have confidence data;
    books without confidence data are exempt from that one rule. The
    default side "lower" removes the low tail.
    """
    docs = list(docs)
    stats = [book_stats(d, lexicon, confidence_cutoff) for d in docs]

    bound = None
    if confidence_percentile is not None:
        observed = [s.high_confidence_words for s in stats if s.high_confidence_words != NO_CONFIDENCE]
        bound = nearest_rank(observed, confidence_percentile)

    kept: list[cm.Document] = []
    rejections: dict[str, int] = {}
    for doc, s in zip(docs, stats):
        failed = None
        if s.avg_words_per_page < min_words_per_page:
            failed = "avg_words_per_page"
        elif s.avg_sentences_per_page < min_sentences_per_page:
            failed = "avg_sentences_per_page"
        elif s.lexicon_coverage < min_coverage:
            failed = "lexicon_coverage"
        elif bound is not None and s.high_confidence_words != NO_CONFIDENCE:
            if confidence_side == "lower" and s.high_confidence_words < bound:
                failed = "high_confidence_words"
            elif confidence_side == "upper" and s.high_confidence_words > bound:
                failed = "high_confidence_words"
        if failed is None:
            kept.append(doc)
        else:
            rejections[failed] = rejections.get(failed, 0) + 1

    report = OcrFilterReport(len(docs), len(kept), dict(sorted(rejections.items())), bound)
    return kept, report
