#!/usr/bin/env python3
"""Generate a deterministic synthetic Bangla corpus as JSONL.

Useful for benchmarks and pipeline dry runs when no real corpus is at
hand; the text is Zipf-sampled from a fixed Bangla vocabulary, so runs
with the same seed are byte-identical.
"""

import argparse

from corpuskit.corpus import write_corpus
from corpuskit.synth import generate_book, generate_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("--docs", type=int, default=100)
    parser.add_argument("--words", type=int, default=500, help="approx words per document")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--books", action="store_true",
                        help="emit paginated books with OCR confidences instead of web docs")
    parser.add_argument("--pages", type=int, default=10, help="pages per book (with --books)")
    args = parser.parse_args()

    if args.books:
        docs = (
            generate_book(f"book-{i:05d}", args.pages, args.words, seed=args.seed + i)
            for i in range(args.docs)
        )
    else:
        docs = generate_corpus(args.docs, words_per_doc=args.words, seed=args.seed)
    count = write_corpus(args.out, docs)
    print(f"wrote {count} documents to {args.out}")


if __name__ == "__main__":
    main()
