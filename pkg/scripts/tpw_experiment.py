#!/usr/bin/env python3
"""Vocabulary-extension experiment: how tokens-per-word falls as the
extension grows.

Trains one large byte-level BPE extension on a training split, merges
truncations of it (exact equivalents of smaller training runs) into a
byte-identity base, and prints TPW on a held-out split per size. The
expected shape: steep improvement early, diminishing returns later.
"""

import argparse
import time

from corpuskit import bpe
from corpuskit.corpus import read_corpus
from corpuskit.synth import generate_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", help="training JSONL; synthesized when omitted")
    parser.add_argument("--eval-corpus", help="held-out JSONL; synthesized when omitted")
    parser.add_argument("--sizes", default="1000,2000,4000,8000",
                        help="comma-separated extension sizes (merge counts)")
    parser.add_argument("--seed", type=int, default=4242)
    args = parser.parse_args()

    sizes = sorted(int(s) for s in args.sizes.split(","))
    if args.corpus:
        train_docs = list(read_corpus(args.corpus))
    else:
        train_docs = list(generate_corpus(230, words_per_doc=2000, seed=args.seed))
    if args.eval_corpus:
        eval_docs = list(read_corpus(args.eval_corpus))
    else:
        eval_docs = list(generate_corpus(50, words_per_doc=1500, seed=args.seed + 1))

    start = time.perf_counter()
    big = bpe.train_bpe(train_docs, 256 + sizes[-1])
    print(f"trained {len(big.merges)} merges in {time.perf_counter() - start:.1f}s")

    base = bpe.ByteBpeModel([])
    base_tpw = bpe.tokens_per_word(base, eval_docs).tpw
    print(f"{'extension':>10}  {'TPW':>8}  {'drop':>8}")
    print(f"{'base':>10}  {base_tpw:8.4f}  {'-':>8}")
    previous = base_tpw
    for size in sizes:
        merged = bpe.merge_tokenizers(base, big.truncated(min(size, len(big.merges))))
        tpw = bpe.tokens_per_word(merged, eval_docs).tpw
        print(f"{size:>10}  {tpw:8.4f}  {previous - tpw:8.4f}")
        previous = tpw


if __name__ == "__main__":
    main()
