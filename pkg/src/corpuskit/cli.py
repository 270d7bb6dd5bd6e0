"""Command-line entry point: one subcommand per pipeline stage plus a
plan runner composing them.

Data goes to files (or stdout for single-shot queries); logs go to
stderr. Every plan stage writes a manifest (inputs, config hash, seed,
counts) next to its output so a run can be audited and reproduced.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bpe, dedup, filtering, ngram_lm, ocr
from . import corpus as cm
from ._util import sha256_file
from .errors import ConfigError, CorpusKitError
from .resources import load_resources, load_wordlist

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("corpuskit")


def _write_json(path: str | None, obj: dict) -> None:
    text = json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_tokenizer(args):
    return bpe.load_tokenizer(args.model, getattr(args, "base", None))


# --- subcommand handlers ---------------------------------------------------

def cmd_filter(args) -> int:
    config, resources = filtering.load_config(args.config)
    if args.lenient:
        config.lenient = True
    report = filtering.run_pipeline(
        args.input, config, args.output,
        rejected_path=args.rejected,
        resources=resources,
        threads=args.threads,
    )
    log.info("filter: %d in, %d passed", report.input_count, report.pass_count)
    _write_json(args.report, report.to_obj())
    return 0


def cmd_calibrate(args) -> int:
    resources = filtering.load_config(args.config)[1] if args.config else load_resources()
    threshold = filtering.calibrate(
        cm.read_corpus(args.input, lenient=args.lenient),
        args.metric, args.percentile, args.side, resources,
    )
    _write_json(args.report, {"metric": threshold.metric, "min": threshold.min, "max": threshold.max})
    return 0


def cmd_dedup(args) -> int:
    params = dedup.LshParams(
        k=args.k, bands=args.bands, rows=args.rows,
        threshold=args.threshold, seed=args.seed if args.seed is not None else 0,
        shingle_n=args.shingle_n,
    )
    clusters = dedup.find_clusters(cm.read_corpus(args.input, lenient=args.lenient), params)
    if args.clusters:
        dedup.write_clusters(args.clusters, clusters)
    kept = dedup.deduplicate(cm.read_corpus(args.input, lenient=args.lenient), clusters, args.output)
    log.info("dedup: %d clusters, %d kept", len(clusters.clusters), kept)
    _write_json(args.report, {"clusters": len(clusters.clusters), "kept": kept,
                              "dropped": len(clusters.drop_set())})
    return 0


def cmd_lm_train(args) -> int:
    model = ngram_lm.train(cm.read_corpus(args.input, lenient=args.lenient),
                           order=args.order, discount=args.discount)
    ngram_lm.save_model(model, args.output)
    if args.arpa:
        ngram_lm.export_arpa(model, args.arpa)
    log.info("lm-train: order %d, vocab %d", model.order, model.vocab_size)
    return 0


def cmd_lm_score(args) -> int:
    model = ngram_lm.load_model(args.model)
    lines = []
    for doc in cm.read_corpus(args.input, lenient=args.lenient):
        scored = ngram_lm.perplexity(model, doc)
        lines.append(json.dumps({
            "id": scored.doc_id,
            "log_prob": scored.log_prob,
            "tokens": scored.token_count,
            "per_word_log_prob": scored.per_word_log_prob,
            "perplexity": scored.perplexity,
        }, ensure_ascii=False))
    out = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return 0


def cmd_lm_filter(args) -> int:
    model = ngram_lm.load_model(args.model)
    docs = list(cm.read_corpus(args.input, lenient=args.lenient))
    kept, threshold = ngram_lm.rank_filter(docs, model, args.retain, group_by_source=args.per_group)
    cm.write_corpus(args.output, kept)
    log.info("lm-filter: kept %d of %d", len(kept), len(docs))
    _write_json(args.report, {"input_count": len(docs), "kept_count": len(kept),
                              "score_threshold": threshold})
    return 0


def cmd_ocr_stats(args) -> int:
    lexicon = load_wordlist(args.lexicon)
    lines = []
    for doc in cm.read_corpus(args.input, lenient=args.lenient):
        stats = ocr.book_stats(doc, lexicon, args.confidence_cutoff)
        lines.append(json.dumps(stats.to_obj(), ensure_ascii=False))
    out = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return 0


def cmd_ocr_filter(args) -> int:
    lexicon = load_wordlist(args.lexicon)
    docs = cm.read_corpus(args.input, lenient=args.lenient)
    kept, report = ocr.ocr_filter(
        docs, lexicon,
        min_words_per_page=args.min_words_per_page,
        min_sentences_per_page=args.min_sentences_per_page,
        min_coverage=args.min_coverage,
        confidence_percentile=args.confidence_percentile,
        confidence_side=args.confidence_side,
        confidence_cutoff=args.confidence_cutoff,
    )
    cm.write_corpus(args.output, kept)
    log.info("ocr-filter: kept %d of %d", report.kept_count, report.input_count)
    _write_json(args.report, report.to_obj())
    return 0


def cmd_tok_train(args) -> int:
    model = bpe.train_bpe(cm.read_corpus(args.input, lenient=args.lenient), args.vocab_size)
    bpe.save_bpe(model, args.output)
    log.info("tok-train: %d merges", len(model.merges))
    return 0


def cmd_tok_merge(args) -> int:
    base = bpe.load_bpe(args.base)
    extension = bpe.load_bpe(args.extension)
    merged = bpe.merge_tokenizers(base, extension)
    bpe.save_merged(merged, args.output, args.base)
    log.info("tok-merge: %d extension merges kept", merged.extension_size)
    return 0


def cmd_tok_encode(args) -> int:
    tokenizer = _load_tokenizer(args)
    if args.stdin_lines:
        for line in sys.stdin:
            text = json.loads(line)
            print(json.dumps(tokenizer.encode(text)))
        return 0
    if args.text is None:
        raise ConfigError("tok-encode needs --text or --stdin-lines")
    print(json.dumps(tokenizer.encode(args.text)))
    return 0


def cmd_tok_decode(args) -> int:
    tokenizer = _load_tokenizer(args)
    if args.stdin_lines:
        for line in sys.stdin:
            ids = json.loads(line)
            print(json.dumps(tokenizer.decode(ids), ensure_ascii=False))
        return 0
    if args.ids is None:
        raise ConfigError("tok-decode needs --ids or --stdin-lines")
    print(json.dumps(tokenizer.decode(json.loads(args.ids)), ensure_ascii=False))
    return 0


def cmd_tok_eval(args) -> int:
    tokenizer = _load_tokenizer(args)
    report = bpe.tokens_per_word(
        tokenizer,
        cm.read_corpus(args.corpus, lenient=args.lenient),
        corpus_id=str(args.corpus),
    )
    _write_json(args.report, report.to_obj())
    return 0


# --- plan runner -----------------------------------------------------------

_CORPUS_STAGES = {"filter", "dedup", "lm-filter", "ocr-filter"}
_STAGE_EXT = {"tok-train": ".bpe", "tok-merge": ".bpe", "tok-eval": ".json"}
_STAGE_KINDS = _CORPUS_STAGES | set(_STAGE_EXT)


def _stage_output(stage: dict, index: int, output_dir: Path) -> Path:
    if "output" in stage:
        return Path(stage["output"])
    kind = stage["kind"]
    ext = _STAGE_EXT.get(kind, ".jsonl")
    return output_dir / f"{index:02d}-{kind}{ext}"


def _run_stage(kind: str, stage: dict, input_path: str, output: Path, seed: int, threads: int) -> dict:
    """Execute one plan stage; returns manifest counts."""
    if kind == "filter":
        config, resources = filtering.load_config(stage["config"])
        report = filtering.run_pipeline(input_path, config, output, resources=resources, threads=threads)
        return {"input_count": report.input_count, "pass_count": report.pass_count,
                "rejections": report.rejections}
    if kind == "dedup":
        params = dedup.LshParams(
            k=stage.get("k", 128), bands=stage.get("bands", 16), rows=stage.get("rows", 8),
            threshold=stage.get("threshold", 0.7), seed=stage.get("seed", seed),
            shingle_n=stage.get("shingle_n", 5),
        )
        clusters = dedup.find_clusters(cm.read_corpus(input_path), params)
        clusters_path = stage.get("clusters", str(output) + ".clusters.jsonl")
        dedup.write_clusters(clusters_path, clusters)
        kept = dedup.deduplicate(cm.read_corpus(input_path), clusters, output)
        return {"clusters": len(clusters.clusters), "kept": kept}
    if kind == "lm-filter":
        model = ngram_lm.load_model(stage["model"])
        docs = list(cm.read_corpus(input_path))
        kept, threshold = ngram_lm.rank_filter(docs, model, stage.get("retain", 0.95),
                                               group_by_source=stage.get("per_group", False))
        cm.write_corpus(output, kept)
        return {"input_count": len(docs), "kept_count": len(kept), "score_threshold": threshold}
    if kind == "ocr-filter":
        lexicon = load_wordlist(stage["lexicon"])
        kept, report = ocr.ocr_filter(
            cm.read_corpus(input_path), lexicon,
            min_words_per_page=stage.get("min_words_per_page", 0.0),
            min_sentences_per_page=stage.get("min_sentences_per_page", 0.0),
            min_coverage=stage.get("min_coverage", 0.0),
            confidence_percentile=stage.get("confidence_percentile"),
        )
        cm.write_corpus(output, kept)
        return report.to_obj()
    if kind == "tok-train":
        model = bpe.train_bpe(cm.read_corpus(input_path), stage["vocab_size"])
        bpe.save_bpe(model, output)
        return {"merges": len(model.merges), "vocab_size": model.vocab_size}
    if kind == "tok-merge":
        merged = bpe.merge_tokenizers(bpe.load_bpe(stage["base"]), bpe.load_bpe(stage["extension"]))
        bpe.save_merged(merged, output, stage["base"])
        return {"extension_merges": merged.extension_size, "vocab_size": merged.vocab_size}
    if kind == "tok-eval":
        tokenizer = bpe.load_tokenizer(stage["model"], stage.get("base"))
        report = bpe.tokens_per_word(tokenizer, cm.read_corpus(input_path), corpus_id=str(input_path))
        _write_json(str(output), report.to_obj())
        return {"tpw": report.tpw, "total_words": report.total_words, "total_tokens": report.total_tokens}
    raise ConfigError(f"unknown stage kind {kind!r}")


def cmd_run(args) -> int:
    try:
        plan = tomllib.loads(Path(args.plan).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        log.error("cannot load plan: %s", exc)
        return 1
    stages = plan.get("stage", [])
    if not stages:
        log.info("empty plan, nothing to do")
        return 0
    seed = args.seed if args.seed is not None else plan.get("seed", 0)
    output_dir = Path(plan.get("output_dir", "."))
    output_dir.mkdir(parents=True, exist_ok=True)
    current = plan.get("input")

    for index, stage in enumerate(stages):
        kind = stage.get("kind")
        if kind not in _STAGE_KINDS:
            log.error("stage %d: unknown kind %r", index, kind)
            return 1
        input_path = stage.get("input", current)
        if input_path is None:
            log.error("stage %d (%s): no input available", index, kind)
            return 1
        output = _stage_output(stage, index, output_dir)
        log.info("stage %d (%s): %s -> %s", index, kind, input_path, output)
        try:
            counts = _run_stage(kind, stage, input_path, output, seed, args.threads)
        except Exception as exc:
            # corpus writers are atomic; clear anything a model/report write left
            Path(output).unlink(missing_ok=True)
            log.error("stage %d (%s) failed: %s", index, kind, exc)
            return 1
        manifest = {
            "stage": index,
            "kind": kind,
            "input": str(input_path),
            "output": str(output),
            "config_hash": sha256_file(stage["config"]) if "config" in stage else None,
            "seed": seed,
            "params": {k: v for k, v in stage.items() if k not in ("kind", "input", "output")},
            "counts": counts,
        }
        _write_json(str(output) + ".manifest.json", manifest)
        if kind in _CORPUS_STAGES:
            current = str(output)
    return 0


# --- parser ----------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corpuskit",
                                     description="Corpus curation and tokenizer extension toolkit")
    parser.add_argument("--seed", type=int, default=None, help="global random seed")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes for parallel stages")
    parser.add_argument("--lenient", action="store_true",
                        help="skip malformed corpus records instead of failing")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(handler=handler)
        return p

    p = add("filter", cmd_filter, help="apply quality-rule thresholds to a corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--rejected", help="also write rejected docs with their decision")
    p.add_argument("--report", help="write the JSON report here instead of stdout")

    p = add("calibrate", cmd_calibrate, help="derive a nearest-rank percentile threshold")
    p.add_argument("--input", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--percentile", type=float, required=True)
    p.add_argument("--side", choices=("lower", "upper"), required=True)
    p.add_argument("--config", help="filter config supplying resources")
    p.add_argument("--report")

    p = add("dedup", cmd_dedup, help="remove near-duplicate documents")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--clusters", help="write the cluster file here")
    p.add_argument("--k", type=int, default=128)
    p.add_argument("--bands", type=int, default=16)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--shingle-n", type=int, default=5, dest="shingle_n")
    p.add_argument("--report")

    p = add("lm-train", cmd_lm_train, help="train a Kneser-Ney n-gram model")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--discount", type=float, default=0.75)
    p.add_argument("--arpa", help="also write an ARPA-style text export")

    p = add("lm-score", cmd_lm_score, help="score documents under a trained model")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output")

    p = add("lm-filter", cmd_lm_filter, help="keep the best-scoring fraction of a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--retain", type=float, default=0.95)
    p.add_argument("--per-group", action="store_true", dest="per_group",
                   help="apply the retention quota per source tag")
    p.add_argument("--report")

    p = add("ocr-stats", cmd_ocr_stats, help="per-book OCR quality statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--confidence-cutoff", type=float, default=0.8, dest="confidence_cutoff")
    p.add_argument("--output")

    p = add("ocr-filter", cmd_ocr_filter, help="filter books on OCR statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--min-words-per-page", type=float, default=0.0, dest="min_words_per_page")
    p.add_argument("--min-sentences-per-page", type=float, default=0.0, dest="min_sentences_per_page")
    p.add_argument("--min-coverage", type=float, default=0.0, dest="min_coverage")
    p.add_argument("--confidence-percentile", type=float, default=None, dest="confidence_percentile")
    p.add_argument("--confidence-side", choices=("lower", "upper"), default="lower",
                   dest="confidence_side")
    p.add_argument("--confidence-cutoff", type=float, default=0.8, dest="confidence_cutoff")
    p.add_argument("--report")

    p = add("tok-train", cmd_tok_train, help="train a byte-level BPE tokenizer")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--vocab-size", type=int, required=True, dest="vocab_size")

    p = add("tok-merge", cmd_tok_merge, help="extend a base tokenizer with new merges")
    p.add_argument("--base", required=True)
    p.add_argument("--extension", required=True)
    p.add_argument("--output", required=True)

    p = add("tok-encode", cmd_tok_encode, help="encode text to token ids")
    p.add_argument("--model", required=True)
    p.add_argument("--base", help="base model file when --model is merged")
    p.add_argument("--text")
    p.add_argument("--stdin-lines", action="store_true", dest="stdin_lines",
                   help="read JSON strings from stdin, one per line")

    p = add("tok-decode", cmd_tok_decode, help="decode token ids back to text")
    p.add_argument("--model", required=True)
    p.add_argument("--base")
    p.add_argument("--ids", help="JSON array of token ids")
    p.add_argument("--stdin-lines", action="store_true", dest="stdin_lines")

    p = add("tok-eval", cmd_tok_eval, help="tokens-per-word over a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--base")
    p.add_argument("--corpus", required=True)
    p.add_argument("--report")

    p = add("run", cmd_run, help="execute a multi-stage plan file")
    p.add_argument("plan")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (CorpusKitError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
