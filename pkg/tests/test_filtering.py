import json
import math

import pytest
from hypothesis import given, strategies as st

from corpuskit.corpus import Document, normalize, read_corpus, write_corpus
from corpuskit.errors import CalibrationError, ConfigError
from corpuskit.filtering import (
    FilterConfig,
    LanguageRule,
    Threshold,
    apply_rules,
    calibrate,
    calibrate_values,
    load_config,
    nearest_rank,
    run_pipeline,
)
from corpuskit.resources import EMPTY_RESOURCES
from corpuskit.rules import doc_metrics
from corpuskit.synth import generate_corpus


def metrics_for(text, **kw):
    return doc_metrics(normalize(text), EMPTY_RESOURCES, **kw)


# --- nearest-rank calibration ----------------------------------------------

def test_nearest_rank_textbook_example():
    values = list(range(1, 101))
    assert nearest_rank(values, 95) == 95


def test_nearest_rank_single_value():
    for p in (1, 50, 99.9):
        assert nearest_rank([7.5], p) == 7.5


def test_nearest_rank_no_float_drift():
    # ceil(0.95 * N) must be exact for every N, not 96-for-95 style drift
    for n in (1, 10, 20, 100, 1000, 10**6):
        values = list(range(n))
        rank_index = values.index(nearest_rank(values, 95))
        assert rank_index == math.ceil(95 * n / 100) - 1


def test_nearest_rank_empty_raises():
    with pytest.raises(CalibrationError):
        nearest_rank([], 95)
    with pytest.raises(ValueError):
        nearest_rank([1], 0)
    with pytest.raises(ValueError):
        nearest_rank([1], 100)


def test_calibrate_values_sides():
    upper = calibrate_values("word_count", [3, 1, 2], 50, "upper")
    assert upper.max == 2 and upper.min is None
    lower = calibrate_values("word_count", [3, 1, 2], 50, "lower")
    assert lower.min == 2 and lower.max is None


def test_calibrate_all_equal_retains_everything():
    threshold = calibrate_values("word_count", [5.0] * 40, 95, "upper")
    assert threshold.max == 5.0
    assert all(threshold.accepts(5.0) for _ in range(3))


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=400), st.sampled_from([5, 25, 50, 75, 90, 95, 99]))
def test_calibrated_upper_bound_retains_exact_count(values, p):
    threshold = calibrate_values("word_count", values, p, "upper")
    retained = sum(1 for v in values if threshold.accepts(v))
    # nearest-rank value sits at 1-based rank ceil(p/100*N); duplicates can
    # only enlarge the retained set
    assert retained >= math.ceil(p * len(values) / 100)
    if len(set(values)) == len(values):
        assert retained == math.ceil(p * len(values) / 100)


def test_calibrate_over_documents(corpus_file):
    threshold = calibrate(read_corpus(corpus_file), "word_count", 50, "upper")
    assert threshold.max is not None


def test_calibrate_unknown_metric():
    with pytest.raises(ConfigError):
        calibrate([], "no_such_metric", 50, "upper")


# --- apply ------------------------------------------------------------------

def test_apply_boolean_rule_rejects():
    m = metrics_for("hello world", url="https://adult.example/x")
    config = FilterConfig(boolean_rules={"is_adult_url": False})
    # EMPTY_RESOURCES has no blocklist, so craft the failure via threshold instead
    decision = apply_rules(m, config)
    assert decision.passed
    bad = FilterConfig(boolean_rules={"is_adult_url": True})
    decision = apply_rules(m, bad)
    assert not decision.passed and decision.failed_rules == ("is_adult_url",)


def test_apply_empty_config_passes_anything():
    for text in ("hello", "", "12345"):
        assert apply_rules(metrics_for(text), FilterConfig()).passed


def test_apply_bounds_are_inclusive():
    m = metrics_for("one two three")
    assert m.word_count == 3
    config = FilterConfig(thresholds=(Threshold("word_count", min=3),))
    assert apply_rules(m, config).passed
    config = FilterConfig(thresholds=(Threshold("word_count", max=3),))
    assert apply_rules(m, config).passed
    config = FilterConfig(thresholds=(Threshold("word_count", min=3.5),))
    assert not apply_rules(m, config).passed


def test_apply_null_metric_fails_rule():
    empty = metrics_for("")
    config = FilterConfig(thresholds=(Threshold("unigram_entropy", min=0.0),))
    decision = apply_rules(empty, config)
    assert not decision.passed and "unigram_entropy" in decision.failed_rules


def test_apply_lists_all_violations_in_config_order():
    m = metrics_for("a a a a")
    config = FilterConfig(
        thresholds=(Threshold("unique_word_fraction", min=0.9), Threshold("word_count", min=10)),
        language=LanguageRule("bn", 0.5),
    )
    decision = apply_rules(m, config)
    assert decision.failed_rules == ("unique_word_fraction", "word_count", "language")


def test_apply_language_rule(resources, bn_sampler):
    m = doc_metrics(normalize(bn_sampler.text(50)), resources)
    ok = FilterConfig(language=LanguageRule("bn", 0.9))
    assert apply_rules(m, ok).passed
    off = FilterConfig(language=LanguageRule("en", 0.9))
    assert not apply_rules(m, off).passed


@given(st.floats(0, 20), st.floats(0, 20))
def test_apply_is_monotone_in_bounds(lo, hi):
    # loosening a bound can never flip pass -> fail
    m = metrics_for("one two three four five")
    tight = FilterConfig(thresholds=(Threshold("word_count", min=lo, max=lo + hi),))
    loose = FilterConfig(thresholds=(Threshold("word_count", min=lo / 2, max=lo + hi * 2 + 1),))
    if apply_rules(m, tight).passed:
        assert apply_rules(m, loose).passed


def test_config_validation():
    with pytest.raises(ConfigError):
        FilterConfig(thresholds=(Threshold("no_such", min=0),)).validate()
    with pytest.raises(ConfigError):
        FilterConfig(thresholds=(Threshold("word_count", min=0), Threshold("word_count", max=1))).validate()
    with pytest.raises(ConfigError):
        FilterConfig(boolean_rules={"word_count": True}).validate()
    with pytest.raises(ConfigError):
        Threshold("word_count")
    with pytest.raises(ConfigError):
        Threshold("word_count", min=2, max=1)


def test_load_config_example(tmp_path):
    config_text = """
lenient = true
[thresholds]
word_count = { min = 5, max = 100 }
[boolean_rules]
is_adult_url = false
[language]
tag = "bn"
min_fraction = 0.6
"""
    path = tmp_path / "f.toml"
    path.write_text(config_text, encoding="utf-8")
    config, resources = load_config(path)
    assert config.lenient
    assert config.thresholds[0].metric == "word_count"
    assert config.boolean_rules == {"is_adult_url": False}
    assert config.language == LanguageRule("bn", 0.6)


def test_shipped_example_config_loads():
    from conftest import REPO

    config, resources = load_config(REPO / "configs" / "filter.example.toml")
    assert len(config.thresholds) == 16
    assert resources.language_classifier is not None


# --- run_pipeline -------------------------------------------------------------

def make_corpus_file(tmp_path, docs, name="in.jsonl"):
    path = tmp_path / name
    write_corpus(path, docs)
    return path


def test_pipeline_rejects_middle_doc(tmp_path):
    docs = [
        Document(id="1", source="web", text="five words in this line"),
        Document(id="2", source="web", text="short"),
        Document(id="3", source="web", text="another five word line here"),
    ]
    src = make_corpus_file(tmp_path, docs)
    out = tmp_path / "out.jsonl"
    rejected = tmp_path / "rej.jsonl"
    config = FilterConfig(thresholds=(Threshold("word_count", min=2),))
    report = run_pipeline(src, config, out, rejected_path=rejected)
    kept = [d.id for d in read_corpus(out)]
    assert kept == ["1", "3"]
    assert report.input_count == 3 and report.pass_count == 2
    assert report.rejections == {"word_count": 1}
    rej_lines = rejected.read_text(encoding="utf-8").strip().split("\n")
    assert len(rej_lines) == 1
    obj = json.loads(rej_lines[0])
    assert obj["id"] == "2" and obj["decision"]["failed_rules"] == ["word_count"]


def test_pipeline_deterministic_outputs(tmp_path):
    docs = list(generate_corpus(40, words_per_doc=30, seed=3))
    src = make_corpus_file(tmp_path, docs)
    config = FilterConfig(thresholds=(Threshold("word_count", min=25),))
    out1, out2 = tmp_path / "o1.jsonl", tmp_path / "o2.jsonl"
    r1 = run_pipeline(src, config, out1)
    r2 = run_pipeline(src, config, out2)
    assert out1.read_bytes() == out2.read_bytes()
    assert r1.to_json(with_timing=False) == r2.to_json(with_timing=False)


def test_pipeline_parallel_matches_serial(tmp_path):
    docs = list(generate_corpus(60, words_per_doc=40, seed=11))
    src = make_corpus_file(tmp_path, docs)
    config = FilterConfig(thresholds=(Threshold("unique_word_fraction", min=0.5),))
    serial, parallel = tmp_path / "s.jsonl", tmp_path / "p.jsonl"
    rs = run_pipeline(src, config, serial, threads=1)
    rp = run_pipeline(src, config, parallel, threads=2)
    assert serial.read_bytes() == parallel.read_bytes()
    assert rs.to_json(with_timing=False) == rp.to_json(with_timing=False)


def test_pipeline_half_rejected_fixture(tmp_path):
    # engineered 50/50 split: half the docs fall under the word minimum
    long_docs = list(generate_corpus(20, words_per_doc=60, seed=5, id_prefix="long"))
    short_docs = list(generate_corpus(20, words_per_doc=10, seed=6, id_prefix="short"))
    interleaved = [d for pair in zip(long_docs, short_docs) for d in pair]
    src = make_corpus_file(tmp_path, interleaved)
    out = tmp_path / "out.jsonl"
    config = FilterConfig(thresholds=(Threshold("word_count", min=40),))
    report = run_pipeline(src, config, out)
    assert report.input_count == 40
    assert report.pass_count == 20
    assert all(d.id.startswith("long") for d in read_corpus(out))


def test_pipeline_first_failure_attribution_sums(tmp_path, resources):
    docs = list(generate_corpus(30, words_per_doc=25, seed=9))
    src = make_corpus_file(tmp_path, docs)
    config = FilterConfig(
        thresholds=(Threshold("word_count", min=28), Threshold("unique_word_fraction", min=0.99)),
    )
    report = run_pipeline(src, config, tmp_path / "out.jsonl", resources=resources)
    assert report.pass_count + sum(report.rejections.values()) == report.input_count


def test_pipeline_output_is_subsequence(tmp_path, small_corpus):
    src = make_corpus_file(tmp_path, small_corpus)
    out = tmp_path / "out.jsonl"
    config = FilterConfig(thresholds=(Threshold("unigram_entropy", min=3.2),))
    run_pipeline(src, config, out)
    input_ids = [d.id for d in small_corpus]
    output_ids = [d.id for d in read_corpus(out)]
    it = iter(input_ids)
    assert all(any(x == want for x in it) for want in output_ids)


def test_pipeline_lenient_counts_bad_records(tmp_path, small_corpus):
    src = make_corpus_file(tmp_path, small_corpus[:4])
    with open(src, "a", encoding="utf-8") as fh:
        fh.write("garbage line\n")
    config = FilterConfig(lenient=True)
    report = run_pipeline(src, config, tmp_path / "out.jsonl")
    assert report.skipped_records == 1
    assert report.input_count == 4


def test_pipeline_failure_leaves_no_partial_output(tmp_path, small_corpus):
    src = make_corpus_file(tmp_path, small_corpus[:4])
    with open(src, "a", encoding="utf-8") as fh:
        fh.write("garbage line\n")
    out = tmp_path / "out.jsonl"
    from corpuskit.errors import RecordError

    with pytest.raises(RecordError):
        run_pipeline(src, FilterConfig(), out)
    assert not out.exists()
    assert not list(tmp_path.glob("out.jsonl.tmp-*"))


def test_pipeline_histograms_cover_documents(tmp_path, small_corpus):
    src = make_corpus_file(tmp_path, small_corpus)
    report = run_pipeline(src, FilterConfig(), tmp_path / "out.jsonl")
    hist = report.histograms["word_count"]
    assert sum(hist.counts) + hist.null_count == report.input_count
    assert len(hist.counts) == 64
