import hypothesis
import pytest

from corpuskit.resources import load_resources
from corpuskit.synth import TextSampler, generate_corpus

from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
RESOURCES = REPO / "resources"

hypothesis.settings.register_profile("corpuskit", deadline=None, max_examples=60)
hypothesis.settings.load_profile("corpuskit")

# Characters the tokenizer and normalizer must survive: Bangla block,
# ASCII, whitespace variants, emoji, and combining marks.
BANGLA_ALPHABET = "".join(chr(c) for c in range(0x0980, 0x09FF) if chr(c).isprintable())
MIXED_ALPHABET = (
    BANGLA_ALPHABET
    + "abcdefghijklmnopqrstuvwxyz ABC.,!?0123456789"
    + " \t\n  "
    + "\U0001F600\U0001F680•“”।"
)


@pytest.fixture(scope="session")
def resources():
    return load_resources(
        stopwords=RESOURCES / "stopwords_bn.txt",
        bad_words=RESOURCES / "badwords.txt",
        adult_domains=RESOURCES / "adult_domains.txt",
        lang_seeds=RESOURCES / "lang_seeds",
    )


@pytest.fixture(scope="session")
def bn_sampler():
    return TextSampler(seed=1234)


@pytest.fixture(scope="session")
def small_corpus():
    return list(generate_corpus(30, words_per_doc=80, seed=7))


@pytest.fixture()
def corpus_file(tmp_path, small_corpus):
    from corpuskit.corpus import write_corpus

    path = tmp_path / "corpus.jsonl"
    write_corpus(path, small_corpus)
    return path
