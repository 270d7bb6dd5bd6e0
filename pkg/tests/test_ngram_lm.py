import math
import random
from fractions import Fraction

import pytest

from corpuskit.corpus import Document, normalize
from corpuskit.errors import EmptyCorpusError, EmptyDocumentError, TrainError
from corpuskit.ngram_lm import (
    export_arpa,
    load_model,
    perplexity,
    rank_filter,
    save_model,
    train,
)
from corpuskit.synth import TextSampler, generate_corpus


def doc(text, id="d"):
    return Document(id=id, source="test", text=text)


def kn_oracle(sentences, order, discount):
    """Fraction-exact transcription of the smoothing definition.

    Independent of the model code: builds its own count tables and
    evaluates the interpolation formulas directly.
    """
    D = Fraction(discount).limit_denominator(1000)
    vocab = {"<s>": 0, "</s>": 1, "<unk>": 2}
    for words in sentences:
        for w in words:
            vocab.setdefault(w, len(vocab))
    counts = [dict() for _ in range(order + 1)]
    for words in sentences:
        padded = [0] * (order - 1) + [vocab[w] for w in words] + [1]
        for k in range(1, order + 1):
            for i in range(len(padded) - k + 1):
                key = tuple(padded[i : i + k])
                counts[k][key] = counts[k].get(key, 0) + 1
    V = len(vocab)

    def p(k, w, h):
        if k == 1:
            if order >= 2:
                cont = {}
                for key in counts[2]:
                    cont[key[1]] = cont.get(key[1], 0) + 1
                total = len(counts[2])
            else:
                cont = {key[0]: c for key, c in counts[1].items()}
                total = sum(cont.values())
            if total == 0:
                return Fraction(1, V)
            types = len(cont)
            c = cont.get(w, 0)
            return max(c - D, 0) / total + (D * types / total) * Fraction(1, V)
        if k == order:
            follow = {key[-1]: c for key, c in counts[k].items() if key[:-1] == h}
        else:
            follow = {}
            for key in counts[k + 1]:
                if key[1:-1] == h:
                    follow[key[-1]] = follow.get(key[-1], 0) + 1
        denom = sum(follow.values())
        if denom == 0:
            return p(k - 1, w, h[1:])
        c = follow.get(w, 0)
        return max(c - D, 0) / denom + (D * len(follow) / denom) * p(k - 1, w, h[1:])

    return vocab, lambda w, h: p(len(h) + 1, w, h)


# --- hand-derived values ------------------------------------------------------

def test_bigram_hand_values():
    model = train([doc("a b a b")], order=2)
    assert model.prob("b", ["a"]) == pytest.approx(0.690625, abs=1e-9)
    assert model.prob("a", ["a"]) == pytest.approx(0.159375, abs=1e-9)
    assert model.prob("b", ["a"]) > model.prob("a", ["a"])
    assert model.prob("a") == pytest.approx(0.425, abs=1e-9)
    assert model.prob("b") == pytest.approx(0.175, abs=1e-9)


def test_unigram_closed_form():
    # "a b" at order 1: counts a:1, b:1, </s>:1; total 3, types 3, V=5
    model = train([doc("a b")], order=1)
    expected = (1 - 0.75) / 3 + (0.75 * 3 / 3) * (1 / 5)
    assert model.prob("a") == pytest.approx(expected, abs=1e-6)
    assert model.prob("a") == pytest.approx(model.prob("b"), abs=1e-6)


def test_perplexity_hand_product():
    # trained and scored on "a b": each of the 3 tokens has p = 17/40
    model = train([doc("a b")], order=2)
    scored = perplexity(model, doc("a b"))
    assert scored.token_count == 3
    assert scored.log_prob == pytest.approx(3 * math.log(17 / 40), abs=1e-9)
    assert scored.perplexity == pytest.approx(40 / 17, abs=1e-9)


# --- oracle comparison ----------------------------------------------------------

@pytest.mark.parametrize("order", [1, 2, 3])
def test_probabilities_match_fraction_oracle(order):
    rnd = random.Random(17)
    alphabet = ["অ", "আ", "ই", "ঈ", "উ"]
    for trial in range(8):
        sentences = [
            [rnd.choice(alphabet) for _ in range(rnd.randint(1, 6))]
            for _ in range(rnd.randint(1, 5))
        ]
        text = "। ".join(" ".join(s) for s in sentences) + "।"
        model = train([doc(text)], order=order)
        vocab, oracle = kn_oracle([s.split() for s in normalize(text).sentences if s.split()], order, 0.75)
        assert vocab == model.vocab
        for w in vocab.values():
            for h_len in range(order):
                h = tuple(rnd.choice(list(vocab.values())) for _ in range(h_len))
                assert model.prob_ids(w, h) == pytest.approx(float(oracle(w, h)), abs=1e-9), (w, h)


# --- normalization ---------------------------------------------------------------

@pytest.mark.parametrize("order", [1, 2, 3])
def test_conditionals_sum_to_one_over_all_contexts(order):
    words = ["আম", "জাম", "কলা", "লিচু", "পেয়ারা"]
    rnd = random.Random(5)
    text = "\n".join(
        " ".join(rnd.choice(words) for _ in range(rnd.randint(2, 7))) + "।" for _ in range(12)
    )
    model = train([doc(text)], order=order)
    ids = list(range(model.vocab_size))
    contexts = [()]
    if order >= 2:
        contexts += [(a,) for a in ids]
    if order >= 3:
        contexts += [(a, b) for a in ids for b in ids]
    for ctx in contexts:
        total = sum(model.prob_ids(w, ctx) for w in ids)
        assert total == pytest.approx(1.0, abs=1e-6), ctx


def test_all_probabilities_strictly_positive():
    model = train([doc("ক খ গ ঘ।")], order=3)
    for w in range(model.vocab_size):
        assert model.prob_ids(w, (0, 0)) > 0.0
        assert model.prob_ids(w, ()) > 0.0


# --- scoring behavior ---------------------------------------------------------

def test_training_text_beats_shuffled(bn_sampler):
    train_docs = list(generate_corpus(40, words_per_doc=120, seed=51))
    model = train(train_docs, order=3)
    wins = 0
    rnd = random.Random(60)
    for trial in range(20):
        sample = TextSampler(seed=1000 + trial).text(60)
        words = sample.split()
        shuffled_words = list(words)
        rnd.shuffle(shuffled_words)
        clean = perplexity(model, doc(sample)).perplexity
        shuffled = perplexity(model, doc(" ".join(shuffled_words))).perplexity
        wins += clean < shuffled
    assert wins >= 19


def test_duplicated_document_same_per_word_score():
    model = train([doc("এক দুই তিন। চার পাঁচ।")], order=2)
    one = perplexity(model, doc("এক দুই। তিন চার।"))
    two = perplexity(model, doc("এক দুই। তিন চার।\nএক দুই। তিন চার।"))
    assert one.per_word_log_prob == pytest.approx(two.per_word_log_prob, abs=1e-12)


def test_perplexity_empty_document_raises():
    model = train([doc("ক খ।")], order=2)
    with pytest.raises(EmptyDocumentError):
        perplexity(model, doc("   "))


def test_train_empty_raises():
    with pytest.raises(TrainError):
        train([], order=3)
    with pytest.raises(TrainError):
        train([doc(" ")], order=3)


# --- rank filter -----------------------------------------------------------------

def test_rank_filter_identity_at_full_retention(small_corpus):
    model = train(small_corpus[:5], order=2)
    kept, _ = rank_filter(small_corpus, model, 1.0)
    assert kept == small_corpus


def test_rank_filter_keeps_exactly_95_of_100():
    docs = list(generate_corpus(100, words_per_doc=30, seed=71))
    model = train(docs[:20], order=2)
    kept, threshold = rank_filter(docs, model, 0.95)
    assert len(kept) == 95
    scores = {d.id: perplexity(model, d).per_word_log_prob for d in docs}
    assert all(scores[d.id] >= threshold for d in kept)


def test_rank_filter_prefers_clean_over_scrambled():
    train_docs = list(generate_corpus(50, words_per_doc=100, seed=81))
    model = train(train_docs, order=3)
    clean = list(generate_corpus(50, words_per_doc=60, seed=91, id_prefix="clean"))
    scrambler = TextSampler(seed=92)
    scrambled = [
        Document(id=f"scr-{i}", source="web", text=scrambler.scrambled_text(60))
        for i in range(50)
    ]
    mixed = [d for pair in zip(clean, scrambled) for d in pair]
    kept, _ = rank_filter(mixed, model, 0.5)
    assert len(kept) == 50
    clean_kept = sum(1 for d in kept if d.id.startswith("clean"))
    assert clean_kept >= 45


def test_rank_filter_idempotent_composition():
    docs = list(generate_corpus(30, words_per_doc=40, seed=101))
    model = train(docs[:10], order=2)
    once, _ = rank_filter(docs, model, 0.6)
    twice, _ = rank_filter(once, model, 1.0)
    assert twice == once


def test_rank_filter_preserves_input_order():
    docs = list(generate_corpus(20, words_per_doc=40, seed=111))
    model = train(docs[:5], order=2)
    kept, _ = rank_filter(docs, model, 0.5)
    positions = [docs.index(d) for d in kept]
    assert positions == sorted(positions)


def test_rank_filter_per_group():
    a = list(generate_corpus(10, words_per_doc=40, seed=121, source="web", id_prefix="w"))
    b = list(generate_corpus(10, words_per_doc=40, seed=122, source="book", id_prefix="b"))
    model = train(a, order=2)
    kept, _ = rank_filter(a + b, model, 0.5, group_by_source=True)
    assert sum(1 for d in kept if d.source == "web") == 5
    assert sum(1 for d in kept if d.source == "book") == 5


def test_rank_filter_empty_corpus():
    model = train([doc("ক খ।")], order=2)
    with pytest.raises(EmptyCorpusError):
        rank_filter([], model, 0.5)


# --- model io --------------------------------------------------------------------

def test_model_file_round_trip(tmp_path, small_corpus):
    model = train(small_corpus[:10], order=3)
    path = tmp_path / "model.cklm"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.order == model.order
    assert loaded.vocab == model.vocab
    assert loaded.counts == model.counts
    probe = doc(small_corpus[3].text)
    assert perplexity(loaded, probe).log_prob == pytest.approx(perplexity(model, probe).log_prob, abs=1e-12)


def test_model_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.cklm"
    path.write_bytes(b"not a model")
    from corpuskit.errors import ModelFormatError

    with pytest.raises(ModelFormatError):
        load_model(path)


def test_arpa_export_shape(tmp_path):
    model = train([doc("ক খ। ক গ।")], order=2)
    path = tmp_path / "model.arpa"
    export_arpa(model, path)
    text = path.read_text(encoding="utf-8")
    assert text.startswith("\\data\\\n")
    assert "\\1-grams:" in text and "\\2-grams:" in text and text.rstrip().endswith("\\end\\")
    assert f"ngram 1={len(model.counts[1])}" in text
    # every listed log10 probability is non-positive and matches the model
    for line in text.splitlines():
        parts = line.split("\t")
        if len(parts) >= 2 and not line.startswith("\\"):
            logp = float(parts[0])
            assert logp <= 0.0
            gram = parts[1].split(" ")
            ids = tuple(model.vocab[w] for w in gram)
            assert logp == pytest.approx(math.log10(model.prob_ids(ids[-1], ids[:-1])), abs=1e-6)
