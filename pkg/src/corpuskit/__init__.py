"""corpuskit: corpus curation and tokenizer extension for low-resource languages.

Stages: rule-based quality filtering, MinHash near-deduplication, n-gram
language-model rank filtering, OCR book statistics, byte-level BPE
training, base-vocabulary merging, and tokens-per-word evaluation.
"""

from .bpe import (
    ByteBpeModel,
    MergedTokenizer,
    TpwReport,
    merge_tokenizers,
    tokens_per_word,
    train_bpe,
)
from .corpus import (
    Document,
    NormalizedView,
    Page,
    normalize,
    read_corpus,
    segment_sentences,
    write_corpus,
)
from .dedup import (
    DupClusters,
    LshIndex,
    LshParams,
    MinHashSignature,
    deduplicate,
    estimate_jaccard,
    find_clusters,
    shingles,
    signature,
)
from .filtering import (
    Decision,
    FilterConfig,
    FilterReport,
    LanguageRule,
    Threshold,
    apply_rules,
    calibrate,
    run_pipeline,
)
from .ngram_lm import NGramModel, ScoredDocument, perplexity, rank_filter, train
from .ocr import BookStats, book_stats, ocr_filter
from .resources import Resources, TrigramLanguageClassifier, load_resources
from .rules import RuleMetrics, doc_metrics, line_metrics, top_ngram_char_fraction, unigram_entropy

__version__ = "0.1.0"
