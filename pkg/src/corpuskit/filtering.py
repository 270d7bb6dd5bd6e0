"""Threshold config, percentile calibration, and corpus filtering.

Documents are measured by ``rules.doc_metrics`` and judged against
per-metric bounds (inclusive on both sides), boolean rules, and an
optional minimum language fraction. Rejection accounting attributes each
rejected document to its first failing rule; the full violation list
rides along on the optional rejected stream.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import corpus as cm
from ._util import atomic_output
from .errors import CalibrationError, ConfigError, RecordError
from .resources import EMPTY_RESOURCES, Resources, load_resources
from .rules import BOOLEAN_METRICS, NUMERIC_METRICS, RuleMetrics, doc_metrics

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

HISTOGRAM_BINS = 64


@dataclass(frozen=True)
class Threshold:
    """Inclusive [min, max] bound on one numeric metric."""

    metric: str
    min: float | None = None
    max: float | None = None

    def __post_init__(self):
        if self.min is None and self.max is None:
            raise ConfigError(f"threshold on {self.metric!r} needs a min or a max")
        if self.min is not None and self.max is not None and self.min > self.max:
            raise ConfigError(f"threshold on {self.metric!r} has min > max")

    def accepts(self, value: float | None) -> bool:
        if value is None:
            return False
        if self.min is not None and value < self.min:
            return False
        if self.max is not None and value > self.max:
            return False
        return True


@dataclass(frozen=True)
class LanguageRule:
    tag: str
    min_fraction: float


@dataclass
class FilterConfig:
    thresholds: tuple[Threshold, ...] = ()
    boolean_rules: dict[str, bool] = field(default_factory=dict)
    language: LanguageRule | None = None
    lenient: bool = False

    def validate(self) -> "FilterConfig":
        seen = set()
        for t in self.thresholds:
            if t.metric not in NUMERIC_METRICS:
                raise ConfigError(f"unknown metric {t.metric!r} in thresholds")
            if t.metric in seen:
                raise ConfigError(f"metric {t.metric!r} appears twice")
            seen.add(t.metric)
        for name in self.boolean_rules:
            if name not in BOOLEAN_METRICS:
                raise ConfigError(f"unknown boolean rule {name!r}")
        return self


@dataclass(frozen=True)
class Decision:
    passed: bool
    failed_rules: tuple[str, ...]

    def to_obj(self) -> dict:
        return {"pass": self.passed, "failed_rules": list(self.failed_rules)}


@dataclass
class Histogram:
    lo: float
    hi: float
    counts: list[int]
    null_count: int

    def to_obj(self) -> dict:
        return {"min": self.lo, "max": self.hi, "counts": self.counts, "null_count": self.null_count}


@dataclass
class FilterReport:
    input_count: int
    pass_count: int
    rejections: dict[str, int]
    histograms: dict[str, Histogram]
    skipped_records: int
    elapsed_seconds: float

    def to_obj(self) -> dict:
        return {
            "input_count": self.input_count,
            "pass_count": self.pass_count,
            "rejections": self.rejections,
            "histograms": {m: h.to_obj() for m, h in self.histograms.items()},
            "skipped_records": self.skipped_records,
            "elapsed_seconds": self.elapsed_seconds,
        }

    def to_json(self, with_timing: bool = True) -> str:
        obj = self.to_obj()
        if not with_timing:
            del obj["elapsed_seconds"]
        return json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True)


def load_config(path: str | Path) -> tuple[FilterConfig, Resources]:
    """Parse a TOML filter config; resource paths resolve next to it."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc

    thresholds = []
    for metric, bounds in raw.get("thresholds", {}).items():
        if not isinstance(bounds, dict):
            raise ConfigError(f"threshold for {metric!r} must be a table with min/max")
        thresholds.append(Threshold(metric, bounds.get("min"), bounds.get("max")))
    language = None
    if "language" in raw:
        language = LanguageRule(raw["language"]["tag"], float(raw["language"]["min_fraction"]))
    config = FilterConfig(
        thresholds=tuple(thresholds),
        boolean_rules=dict(raw.get("boolean_rules", {})),
        language=language,
        lenient=bool(raw.get("lenient", False)),
    ).validate()

    res_spec = raw.get("resources", {})
    base = path.parent

    def _resolve(key):
        value = res_spec.get(key)
        return (base / value) if value else None

    resources = load_resources(
        stopwords=_resolve("stopwords"),
        bad_words=_resolve("bad_words"),
        adult_domains=_resolve("adult_domains"),
        lang_seeds=_resolve("lang_seeds"),
    )
    return config, resources


# --- calibration ---------------------------------------------------------

def nearest_rank(values: Sequence[float], percentile: float) -> float:
    """Value at index ceil(p/100 * N) - 1 of the ascending sort.

    The rank is computed with exact rational arithmetic so that e.g.
    p=95, N=100 lands on index 94 and never drifts to 95 through binary
    float rounding.
    """
    if not 0 < percentile < 100:
        raise ValueError("percentile must be in (0, 100)")
    ordered = sorted(values)
    if not ordered:
        raise CalibrationError("no defined values to calibrate on")
    frac = Fraction(str(percentile)) * len(ordered) / 100
    rank = -((-frac.numerator) // frac.denominator)
    return ordered[rank - 1]


def calibrate_values(metric: str, values: Sequence[float], percentile: float, side: str) -> Threshold:
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    value = nearest_rank(values, percentile)
    if side == "lower":
        return Threshold(metric, min=value)
    return Threshold(metric, max=value)


def calibrate(
    sample: Iterable[cm.Document],
    metric: str,
    percentile: float,
    side: str,
    resources: Resources = EMPTY_RESOURCES,
) -> Threshold:
    """Nearest-rank percentile threshold from a corpus sample.

    Documents whose metric is undefined (zero-word documents) contribute
    nothing; with no defined value at all this raises CalibrationError.
    """
    if metric not in NUMERIC_METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    values = []
    for doc in sample:
        m = doc_metrics(cm.normalize(doc.text), resources, url=doc.url)
        v = getattr(m, metric)
        if v is not None:
            values.append(v)
    return calibrate_values(metric, values, percentile, side)


# --- decision ------------------------------------------------------------

def apply_rules(metrics: RuleMetrics, config: FilterConfig) -> Decision:
    """Judge one measurement vector; lists all violations in config order."""
    failed = []
    for t in config.thresholds:
        if not t.accepts(getattr(metrics, t.metric)):
            failed.append(t.metric)
    for name, required in config.boolean_rules.items():
        if getattr(metrics, name) != required:
            failed.append(name)
    if config.language is not None:
        if metrics.language_fractions.get(config.language.tag, 0.0) < config.language.min_fraction:
            failed.append("language")
    return Decision(not failed, tuple(failed))


# --- pipeline ------------------------------------------------------------

_HISTOGRAM_FIELDS = tuple(sorted(NUMERIC_METRICS))


def _measure_line(line: str, config: FilterConfig, resources: Resources):
    """line -> (canonical line, decision, histogram values) or RecordError."""
    doc = cm.doc_from_json(line)
    metrics = doc_metrics(cm.normalize(doc.text), resources, url=doc.url)
    decision = apply_rules(metrics, config)
    values = tuple(getattr(metrics, name) for name in _HISTOGRAM_FIELDS)
    return cm.doc_to_json(doc), decision, values


def _pool_worker(item):
    lineno, line = item
    try:
        return (lineno, *_measure_line(line, _WORKER_CFG, _WORKER_RES))
    except (ValueError, KeyError, TypeError) as exc:
        return (lineno, None, str(exc), None)


def _pool_init(config, resources):
    global _WORKER_CFG, _WORKER_RES
    _WORKER_CFG = config
    _WORKER_RES = resources


def _build_histograms(values_by_metric, null_by_metric) -> dict[str, Histogram]:
    out = {}
    for name in _HISTOGRAM_FIELDS:
        vals = values_by_metric[name]
        nulls = null_by_metric[name]
        if not vals:
            out[name] = Histogram(0.0, 0.0, [0] * HISTOGRAM_BINS, nulls)
            continue
        lo, hi = min(vals), max(vals)
        counts = [0] * HISTOGRAM_BINS
        width = (hi - lo) / HISTOGRAM_BINS
        if width == 0:
            counts[0] = len(vals)
        else:
            for v in vals:
                counts[min(HISTOGRAM_BINS - 1, int((v - lo) / width))] += 1
        out[name] = Histogram(float(lo), float(hi), counts, nulls)
    return out


def run_pipeline(
    reader: Iterable[cm.Document] | str | Path,
    config: FilterConfig,
    out_path: str | Path,
    rejected_path: str | Path | None = None,
    resources: Resources = EMPTY_RESOURCES,
    threads: int = 1,
) -> FilterReport:
    """Measure, decide, and stream passing documents in input order.

    ``reader`` may be a corpus path (enables multi-process evaluation) or
    any document iterable. Output files are written atomically: a failed
    run leaves no partial output behind.
    """
    config.validate()
    start = time.perf_counter()
    values_by_metric = {name: [] for name in _HISTOGRAM_FIELDS}
    null_by_metric = {name: 0 for name in _HISTOGRAM_FIELDS}
    rejections: dict[str, int] = {}
    input_count = pass_count = skipped = 0

    def results():
        nonlocal skipped
        if isinstance(reader, (str, Path)) and threads > 1:
            import multiprocessing as mp

            with open(reader, "r", encoding="utf-8") as fh:
                numbered = ((i, line.rstrip("\n")) for i, line in enumerate(fh, 1))
                with mp.Pool(threads, initializer=_pool_init, initargs=(config, resources)) as pool:
                    for lineno, line_out, decision, values in pool.imap(_pool_worker, numbered, chunksize=16):
                        if line_out is None:
                            if config.lenient:
                                skipped += 1
                                continue
                            raise RecordError(f"line {lineno}: {decision}", lineno)
                        yield line_out, decision, values
        else:
            docs = cm.read_corpus(reader, lenient=config.lenient) if isinstance(reader, (str, Path)) else reader
            for doc in docs:
                metrics = doc_metrics(cm.normalize(doc.text), resources, url=doc.url)
                decision = apply_rules(metrics, config)
                yield cm.doc_to_json(doc), decision, tuple(getattr(metrics, n) for n in _HISTOGRAM_FIELDS)
            if isinstance(docs, cm.CorpusReader):
                skipped = docs.skipped

    rejected_cm = atomic_output(rejected_path) if rejected_path else None
    with atomic_output(out_path) as out:
        rej = rejected_cm.__enter__() if rejected_cm else None
        try:
            for line, decision, values in results():
                input_count += 1
                for name, value in zip(_HISTOGRAM_FIELDS, values):
                    if value is None:
                        null_by_metric[name] += 1
                    else:
                        values_by_metric[name].append(value)
                if decision.passed:
                    pass_count += 1
                    out.write(line)
                    out.write("\n")
                else:
                    first = decision.failed_rules[0]
                    rejections[first] = rejections.get(first, 0) + 1
                    if rej is not None:
                        # canonical doc json ends with "}"; splice the decision in
                        rej.write(line[:-1] + ',"decision":' + json.dumps(decision.to_obj(), ensure_ascii=False) + "}\n")
        except BaseException:
            if rejected_cm:
                rejected_cm.__exit__(*sys.exc_info())
            raise
        else:
            if rejected_cm:
                rejected_cm.__exit__(None, None, None)

    return FilterReport(
        input_count=input_count,
        pass_count=pass_count,
        rejections=dict(sorted(rejections.items())),
        histograms=_build_histograms(values_by_metric, null_by_metric),
        skipped_records=skipped,
        elapsed_seconds=time.perf_counter() - start,
    )
