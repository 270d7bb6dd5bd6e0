"""MinHash/LSH near-duplicate detection and cluster resolution.

Documents are sketched as word-5-gram shingle sets hashed to 64 bits,
min-hashed under k seeded universal hash functions over the Mersenne
prime 2^61 - 1, and banded into an LSH index. Candidate pairs sharing a
band are verified against the signature estimate before clustering with
a disjoint-set union; the lexicographically smallest id in each cluster
is kept.
"""

from __future__ import annotations

import heapq
import json
import pickle
import random
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from hashlib import blake2b
from pathlib import Path
from typing import Iterable, Iterator

from . import corpus as cm
from ._util import atomic_output
from .errors import ConsistencyError, EmptyDocumentError, SignatureMismatchError

MERSENNE61 = (1 << 61) - 1


def _hash64(text: str) -> int:
    return int.from_bytes(blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    """splitmix64 finalizer: spreads structured keys over 64 bits.

    Linear (a*s + b) mod p hashing alone is not min-wise independent;
    on consecutive-integer sets the raw estimator is visibly biased, so
    every shingle value is mixed once before the permutations.
    """
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def shingles(view: cm.NormalizedView, n: int = 5) -> frozenset[int]:
    """Hashes of consecutive word n-grams (space-joined).

    Documents with fewer than n words fall back to a single hash of the
    whole word sequence, so every document has at least one shingle.
    """
    words = view.words
    if len(words) < n:
        return frozenset((_hash64(" ".join(words)),))
    return frozenset(_hash64(" ".join(words[i : i + n])) for i in range(len(words) - n + 1))


@dataclass(frozen=True)
class MinHashSignature:
    values: tuple[int, ...]
    seed: int


@lru_cache(maxsize=8)
def _permutations(k: int, seed: int) -> tuple[tuple[int, int], ...]:
    """Per-position (a, b) for h_i(s) = (a*s + b) mod 2^61-1, a != 0.

    Seeded by string so the draw is stable across platforms and runs.
    """
    params = []
    for i in range(k):
        rng = random.Random(f"{seed}:{i}")
        params.append((rng.randrange(1, MERSENNE61), rng.randrange(0, MERSENNE61)))
    return tuple(params)


def signature(shingle_set: Iterable[int], k: int = 128, seed: int = 0) -> MinHashSignature:
    mixed = tuple(_mix64(s) for s in shingle_set)
    if not mixed:
        raise EmptyDocumentError("cannot sketch an empty shingle set")
    values = tuple(
        min((a * s + b) % MERSENNE61 for s in mixed) for a, b in _permutations(k, seed)
    )
    return MinHashSignature(values, seed)


def estimate_jaccard(sig_a: MinHashSignature, sig_b: MinHashSignature) -> float:
    if len(sig_a.values) != len(sig_b.values) or sig_a.seed != sig_b.seed:
        raise SignatureMismatchError("signatures differ in length or seed")
    agree = sum(1 for a, b in zip(sig_a.values, sig_b.values) if a == b)
    return agree / len(sig_a.values)


@dataclass(frozen=True)
class LshParams:
    k: int = 128
    bands: int = 16
    rows: int = 8
    threshold: float = 0.7
    seed: int = 0
    shingle_n: int = 5

    def __post_init__(self):
        if self.bands * self.rows != self.k:
            raise ValueError(f"bands*rows must equal k ({self.bands}*{self.rows} != {self.k})")


@dataclass(frozen=True)
class DupClusters:
    """Disjoint clusters of near-duplicate doc ids; singletons omitted."""

    clusters: tuple[tuple[int, tuple[str, ...], str], ...]  # (cluster_id, members, kept)

    def drop_set(self) -> frozenset[str]:
        return frozenset(m for _, members, kept in self.clusters for m in members if m != kept)

    def member_set(self) -> frozenset[str]:
        return frozenset(m for _, members, _ in self.clusters for m in members)


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int):
        px, py = self.find(x), self.find(y)
        self.parent[px] = self.parent[py] = min(px, py)


def _band_entries(ordinal: int, sig: MinHashSignature, params: LshParams):
    r = params.rows
    for band in range(params.bands):
        yield (band, *sig.values[band * r : (band + 1) * r]), ordinal


class LshIndex:
    """Banded signature index: band -> row-tuple -> member list.

    Every inserted document lands in exactly ``bands`` buckets; documents
    sharing any bucket are duplicate candidates.
    """

    def __init__(self, params: LshParams = LshParams()):
        self.params = params
        self.buckets: dict[tuple, list[int]] = {}
        self._size = 0

    def insert(self, ordinal: int, sig: MinHashSignature) -> None:
        if len(sig.values) != self.params.k or sig.seed != self.params.seed:
            raise SignatureMismatchError("signature does not match index parameters")
        for key, _ in _band_entries(ordinal, sig, self.params):
            self.buckets.setdefault(key, []).append(ordinal)
        self._size += 1

    def __len__(self) -> int:
        return self._size

    def candidate_groups(self) -> Iterator[list[int]]:
        for members in self.buckets.values():
            if len(members) > 1:
                yield members


def _grouped_in_memory(sigs: list[MinHashSignature], params: LshParams) -> Iterator[list[int]]:
    index = LshIndex(params)
    for ordinal, sig in enumerate(sigs):
        index.insert(ordinal, sig)
    return index.candidate_groups()


def _iter_pickled(fh):
    while True:
        try:
            yield pickle.load(fh)
        except EOFError:
            return


def _grouped_spilled(entries, budget: int, tmp_dir) -> Iterator[list[int]]:
    """External sort-merge grouping for band tables beyond the budget."""
    chunk_files = []
    chunk: list[tuple] = []

    def flush():
        chunk.sort()
        fh = tempfile.TemporaryFile(dir=tmp_dir)
        for entry in chunk:
            pickle.dump(entry, fh)
        fh.seek(0)
        chunk_files.append(fh)
        chunk.clear()

    for entry in entries:
        chunk.append(entry)
        if len(chunk) >= budget:
            flush()
    if chunk:
        flush()

    streams = [_iter_pickled(fh) for fh in chunk_files]
    group_key, group = None, []
    for key, ordinal in heapq.merge(*streams):
        if key != group_key:
            if len(group) > 1:
                yield group
            group_key, group = key, []
        group.append(ordinal)
    if len(group) > 1:
        yield group
    for fh in chunk_files:
        fh.close()


def find_clusters(
    docs: Iterable[cm.Document],
    params: LshParams = LshParams(),
    memory_budget: int | None = None,
    tmp_dir: str | Path | None = None,
) -> DupClusters:
    """Cluster near-duplicates: LSH candidates, estimate >= threshold edges,
    connected components.

    ``memory_budget`` caps in-memory band-table entries; beyond it the
    band tables spill to sorted temp chunks and are merge-grouped, with
    identical results.
    """
    ids: list[str] = []
    sigs: list[MinHashSignature] = []
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise ConsistencyError(f"duplicate document id {doc.id!r} in corpus")
        seen.add(doc.id)
        ids.append(doc.id)
        sigs.append(signature(shingles(cm.normalize(doc.text), params.shingle_n), params.k, params.seed))

    total_entries = len(sigs) * params.bands
    if memory_budget is not None and total_entries > memory_budget:
        entries = (
            entry for ordinal, sig in enumerate(sigs) for entry in _band_entries(ordinal, sig, params)
        )
        groups = _grouped_spilled(entries, memory_budget, tmp_dir)
    else:
        groups = _grouped_in_memory(sigs, params)

    uf = _UnionFind()
    checked: set[tuple[int, int]] = set()
    for group in groups:
        group = sorted(set(group))
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                pair = (group[i], group[j])
                if pair in checked:
                    continue
                checked.add(pair)
                if estimate_jaccard(sigs[pair[0]], sigs[pair[1]]) >= params.threshold:
                    uf.union(*pair)

    components: dict[int, list[int]] = {}
    for ordinal in list(uf.parent):
        components.setdefault(uf.find(ordinal), []).append(ordinal)

    clusters = []
    for members in components.values():
        if len(members) < 2:
            continue
        member_ids = tuple(sorted(ids[m] for m in members))
        clusters.append((member_ids, member_ids[0]))
    clusters.sort(key=lambda c: c[1])
    return DupClusters(tuple((i, members, kept) for i, (members, kept) in enumerate(clusters)))


def deduplicate(docs: Iterable[cm.Document], clusters: DupClusters, out_path: str | Path) -> int:
    """Write every document except non-kept cluster members; returns count."""
    drop = clusters.drop_set()
    referenced = clusters.member_set()
    seen = set()
    kept = 0
    with atomic_output(out_path) as out:
        for doc in docs:
            seen.add(doc.id)
            if doc.id in drop:
                continue
            out.write(cm.doc_to_json(doc))
            out.write("\n")
            kept += 1
        missing = referenced - seen
        if missing:
            raise ConsistencyError(f"clusters reference unknown doc ids: {sorted(missing)[:5]}")
    return kept


def write_clusters(path: str | Path, clusters: DupClusters) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for cluster_id, members, kept in clusters.clusters:
            fh.write(json.dumps({"cluster_id": cluster_id, "members": list(members), "kept": kept}, ensure_ascii=False))
            fh.write("\n")


def read_clusters(path: str | Path) -> DupClusters:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            rows.append((obj["cluster_id"], tuple(obj["members"]), obj["kept"]))
    return DupClusters(tuple(rows))
