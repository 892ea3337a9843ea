"""Near-duplicate removal with MinHash signatures and LSH banding.

Documents are shingled into k-word windows, each shingle is hashed to 64
bits, and every signature position is the minimum of a universal hash
``(a*x + b) mod (2**61 - 1)`` over the shingles. The permutation
parameters come from a seeded numpy generator, so signatures are identical
across runs and platforms.
"""

import concurrent.futures
import hashlib
import heapq
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from urducorpus.corpus import csv_text
from urducorpus.errors import EmptyDocument, InvalidParameter, SignatureMismatch
from urducorpus.fileio import atomic_write_text

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240917
DEFAULT_THRESHOLD = 0.90
DEFAULT_NUM_PERMS = 128
DEFAULT_BANDS = 16
DEFAULT_ROWS = 8
DEFAULT_SHINGLE = 5
BORDERLINE = (0.80, 0.92)

MERSENNE_61 = (1 << 61) - 1

_P = np.uint64(MERSENNE_61)
_MASK31 = np.uint64((1 << 31) - 1)
_MASK30 = np.uint64((1 << 30) - 1)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S61 = np.uint64(61)
_BLOCK = 4096


@dataclass(frozen=True)
class ShingleSet:
    k: int
    elements: frozenset

    def __len__(self):
        return len(self.elements)

    def as_array(self):
        return np.fromiter(self.elements, dtype=np.uint64, count=len(self.elements))


@dataclass(eq=False)
class MinHashSignature:
    values: np.ndarray

    @property
    def num_perms(self):
        return len(self.values)

    def __eq__(self, other):
        return isinstance(other, MinHashSignature) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class Permutations:
    """The universal hash family used for every signature position"""
    a: np.ndarray
    b: np.ndarray
    seed: int

    def __len__(self):
        return len(self.a)


@dataclass
class DedupDecision:
    kept_id: int
    removed: list = field(default_factory=list)  # (removed id, estimate on the edge that joined it)
    linked_via: dict = field(default_factory=dict)  # removed id -> neighbour on that edge


class DedupStats:
    def __init__(self):
        self.documents_in = 0
        self.exact_duplicates = 0
        self.near_duplicates = 0
        self.candidate_pairs = 0
        self.empty_documents = 0
        self.kept = 0

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'documents_in': self.documents_in,
            'exact_duplicates': self.exact_duplicates,
            'near_duplicates': self.near_duplicates,
            'candidate_pairs': self.candidate_pairs,
            'empty_documents': self.empty_documents,
            'kept': self.kept,
        }


def _hash64(text):
    digest = hashlib.blake2b(text.encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')


def shingles(text, k=DEFAULT_SHINGLE):
    """Hash every distinct k-word window; shorter texts hash as one element"""
    if k < 1:
        raise InvalidParameter(f"shingle width must be >= 1, got {k}")
    words = text.split()
    if not words:
        return ShingleSet(k, frozenset())
    if len(words) < k:
        return ShingleSet(k, frozenset([_hash64(' '.join(words))]))
    windows = {' '.join(words[i:i + k]) for i in range(len(words) - k + 1)}
    return ShingleSet(k, frozenset(_hash64(w) for w in windows))


def exact_jaccard(a, b):
    if not a.elements and not b.elements:
        return 1.0
    union = len(a.elements | b.elements)
    return len(a.elements & b.elements) / union


def make_permutations(num_perms=DEFAULT_NUM_PERMS, seed=DEFAULT_SEED):
    if num_perms < 1:
        raise InvalidParameter(f"num_perms must be >= 1, got {num_perms}")
    rng = np.random.default_rng(seed)
    a = rng.integers(1, MERSENNE_61, size=num_perms, dtype=np.uint64)
    b = rng.integers(0, MERSENNE_61, size=num_perms, dtype=np.uint64)
    return Permutations(a, b, seed)


def _reduce(s):
    s = (s & _P) + (s >> _S61)
    return np.where(s >= _P, s - _P, s)


def _mulmod(a, x):
    """a * x mod 2**61-1 for operands below the modulus, without overflow"""
    a_hi, a_lo = a >> _S31, a & _MASK31
    x_hi, x_lo = x >> _S31, x & _MASK31
    high = (a_hi * x_hi) << np.uint64(1)
    mid = a_hi * x_lo + a_lo * x_hi
    mid = (mid >> _S30) + ((mid & _MASK30) << _S31)
    return _reduce(high + mid + a_lo * x_lo)


def _permute(perms, x):
    """Apply every permutation to every element: shape (num_perms, len(x))"""
    x = _reduce(x)[np.newaxis, :]
    a = perms.a[:, np.newaxis]
    b = perms.b[:, np.newaxis]
    return _reduce(_mulmod(a, x) + b)


def minhash(shingle_set, perms):
    if not len(shingle_set):
        raise EmptyDocument("cannot sign a document without shingles")
    elements = shingle_set.as_array()
    values = np.full(len(perms), np.iinfo(np.uint64).max, dtype=np.uint64)
    for start in range(0, len(elements), _BLOCK):
        block = _permute(perms, elements[start:start + _BLOCK])
        np.minimum(values, block.min(axis=1), out=values)
    return MinHashSignature(values)


def estimate_jaccard(sig_a, sig_b):
    if sig_a.num_perms != sig_b.num_perms:
        raise SignatureMismatch(f"signature lengths differ: {sig_a.num_perms} vs {sig_b.num_perms}")
    return float(np.count_nonzero(sig_a.values == sig_b.values)) / sig_a.num_perms


class LshIndex:
    """Band buckets over signatures. Each inserted id lands in exactly `bands` buckets."""

    def __init__(self, bands=DEFAULT_BANDS, rows=DEFAULT_ROWS):
        if bands < 1 or rows < 1:
            raise InvalidParameter(f"bands and rows must be >= 1, got {bands}x{rows}")
        self.bands = bands
        self.rows = rows
        self.buckets = [defaultdict(list) for _ in range(bands)]
        self.size = 0
        self._lock = threading.Lock()

    @property
    def num_perms(self):
        return self.bands * self.rows

    def insert(self, doc_id, signature):
        if signature.num_perms != self.num_perms:
            raise SignatureMismatch(
                f"index expects {self.num_perms} values, signature has {signature.num_perms}")
        with self._lock:
            for band in range(self.bands):
                key = signature.values[band * self.rows:(band + 1) * self.rows].tobytes()
                self.buckets[band][key].append(doc_id)
            self.size += 1

    def __len__(self):
        return self.size


def lsh_candidates(index):
    """Every pair of ids sharing at least one bucket, as sorted (low, high) tuples"""
    pairs = set()
    for band in index.buckets:
        for ids in band.values():
            if len(ids) < 2:
                continue
            members = sorted(set(ids))
            for i, low in enumerate(members):
                for high in members[i + 1:]:
                    pairs.add((low, high))
    return sorted(pairs)


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        root = x
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while x != root:
            self.parent[x], x = root, self.parent.get(x, x)
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _spanning_links(rep, edges):
    """Grow a maximum spanning tree from ``rep``; returns {member: (parent, estimate)}.

    Each member is reported against the strongest accepted edge joining it
    to the already claimed part of the component, not against ``rep``.
    """
    links = {}
    claimed = {rep}
    heap = [(-estimate, other, rep) for other, estimate in edges[rep]]
    heapq.heapify(heap)
    while heap:
        neg, node, parent = heapq.heappop(heap)
        if node in claimed:
            continue
        claimed.add(node)
        links[node] = (parent, -neg)
        for other, estimate in edges[node]:
            if other not in claimed:
                heapq.heappush(heap, (-estimate, other, node))
    return links


def _text_of(doc):
    if isinstance(doc, str):
        return doc
    return getattr(doc, 'data', None) if hasattr(doc, 'data') else doc.text


class Deduplicator:
    """Exact then near-duplicate removal over one in-memory corpus.

    After ``run`` the instance holds ``decisions``, ``borderline_pairs``
    (candidate pairs whose estimate falls in the manual-review band) and
    ``stats``.
    """

    def __init__(self, threshold=DEFAULT_THRESHOLD, num_perms=DEFAULT_NUM_PERMS,
                 bands=DEFAULT_BANDS, rows=DEFAULT_ROWS, k=DEFAULT_SHINGLE,
                 seed=DEFAULT_SEED, exact_verify=False, threads=1, borderline=BORDERLINE):
        if not 0 < threshold <= 1:
            raise InvalidParameter(f"threshold must be in (0, 1], got {threshold}")
        if bands * rows != num_perms:
            raise InvalidParameter(f"bands x rows must equal num_perms ({bands}x{rows} != {num_perms})")
        self.threshold = threshold
        self.num_perms = num_perms
        self.bands = bands
        self.rows = rows
        self.k = k
        self.seed = seed
        self.exact_verify = exact_verify
        self.threads = max(1, threads)
        self.borderline = borderline
        self.perms = make_permutations(num_perms, seed)
        self.decisions = []
        self.borderline_pairs = []
        self.stats = DedupStats()

    def _linked(self, estimate, set_a, set_b):
        """Candidates join a component only above the threshold, strictly"""
        if estimate <= self.threshold:
            return False
        return not self.exact_verify or exact_jaccard(set_a, set_b) > self.threshold

    def _sign(self, text):
        shingle_set = shingles(text, self.k)
        try:
            return shingle_set, minhash(shingle_set, self.perms)
        except EmptyDocument:
            return shingle_set, None

    def run(self, texts):
        """Return the sorted indices of the documents to keep"""
        texts = list(texts)
        self.stats = DedupStats()
        self.stats.documents_in = len(texts)
        self.decisions = []
        self.borderline_pairs = []

        first_seen = {}
        exact_of = {}
        unique = []
        for i, text in enumerate(texts):
            if text in first_seen:
                exact_of[i] = first_seen[text]
                logger.debug(f"Document {i} is an exact duplicate of {first_seen[text]}")
                continue
            first_seen[text] = i
            unique.append(i)
        self.stats.exact_duplicates = len(exact_of)

        with concurrent.futures.ThreadPoolExecutor(max_workers=self.threads) as executor:
            signed = list(executor.map(lambda i: self._sign(texts[i]), unique))

        index = LshIndex(self.bands, self.rows)
        sets = {}
        sigs = {}
        for i, (shingle_set, signature) in zip(unique, signed):
            if signature is None:
                self.stats.empty_documents += 1
                continue
            sets[i] = shingle_set
            sigs[i] = signature
            index.insert(i, signature)

        candidates = lsh_candidates(index)
        self.stats.candidate_pairs = len(candidates)
        components = _UnionFind()
        edges = defaultdict(list)
        low, high = self.borderline
        for a, b in candidates:
            estimate = estimate_jaccard(sigs[a], sigs[b])
            if low <= estimate <= high:
                self.borderline_pairs.append((a, b, estimate))
            if not self._linked(estimate, sets[a], sets[b]):
                continue
            components.union(a, b)
            edges[a].append((b, estimate))
            edges[b].append((a, estimate))

        groups = defaultdict(list)
        for i in sigs:
            groups[components.find(i)].append(i)

        removed = {}
        representative = {i: i for i in unique}
        for members in groups.values():
            if len(members) < 2:
                continue
            rep = max(members, key=lambda i: (len(texts[i]), -i))
            for i, (via, estimate) in _spanning_links(rep, edges).items():
                representative[i] = rep
                removed[i] = (rep, estimate, via)
        self.stats.near_duplicates = len(removed)

        for i, original in exact_of.items():
            removed[i] = (representative[original], 1.0, original)

        by_kept = {}
        for i in sorted(removed):
            rep, estimate, via = removed[i]
            decision = by_kept.setdefault(rep, DedupDecision(rep))
            decision.removed.append((i, estimate))
            decision.linked_via[i] = via
        self.decisions = [by_kept[rep] for rep in sorted(by_kept)]

        kept = [i for i in range(len(texts)) if i not in removed]
        self.stats.kept = len(kept)
        logger.info(f"Dedup kept {len(kept)} of {len(texts)} documents "
                    f"({self.stats.exact_duplicates} exact, {self.stats.near_duplicates} near duplicates)")
        return kept


def dedup_corpus(docs, threshold=DEFAULT_THRESHOLD, num_perms=DEFAULT_NUM_PERMS,
                 b=DEFAULT_BANDS, r=DEFAULT_ROWS, k=DEFAULT_SHINGLE, **options):
    """Return (kept docs in original order, decisions)"""
    docs = list(docs)
    deduplicator = Deduplicator(threshold, num_perms, b, r, k, **options)
    kept = deduplicator.run(_text_of(doc) for doc in docs)
    return [docs[i] for i in kept], deduplicator.decisions


def write_decisions(path, decisions):
    rows = [(d.kept_id, removed_id, f"{score:.4f}", d.linked_via.get(removed_id, d.kept_id))
            for d in decisions for removed_id, score in d.removed]
    atomic_write_text(path, csv_text(('kept_id', 'removed_id', 'est_jaccard', 'linked_via'), rows))


def write_borderline(path, pairs):
    rows = [(a, b, f"{score:.4f}") for a, b, score in pairs]
    atomic_write_text(path, csv_text(('id_a', 'id_b', 'est_jaccard'), rows))
