"""Byte-level BPE with Urdu-aware pre-tokenization.

Text is first split into chunks: Urdu letter runs, digit runs, single Urdu
punctuation marks, other non-space runs and whitespace. Letter runs and
other runs take one optional leading space. Merges are learned and applied
inside chunks only. The base alphabet is the 256 byte values, so every
string encodes.
"""

import base64
import binascii
import concurrent.futures
import functools
import heapq
import logging
import sys
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import regex
from tqdm import tqdm

from urducorpus.errors import CorpusTooSmall, InvalidParameter, MalformedVocabFile, UnknownId
from urducorpus.fileio import atomic_write_text, read_text

logger = logging.getLogger(__name__)

BYTE_VOCAB = 256
SPECIALS = ('EOT',)
VOCAB_FORMAT_VERSION = 1

URDU_LETTERS = (r"\u0600-\u060B\u060D-\u061A\u061C-\u061E\u0620-\u065F"
                r"\u066A-\u06D3\u06D5-\u06EF\u06FA-\u06FF")
URDU_DIGITS = r"\u06F0-\u06F9\u0660-\u0669"
URDU_PUNCTUATION = "\u06D4\u060C\u061F\u061B"

URDU_PATTERN = (
    rf"[ ]?[{URDU_LETTERS}]+"
    rf"|[{URDU_DIGITS}]+"
    rf"|[{URDU_PUNCTUATION}]"
    r"|[ ]?[^\s\u0600-\u06FF]+"
    r"|\s+(?!\S)"
    r"|\s+"
)


@dataclass(frozen=True)
class PreTokenRules:
    pattern: str = URDU_PATTERN
    compiled: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'compiled', regex.compile(self.pattern))


DEFAULT_RULES = PreTokenRules()


def pretokenize(text, rules=DEFAULT_RULES):
    return rules.compiled.findall(text)


def _merge_pair(ids, pair, new_id):
    out = []
    i = 0
    n = len(ids)
    while i < n:
        if i < n - 1 and ids[i] == pair[0] and ids[i + 1] == pair[1]:
            out.append(new_id)
            i += 2
        else:
            out.append(ids[i])
            i += 1
    return out


@dataclass
class Vocabulary:
    """256 byte tokens, then one token per merge in rank order, then EOT last."""
    merges: list = field(default_factory=list)
    eot_marker: str = field(default='', compare=False)
    token_bytes: list = field(init=False, repr=False, compare=False)
    ranks: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.merges = [tuple(m) for m in self.merges]
        self.token_bytes = [bytes([b]) for b in range(BYTE_VOCAB)]
        self.ranks = {}
        for rank, (left, right) in enumerate(self.merges):
            size = len(self.token_bytes)
            if not (0 <= left < size and 0 <= right < size):
                raise InvalidParameter(f"merge {rank} refers to an id that does not exist yet")
            self.ranks[(left, right)] = size
            self.token_bytes.append(self.token_bytes[left] + self.token_bytes[right])
        self._chunk_cache = functools.lru_cache(maxsize=1 << 16)(self._merge_chunk)

    @classmethod
    def byte_level(cls, eot_marker=''):
        """Vocabulary with no merges: every byte is its own token"""
        return cls([], eot_marker)

    @property
    def vocab_size(self):
        return BYTE_VOCAB + len(self.merges) + len(SPECIALS)

    @property
    def eot_id(self):
        return self.vocab_size - 1

    def _merge_chunk(self, chunk):
        ids = list(chunk)
        while len(ids) > 1:
            best = None
            best_rank = None
            for pair in zip(ids, ids[1:]):
                rank = self.ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best, best_rank = pair, rank
            if best is None:
                break
            ids = _merge_pair(ids, best, best_rank)
        return tuple(ids)

    def encode_chunk(self, chunk):
        return self._chunk_cache(chunk)

    def clear_cache(self):
        self._chunk_cache.cache_clear()

    def token_to_bytes(self, token_id):
        if token_id == self.eot_id:
            return self.eot_marker.encode('utf-8')
        if not 0 <= token_id < self.eot_id:
            raise UnknownId(f"token id {token_id} outside vocabulary of size {self.vocab_size}")
        return self.token_bytes[token_id]


def encode(text, vocab, rules=DEFAULT_RULES):
    ids = []
    for chunk in pretokenize(text, rules):
        ids.extend(vocab.encode_chunk(chunk.encode('utf-8')))
    return ids


def decode(ids, vocab):
    return b''.join(vocab.token_to_bytes(i) for i in ids).decode('utf-8', errors='replace')


class Tokenizer:
    """A vocabulary bound to its pre-tokenization rules"""

    def __init__(self, vocab, rules=DEFAULT_RULES, name=None):
        self.vocab = vocab
        self.rules = rules
        self.name = name or f"bpe-{vocab.vocab_size}"

    @classmethod
    def from_file(cls, path, name=None):
        return cls(load_vocab(path), name=name)

    @property
    def eot_id(self):
        return self.vocab.eot_id

    def encode(self, text):
        return encode(text, self.vocab, self.rules)

    def decode(self, ids):
        return decode(ids, self.vocab)

    def count_tokens(self, text):
        return len(self.encode(text))

    def encode_batch(self, texts, threads=1):
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
            return list(executor.map(self.encode, texts))


def count_chunks(texts, rules=DEFAULT_RULES, threads=1):
    """Frequency of every distinct pre-token chunk, as UTF-8 bytes"""
    def count_one(text):
        return Counter(chunk.encode('utf-8') for chunk in pretokenize(text, rules))

    total = Counter()
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        for counts in executor.map(count_one, texts):
            total.update(counts)
    return total


def train_bpe(corpus, vocab_size, rules=DEFAULT_RULES, threads=1, progress=False):
    """Learn merges until the vocabulary (EOT included) reaches vocab_size.

    Each step merges the most frequent adjacent pair; equal counts go to the
    lexicographically smallest (left bytes, right bytes). A pair whose
    concatenation is already a token is never merged.
    """
    minimum = BYTE_VOCAB + 1 + len(SPECIALS)
    if vocab_size < minimum:
        raise InvalidParameter(f"vocab_size must be >= {minimum}, got {vocab_size}")
    target_merges = vocab_size - BYTE_VOCAB - len(SPECIALS)

    chunk_counts = count_chunks(corpus, rules, threads)
    chunks = sorted(chunk_counts)
    words = [list(chunk) for chunk in chunks]
    freqs = [chunk_counts[chunk] for chunk in chunks]
    logger.info(f"Training BPE to {vocab_size} tokens on {len(words)} distinct chunks")

    token_bytes = [bytes([b]) for b in range(BYTE_VOCAB)]
    known = set(token_bytes)
    pair_counts = defaultdict(int)
    where = defaultdict(set)
    for w, (word, freq) in enumerate(zip(words, freqs)):
        for pair in zip(word, word[1:]):
            pair_counts[pair] += freq
            where[pair].add(w)

    heap = [(-count, token_bytes[a], token_bytes[b], a, b) for (a, b), count in pair_counts.items()]
    heapq.heapify(heap)

    merges = []
    with tqdm(total=target_merges, desc='merges', disable=not progress, file=sys.stderr) as bar:
        while len(merges) < target_merges:
            if not heap:
                raise CorpusTooSmall(
                    f"corpus ran out of pairs after {len(merges)} of {target_merges} merges")
            neg, left_bytes, right_bytes, a, b = heapq.heappop(heap)
            pair = (a, b)
            if pair_counts.get(pair, 0) != -neg or neg == 0:
                continue
            merged = left_bytes + right_bytes
            if merged in known:
                pair_counts.pop(pair, None)
                continue
            new_id = len(token_bytes)
            token_bytes.append(merged)
            known.add(merged)
            merges.append(pair)

            changed = set()
            for w in sorted(where.pop(pair, ())):
                word = words[w]
                if len(word) < 2:
                    continue
                new_word = _merge_pair(word, pair, new_id)
                if len(new_word) == len(word):
                    continue
                freq = freqs[w]
                for old in zip(word, word[1:]):
                    pair_counts[old] -= freq
                    changed.add(old)
                for new in zip(new_word, new_word[1:]):
                    pair_counts[new] += freq
                    where[new].add(w)
                    changed.add(new)
                words[w] = new_word
            pair_counts.pop(pair, None)
            for p in changed:
                count = pair_counts.get(p, 0)
                if count > 0:
                    heapq.heappush(heap, (-count, token_bytes[p[0]], token_bytes[p[1]], p[0], p[1]))
                else:
                    pair_counts.pop(p, None)
            bar.update(1)
            if len(merges) % 1000 == 0:
                logger.debug(f"{len(merges)} merges learned")

    logger.info(f"Learned {len(merges)} merges")
    return Vocabulary(merges)


def save_vocab(vocab, path):
    lines = [
        f"version {VOCAB_FORMAT_VERSION}",
        f"vocab_size {vocab.vocab_size}",
        f"specials EOT={vocab.eot_id}",
    ]
    for left, right in vocab.merges:
        lines.append(
            base64.b64encode(vocab.token_bytes[left]).decode('ascii') + ' '
            + base64.b64encode(vocab.token_bytes[right]).decode('ascii'))
    atomic_write_text(path, '\n'.join(lines) + '\n')
    logger.info(f"Saved vocabulary of {vocab.vocab_size} tokens to {path}")


def _header_value(lines, number, prefix):
    if len(lines) < number:
        raise MalformedVocabFile(number, "file ends inside the header")
    line = lines[number - 1]
    if not line.startswith(prefix):
        raise MalformedVocabFile(number, f"expected '{prefix}...', got '{line}'")
    return line[len(prefix):]


def _b64(text, number):
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as e:
        raise MalformedVocabFile(number, f"invalid base64 '{text}': {e}")


def parse_vocab(text, eot_marker=''):
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    version = _header_value(lines, 1, 'version ')
    if version != str(VOCAB_FORMAT_VERSION):
        raise MalformedVocabFile(1, f"unsupported version '{version}'")
    try:
        vocab_size = int(_header_value(lines, 2, 'vocab_size '))
    except ValueError:
        raise MalformedVocabFile(2, "vocab_size is not an integer")
    if vocab_size < BYTE_VOCAB + len(SPECIALS):
        raise MalformedVocabFile(2, f"vocab_size {vocab_size} is too small")
    specials = _header_value(lines, 3, 'specials ')
    if specials != f"EOT={vocab_size - 1}":
        raise MalformedVocabFile(3, f"expected 'EOT={vocab_size - 1}', got '{specials}'")

    ids = {bytes([b]): b for b in range(BYTE_VOCAB)}
    merges = []
    for number, line in enumerate(lines[3:], start=4):
        parts = line.split(' ')
        if len(parts) != 2:
            raise MalformedVocabFile(number, "expected two base64 fields")
        left, right = _b64(parts[0], number), _b64(parts[1], number)
        if left not in ids or right not in ids:
            raise MalformedVocabFile(number, "merge refers to a token not defined above it")
        if left + right in ids:
            raise MalformedVocabFile(number, "merge produces a token that already exists")
        merges.append((ids[left], ids[right]))
        ids[left + right] = BYTE_VOCAB + len(merges) - 1

    expected = vocab_size - BYTE_VOCAB - len(SPECIALS)
    if len(merges) != expected:
        raise MalformedVocabFile(len(lines) + 1, f"expected {expected} merges, found {len(merges)}")
    return Vocabulary(merges, eot_marker)


def load_vocab(path, eot_marker=''):
    vocab = parse_vocab(read_text(path), eot_marker)
    logger.debug(f"Loaded vocabulary of {vocab.vocab_size} tokens from {path}")
    return vocab
