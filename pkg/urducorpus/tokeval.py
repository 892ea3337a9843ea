"""Tokenizer quality metrics and side-by-side comparison."""

import logging
import time

import numpy as np

from urducorpus.errors import EmptyCorpus, InvalidParameter
from urducorpus.tokenizer import BYTE_VOCAB, SPECIALS, Tokenizer, Vocabulary, train_bpe

logger = logging.getLogger(__name__)

DEFAULT_REPEATS = 3
DEFAULT_SWEEP = (10000, 20000, 32000)


class TokenizerStats:
    def __init__(self, name=''):
        self.name = name
        self.fertility = 0.0
        self.avg_token_count = 0.0
        self.tokens_per_second = 0.0
        self.coverage = 0.0
        self.total_tokens = 0
        self.total_words = 0
        self.documents = 0
        self.vocab_size = 0

    def to_dict(self):
        """Row for the tokenizer report"""
        return {
            'name': self.name,
            'fertility': round(self.fertility, 4),
            'avg_token_count': round(self.avg_token_count, 2),
            'tokens_per_second': round(self.tokens_per_second, 1),
            'coverage': round(self.coverage, 4),
        }


def _words(text):
    return text.split()


def fertility_ratio(tokens, words):
    """Tokens per word from raw counts"""
    if words <= 0:
        raise EmptyCorpus("no words to divide by")
    return tokens / words


def fertility(corpus, tokenizer):
    texts = list(corpus)
    words = sum(len(_words(t)) for t in texts)
    if not words:
        raise EmptyCorpus("corpus contains no whitespace-delimited words")
    tokens = sum(tokenizer.count_tokens(t) for t in texts)
    return fertility_ratio(tokens, words)


def avg_token_count(docs, tokenizer):
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("no documents to average over")
    return sum(tokenizer.count_tokens(d) for d in docs) / len(docs)


def coverage(corpus, tokenizer):
    """Fraction of word types that encode to exactly one token"""
    types = set()
    for text in corpus:
        types.update(_words(text))
    if not types:
        raise EmptyCorpus("corpus contains no word types")
    single = sum(1 for word in types if tokenizer.count_tokens(word) == 1)
    return single / len(types)


def tokens_per_second(docs, tokenizer, repeats=DEFAULT_REPEATS):
    """Median throughput over `repeats` single-threaded runs, each with a cold cache"""
    docs = list(docs)
    if repeats < 3:
        raise InvalidParameter(f"throughput needs at least 3 repetitions, got {repeats}")
    rates = []
    for _ in range(repeats):
        tokenizer.vocab.clear_cache()
        start = time.perf_counter()
        count = sum(len(tokenizer.encode(d)) for d in docs)
        elapsed = time.perf_counter() - start
        rates.append(count / max(elapsed, 1e-9))
    return float(np.median(rates))


def reduction_percent(count_a, count_b):
    """How many fewer tokens A uses than B, in percent"""
    if count_b <= 0:
        raise InvalidParameter(f"reference token count must be positive, got {count_b}")
    return 100.0 * (1.0 - count_a / count_b)


def evaluate(name, tokenizer, docs, repeats=DEFAULT_REPEATS):
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("no documents to evaluate on")
    stats = TokenizerStats(name)
    counts = [tokenizer.count_tokens(d) for d in docs]
    stats.documents = len(docs)
    stats.total_tokens = sum(counts)
    stats.total_words = sum(len(_words(d)) for d in docs)
    stats.fertility = fertility_ratio(stats.total_tokens, stats.total_words)
    stats.avg_token_count = stats.total_tokens / len(docs)
    stats.coverage = coverage(docs, tokenizer)
    stats.tokens_per_second = tokens_per_second(docs, tokenizer, repeats)
    stats.vocab_size = tokenizer.vocab.vocab_size
    logger.info(f"{name}: fertility {stats.fertility:.3f}, {stats.total_tokens} tokens, "
                f"coverage {stats.coverage:.3f}")
    return stats


class ComparisonReport:
    def __init__(self, stats):
        self.stats = list(stats)
        self.reductions = {}
        for a in self.stats:
            for b in self.stats:
                if a is not b:
                    self.reductions[(a.name, b.name)] = reduction_percent(a.total_tokens, b.total_tokens)

    def rows(self):
        return [s.to_dict() for s in self.stats]

    def reduction(self, name_a, name_b):
        return self.reductions[(name_a, name_b)]


def compare(tokenizers, corpus, repeats=DEFAULT_REPEATS):
    """Evaluate each (name, tokenizer) pair on the same documents"""
    tokenizers = list(tokenizers)
    if len(tokenizers) < 2:
        raise InvalidParameter("comparison needs at least two tokenizers")
    docs = list(corpus)
    report = ComparisonReport(evaluate(name, tok, docs, repeats) for name, tok in tokenizers)
    first = report.stats[0]
    for other in report.stats[1:]:
        logger.info(f"{first.name} uses {report.reduction(first.name, other.name):.1f}% "
                    f"fewer tokens than {other.name}")
    return report


def vocab_sweep(train_texts, eval_texts, sizes=DEFAULT_SWEEP, threads=1, repeats=DEFAULT_REPEATS,
                progress=False):
    """Train once to the largest size and evaluate each size's merge prefix.

    Greedy training is deterministic, so the first n merges of a larger run
    are exactly the merges an n-merge run would learn.
    """
    sizes = sorted(sizes)
    largest = train_bpe(train_texts, sizes[-1], threads=threads, progress=progress)
    eval_texts = list(eval_texts)
    results = []
    for size in sizes:
        vocab = Vocabulary(largest.merges[:size - BYTE_VOCAB - len(SPECIALS)])
        tokenizer = Tokenizer(vocab, name=f"bpe-{size}")
        results.append((vocab, evaluate(tokenizer.name, tokenizer, eval_texts, repeats)))
    return results
