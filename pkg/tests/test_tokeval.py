import unittest
import sys
import os
import random
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from urducorpus.errors import EmptyCorpus, InvalidParameter
from urducorpus.tokenizer import Tokenizer, Vocabulary, load_vocab, train_bpe
from urducorpus.tokeval import (avg_token_count, compare, coverage, evaluate, fertility, fertility_ratio,
                                reduction_percent, tokens_per_second, vocab_sweep)
from tests.fixtures import synthetic_corpus

GOLDEN_VOCAB = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data', 'golden_vocab.txt')
URDU_LETTERS = 'ابپتٹثجچحخدڈذرڑزژسشصضطظعغفقکگلمنںوہھءیے'


def lexicon_corpus(rng, lexicon, n_words, words_per_doc=120):
    weights = [1.0 / (rank + 1) for rank in range(len(lexicon))]
    words = rng.choices(lexicon, weights=weights, k=n_words)
    return [' '.join(words[i:i + words_per_doc]) + '۔' for i in range(0, n_words, words_per_doc)]


class TestFormulas(unittest.TestCase):
    def test_fertility_anchors(self):
        """Token and word counts from the resource table give the published ratios"""
        self.assertAlmostEqual(fertility_ratio(555, 500), 1.11)
        self.assertAlmostEqual(fertility_ratio(783, 500), 1.566)
        self.assertAlmostEqual(fertility_ratio(603, 500), 1.206)

    def test_reduction_anchors(self):
        """Relative token savings against the larger count"""
        self.assertAlmostEqual(reduction_percent(555, 783), 29.1, places=1)
        self.assertAlmostEqual(reduction_percent(603, 783), 23.0, places=1)
        self.assertEqual(reduction_percent(783, 783), 0.0)

    def test_reduction_needs_positive_reference(self):
        """A zero reference count cannot be compared against"""
        with self.assertRaises(InvalidParameter):
            reduction_percent(10, 0)

    def test_zero_words(self):
        """Dividing by zero words is an empty corpus"""
        with self.assertRaises(EmptyCorpus):
            fertility_ratio(3, 0)


class TestCorpusMetrics(unittest.TestCase):
    def setUp(self):
        self.golden = Tokenizer(load_vocab(GOLDEN_VOCAB))
        self.bytes = Tokenizer(Vocabulary.byte_level(), name='bytes-256')

    def test_fertility_one_token_per_word(self):
        """Every word a single token gives fertility 1.0"""
        self.assertEqual(fertility(['ab ab ab'], self.golden), 1.0)

    def test_fertility_identity(self):
        """fertility times words is the total token count"""
        docs = synthetic_corpus(15, seed=30)
        words = sum(len(d.split()) for d in docs)
        tokens = sum(self.bytes.count_tokens(d) for d in docs)
        self.assertAlmostEqual(fertility(docs, self.bytes) * words, tokens)

    def test_fertility_empty(self):
        """Whitespace only has no words"""
        with self.assertRaises(EmptyCorpus):
            fertility(['   ', ''], self.bytes)

    def test_avg_token_count(self):
        """Mean per-document tokens, including empty documents"""
        self.assertEqual(avg_token_count(['ab', 'ab ab'], self.golden), 1.5)
        self.assertEqual(avg_token_count(['', ''], self.golden), 0.0)
        with self.assertRaises(EmptyCorpus):
            avg_token_count([], self.golden)

    def test_coverage_fixture(self):
        """Three of ten word types are single tokens"""
        corpus = ['ab a z abc xy', 'hello aab ba abab cd ab']
        self.assertAlmostEqual(coverage(corpus, self.golden), 0.3)

    def test_coverage_extremes(self):
        """A vocabulary holding every word covers fully; bytes cover no Urdu word"""
        self.assertEqual(coverage(['ab ab'], self.golden), 1.0)
        self.assertEqual(coverage(synthetic_corpus(5, seed=1), self.bytes), 0.0)
        with self.assertRaises(EmptyCorpus):
            coverage([''], self.bytes)

    def test_throughput(self):
        """Throughput is positive and needs three repetitions"""
        docs = synthetic_corpus(5, seed=2)
        self.assertGreater(tokens_per_second(docs, self.bytes), 0)
        with self.assertRaises(InvalidParameter):
            tokens_per_second(docs, self.bytes, repeats=2)


class TestCompare(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.train = synthetic_corpus(150, seed=40)
        cls.held_out = synthetic_corpus(40, seed=41)
        cls.trained = Tokenizer(train_bpe(cls.train, 500), name='bpe-500')
        cls.bytes = Tokenizer(Vocabulary.byte_level(), name='bytes-256')

    def test_trained_beats_bytes(self):
        """A trained vocabulary saves at least a fifth of the byte tokens"""
        report = compare([('bpe-500', self.trained), ('bytes-256', self.bytes)], self.held_out)
        self.assertGreaterEqual(report.reduction('bpe-500', 'bytes-256'), 20.0)
        self.assertLess(report.reduction('bytes-256', 'bpe-500'), 0.0)
        names = [row['name'] for row in report.rows()]
        self.assertEqual(names, ['bpe-500', 'bytes-256'])
        self.assertEqual(list(report.rows()[0]), ['name', 'fertility', 'avg_token_count',
                                                  'tokens_per_second', 'coverage'])

    def test_identical_tokenizers(self):
        """The same tokenizer twice saves nothing"""
        report = compare([('a', self.trained), ('b', self.trained)], self.held_out)
        self.assertEqual(report.reduction('a', 'b'), 0.0)

    def test_antisymmetric_definition(self):
        """reduction(A, B) = 1 - count_A / count_B"""
        report = compare([('bpe', self.trained), ('bytes', self.bytes)], self.held_out)
        a, b = report.stats
        self.assertAlmostEqual(report.reduction('bpe', 'bytes'), 100 * (1 - a.total_tokens / b.total_tokens))
        self.assertAlmostEqual(report.reduction('bytes', 'bpe'), 100 * (1 - b.total_tokens / a.total_tokens))

    def test_needs_two(self):
        """A single tokenizer is not a comparison"""
        with self.assertRaises(InvalidParameter):
            compare([('only', self.bytes)], self.held_out)

    def test_evaluate_fields(self):
        """evaluate fills every reported field"""
        stats = evaluate('bpe-500', self.trained, self.held_out)
        self.assertEqual(stats.documents, 40)
        self.assertEqual(stats.vocab_size, 500)
        self.assertAlmostEqual(stats.fertility, stats.total_tokens / stats.total_words)
        self.assertGreaterEqual(stats.fertility, 1.0)
        self.assertTrue(0.0 <= stats.coverage <= 1.0)


class TestVocabSweep(unittest.TestCase):
    def test_fertility_falls_with_vocab_size(self):
        """Larger vocabularies never produce more tokens"""
        results = vocab_sweep(synthetic_corpus(150, seed=50), synthetic_corpus(30, seed=51),
                              sizes=(400, 300, 350))
        self.assertEqual([vocab.vocab_size for vocab, _ in results], [300, 350, 400])
        counts = [stats.total_tokens for _, stats in results]
        self.assertEqual(counts, sorted(counts, reverse=True))
        fertilities = [stats.fertility for _, stats in results]
        self.assertEqual(fertilities, sorted(fertilities, reverse=True))

    def test_prefix_matches_direct_training(self):
        """A sweep entry equals training straight to that size"""
        train = synthetic_corpus(80, seed=52)
        results = vocab_sweep(train, synthetic_corpus(5, seed=53), sizes=(300, 360))
        self.assertEqual(results[0][0].merges, train_bpe(train, 300).merges)


@unittest.skipUnless(os.environ.get('URDUCORPUS_FULL_ACCEPTANCE') == '1',
                     'set URDUCORPUS_FULL_ACCEPTANCE=1 for the 10k/20k/32k run')
class TestFullSweep(unittest.TestCase):
    def test_production_vocab_sizes(self):
        """10k/20k/32k on a ~5 MB corpus: fertility ordered, 32k saves 20% over bytes"""
        rng = random.Random(2025)
        lexicon = sorted({''.join(rng.choice(URDU_LETTERS) for _ in range(rng.randint(2, 9)))
                          for _ in range(25000)})
        rng.shuffle(lexicon)
        train = lexicon_corpus(rng, lexicon, 400000)
        held_out = lexicon_corpus(rng, lexicon, 20000)
        results = vocab_sweep(train, held_out, sizes=(10000, 20000, 32000), threads=4)
        fertilities = [stats.fertility for _, stats in results]
        self.assertGreaterEqual(fertilities[0], fertilities[1])
        self.assertGreaterEqual(fertilities[1], fertilities[2])
        largest = Tokenizer(results[-1][0], name='bpe-32000')
        report = compare([('bpe-32000', largest), ('bytes-256', Tokenizer(Vocabulary.byte_level()))],
                         held_out)
        self.assertGreaterEqual(report.reduction('bpe-32000', 'bytes-256'), 20.0)


if __name__ == '__main__':
    unittest.main()
