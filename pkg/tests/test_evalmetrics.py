import unittest
import sys
import os
import math
import random
import tempfile
from functools import lru_cache
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from urducorpus.errors import (EmptyReference, InvalidParameter, LengthMismatch, MissingRuns,
                               TemplateSlotMismatch)
from urducorpus.evalmetrics import (FewShotTask, MetricScore, PromptTemplate, accuracy, bleu,
                                    build_prompt, corpus_bleu, evaluate_run, format_table_row,
                                    normalize_label, read_task_file, rouge_l, sample_tasks, sentence_bleu,
                                    task_kind, write_scores)

SC_TEMPLATE = '[header]\nClassify.\n[shot]\n{text} => {label}\n[query]\n{text} =>\n'


def naive_bleu(hypothesis, reference):
    hyp, ref = hypothesis.split(), reference.split()
    if not hyp:
        return 0.0
    logs = []
    for n in range(1, 5):
        hyp_grams = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
        if not hyp_grams:
            continue
        ref_grams = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
        matched = sum(min(hyp_grams.count(g), ref_grams.count(g)) for g in set(hyp_grams))
        if n == 1 and matched == 0:
            return 0.0
        logs.append(math.log(max(matched, 1e-9) / len(hyp_grams)))
    penalty = 1.0 if len(hyp) >= len(ref) else math.exp(1 - len(ref) / len(hyp))
    return 100.0 * penalty * math.exp(sum(logs) / len(logs))


def recursive_lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))
    return go(0, 0)


class TestPrompts(unittest.TestCase):
    def setUp(self):
        self.template = PromptTemplate.parse('sc', SC_TEMPLATE)
        self.examples = [{'text': f'جملہ {i}', 'label': 'positive' if i % 2 else 'negative'}
                         for i in range(8)]

    def test_zero_shot_is_query_only(self):
        """k=0 gives the header and the query"""
        task = FewShotTask('SC', [], {'text': 'سوال'}, k=0)
        self.assertEqual(build_prompt(task, self.template), 'Classify.\nسوال =>')

    def test_five_shots_five_labels(self):
        """A 5-shot SC prompt carries exactly five gold labels"""
        task = sample_tasks(self.examples, 'SC', k=5, seed=3)[0]
        prompt = build_prompt(task, self.template)
        self.assertEqual(prompt.count('positive') + prompt.count('negative'), 5)
        self.assertTrue(prompt.endswith('جملہ 0 =>'))

    def test_deterministic(self):
        """Same seed, same tasks, same prompt bytes"""
        first = [build_prompt(t, self.template) for t in sample_tasks(self.examples, 'SC', k=3, seed=1)]
        second = [build_prompt(t, self.template) for t in sample_tasks(self.examples, 'SC', k=3, seed=1)]
        self.assertEqual(first, second)

    def test_query_not_among_its_shots(self):
        """Shots are drawn from the other examples"""
        for i, task in enumerate(sample_tasks(self.examples, 'SC', k=5)):
            self.assertNotIn(self.examples[i], task.shots)

    def test_too_few_examples(self):
        """k shots need k + 1 examples"""
        with self.assertRaises(InvalidParameter):
            sample_tasks(self.examples[:5], 'SC', k=5)

    def test_shot_count_and_labels_checked(self):
        """A task's shots must match k and its label set"""
        with self.assertRaises(InvalidParameter):
            FewShotTask('SC', self.examples[:2], {'text': 'x'}, k=3)
        with self.assertRaises(InvalidParameter):
            FewShotTask('SC', [{'text': 'x', 'label': 'neutral'}], {'text': 'y'}, k=1,
                        labels=('positive', 'negative'))

    def test_label_set_defaults_to_gold_labels(self):
        """Without an explicit label set the examples' gold labels are enforced"""
        tasks = sample_tasks(self.examples, 'SC', k=3)
        self.assertEqual({t.labels for t in tasks}, {('negative', 'positive')})
        with self.assertRaises(InvalidParameter):
            sample_tasks(self.examples + [{'text': 'خالی', 'label': ''}], 'SC', k=8, seed=0)
        with self.assertRaises(InvalidParameter):
            sample_tasks(self.examples, 'SC', k=7, labels=('positive',))

    def test_context_only_with_context_task(self):
        """QA-C prompts show the passage, QA-NC prompts have no slot for it"""
        shot = {'context': 'سیاق', 'question': 'کیا؟', 'answer': 'ہاں'}
        query = {'context': 'عبارت', 'question': 'کون؟'}
        with_context = build_prompt(FewShotTask('QA-C', [shot], query, k=1), PromptTemplate.default('qa-c'))
        self.assertIn('عبارت', with_context)
        self.assertIn('ہاں', with_context)
        without = build_prompt(FewShotTask('QA-NC', [{'question': 'کیا؟', 'answer': 'ہاں'}],
                                           {'question': 'کون؟', 'context': 'عبارت'}, k=1),
                               PromptTemplate.default('qa-nc'))
        self.assertNotIn('عبارت', without)

    def test_default_templates_load(self):
        """Every task kind has a bundled template"""
        for kind in ('sc', 'gec', 'qa-c', 'qa-nc'):
            self.assertEqual(PromptTemplate.default(kind).kind, task_kind(kind))

    def test_template_errors(self):
        """Slot mismatches and stray text are rejected"""
        with self.assertRaises(TemplateSlotMismatch):
            PromptTemplate.parse('sc', '[shot]\n{text}\n[query]\n{text}\n')
        with self.assertRaises(TemplateSlotMismatch):
            PromptTemplate.parse('sc', 'stray\n' + SC_TEMPLATE)
        with self.assertRaises(TemplateSlotMismatch):
            PromptTemplate.parse('sc', '[shot]\n{text} {label}\n')
        gec = FewShotTask('GEC', [], {'source': 'x'}, k=0)
        with self.assertRaises(TemplateSlotMismatch):
            build_prompt(gec, self.template)

    def test_unknown_task(self):
        """Only the four task kinds exist"""
        with self.assertRaises(InvalidParameter):
            task_kind('summarize')


class TestAccuracy(unittest.TestCase):
    def test_all_and_none(self):
        """Perfect and empty agreement"""
        golds = ['positive', 'negative', 'positive']
        self.assertEqual(accuracy(golds, golds), 100.0)
        self.assertEqual(accuracy(['neutral'] * 3, golds), 0.0)

    def test_anchor(self):
        """333 of 500 correct is 66.6%"""
        golds = ['positive'] * 500
        predictions = ['positive'] * 333 + ['negative'] * 167
        self.assertAlmostEqual(accuracy(predictions, golds), 66.6)

    def test_label_normalization(self):
        """Case, padding and continuation lines are ignored"""
        self.assertEqual(normalize_label('\n  Positive \nbecause the text is kind'), 'positive')
        self.assertEqual(accuracy([' POSITIVE\nmore'], ['positive']), 100.0)

    def test_length_mismatch(self):
        """Predictions and golds must align"""
        with self.assertRaises(LengthMismatch):
            accuracy(['a'], ['a', 'b'])


class TestBleu(unittest.TestCase):
    def test_identical(self):
        """A perfect hypothesis scores 100"""
        self.assertAlmostEqual(bleu('یہ ایک اچھا دن ہے', 'یہ ایک اچھا دن ہے'), 100.0)

    def test_disjoint(self):
        """No shared unigram scores 0"""
        self.assertEqual(bleu('a b c', 'x y z'), 0.0)

    def test_brevity_anchor(self):
        """Four of five reference words, all n-grams matching"""
        self.assertAlmostEqual(bleu('a b c d', 'a b c d e'), 100 * math.exp(1 - 5 / 4))
        self.assertAlmostEqual(bleu('a b c d', 'a b c d e'), 77.88, places=2)

    def test_trailing_whitespace(self):
        """Whitespace tokenization ignores trailing spaces"""
        self.assertEqual(bleu('a b c d  ', 'a b c d'), bleu('a b c d', 'a b c d'))

    def test_multiple_references(self):
        """Counts clip against the best reference and length uses the closest one"""
        self.assertAlmostEqual(corpus_bleu(['a b c d'], [['x y', 'a b c d']]), 100.0)

    def test_sentence_bleu(self):
        """One hypothesis against one reference string or a list of them"""
        self.assertAlmostEqual(sentence_bleu('a b c d', 'a b c d e'), 100 * math.exp(1 - 5 / 4))
        self.assertAlmostEqual(sentence_bleu('a b c d', ['x y', 'a b c d']), 100.0)
        self.assertEqual(sentence_bleu('a b c', 'x y z'), 0.0)
        self.assertAlmostEqual(sentence_bleu('ب پ ت ب', 'ب پ ت ٹ'), naive_bleu('ب پ ت ب', 'ب پ ت ٹ'), delta=1e-9)
        with self.assertRaises(EmptyReference):
            sentence_bleu('a', [])

    def test_empty_reference(self):
        """A hypothesis without references cannot be scored"""
        with self.assertRaises(EmptyReference):
            corpus_bleu(['a'], [[]])
        with self.assertRaises(LengthMismatch):
            corpus_bleu(['a', 'b'], ['a'])

    def test_matches_naive_counter(self):
        """Agrees with a direct n-gram count on 100 random pairs"""
        rng = random.Random(17)
        vocab = ['الف', 'ب', 'پ', 'ت', 'ٹ', 'ث']
        for _ in range(100):
            hyp = ' '.join(rng.choice(vocab) for _ in range(rng.randint(1, 12)))
            ref = ' '.join(rng.choice(vocab) for _ in range(rng.randint(1, 12)))
            self.assertAlmostEqual(bleu(hyp, ref), naive_bleu(hyp, ref), delta=1e-9)


class TestRougeL(unittest.TestCase):
    def test_examples(self):
        """Identical, disjoint and one worked example"""
        self.assertEqual(rouge_l('a b c', 'a b c'), 1.0)
        self.assertEqual(rouge_l('a b', 'c d'), 0.0)
        self.assertAlmostEqual(rouge_l('a b c', 'a c d'), 2 / 3)
        self.assertEqual(rouge_l('', 'a'), 0.0)

    def test_matches_recursive_lcs(self):
        """F-score from the DP equals one from a recursive LCS on random pairs"""
        rng = random.Random(23)
        for _ in range(300):
            a = [rng.choice('abcd') for _ in range(rng.randint(1, 20))]
            b = [rng.choice('abcd') for _ in range(rng.randint(1, 20))]
            lcs = recursive_lcs(tuple(a), tuple(b))
            expected = 0.0 if lcs == 0 else 2 * (lcs / len(a)) * (lcs / len(b)) / (lcs / len(a) + lcs / len(b))
            self.assertAlmostEqual(rouge_l(' '.join(a), ' '.join(b)), expected, delta=1e-12)


class TestRuns(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.examples = [{'text': f'متن {i}', 'label': 'positive'} for i in range(50)]

    def _predictions(self, name, correct):
        path = os.path.join(self.tmp.name, name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write('\n'.join(['positive'] * correct + ['negative'] * (50 - correct)) + '\n')
        return path

    def test_mean_over_runs(self):
        """Runs at 60, 62, 64, 66 and 68 average to 64"""
        paths = [self._predictions(f'run{i}.txt', c) for i, c in enumerate((30, 31, 32, 33, 34))]
        score = evaluate_run('sc', self.examples, paths, runs=5)
        self.assertEqual(score.per_run, [60.0, 62.0, 64.0, 66.0, 68.0])
        self.assertAlmostEqual(score.value, 64.0)
        self.assertEqual(score.runs, 5)

    def test_identical_runs(self):
        """Five copies of one run average to that run"""
        path = self._predictions('same.txt', 40)
        score = evaluate_run('SC', self.examples, [path] * 5)
        self.assertAlmostEqual(score.value, 80.0)

    def test_missing_run(self):
        """Four files for five runs names the absent one"""
        paths = [self._predictions(f'r{i}.txt', 50) for i in range(4)]
        with self.assertRaises(MissingRuns) as ctx:
            evaluate_run('sc', self.examples, paths, runs=5)
        self.assertEqual(ctx.exception.missing, ['run 5'])
        absent = os.path.join(self.tmp.name, 'absent.txt')
        with self.assertRaises(MissingRuns) as ctx:
            evaluate_run('sc', self.examples, paths + [absent], runs=5)
        self.assertEqual(ctx.exception.missing, [absent])

    def test_extra_run_files(self):
        """More prediction files than runs is rejected, not truncated"""
        paths = [self._predictions(f'r{i}.txt', 50) for i in range(6)]
        with self.assertRaises(InvalidParameter):
            evaluate_run('sc', self.examples, paths, runs=5)

    def test_runs_must_be_positive(self):
        """runs=0 is a parameter error"""
        with self.assertRaises(InvalidParameter):
            evaluate_run('sc', self.examples, [], runs=0)
        with self.assertRaises(InvalidParameter):
            evaluate_run('sc', self.examples, [self._predictions('one.txt', 50)], runs=-1)

    def test_misaligned_predictions(self):
        """A predictions file must have one line per example"""
        path = os.path.join(self.tmp.name, 'short.txt')
        with open(path, 'w', encoding='utf-8') as f:
            f.write('positive\n')
        with self.assertRaises(LengthMismatch):
            evaluate_run('sc', self.examples, [path], runs=1)

    def test_scores_csv_and_table_row(self):
        """Per-run rows then the mean; the table row fills unscored tasks with '-'"""
        score = MetricScore('accuracy', 66.6, runs=2, per_run=[66.0, 67.2])
        out = os.path.join(self.tmp.name, 'scores.csv')
        write_scores(out, 'SC', score)
        with open(out, encoding='utf-8') as f:
            self.assertEqual(f.read(), 'run,metric,value\n1,accuracy,66.0000\n2,accuracy,67.2000\n'
                                       'mean,accuracy,66.6000\n')
        row = format_table_row('UrduLM', {'SC': score, 'QA-C': MetricScore('rouge_l', 0.47)})
        self.assertEqual(row, 'UrduLM | 66.6 | - | 0.47 | -')

    def test_read_task_file(self):
        """Task CSVs need the columns of their kind"""
        path = os.path.join(self.tmp.name, 'gec.csv')
        with open(path, 'w', encoding='utf-8') as f:
            f.write('source,target\nغلط جملہ,درست جملہ\n')
        self.assertEqual(read_task_file('gec', path), [{'source': 'غلط جملہ', 'target': 'درست جملہ'}])


if __name__ == '__main__':
    unittest.main()
