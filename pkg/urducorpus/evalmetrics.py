"""Few-shot prompt assembly and scoring (accuracy, BLEU, ROUGE-L).

Model outputs are produced elsewhere; this module only builds the prompts
that are sent and scores the prediction files that come back.
"""

import logging
import math
import os
import string
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from urducorpus.corpus import csv_text, read_csv_columns
from urducorpus.errors import (EmptyReference, InvalidParameter, LengthMismatch, MissingRuns,
                               TemplateSlotMismatch)
from urducorpus.fileio import atomic_write_text, read_text

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), 'data', 'templates')

TASK_SLOTS = {
    'SC': ('text', 'label'),
    'GEC': ('source', 'target'),
    'QA-C': ('context', 'question', 'answer'),
    'QA-NC': ('question', 'answer'),
}
TASK_METRIC = {'SC': 'accuracy', 'GEC': 'bleu', 'QA-C': 'rouge_l', 'QA-NC': 'rouge_l'}
TASK_ORDER = ('SC', 'GEC', 'QA-C', 'QA-NC')

DEFAULT_SHOTS = 5
DEFAULT_RUNS = 5
DEFAULT_SAMPLE_SEED = 7
BLEU_EPSILON = 1e-9


def task_kind(name):
    kind = name.strip().upper()
    if kind not in TASK_SLOTS:
        raise InvalidParameter(f"unknown task '{name}' (expected one of {', '.join(TASK_ORDER)})")
    return kind


def gold_slot(kind):
    return TASK_SLOTS[kind][-1]


def gold_labels(examples):
    """Distinct SC labels present in the examples"""
    return tuple(sorted({e['label'] for e in examples if e.get('label')}))


@dataclass
class FewShotTask:
    kind: str
    shots: list
    query: dict
    k: int = DEFAULT_SHOTS
    labels: tuple = None

    def __post_init__(self):
        self.kind = task_kind(self.kind)
        if len(self.shots) != self.k:
            raise InvalidParameter(f"task declares k={self.k} but has {len(self.shots)} shots")
        if self.kind == 'SC':
            if self.labels is None:
                self.labels = gold_labels([*self.shots, self.query])
            for shot in self.shots:
                if shot['label'] not in self.labels:
                    raise InvalidParameter(f"label '{shot['label']}' is not in the label set")


@dataclass
class MetricScore:
    metric: str
    value: float
    per_example: list = field(default_factory=list)
    runs: int = 1
    per_run: list = field(default_factory=list)


def _fields(template_text):
    return {name for _, name, _, _ in string.Formatter().parse(template_text) if name}


@dataclass(frozen=True)
class PromptTemplate:
    kind: str
    header: str
    shot: str
    query: str

    def check(self):
        slots = set(TASK_SLOTS[self.kind])
        query_slots = slots - {gold_slot(self.kind)}
        if _fields(self.header):
            raise TemplateSlotMismatch("the header must not contain slots")
        if _fields(self.shot) != slots:
            raise TemplateSlotMismatch(
                f"shot slots {sorted(_fields(self.shot))} != {sorted(slots)} for {self.kind}")
        if _fields(self.query) != query_slots:
            raise TemplateSlotMismatch(
                f"query slots {sorted(_fields(self.query))} != {sorted(query_slots)} for {self.kind}")
        return self

    @classmethod
    def parse(cls, kind, text):
        """Read ``[header]``, ``[shot]`` and ``[query]`` sections"""
        sections = {}
        current = None
        for line in text.splitlines(keepends=True):
            stripped = line.strip()
            if stripped in ('[header]', '[shot]', '[query]'):
                current = stripped[1:-1]
                sections[current] = ''
                continue
            if current is None:
                if stripped:
                    raise TemplateSlotMismatch("text before the first section")
                continue
            sections[current] += line
        missing = [s for s in ('shot', 'query') if s not in sections]
        if missing:
            raise TemplateSlotMismatch(f"template lacks section(s) {', '.join(missing)}")
        return cls(task_kind(kind), sections.get('header', ''), sections['shot'],
                   sections['query'].rstrip('\n')).check()

    @classmethod
    def load(cls, kind, path):
        return cls.parse(kind, read_text(path))

    @classmethod
    def default(cls, kind):
        kind = task_kind(kind)
        return cls.load(kind, os.path.join(TEMPLATE_DIR, f"{kind.lower()}.txt"))


def build_prompt(task, template):
    if template.kind != task.kind:
        raise TemplateSlotMismatch(f"template is for {template.kind}, task is {task.kind}")
    template.check()
    try:
        parts = [template.header]
        parts.extend(template.shot.format(**shot) for shot in task.shots)
        parts.append(template.query.format(**task.query))
    except KeyError as e:
        raise TemplateSlotMismatch(f"example lacks slot {e}") from e
    return ''.join(parts)


def read_task_file(kind, path):
    kind = task_kind(kind)
    return [row for _, row in read_csv_columns(path, TASK_SLOTS[kind])]


def sample_tasks(examples, kind, k=DEFAULT_SHOTS, seed=DEFAULT_SAMPLE_SEED, labels=None):
    """One task per example, its k shots drawn from the other examples"""
    examples = list(examples)
    if k and len(examples) - 1 < k:
        raise InvalidParameter(f"need at least {k + 1} examples for {k}-shot tasks, got {len(examples)}")
    if task_kind(kind) == 'SC' and labels is None:
        labels = gold_labels(examples)
    rng = np.random.default_rng(seed)
    tasks = []
    for i, query in enumerate(examples):
        others = [j for j in range(len(examples)) if j != i]
        chosen = rng.choice(len(others), size=k, replace=False) if k else []
        shots = [examples[others[c]] for c in chosen]
        tasks.append(FewShotTask(kind, shots, query, k, labels))
    return tasks


def normalize_label(text):
    """First non-empty line, trimmed and case-folded"""
    for line in text.splitlines():
        if line.strip():
            return line.strip().casefold()
    return ''


def accuracy(predictions, golds):
    predictions, golds = list(predictions), list(golds)
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(golds)} golds")
    if not golds:
        return 0.0
    matches = sum(normalize_label(p) == normalize_label(g) for p, g in zip(predictions, golds))
    return 100.0 * matches / len(golds)


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses, references, max_n=4):
    """Corpus BLEU in [0, 100] over whitespace tokens.

    ``references[i]`` is a string or a list of strings. Only n-gram orders
    the hypotheses actually contain are averaged; zero match counts at those
    orders get an epsilon instead of zeroing the score, except that no
    unigram overlap at all scores 0.
    """
    hypotheses = list(hypotheses)
    references = [[r] if isinstance(r, str) else list(r) for r in references]
    if not references or any(not refs for refs in references):
        raise EmptyReference("every hypothesis needs at least one reference")
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses for {len(references)} reference sets")

    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, refs in zip(hypotheses, references):
        hyp_tokens = hyp.split()
        ref_tokens = [r.split() for r in refs]
        hyp_len += len(hyp_tokens)
        ref_len += min((abs(len(r) - len(hyp_tokens)), len(r)) for r in ref_tokens)[1]
        for n in range(1, max_n + 1):
            counts = _ngrams(hyp_tokens, n)
            max_ref = Counter()
            for r in ref_tokens:
                for gram, c in _ngrams(r, n).items():
                    max_ref[gram] = max(max_ref[gram], c)
            matches[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            totals[n - 1] += max(0, len(hyp_tokens) - n + 1)

    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    orders = [n for n in range(max_n) if totals[n] > 0]
    log_precision = sum(math.log(max(matches[n], BLEU_EPSILON) / totals[n]) for n in orders) / len(orders)
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


def sentence_bleu(hypothesis, references, max_n=4):
    return corpus_bleu([hypothesis], [references], max_n)


def bleu(hypothesis, references, max_n=4):
    """BLEU for one hypothesis string or, given a list, for a whole corpus"""
    if isinstance(hypothesis, str):
        return sentence_bleu(hypothesis, references, max_n)
    return corpus_bleu(hypothesis, references, max_n)


def lcs_length(a, b):
    if len(a) < len(b):
        a, b = b, a
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if x == y else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(hypothesis, reference):
    hyp = hypothesis.split() if isinstance(hypothesis, str) else list(hypothesis)
    ref = reference.split() if isinstance(reference, str) else list(reference)
    if not hyp or not ref:
        return 0.0
    lcs = lcs_length(hyp, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(hyp)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def read_predictions(path):
    lines = read_text(path).split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    return [line.rstrip('\r') for line in lines]


def score_run(kind, golds, predictions):
    kind = task_kind(kind)
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(golds)} golds")
    metric = TASK_METRIC[kind]
    if metric == 'accuracy':
        per_example = [100.0 if normalize_label(p) == normalize_label(g) else 0.0
                       for p, g in zip(predictions, golds)]
        return MetricScore(metric, accuracy(predictions, golds), per_example)
    if metric == 'bleu':
        per_example = [sentence_bleu(p, g) for p, g in zip(predictions, golds)]
        return MetricScore(metric, corpus_bleu(predictions, golds), per_example)
    per_example = [rouge_l(p, g) for p, g in zip(predictions, golds)]
    value = sum(per_example) / len(per_example) if per_example else 0.0
    return MetricScore(metric, value, per_example)


def evaluate_run(kind, examples, prediction_paths, runs=DEFAULT_RUNS):
    """Score every run's predictions and average them"""
    kind = task_kind(kind)
    prediction_paths = list(prediction_paths)
    if runs < 1:
        raise InvalidParameter(f"runs must be at least 1, got {runs}")
    if len(prediction_paths) > runs:
        raise InvalidParameter(f"{len(prediction_paths)} prediction files for {runs} runs")
    missing = [p for p in prediction_paths if not os.path.isfile(p)]
    missing += [f"run {i + 1}" for i in range(len(prediction_paths), runs)]
    if missing:
        raise MissingRuns(missing, runs)
    golds = [example[gold_slot(kind)] for example in examples]
    per_run = []
    for path in prediction_paths:
        score = score_run(kind, golds, read_predictions(path))
        logger.info(f"{kind} {path}: {score.metric} = {score.value:.4f}")
        per_run.append(score.value)
    mean = sum(per_run) / len(per_run)
    return MetricScore(TASK_METRIC[kind], mean, runs=len(per_run), per_run=per_run)


def format_value(metric, value):
    if metric == 'accuracy':
        return f"{value:.1f}"
    return f"{value:.2f}"


def format_table_row(model, scores):
    """``model | SC | GEC | QA-C | QA-NC`` with '-' for tasks not scored"""
    cells = [model]
    for kind in TASK_ORDER:
        score = scores.get(kind)
        cells.append(format_value(score.metric, score.value) if score else '-')
    return ' | '.join(cells)


def write_scores(path, kind, score):
    rows = [(i + 1, score.metric, f"{v:.4f}") for i, v in enumerate(score.per_run)]
    rows.append(('mean', score.metric, f"{score.value:.4f}"))
    atomic_write_text(path, csv_text(('run', 'metric', 'value'), rows))
    logger.info(f"Wrote {kind} scores to {path}")
