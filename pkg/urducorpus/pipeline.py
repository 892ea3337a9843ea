"""End-to-end curation run driven by one sectioned config file.

Stages always run in this order, each one optional:
clean, dedup, train_tokenizer, eval_tokenizer, pack, stats, schedule,
budget, eval_metrics. Every run writes ``manifest.json`` into the work
directory, including runs that fail part way.
"""

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field

import psutil

from urducorpus import __version__
from urducorpus.budget import (HARDWARE_PRESETS, MODEL_PRESETS, PLAN_PRESETS, HardwareProfile,
                               ModelShape, TrainPlan, lr_curve, training_summary)
from urducorpus.components import CategoryBreakdown, LearningRateCurve, TokenCountBars
from urducorpus.config import Diagnostic, Field, load_dataclass, parse_entries, validate
from urducorpus.corpus import (DEFAULT_SHARD_TOKENS, DEFAULT_SPLIT_SEED, CorpusRecord, SplitSpec,
                               corpus_stats, csv_text, pack, split, write_csv, write_shards,
                               write_stats)
from urducorpus.dedup import (DEFAULT_BANDS, DEFAULT_NUM_PERMS, DEFAULT_ROWS, DEFAULT_SEED,
                              DEFAULT_SHINGLE, DEFAULT_THRESHOLD, Deduplicator, write_borderline,
                              write_decisions)
from urducorpus.errors import ConfigValidationError, CurationError, InputError, StageFailed
from urducorpus.evalmetrics import (DEFAULT_RUNS, evaluate_run, read_task_file, task_kind,
                                    write_scores)
from urducorpus.fileio import atomic_write_text, read_text, sha256_file
from urducorpus.normalize import (DEFAULT_NOISE_PATTERNS, CleanConfig, clean_corpus,
                                  load_char_map, load_word_space_map, read_text_documents)
from urducorpus.tokenizer import Tokenizer, Vocabulary, load_vocab, save_vocab, train_bpe
from urducorpus.tokeval import compare

logger = logging.getLogger(__name__)

STAGES = ('clean', 'dedup', 'train_tokenizer', 'eval_tokenizer', 'pack', 'stats', 'schedule',
          'budget', 'eval_metrics')
TIMING_FIELDS = ('seconds', 'rss_mb')
REPORT_COLUMNS = ('name', 'fertility', 'avg_token_count', 'coverage')

SCHEMA = {
    'pipeline': {
        'input': Field('path', required=True),
        'work_dir': Field('path', required=True),
        'source': Field('str', default=''),
        'category': Field('str', default='general'),
        'threads': Field('int', default=0),
        **{stage: Field('bool', default=True) for stage in STAGES},
    },
    'clean': {
        'remove_english': Field('bool', default=False),
        'noise_patterns': Field('list', default=list(DEFAULT_NOISE_PATTERNS)),
        'char_map': Field('path', default=''),
        'space_map': Field('path', default=''),
        'keep_arabic_indic_digits': Field('bool', default=False),
    },
    'dedup': {
        'threshold': Field('float', default=DEFAULT_THRESHOLD),
        'perms': Field('int', default=DEFAULT_NUM_PERMS),
        'bands': Field('int', default=DEFAULT_BANDS),
        'rows': Field('int', default=DEFAULT_ROWS),
        'shingle': Field('int', default=DEFAULT_SHINGLE),
        'seed': Field('int', default=DEFAULT_SEED),
        'exact_verify': Field('bool', default=False),
    },
    'tokenizer': {
        'vocab_size': Field('int', default=32000),
        'vocab': Field('path', default=''),
    },
    'eval_tokenizer': {
        'corpus': Field('path', default=''),
        'baselines': Field('list', default=[]),
        'repeats': Field('int', default=3),
    },
    'pack': {
        'shard_tokens': Field('int', default=DEFAULT_SHARD_TOKENS),
        'val_fraction': Field('float', default=0.0),
        'split_seed': Field('int', default=DEFAULT_SPLIT_SEED),
    },
    'schedule': {
        'plan': Field('str', default='urdulm-pretrain'),
        'points': Field('int', default=1001),
    },
    'budget': {
        'shape': Field('str', default='urdulm-100m-32k'),
        'hardware': Field('str', default='table3'),
        'measured_hours': Field('float', default=0.0),
    },
    'eval_metrics': {
        'task': Field('str', default=''),
        'gold': Field('path', default=''),
        'predictions': Field('list', default=[]),
        'runs': Field('int', default=DEFAULT_RUNS),
    },
}


@dataclass
class PipelineConfig:
    path: str
    values: dict
    sha256: str

    def section(self, name):
        return self.values[name]

    def enabled(self, stage):
        return self.values['pipeline'][stage]

    def resolve(self, value):
        """Paths in the config are relative to the config file"""
        if not value or os.path.isabs(value):
            return value
        return os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(self.path)), value))


def _cross_checks(values):
    diagnostics = []
    p = values['pipeline']
    if (p['eval_tokenizer'] or p['pack'] or p['stats']) and not (p['train_tokenizer'] or values['tokenizer']['vocab']):
        diagnostics.append(Diagnostic(0, "tokenizer stages need train_tokenizer enabled or [tokenizer] vocab set"))
    if p['eval_metrics']:
        em = values['eval_metrics']
        if not em['task'] or not em['gold']:
            diagnostics.append(Diagnostic(0, "eval_metrics needs [eval_metrics] task and gold"))
        else:
            try:
                task_kind(em['task'])
            except CurationError as e:
                diagnostics.append(Diagnostic(0, str(e)))
        if em['runs'] < 1:
            diagnostics.append(Diagnostic(0, f"[eval_metrics] runs must be at least 1, got {em['runs']}"))
    return diagnostics


def validate_config(path):
    """Every problem in a pipeline config file; empty when the file is valid"""
    text = read_text(path)
    entries, diagnostics = parse_entries(text, allow_sections=True)
    values, more = validate(entries, SCHEMA)
    diagnostics.extend(more)
    if not more:
        diagnostics.extend(_cross_checks(values))
    return diagnostics


def load_pipeline_config(path):
    diagnostics = validate_config(path)
    if diagnostics:
        raise ConfigValidationError(path, diagnostics)
    entries, _ = parse_entries(read_text(path), allow_sections=True)
    values, _ = validate(entries, SCHEMA)
    return PipelineConfig(path, values, sha256_file(path))


@dataclass
class StageRecord:
    name: str
    status: str = 'skipped'
    seconds: float = 0.0
    rss_mb: float = 0.0
    counts: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    error: str = ''


@dataclass
class RunManifest:
    tool_version: str
    config_sha256: str
    status: str = 'running'
    stages: list = field(default_factory=list)
    throughput: dict = field(default_factory=dict)

    def stage(self, name):
        for record in self.stages:
            if record.name == name:
                return record
        raise KeyError(name)

    def to_dict(self):
        """The reproducible part of the run: timings, memory and throughput are left out"""
        stages = [{k: v for k, v in asdict(s).items() if k not in TIMING_FIELDS} for s in self.stages]
        return {
            'tool_version': self.tool_version,
            'config_sha256': self.config_sha256,
            'status': self.status,
            'stages': stages,
        }

    def timings(self):
        return {
            'stages': {s.name: {f: getattr(s, f) for f in TIMING_FIELDS} for s in self.stages if s.status != 'skipped'},
            'tokens_per_second': dict(self.throughput),
        }

    def write(self, path):
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + '\n')

    def write_timings(self, path):
        atomic_write_text(path, json.dumps(self.timings(), indent=2, ensure_ascii=False) + '\n')


def _named_preset(cls, source, presets, config):
    if source in presets:
        return presets[source]
    return load_dataclass(cls, config.resolve(source), presets)


class Pipeline:
    def __init__(self, config, threads=1, progress=False):
        self.config = config
        threads_override = config.section('pipeline')['threads']
        self.threads = threads_override if threads_override > 0 else threads
        self.progress = progress
        self.work_dir = config.resolve(config.section('pipeline')['work_dir'])
        self.manifest = RunManifest(__version__, config.sha256,
                                    stages=[StageRecord(name) for name in STAGES])
        self.documents = []
        self.vocab = None
        self.tokenizer = None
        self.plan = None

    def path(self, *parts):
        return os.path.join(self.work_dir, *parts)

    def check_paths(self):
        """Fail with an io error before any stage runs"""
        c = self.config
        required = [c.section('pipeline')['input']]
        if c.enabled('clean'):
            required += [c.section('clean')['char_map'], c.section('clean')['space_map']]
        if c.section('tokenizer')['vocab'] and not c.enabled('train_tokenizer'):
            required.append(c.section('tokenizer')['vocab'])
        if c.enabled('eval_tokenizer'):
            required += [c.section('eval_tokenizer')['corpus']] + c.section('eval_tokenizer')['baselines']
        if c.enabled('eval_metrics'):
            required += [c.section('eval_metrics')['gold']] + c.section('eval_metrics')['predictions']
        for value in required:
            if value and not os.path.exists(c.resolve(value)):
                raise InputError(f"config references a missing path: {value}")

    def _artifact(self, record, path):
        record.artifacts[os.path.relpath(path, self.work_dir).replace(os.sep, '/')] = sha256_file(path)

    def run(self):
        self.check_paths()
        os.makedirs(self.work_dir, exist_ok=True)
        manifest_path = self.path('manifest.json')
        timings_path = self.path('timings.json')
        source = self.config.section('pipeline')
        self.documents = list(read_text_documents(self.config.resolve(source['input']),
                                                  source['source'] or None, source['category']))
        logger.info(f"Loaded {len(self.documents)} documents")
        process = psutil.Process()
        for name in STAGES:
            record = self.manifest.stage(name)
            if not self.config.enabled(name):
                logger.info(f"Stage {name}: skipped")
                continue
            logger.info(f"Stage {name}: starting")
            start = time.perf_counter()
            try:
                getattr(self, f"stage_{name}")(record)
            except CurationError as e:
                record.status = 'failed'
                record.error = str(e)
                record.seconds = round(time.perf_counter() - start, 3)
                self.manifest.status = 'failed'
                logger.error(f"Stage {name} failed: {str(e)}")
                self.manifest.write(manifest_path)
                self.manifest.write_timings(timings_path)
                raise StageFailed(name, e) from e
            record.status = 'ok'
            record.seconds = round(time.perf_counter() - start, 3)
            record.rss_mb = round(process.memory_info().rss / (1024 * 1024), 1)
            logger.info(f"Stage {name}: done in {record.seconds:.2f}s")
        self.manifest.status = 'ok'
        self.manifest.write(manifest_path)
        self.manifest.write_timings(timings_path)
        return self.manifest

    def _records(self):
        return [CorpusRecord(d.text, d.source, d.category) for d in self.documents]

    def _require_tokenizer(self):
        if self.tokenizer is None:
            vocab_path = self.config.resolve(self.config.section('tokenizer')['vocab'])
            self.vocab = load_vocab(vocab_path)
            self.tokenizer = Tokenizer(self.vocab)
        return self.tokenizer

    def stage_clean(self, record):
        c = self.config.section('clean')
        clean_config = CleanConfig(
            remove_english=c['remove_english'],
            noise_patterns=tuple(c['noise_patterns']),
            char_map=load_char_map(self.config.resolve(c['char_map'])) if c['char_map'] else None,
            word_space_map=load_word_space_map(self.config.resolve(c['space_map'])) if c['space_map'] else None,
            map_arabic_indic_digits=not c['keep_arabic_indic_digits'],
        )
        self.documents, report = clean_corpus(self.documents, clean_config, self.threads)
        record.counts = report.to_dict()
        out = self.path('cleaned.csv')
        write_csv(out, self._records())
        self._artifact(record, out)
        report_path = self.path('clean_report.csv')
        atomic_write_text(report_path, csv_text(('key', 'value'), sorted(report.to_dict().items())))
        self._artifact(record, report_path)

    def stage_dedup(self, record):
        d = self.config.section('dedup')
        deduplicator = Deduplicator(d['threshold'], d['perms'], d['bands'], d['rows'], d['shingle'],
                                    seed=d['seed'], exact_verify=d['exact_verify'], threads=self.threads)
        kept = deduplicator.run(doc.text for doc in self.documents)
        self.documents = [self.documents[i] for i in kept]
        record.counts = deduplicator.stats.to_dict()
        for name, writer, data in (('deduped.csv', write_csv, self._records()),
                                   ('dedup_decisions.csv', write_decisions, deduplicator.decisions),
                                   ('dedup_borderline.csv', write_borderline, deduplicator.borderline_pairs)):
            writer(self.path(name), data)
            self._artifact(record, self.path(name))

    def stage_train_tokenizer(self, record):
        size = self.config.section('tokenizer')['vocab_size']
        self.vocab = train_bpe((d.text for d in self.documents), size, threads=self.threads,
                               progress=self.progress)
        self.tokenizer = Tokenizer(self.vocab)
        out = self.path('vocab.txt')
        save_vocab(self.vocab, out)
        record.counts = {'vocab_size': self.vocab.vocab_size, 'merges': len(self.vocab.merges)}
        self._artifact(record, out)

    def stage_eval_tokenizer(self, record):
        e = self.config.section('eval_tokenizer')
        tokenizer = self._require_tokenizer()
        if e['corpus']:
            docs = [d.text for d in read_text_documents(self.config.resolve(e['corpus']))]
        else:
            docs = [d.text for d in self.documents]
        candidates = [(tokenizer.name, tokenizer)]
        for baseline in e['baselines']:
            path = self.config.resolve(baseline)
            name = os.path.splitext(os.path.basename(path))[0]
            candidates.append((name, Tokenizer.from_file(path, name=name)))
        candidates.append(('bytes-256', Tokenizer(Vocabulary.byte_level(), name='bytes-256')))
        report = compare(candidates, docs, e['repeats'])
        report_path = self.path('tokenizer_report.csv')
        rows = report.rows()
        atomic_write_text(report_path, csv_text(REPORT_COLUMNS, [tuple(r[h] for h in REPORT_COLUMNS) for r in rows]))
        self.manifest.throughput = {r['name']: r['tokens_per_second'] for r in rows}
        bars = TokenCountBars().update(report)
        bars.write(self.path('fig1.csv'))
        record.counts = {s.name: s.total_tokens for s in report.stats}
        self._artifact(record, report_path)
        self._artifact(record, self.path('fig1.csv'))

    def stage_pack(self, record):
        p = self.config.section('pack')
        tokenizer = self._require_tokenizer()
        shards = pack(self._records(), tokenizer, p['shard_tokens'], self.threads, self.progress)
        paths = write_shards(shards, self.path('shards'))
        train, val = split(paths, SplitSpec(p['val_fraction'], p['split_seed']))
        rows = [(os.path.basename(x), 'train') for x in train] + [(os.path.basename(x), 'val') for x in val]
        split_path = self.path('split.csv')
        atomic_write_text(split_path, csv_text(('shard', 'split'), sorted(rows)))
        record.counts = {
            'documents': len(self.documents),
            'shards': len(shards),
            'tokens': sum(s.token_count for s in shards),
            'train_shards': len(train),
            'val_shards': len(val),
        }
        for path in paths + [split_path]:
            self._artifact(record, path)

    def stage_stats(self, record):
        tokenizer = self._require_tokenizer()
        stats = corpus_stats(self._records(), tokenizer)
        write_stats(self.path('stats.csv'), stats)
        CategoryBreakdown().update(stats).write(self.path('categories.csv'))
        record.counts = stats.to_dict()
        self._artifact(record, self.path('stats.csv'))
        self._artifact(record, self.path('categories.csv'))

    def _plan(self):
        if self.plan is None:
            self.plan = _named_preset(TrainPlan, self.config.section('schedule')['plan'], PLAN_PRESETS,
                                      self.config)
        return self.plan

    def stage_schedule(self, record):
        s = self.config.section('schedule')
        curve = LearningRateCurve().update(lr_curve(self._plan(), s['points']))
        curve.write(self.path('lr_curve.csv'))
        record.counts = {'points': len(curve.rows)}
        self._artifact(record, self.path('lr_curve.csv'))

    def stage_budget(self, record):
        b = self.config.section('budget')
        shape = _named_preset(ModelShape, b['shape'], MODEL_PRESETS, self.config)
        hardware = _named_preset(HardwareProfile, b['hardware'], HARDWARE_PRESETS, self.config)
        hours = b['measured_hours'] or None
        rows = training_summary(shape, self._plan(), hardware, hours)
        out = self.path('budget.csv')
        atomic_write_text(out, csv_text(('item', 'value'), rows))
        record.counts = {'rows': len(rows)}
        self._artifact(record, out)

    def stage_eval_metrics(self, record):
        em = self.config.section('eval_metrics')
        kind = task_kind(em['task'])
        examples = read_task_file(kind, self.config.resolve(em['gold']))
        score = evaluate_run(kind, examples, [self.config.resolve(p) for p in em['predictions']],
                             em['runs'])
        out = self.path('scores.csv')
        write_scores(out, kind, score)
        record.counts = {'metric': score.metric, 'mean': round(score.value, 6), 'runs': score.runs}
        self._artifact(record, out)


def run_pipeline(config, threads=1, progress=False):
    """Run every enabled stage; returns the RunManifest"""
    if isinstance(config, str):
        config = load_pipeline_config(config)
    return Pipeline(config, threads, progress).run()
