"""Command-line front end. Logs go to standard error; data goes to files or standard output."""

import glob
import json
import logging
import os
import sys

import click
import psutil

from urducorpus import __version__, configure_logging
from urducorpus.budget import (HARDWARE_PRESETS, MODEL_PRESETS, PLAN_PRESETS, HardwareProfile,
                               ModelShape, TrainPlan, estimate_finetune, estimate_inference, lr_at,
                               lr_curve, training_summary)
from urducorpus.components import CategoryBreakdown, LearningRateCurve, TokenCountBars
from urducorpus.config import load_dataclass
from urducorpus.corpus import (DEFAULT_SHARD_TOKENS, DEFAULT_SPLIT_SEED, CorpusRecord, SplitSpec,
                               corpus_stats, csv_text, pack, read_csv, split, write_csv, write_shards,
                               write_stats)
from urducorpus.dedup import (DEFAULT_BANDS, DEFAULT_NUM_PERMS, DEFAULT_SEED, DEFAULT_SHINGLE,
                              DEFAULT_THRESHOLD, Deduplicator, write_borderline, write_decisions)
from urducorpus.errors import CurationError, InvalidParameter
from urducorpus.evalmetrics import (DEFAULT_RUNS, DEFAULT_SAMPLE_SEED, DEFAULT_SHOTS, TASK_ORDER,
                                    PromptTemplate, build_prompt, evaluate_run, format_value,
                                    gold_slot, read_task_file, sample_tasks, task_kind, write_scores)
from urducorpus.fileio import atomic_write_text, read_text
from urducorpus.normalize import (DEFAULT_NOISE_PATTERNS, NOISE_PATTERNS, CleanConfig, clean_corpus,
                                  load_char_map, load_word_space_map, read_text_documents)
from urducorpus.pipeline import load_pipeline_config, run_pipeline, validate_config
from urducorpus.tokenizer import Tokenizer, Vocabulary, save_vocab, train_bpe
from urducorpus.tokeval import DEFAULT_REPEATS, compare, vocab_sweep

logger = logging.getLogger(__name__)

PROG = 'urducorpus'
LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


def default_threads():
    return psutil.cpu_count(logical=False) or 1


class CurationGroup(click.Group):
    """Maps package errors to their exit codes; usage errors exit 1"""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = 1
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = 1
            raise
        except (click.exceptions.Exit, click.Abort, click.ClickException):
            raise
        except CurationError as e:
            logger.error(f"{type(e).__name__}: {str(e)}")
            ctx.exit(e.exit_code)
        except Exception as e:
            logger.error(f"Unexpected error: {str(e)}")
            ctx.exit(1)


@click.group(cls=CurationGroup)
@click.version_option(__version__, prog_name=PROG)
@click.option('--log-level', default='INFO', show_default=True, type=click.Choice(LOG_LEVELS),
              help='Logging level for messages on standard error')
@click.option('--threads', type=int, default=None,
              help='Worker threads for every stage [default: physical cores]')
@click.option('--progress', is_flag=True, default=False, help='Show progress counters on standard error')
@click.pass_context
def cli(ctx, log_level, threads, progress):
    """Urdu corpus curation, tokenizer training and evaluation tools."""
    configure_logging(log_level)
    if threads is not None and threads < 1:
        raise click.BadParameter('must be at least 1', param_hint='--threads')
    ctx.ensure_object(dict)
    ctx.obj['threads'] = threads or default_threads()
    ctx.obj['progress'] = progress


def command(name):
    """Register a subcommand that also answers --version"""
    def decorator(f):
        f = click.version_option(__version__, prog_name=PROG)(f)
        return cli.command(name)(f)
    return decorator


def _records_in(path, strict=False):
    if path.lower().endswith('.csv'):
        return list(read_csv(path, strict=strict))
    return list(read_text_documents(path))


def _texts_in(path):
    return [_text(r) for r in _records_in(path)]


# clean ----------------------------------------------------------------------

@command('clean')
@click.option('--in', 'in_path', required=True, type=click.Path(), help='CSV, text file or directory of .txt')
@click.option('--out', 'out_path', required=True, type=click.Path(), help='Cleaned corpus CSV')
@click.option('--source', default=None, help='Source label for text input')
@click.option('--category', default='general', show_default=True, help='Category label for text input')
@click.option('--remove-english', is_flag=True, default=False)
@click.option('--noise', 'noise', multiple=True, type=click.Choice(sorted(NOISE_PATTERNS)),
              help='Noise rule to apply (repeatable) [default: all but latin-script]')
@click.option('--char-map', type=click.Path(), default=None)
@click.option('--space-map', type=click.Path(), default=None)
@click.option('--keep-arabic-indic-digits', is_flag=True, default=False)
@click.option('--report', type=click.Path(), default=None, help='Write the cleaning report CSV here')
@click.pass_context
def clean_command(ctx, in_path, out_path, source, category, remove_english, noise, char_map, space_map,
                  keep_arabic_indic_digits, report):
    """Normalize and denoise Urdu text."""
    docs = list(read_text_documents(in_path, source, category))
    config = CleanConfig(
        remove_english=remove_english,
        noise_patterns=tuple(noise) or DEFAULT_NOISE_PATTERNS,
        char_map=load_char_map(char_map) if char_map else None,
        word_space_map=load_word_space_map(space_map) if space_map else None,
        map_arabic_indic_digits=not keep_arabic_indic_digits,
    )
    cleaned, clean_report = clean_corpus(docs, config, ctx.obj['threads'])
    write_csv(out_path, [_as_record(d) for d in cleaned])
    if report:
        atomic_write_text(report, csv_text(('key', 'value'), sorted(clean_report.to_dict().items())))


def _as_record(doc):
    return CorpusRecord(doc.text, doc.source, doc.category)


# dedup ----------------------------------------------------------------------

@command('dedup')
@click.option('--in', 'in_path', required=True, type=click.Path())
@click.option('--out', 'out_path', required=True, type=click.Path())
@click.option('--threshold', default=DEFAULT_THRESHOLD, show_default=True, type=float)
@click.option('--perms', default=DEFAULT_NUM_PERMS, show_default=True, type=int)
@click.option('--bands', default=DEFAULT_BANDS, show_default=True, type=int)
@click.option('--rows', default=None, type=int, help='Rows per band [default: perms / bands]')
@click.option('--shingle', default=DEFAULT_SHINGLE, show_default=True, type=int)
@click.option('--seed', default=DEFAULT_SEED, show_default=True, type=int)
@click.option('--exact-verify', is_flag=True, default=False,
              help='Recompute exact Jaccard on candidate pairs before removal')
@click.option('--report', type=click.Path(), default=None, help='kept_id,removed_id,est_jaccard,linked_via CSV')
@click.option('--borderline', type=click.Path(), default=None, help='Pairs for manual review')
@click.pass_context
def dedup_command(ctx, in_path, out_path, threshold, perms, bands, rows, shingle, seed, exact_verify,
                  report, borderline):
    """Remove exact and near-duplicate documents."""
    records = _records_in(in_path)
    if rows is None:
        rows = perms // bands if bands else 0
    deduplicator = Deduplicator(threshold, perms, bands, rows, shingle, seed=seed,
                                exact_verify=exact_verify, threads=ctx.obj['threads'])
    kept = deduplicator.run(_text(r) for r in records)
    write_csv(out_path, [_record(records[i]) for i in kept])
    if report:
        write_decisions(report, deduplicator.decisions)
    if borderline:
        write_borderline(borderline, deduplicator.borderline_pairs)


def _text(record):
    return record.data if hasattr(record, 'data') else record.text


def _record(record):
    return record if hasattr(record, 'data') else _as_record(record)


# tokenizer ------------------------------------------------------------------

@command('train-tokenizer')
@click.option('--in', 'in_path', required=True, type=click.Path())
@click.option('--vocab-size', default=32000, show_default=True, type=int)
@click.option('--out', 'out_path', required=True, type=click.Path())
@click.pass_context
def train_tokenizer_command(ctx, in_path, vocab_size, out_path):
    """Train a byte-level BPE vocabulary."""
    texts = [_text(r) for r in _records_in(in_path)]
    vocab = train_bpe(texts, vocab_size, threads=ctx.obj['threads'], progress=ctx.obj['progress'])
    save_vocab(vocab, out_path)


def _read_input(in_path):
    if in_path:
        return read_text(in_path)
    return click.get_text_stream('stdin').read()


@command('encode')
@click.option('--vocab', required=True, type=click.Path())
@click.option('--in', 'in_path', default=None, type=click.Path(), help='Text file [default: stdin]')
def encode_command(vocab, in_path):
    """Print space-separated token ids."""
    tokenizer = Tokenizer.from_file(vocab)
    click.echo(' '.join(str(i) for i in tokenizer.encode(_read_input(in_path))))


@command('decode')
@click.option('--vocab', required=True, type=click.Path())
@click.option('--in', 'in_path', default=None, type=click.Path(), help='Id file [default: stdin]')
def decode_command(vocab, in_path):
    """Turn space-separated token ids back into text."""
    tokenizer = Tokenizer.from_file(vocab)
    raw = _read_input(in_path).split()
    try:
        ids = [int(x) for x in raw]
    except ValueError as e:
        raise InvalidParameter(f"token ids must be integers: {e}") from e
    click.echo(tokenizer.decode(ids), nl=False)


@command('eval-tokenizer')
@click.option('--vocab', default=None, type=click.Path(), help='Vocabulary under test')
@click.option('--baseline', 'baselines', multiple=True, type=click.Path(),
              help='Vocabulary to compare against (repeatable)')
@click.option('--corpus', required=True, type=click.Path(), help='Held-out evaluation text')
@click.option('--train', 'train_path', default=None, type=click.Path(),
              help='Train a vocabulary per --sizes entry on this corpus instead of --vocab')
@click.option('--sizes', default='10000,20000,32000', show_default=True)
@click.option('--repeats', default=DEFAULT_REPEATS, show_default=True, type=int)
@click.option('--out', 'out_path', required=True, type=click.Path())
@click.option('--plot-data', default=None, type=click.Path(), help='Token-count bar chart CSV')
@click.pass_context
def eval_tokenizer_command(ctx, vocab, baselines, corpus, train_path, sizes, repeats, out_path, plot_data):
    """Fertility, token counts, speed and coverage side by side."""
    docs = _texts_in(corpus)
    candidates = []
    if train_path:
        try:
            size_list = [int(s) for s in sizes.split(',') if s.strip()]
        except ValueError as e:
            raise InvalidParameter(f"--sizes must be comma-separated integers: {e}") from e
        results = vocab_sweep(_texts_in(train_path), docs, size_list, ctx.obj['threads'], repeats,
                              ctx.obj['progress'])
        for sweep_vocab, _ in reversed(results):
            candidates.append((f"bpe-{sweep_vocab.vocab_size}", Tokenizer(sweep_vocab)))
    elif vocab:
        tokenizer = Tokenizer.from_file(vocab)
        candidates.append((tokenizer.name, tokenizer))
    else:
        raise click.UsageError('give --vocab or --train')
    for path in baselines:
        name = os.path.splitext(os.path.basename(path))[0]
        candidates.append((name, Tokenizer.from_file(path, name=name)))
    candidates.append(('bytes-256', Tokenizer(Vocabulary.byte_level(), name='bytes-256')))

    report = compare(candidates, docs, repeats)
    header = ('name', 'fertility', 'avg_token_count', 'tokens_per_second', 'coverage')
    atomic_write_text(out_path, csv_text(header, [tuple(r[h] for h in header) for r in report.rows()]))
    if plot_data:
        bars = TokenCountBars().update(report)
        bars.write(plot_data)
        logger.info(bars.improvement_label())


# corpus ---------------------------------------------------------------------

@command('pack')
@click.option('--in', 'in_path', required=True, type=click.Path())
@click.option('--vocab', required=True, type=click.Path())
@click.option('--out-dir', required=True, type=click.Path())
@click.option('--shard-tokens', default=DEFAULT_SHARD_TOKENS, show_default=True, type=int)
@click.option('--prefix', default='shard', show_default=True)
@click.pass_context
def pack_command(ctx, in_path, vocab, out_dir, shard_tokens, prefix):
    """Encode a corpus into EOT-separated binary shards."""
    tokenizer = Tokenizer.from_file(vocab)
    records = [_record(r) for r in _records_in(in_path)]
    shards = pack(records, tokenizer, shard_tokens, ctx.obj['threads'], ctx.obj['progress'])
    write_shards(shards, out_dir, prefix)


@command('stats')
@click.option('--in', 'in_path', required=True, type=click.Path())
@click.option('--vocab', default=None, type=click.Path())
@click.option('--out', 'out_path', required=True, type=click.Path())
@click.option('--plot-data', default=None, type=click.Path(), help='Category breakdown CSV')
def stats_command(in_path, vocab, out_path, plot_data):
    """Rows, bytes and tokens per category."""
    tokenizer = Tokenizer.from_file(vocab) if vocab else None
    stats = corpus_stats([_record(r) for r in _records_in(in_path)], tokenizer)
    write_stats(out_path, stats)
    if plot_data:
        CategoryBreakdown().update(stats).write(plot_data)
    for key, value in stats.to_dict().items():
        click.echo(f"{key}\t{value}")


@command('split')
@click.option('--shards', 'shard_dir', required=True, type=click.Path(), help='Directory of .bin shards')
@click.option('--val-fraction', default=0.0, show_default=True, type=float)
@click.option('--seed', default=DEFAULT_SPLIT_SEED, show_default=True, type=int)
@click.option('--out', 'out_path', default=None, type=click.Path(), help='shard,split CSV [default: stdout]')
def split_command(shard_dir, val_fraction, seed, out_path):
    """Assign whole shards to train and validation."""
    paths = sorted(glob.glob(os.path.join(shard_dir, '*.bin')))
    train, val = split([os.path.basename(p) for p in paths], SplitSpec(val_fraction, seed))
    rows = sorted([(name, 'train') for name in train] + [(name, 'val') for name in val])
    text = csv_text(('shard', 'split'), rows)
    if out_path:
        atomic_write_text(out_path, text)
    else:
        click.echo(text, nl=False)


# budget ---------------------------------------------------------------------

@command('schedule')
@click.option('--plan', default='urdulm-pretrain', show_default=True, help='Preset name or config file')
@click.option('--at-tokens', type=float, default=None, help='Print the learning rate at this token count')
@click.option('--dump', type=click.Choice(['csv']), default=None, help='Emit the whole curve')
@click.option('--points', default=1001, show_default=True, type=int)
@click.option('--out', 'out_path', default=None, type=click.Path(), help='Curve CSV [default: stdout]')
def schedule_command(plan, at_tokens, dump, points, out_path):
    """Warmup-plus-cosine learning-rate schedule."""
    train_plan = load_dataclass(TrainPlan, plan, PLAN_PRESETS)
    if at_tokens is None and dump is None:
        raise click.UsageError('give --at-tokens or --dump csv')
    if at_tokens is not None:
        click.echo(repr(lr_at(at_tokens, train_plan)))
    if dump:
        curve = LearningRateCurve().update(lr_curve(train_plan, points))
        if out_path:
            curve.write(out_path)
        else:
            click.echo(curve.to_text(), nl=False)


@command('budget')
@click.option('--shape', default='urdulm-100m-32k', show_default=True, help='Preset name or config file')
@click.option('--plan', default='urdulm-pretrain', show_default=True, help='Preset name or config file')
@click.option('--hw', default='table3', show_default=True, help='Preset name or config file')
@click.option('--measured-hours', type=float, default=None, help='Use a measured run time instead of the bound')
@click.option('--finetune-tokens', type=float, default=None, help='Also estimate fine-tuning on this many tokens')
@click.option('--prompt-tokens', type=int, default=None, help='Also estimate one inference pass')
@click.option('--out', 'out_path', default=None, type=click.Path(), help='item,value CSV')
def budget_command(shape, plan, hw, measured_hours, finetune_tokens, prompt_tokens, out_path):
    """Compute, time, energy, carbon and cost estimates."""
    model = load_dataclass(ModelShape, shape, MODEL_PRESETS)
    train_plan = load_dataclass(TrainPlan, plan, PLAN_PRESETS)
    profile = load_dataclass(HardwareProfile, hw, HARDWARE_PRESETS)
    rows = training_summary(model, train_plan, profile, measured_hours)
    if finetune_tokens is not None:
        ft = estimate_finetune(model, finetune_tokens, profile)
        rows += [
            ('Fine-tuning compute', f"{ft.flops / 1e15:.1f} PFLOPs"),
            ('Fine-tuning time', f"{ft.wall_hours:.2f} hours"),
            ('Fine-tuning energy', f"{ft.energy_kwh:.2f} kWh"),
            ('Fine-tuning carbon', f"{ft.co2_kg:.2f} kg CO2"),
            ('Fine-tuning cost', f"{ft.cost:.2f} {ft.currency}"),
        ]
    if prompt_tokens is not None:
        inf = estimate_inference(model, prompt_tokens, profile)
        rows += [
            ('Inference compute per prompt', f"{inf.flops / 1e12:.3f} TFLOPs"),
            ('Inference latency', f"{inf.latency_ms:.2f} ms"),
            ('Inference energy', f"{inf.energy_j:.2f} J"),
            ('Inference cost per 1k prompts', f"{inf.cost:.3f} {inf.currency}"),
        ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        click.echo(f"{label:<{width}}  {value}")
    if out_path:
        atomic_write_text(out_path, csv_text(('item', 'value'), rows))


# evaluation -----------------------------------------------------------------

@command('eval-metrics')
@click.option('--task', required=True, type=click.Choice([t.lower() for t in TASK_ORDER] + list(TASK_ORDER)))
@click.option('--gold', required=True, type=click.Path())
@click.option('--pred', 'preds', multiple=True, required=True, type=click.Path(),
              help='One prediction file per run (repeatable)')
@click.option('--runs', default=DEFAULT_RUNS, show_default=True, type=click.IntRange(min=1))
@click.option('--out', 'out_path', default=None, type=click.Path())
def eval_metrics_command(task, gold, preds, runs, out_path):
    """Score prediction files against gold answers and print the mean."""
    kind = task_kind(task)
    examples = read_task_file(kind, gold)
    score = evaluate_run(kind, examples, preds, runs)
    if out_path:
        write_scores(out_path, kind, score)
    click.echo(f"{kind}\t{score.metric}\t{format_value(score.metric, score.value)}")


@command('prompts')
@click.option('--task', required=True, type=click.Choice([t.lower() for t in TASK_ORDER] + list(TASK_ORDER)))
@click.option('--examples', 'examples_path', required=True, type=click.Path(), help='Task CSV')
@click.option('--template', default=None, type=click.Path(), help='Template file [default: bundled]')
@click.option('--shots', default=DEFAULT_SHOTS, show_default=True, type=int)
@click.option('--seed', default=DEFAULT_SAMPLE_SEED, show_default=True, type=int)
@click.option('--labels', default=None, help='Comma-separated label set for SC')
@click.option('--out', 'out_path', default=None, type=click.Path(), help='JSON lines [default: stdout]')
def prompts_command(task, examples_path, template, shots, seed, labels, out_path):
    """Build few-shot prompts as JSON lines of {id, prompt, gold}."""
    kind = task_kind(task)
    prompt_template = PromptTemplate.load(kind, template) if template else PromptTemplate.default(kind)
    label_set = tuple(x.strip() for x in labels.split(',')) if labels else None
    examples = read_task_file(kind, examples_path)
    tasks = sample_tasks(examples, kind, shots, seed, label_set)
    lines = []
    for i, t in enumerate(tasks):
        entry = {'id': i, 'prompt': build_prompt(t, prompt_template), 'gold': t.query[gold_slot(kind)]}
        lines.append(json.dumps(entry, ensure_ascii=False))
    text = ''.join(line + '\n' for line in lines)
    if out_path:
        atomic_write_text(out_path, text)
    else:
        click.echo(text, nl=False)


# pipeline -------------------------------------------------------------------

@command('pipeline')
@click.argument('config_path', type=click.Path())
@click.pass_context
def pipeline_command(ctx, config_path):
    """Run every enabled stage from a pipeline config."""
    config = load_pipeline_config(config_path)
    manifest = run_pipeline(config, ctx.obj['threads'], ctx.obj['progress'])
    for record in manifest.stages:
        click.echo(f"{record.name}\t{record.status}\t{record.seconds:.2f}s")


@command('validate-config')
@click.argument('config_path', type=click.Path())
@click.pass_context
def validate_config_command(ctx, config_path):
    """List every problem in a pipeline config; exit 1 when there are any."""
    diagnostics = validate_config(config_path)
    for d in diagnostics:
        click.echo(f"{config_path}: {d}")
    if diagnostics:
        ctx.exit(1)
    click.echo(f"{config_path}: ok")


def main(argv=None):
    cli.main(args=argv, prog_name=PROG)


if __name__ == '__main__':
    main(sys.argv[1:])
