"""Deterministic synthetic Urdu text shared by the test modules."""

import os
import random

URDU_WORDS = [
    'پاکستان', 'اردو', 'زبان', 'کتاب', 'لوگ', 'شہر', 'دن', 'رات', 'پانی', 'گھر',
    'سکول', 'استاد', 'طالب', 'علم', 'حکومت', 'ملک', 'دنیا', 'وقت', 'سال', 'کام',
    'بات', 'خبر', 'اخبار', 'لاہور', 'کراچی', 'اسلام', 'آباد', 'دریا', 'پہاڑ', 'موسم',
    'بارش', 'سڑک', 'گاڑی', 'بازار', 'کھانا', 'چائے', 'دوست', 'بچے', 'عورت', 'مرد',
    'کھیل', 'کرکٹ', 'ٹیم', 'میچ', 'فلم', 'گانا', 'شاعر', 'غزل', 'نظم', 'تاریخ',
    'ہے', 'ہیں', 'تھا', 'تھے', 'کے', 'کی', 'کا', 'میں', 'سے', 'پر',
    'اور', 'یہ', 'وہ', 'نے', 'کو', 'بھی', 'نہیں', 'بہت', 'اچھا', 'نیا',
]

FULL_STOP = '۔'
URDU_COMMA = '،'
URDU_QUESTION = '؟'
URDU_DIGITS = ''.join(chr(cp) for cp in range(0x06F0, 0x06FA))

NOISE_PIECES = [
    'https://example.com/news?id=12', 'www.urdu-news.pk', 'info@example.org', '+92 300 1234567',
    'Breaking news', 'COVID19', '2024', '\u200b', '\u00a0', '()', '( )', URDU_QUESTION * 3,
    '\u0643', '\u064a', '\u0647', '\ufeff', '★', '  ', '\t', '\n',
]


def urdu_sentence(rng, min_words=4, max_words=12):
    words = [rng.choice(URDU_WORDS) for _ in range(rng.randint(min_words, max_words))]
    if rng.random() < 0.2:
        words.insert(rng.randrange(len(words)), ''.join(rng.choice(URDU_DIGITS) for _ in range(rng.randint(1, 4))))
    if rng.random() < 0.2:
        words[rng.randrange(len(words))] += URDU_COMMA
    return ' '.join(words) + rng.choice([FULL_STOP, FULL_STOP, FULL_STOP, URDU_QUESTION])


def urdu_document(rng, min_sentences=2, max_sentences=8):
    return ' '.join(urdu_sentence(rng) for _ in range(rng.randint(min_sentences, max_sentences)))


def synthetic_corpus(n_docs, seed=0, min_sentences=2, max_sentences=8):
    rng = random.Random(seed)
    return [urdu_document(rng, min_sentences, max_sentences) for _ in range(n_docs)]


def noisy_text(rng, pieces=12):
    """Urdu words interleaved with the kinds of noise the cleaner removes"""
    parts = []
    for _ in range(pieces):
        if rng.random() < 0.5:
            parts.append(rng.choice(URDU_WORDS))
        else:
            parts.append(rng.choice(NOISE_PIECES))
        parts.append(rng.choice([' ', '', '  ', '\u00a0']))
    return ''.join(parts)


def near_duplicate(rng, text, edits=1):
    """Copy of ``text`` with a few words replaced"""
    words = text.split()
    for _ in range(edits):
        words[rng.randrange(len(words))] = rng.choice(URDU_WORDS)
    return ' '.join(words)


def write_corpus_csv(path, docs, category='news', source='fixture'):
    from urducorpus.corpus import CorpusRecord, write_csv
    write_csv(path, [CorpusRecord(d, source, category) for d in docs])
    return path


def write_text_lines(path, docs):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for d in docs:
            f.write(d + '\n')
    return path


PIPELINE_SECTIONS = {
    'pipeline': {'input': 'corpus.txt', 'work_dir': 'work', 'category': 'news'},
    'tokenizer': {'vocab_size': '300'},
    'eval_tokenizer': {'repeats': '3'},
    'pack': {'shard_tokens': '2000', 'val_fraction': '0.2'},
    'schedule': {'points': '11'},
    'budget': {'measured_hours': '66'},
    'eval_metrics': {'task': 'sc', 'gold': 'sc.csv',
                     'predictions': 'run1.txt, run2.txt, run3.txt, run4.txt, run5.txt'},
}

SC_LABELS = ['مثبت', 'منفی']


def write_pipeline_workspace(root, overrides=None, n_docs=60, seed=90):
    """Corpus, SC task files and a pipeline config under ``root``; returns the config path"""
    rng = random.Random(seed)
    docs = synthetic_corpus(n_docs, seed=seed)
    docs += docs[:5]
    docs += ['https://example.com/only-a-link', '\u0643تاب 2024 ' + docs[6]]
    write_text_lines(os.path.join(root, 'corpus.txt'), docs)

    examples = [(urdu_sentence(rng), SC_LABELS[i % 2]) for i in range(10)]
    with open(os.path.join(root, 'sc.csv'), 'w', encoding='utf-8', newline='') as f:
        f.write('text,label\n')
        for text, label in examples:
            f.write(f'{text},{label}\n')
    for run in range(1, 6):
        predictions = [label if i < 8 else SC_LABELS[(i + 1) % 2] for i, (_, label) in enumerate(examples)]
        write_text_lines(os.path.join(root, f'run{run}.txt'), predictions)

    sections = {name: dict(values) for name, values in PIPELINE_SECTIONS.items()}
    for name, values in (overrides or {}).items():
        sections.setdefault(name, {}).update(values)
    lines = []
    for name, values in sections.items():
        lines.append(f'[{name}]')
        lines.extend(f'{key} = {value}' for key, value in values.items() if value is not None)
        lines.append('')
    path = os.path.join(root, 'pipeline.cfg')
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines))
    return path
