"""Deterministic cleaning cascade that turns raw Urdu text into corpus text.

The cascade runs in a fixed order: noise removal, digit conversion,
character normalization, word-spacing correction, Unicode cleanup. It is
re-applied until the text stops changing, so cleaning a cleaned document
is always a no-op.
"""

import concurrent.futures
import functools
import glob
import logging
import os
from collections import Counter
from dataclasses import dataclass, field

import regex

from urducorpus.config import Diagnostic
from urducorpus.errors import ConfigValidationError, EmptyAfterClean, InvalidParameter
from urducorpus.fileio import read_text

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')
DEFAULT_CHAR_MAP_PATH = os.path.join(DATA_DIR, 'char_map.tsv')
DEFAULT_WORD_SPACE_MAP_PATH = os.path.join(DATA_DIR, 'word_space.tsv')

MAX_PASSES = 8

NOISE_PATTERNS = {
    'url': regex.compile(r'(?:https?://|ftp://|www\.)\S+', regex.IGNORECASE),
    'email': regex.compile(r'[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}'),
    'phone': regex.compile(r'\+?[0-9](?:[ -]?[0-9]){6,}'),
    'stray-latin-digits': regex.compile(r'(?<=\p{Latin})[0-9]+|[0-9]+(?=\p{Latin})'),
    'latin-script': regex.compile(r'\p{Latin}+'),
    'stray-symbols': regex.compile(r'[\p{So}\p{Sk}\p{Co}\x00-\x08\x0b\x0c\x0e-\x1f\x7f]+'),
}

DEFAULT_NOISE_PATTERNS = ('url', 'email', 'phone', 'stray-latin-digits', 'stray-symbols')

ASCII_DIGITS = '0123456789'
URDU_DIGITS = ''.join(chr(cp) for cp in range(0x06F0, 0x06FA))
ARABIC_INDIC_DIGITS = ''.join(chr(cp) for cp in range(0x0660, 0x066A))

INVISIBLE = regex.compile("[\u200b\u200e\u200f\u2060\ufeff]")
NBSP = "\u00a0"
EMPTY_PARENS = regex.compile(r'\(\s*\)')
REPEATED_QUESTION_MARK = regex.compile('؟{2,}')
COLLAPSIBLE_SPACE = regex.compile(r'\s{2,}|[^\S ]')

_CODEPOINT = regex.compile(r'U\+([0-9A-Fa-f]{4,6})')


def default_digit_map():
    return dict(zip(ASCII_DIGITS, URDU_DIGITS))


@dataclass
class RawDocument:
    text: str
    source: str
    category: str


@dataclass
class CleanConfig:
    remove_english: bool = False
    noise_patterns: tuple = DEFAULT_NOISE_PATTERNS
    char_map: dict = None
    word_space_map: dict = None
    digit_map: dict = field(default_factory=default_digit_map)
    map_arabic_indic_digits: bool = True

    def __post_init__(self):
        patterns = list(self.noise_patterns)
        unknown = [p for p in patterns if p not in NOISE_PATTERNS]
        if unknown:
            raise InvalidParameter(f"unknown noise pattern(s): {', '.join(unknown)}")
        if self.remove_english:
            if 'latin-script' not in patterns:
                patterns.append('latin-script')
        elif 'latin-script' in patterns:
            patterns.remove('latin-script')
        self.noise_patterns = tuple(patterns)
        if sorted(self.digit_map) != list(ASCII_DIGITS) or len(set(self.digit_map.values())) != 10:
            raise InvalidParameter("digit_map must map each of 0-9 to a distinct digit")
        if self.char_map is None:
            self.char_map = default_char_map()
        if self.word_space_map is None:
            self.word_space_map = default_word_space_map()

    def digit_table(self):
        table = {ord(k): v for k, v in self.digit_map.items()}
        if self.map_arabic_indic_digits:
            for arabic, urdu in zip(ARABIC_INDIC_DIGITS, URDU_DIGITS):
                table[ord(arabic)] = urdu
        return table


@dataclass
class CleanReport:
    counts: Counter = field(default_factory=Counter)
    input_codepoints: int = 0
    output_codepoints: int = 0
    documents_in: int = 0
    documents_emptied: int = 0

    @property
    def documents_out(self):
        return self.documents_in - self.documents_emptied

    def merge(self, other):
        self.counts.update(other.counts)
        self.input_codepoints += other.input_codepoints
        self.output_codepoints += other.output_codepoints
        self.documents_in += other.documents_in
        self.documents_emptied += other.documents_emptied
        return self

    def to_dict(self):
        """Flat dictionary for CSV/JSON reports"""
        result = {
            'documents_in': self.documents_in,
            'documents_out': self.documents_out,
            'documents_emptied': self.documents_emptied,
            'input_codepoints': self.input_codepoints,
            'output_codepoints': self.output_codepoints,
        }
        for rule in sorted(self.counts):
            result[f'rule.{rule}'] = self.counts[rule]
        return result


def _parse_map_side(raw):
    parts = raw.split()
    if parts and all(_CODEPOINT.fullmatch(p) for p in parts):
        return ''.join(chr(int(_CODEPOINT.fullmatch(p).group(1), 16)) for p in parts)
    return raw


def _load_map(path, single_codepoint_keys):
    text = read_text(path)
    mapping = {}
    lines = {}
    diagnostics = []
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith('#'):
            continue
        if '\t' not in raw:
            diagnostics.append(Diagnostic(number, "expected 'from<TAB>to'"))
            continue
        left, right = raw.split('\t', 1)
        key = _parse_map_side(left.strip())
        value = _parse_map_side(right.strip())
        if not key:
            diagnostics.append(Diagnostic(number, "empty key"))
            continue
        if single_codepoint_keys and len(key) != 1:
            diagnostics.append(Diagnostic(number, f"key must be a single codepoint, got {len(key)}"))
            continue
        if key in mapping:
            diagnostics.append(Diagnostic(number, f"duplicate key (first defined on line {lines[key]})"))
            continue
        mapping[key] = value
        lines[key] = number
    for key, value in mapping.items():
        clashes = [k for k in mapping if k in value]
        if clashes:
            diagnostics.append(Diagnostic(
                lines[key], "value contains another key, so re-application would change it"))
    if diagnostics:
        raise ConfigValidationError(path, diagnostics)
    logger.debug(f"Loaded {len(mapping)} entries from {path}")
    return mapping


def load_char_map(path):
    return _load_map(path, single_codepoint_keys=True)


def load_word_space_map(path):
    return _load_map(path, single_codepoint_keys=False)


@functools.lru_cache(maxsize=1)
def _default_char_map():
    return load_char_map(DEFAULT_CHAR_MAP_PATH)


@functools.lru_cache(maxsize=1)
def _default_word_space_map():
    return load_word_space_map(DEFAULT_WORD_SPACE_MAP_PATH)


def default_char_map():
    return dict(_default_char_map())


def default_word_space_map():
    return dict(_default_word_space_map())


def remove_noise(text, config, counts=None):
    """Delete every match of the enabled noise patterns"""
    for _ in range(MAX_PASSES):
        changed = False
        for name in config.noise_patterns:
            text, n = NOISE_PATTERNS[name].subn('', text)
            if n:
                changed = True
                if counts is not None:
                    counts[f'noise.{name}'] += n
        if not changed:
            break
    return text


def convert_digits(text, config=None, counts=None):
    """Map ASCII (and optionally Arabic-Indic) digits to Extended Arabic-Indic digits"""
    table = (config or _DIGIT_ONLY_CONFIG).digit_table()
    if counts is not None:
        converted = sum(1 for ch in text if ord(ch) in table)
        if converted:
            counts['digits'] += converted
    return text.translate(table)


def normalize_characters(text, char_map, counts=None):
    table = {ord(k): v for k, v in char_map.items()}
    if counts is not None:
        mapped = sum(1 for ch in text if ch in char_map)
        if mapped:
            counts['char_map'] += mapped
    return text.translate(table)


@functools.lru_cache(maxsize=16)
def _phrase_pattern(keys):
    return regex.compile('|'.join(regex.escape(k) for k in keys))


def fix_word_spacing(text, word_space_map, counts=None):
    """Replace misjoined phrases; overlaps go to the longest, then leftmost match"""
    if not word_space_map or not text:
        return text
    keys = tuple(sorted(word_space_map, key=lambda k: (-len(k), k)))
    spans = [(m.start(), m.end()) for m in _phrase_pattern(keys).finditer(text, overlapped=True)]
    if not spans:
        return text
    spans.sort(key=lambda s: (s[0] - s[1], s[0]))
    chosen = []
    for start, end in spans:
        if any(start < e and s < end for s, e in chosen):
            continue
        chosen.append((start, end))
    chosen.sort()
    pieces = []
    position = 0
    for start, end in chosen:
        pieces.append(text[position:start])
        pieces.append(word_space_map[text[start:end]])
        position = end
    pieces.append(text[position:])
    if counts is not None:
        counts['word_space'] += len(chosen)
    return ''.join(pieces)


def cleanup_unicode(text, counts=None):
    counts = counts if counts is not None else Counter()
    text, n = INVISIBLE.subn('', text)
    counts['invisible'] += n
    nbsp = text.count(NBSP)
    if nbsp:
        text = text.replace(NBSP, ' ')
        counts['nbsp'] += nbsp
    while True:
        text, n = EMPTY_PARENS.subn('', text)
        if not n:
            break
        counts['empty_parens'] += n
    text, n = REPEATED_QUESTION_MARK.subn('؟', text)
    counts['repeated_question_marks'] += n
    text, n = COLLAPSIBLE_SPACE.subn(' ', text)
    counts['whitespace'] += n
    stripped = text.strip()
    if len(stripped) != len(text):
        counts['trimmed'] += 1
    # drop zero entries so a clean pass reports nothing
    for rule in [r for r, v in counts.items() if v == 0]:
        del counts[rule]
    return stripped


def _cascade(text, config, counts):
    text = remove_noise(text, config, counts)
    text = convert_digits(text, config, counts)
    text = normalize_characters(text, config.char_map, counts)
    text = fix_word_spacing(text, config.word_space_map, counts)
    return cleanup_unicode(text, counts)


def clean_text(text, config=None, counts=None):
    """Run the cascade to a fixed point and return the cleaned text"""
    config = config or CleanConfig()
    counts = counts if counts is not None else Counter()
    for _ in range(MAX_PASSES):
        cleaned = _cascade(text, config, counts)
        if cleaned == text:
            break
        text = cleaned
    else:
        logger.warning(f"Cleaning did not settle within the pass limit of {MAX_PASSES}")
    return text


def clean_document(doc, config=None):
    """Clean one document, returning (document, report)"""
    report = CleanReport(documents_in=1, input_codepoints=len(doc.text))
    text = clean_text(doc.text, config, report.counts)
    report.output_codepoints = len(text)
    if not text:
        report.documents_emptied = 1
        raise EmptyAfterClean(f"document from '{doc.source}' is empty after cleaning", report=report)
    return RawDocument(text, doc.source, doc.category), report


def clean_corpus(docs, config=None, threads=1):
    """Clean many documents in parallel; output order equals input order"""
    config = config or CleanConfig()
    total = CleanReport()

    def clean_one(doc):
        try:
            return clean_document(doc, config)
        except EmptyAfterClean as e:
            logger.debug(f"Dropped document: {str(e)}")
            return None, e.report

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(clean_one, docs))

    cleaned = []
    for doc, report in results:
        total.merge(report)
        if doc is not None:
            cleaned.append(doc)
    logger.info(f"Cleaned {total.documents_in} documents, kept {total.documents_out}, "
                f"emptied {total.documents_emptied}")
    return cleaned, total


def read_text_documents(path, source=None, category='general'):
    """Load documents from a CSV file, a directory of .txt files, or a text file"""
    if not category:
        raise InvalidParameter("category must not be empty")
    if os.path.isdir(path):
        for file_path in sorted(glob.glob(os.path.join(path, '*.txt'))):
            stem = os.path.splitext(os.path.basename(file_path))[0]
            yield RawDocument(read_text(file_path), source or stem, category)
        return
    if path.lower().endswith('.csv'):
        from urducorpus.corpus import read_csv
        for record in read_csv(path):
            yield RawDocument(record.data, record.source or 'unknown', record.category or category)
        return
    stem = os.path.splitext(os.path.basename(path))[0]
    for line in read_text(path).splitlines():
        if line.strip():
            yield RawDocument(line, source or stem, category)


_DIGIT_ONLY_CONFIG = CleanConfig(char_map={}, word_space_map={})
