"""Corpus CSV files, EOT-separated token shards, splits and statistics.

Shard layout (little-endian): a 24-byte header ``magic 'LRFG', version,
vocab_size, token_width, token_count`` followed by ``token_count`` ids of
``token_width`` bytes each. Ids are 2 bytes wide when vocab_size <= 65536.
"""

import concurrent.futures
import csv
import io
import logging
import os
import struct
import sys
from collections import Counter
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from urducorpus.errors import (BadHeader, DocumentExceedsShard, InputError, InvalidParameter,
                               MalformedRow)
from urducorpus.fileio import atomic_write_bytes, atomic_write_text, read_bytes

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('data', 'source', 'category')
DEFAULT_CATEGORIES = frozenset([
    'news', 'blogs', 'books', 'literature', 'religion', 'education', 'social', 'translated', 'general',
])

MAGIC = b'LRFG'
FORMAT_VERSION = 1
HEADER = struct.Struct('<4sIIIQ')
DEFAULT_SHARD_TOKENS = 16_000_000
DEFAULT_SPLIT_SEED = 1337
BYTES_PER_TOKEN_RANGE = (5.5, 6.6)

csv.field_size_limit(2**31 - 1)


@dataclass
class CorpusRecord:
    data: str
    source: str
    category: str


def read_csv_columns(path, required):
    """Yield (row number, dict) for every data row; the header is row 1"""
    try:
        f = open(path, 'r', encoding='utf-8', newline='')
    except FileNotFoundError as e:
        raise InputError(f"file not found: {path}") from e
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    with f:
        reader = csv.reader(f)
        row_number = 1
        try:
            header = next(reader, None)
            if header is None:
                raise BadHeader(f"{path} is empty")
            header = [h.strip().lstrip('\ufeff') for h in header]
            missing = [c for c in required if c not in header]
            if missing:
                raise BadHeader(f"{path}: header lacks column(s) {', '.join(missing)}")
            for row in reader:
                row_number += 1
                if not row:
                    continue
                if len(row) != len(header):
                    raise MalformedRow(row_number, f"expected {len(header)} fields, got {len(row)}")
                yield row_number, dict(zip(header, row))
        except csv.Error as e:
            raise MalformedRow(row_number + 1, str(e)) from e
        except UnicodeDecodeError as e:
            raise InputError(f"{path} is not valid UTF-8: {e}") from e


def read_csv(path, strict=False, categories=DEFAULT_CATEGORIES):
    warned = set()
    for row_number, row in read_csv_columns(path, CSV_COLUMNS):
        category = row['category'].strip()
        if category not in categories:
            if strict:
                raise MalformedRow(row_number, f"unknown category '{category}'")
            if category not in warned:
                warned.add(category)
                logger.warning(f"Unknown category '{category}' first seen on row {row_number}")
        yield CorpusRecord(row['data'], row['source'].strip(), category)


def csv_text(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_csv(path, records):
    rows = [(r.data, r.source, r.category) for r in records]
    atomic_write_text(path, csv_text(CSV_COLUMNS, rows))
    logger.info(f"Wrote {len(rows)} records to {path}")
    return len(rows)


def token_width_for(vocab_size):
    return 2 if vocab_size <= 65536 else 4


class PackedShard:
    def __init__(self, vocab_size, tokens):
        self.vocab_size = vocab_size
        self.tokens = np.asarray(tokens, dtype=np.int64)

    @property
    def token_width(self):
        return token_width_for(self.vocab_size)

    @property
    def token_count(self):
        return len(self.tokens)

    def __eq__(self, other):
        return (isinstance(other, PackedShard) and self.vocab_size == other.vocab_size
                and np.array_equal(self.tokens, other.tokens))

    def to_bytes(self):
        dtype = '<u2' if self.token_width == 2 else '<u4'
        header = HEADER.pack(MAGIC, FORMAT_VERSION, self.vocab_size, self.token_width, self.token_count)
        return header + self.tokens.astype(dtype).tobytes()

    @classmethod
    def from_bytes(cls, data):
        if len(data) < HEADER.size:
            raise BadHeader(f"shard is {len(data)} bytes, shorter than its header")
        magic, version, vocab_size, width, count = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise BadHeader(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise BadHeader(f"unsupported shard version {version}")
        if width != token_width_for(vocab_size):
            raise BadHeader(f"token width {width} does not match vocab_size {vocab_size}")
        if len(data) - HEADER.size != count * width:
            raise BadHeader(f"payload is {len(data) - HEADER.size} bytes, header promises {count * width}")
        dtype = '<u2' if width == 2 else '<u4'
        tokens = np.frombuffer(data, dtype=dtype, offset=HEADER.size, count=count)
        if count and int(tokens.max()) >= vocab_size:
            raise BadHeader(f"shard holds id {int(tokens.max())} outside vocab_size {vocab_size}")
        return cls(vocab_size, tokens)

    def write(self, path):
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def read(cls, path):
        return cls.from_bytes(read_bytes(path))


def _text_of(record):
    return record if isinstance(record, str) else record.data


def pack(records, tokenizer, shard_token_limit=DEFAULT_SHARD_TOKENS, threads=1, progress=False):
    """Encode records, append one EOT to each, and cut into shards between documents"""
    if shard_token_limit < 2:
        raise InvalidParameter(f"shard_token_limit must be >= 2, got {shard_token_limit}")
    texts = [_text_of(r) for r in records]
    vocab_size = tokenizer.vocab.vocab_size
    eot = tokenizer.eot_id
    shards = []
    current = []
    current_len = 0

    def flush():
        nonlocal current, current_len
        if current:
            shards.append(PackedShard(vocab_size, np.concatenate(current)))
        current, current_len = [], 0

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        encoded = executor.map(tokenizer.encode, texts)
        for index, ids in enumerate(tqdm(encoded, total=len(texts), desc='pack',
                                         disable=not progress, file=sys.stderr)):
            length = len(ids) + 1
            if length > shard_token_limit:
                raise DocumentExceedsShard(
                    f"document {index} needs {length} tokens, shard limit is {shard_token_limit}")
            if current_len + length > shard_token_limit:
                flush()
            doc = np.empty(length, dtype=np.int64)
            doc[:-1] = ids
            doc[-1] = eot
            current.append(doc)
            current_len += length
    flush()
    total = sum(s.token_count for s in shards)
    logger.info(f"Packed {len(texts)} documents into {len(shards)} shard(s), {total} tokens")
    return shards


def shard_name(index, prefix='shard'):
    return f"{prefix}_{index:05d}.bin"


def write_shards(shards, out_dir, prefix='shard'):
    paths = []
    for index, shard in enumerate(shards):
        path = os.path.join(out_dir, shard_name(index, prefix))
        shard.write(path)
        paths.append(path)
    return paths


def read_shards(paths):
    return [PackedShard.read(p) for p in paths]


def unpack_documents(shards, tokenizer):
    """Decode a shard sequence back into the documents it was packed from"""
    documents = []
    eot = tokenizer.eot_id
    pending = []
    for shard in shards:
        for token in shard.tokens.tolist():
            if token == eot:
                documents.append(tokenizer.decode(pending))
                pending = []
            else:
                pending.append(token)
    if pending:
        documents.append(tokenizer.decode(pending))
    return documents


@dataclass(frozen=True)
class SplitSpec:
    val_fraction: float = 0.0
    seed: int = DEFAULT_SPLIT_SEED

    def __post_init__(self):
        if not 0 <= self.val_fraction < 1:
            raise InvalidParameter(f"val_fraction must be in [0, 1), got {self.val_fraction}")


def split(shards, spec=SplitSpec()):
    """Seeded shard-level split; both halves keep the original shard order"""
    shards = list(shards)
    n = len(shards)
    if n == 0:
        return [], []
    n_val = int(np.floor(spec.val_fraction * n + 0.5))
    n_val = min(n_val, n - 1)
    order = np.random.default_rng(spec.seed).permutation(n)
    val_index = set(order[:n_val].tolist())
    train = [s for i, s in enumerate(shards) if i not in val_index]
    val = [s for i, s in enumerate(shards) if i in val_index]
    return train, val


class CorpusStats:
    def __init__(self):
        self.rows = 0
        self.total_bytes = 0
        self.category_rows = Counter()
        self.category_bytes = Counter()
        self.tokens = None

    @property
    def category_shares(self):
        """Percent of corpus bytes per category"""
        if not self.total_bytes:
            return {c: 0.0 for c in self.category_bytes}
        return {c: 100.0 * b / self.total_bytes for c, b in sorted(self.category_bytes.items())}

    @property
    def bytes_per_token(self):
        if not self.tokens:
            return None
        return self.total_bytes / self.tokens

    def to_dict(self):
        result = {'rows': self.rows, 'bytes': self.total_bytes}
        if self.tokens is not None:
            result['tokens'] = self.tokens
            result['bytes_per_token'] = round(self.bytes_per_token, 4) if self.tokens else None
        return result

    def rows_for_csv(self):
        shares = self.category_shares
        rows = [(c, self.category_rows[c], self.category_bytes[c], f"{shares[c]:.2f}")
                for c in sorted(self.category_bytes)]
        rows.append(('TOTAL', self.rows, self.total_bytes, '100.00' if self.total_bytes else '0.00'))
        return rows


def corpus_stats(records, tokenizer=None):
    """Row/byte counts per category; token count (one EOT per row) when a tokenizer is given"""
    stats = CorpusStats()
    tokens = 0
    for record in records:
        size = len(record.data.encode('utf-8'))
        stats.rows += 1
        stats.total_bytes += size
        stats.category_rows[record.category] += 1
        stats.category_bytes[record.category] += size
        if tokenizer is not None:
            tokens += tokenizer.count_tokens(record.data) + 1
    if tokenizer is not None:
        stats.tokens = tokens
    return stats


def write_stats(path, stats):
    atomic_write_text(path, csv_text(('category', 'rows', 'bytes', 'share_percent'),
                                     stats.rows_for_csv()))


def estimate_tokens(total_bytes, bytes_per_token=BYTES_PER_TOKEN_RANGE):
    """(low, high) token estimate for a corpus size under a bytes-per-token range"""
    low_bpt, high_bpt = bytes_per_token
    return total_bytes / high_bpt, total_bytes / low_bpt
