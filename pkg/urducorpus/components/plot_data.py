"""Chart data tables. Nothing here draws; each class writes the CSV a plot is made from."""

import logging

from urducorpus.corpus import csv_text
from urducorpus.fileio import atomic_write_text

logger = logging.getLogger(__name__)


class TokenCountBars:
    """Token count per tokenizer on the same text, with the first tokenizer's saving against each"""

    header = ('tokenizer', 'total_tokens', 'fertility', 'reduction_vs_tokenizer_percent')

    def __init__(self):
        self.rows = []

    def update(self, report):
        self.rows = []
        first = report.stats[0]
        for stats in report.stats:
            if stats is first:
                reduction = 0.0
            else:
                reduction = report.reduction(first.name, stats.name)
            self.rows.append((stats.name, stats.total_tokens, f"{stats.fertility:.4f}", f"{reduction:.2f}"))
        return self

    def improvement_label(self):
        """Caption text such as 'bpe-32000: 29.1% fewer tokens than o200k'"""
        if len(self.rows) < 2:
            return ''
        first = self.rows[0][0]
        parts = [f"{float(row[3]):.1f}% fewer tokens than {row[0]}" for row in self.rows[1:]]
        return f"{first}: " + ', '.join(parts)

    def write(self, path):
        atomic_write_text(path, csv_text(self.header, self.rows))
        logger.info(f"Wrote token-count bars to {path}")


class LearningRateCurve:
    header = ('tokens', 'learning_rate')

    def __init__(self):
        self.rows = []

    def update(self, curve):
        self.rows = [(f"{tokens:.0f}", f"{lr:.6e}") for tokens, lr in curve]
        return self

    def write(self, path):
        atomic_write_text(path, csv_text(self.header, self.rows))
        logger.info(f"Wrote learning-rate curve ({len(self.rows)} points) to {path}")

    def to_text(self):
        return csv_text(self.header, self.rows)


class CategoryBreakdown:
    """Byte share per corpus category, largest first"""

    header = ('category', 'bytes', 'share_percent')

    def __init__(self):
        self.rows = []

    def update(self, stats):
        shares = stats.category_shares
        ordered = sorted(stats.category_bytes.items(), key=lambda item: (-item[1], item[0]))
        self.rows = [(category, size, f"{shares[category]:.2f}") for category, size in ordered]
        return self

    def write(self, path):
        atomic_write_text(path, csv_text(self.header, self.rows))
