"""Add-alpha smoothed k-gram counts.

Counts are stored as two arrays, ``ngrams`` (N, order) holding
(context..., target) ids and ``counts`` (N,).  Each sentence is counted
with ``order - 1`` leading ``<eos>`` ids as context, so the first word is
predicted from the sentence boundary exactly as in the LSTM.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np


def sentence_ngrams(ids: Sequence[int], order: int, eos_id: int):
    padded = [eos_id] * (order - 1) + [int(i) for i in ids]
    for t in range(len(ids)):
        yield tuple(padded[t:t + order])


def count_sentences(sentences: Iterable[Sequence[int]], order: int, eos_id: int, weight: float = 1.0):
    counts: dict[tuple, float] = defaultdict(float)
    for ids in sentences:
        for g in sentence_ngrams(ids, order, eos_id):
            counts[g] += weight
    return counts


def to_arrays(counts: dict, order: int, dtype=np.float32):
    keys = sorted(counts)
    ngrams = np.array(keys, dtype=dtype).reshape(len(keys), order)
    values = np.array([counts[k] for k in keys], dtype=dtype)
    return ngrams, values


def from_arrays(ngrams: np.ndarray, values: np.ndarray) -> dict[tuple, float]:
    return {tuple(int(x) for x in row): float(v) for row, v in zip(ngrams, values)}


class CountIndex:
    """Context -> (target -> count) lookup built from the array form."""

    def __init__(self, ngrams: np.ndarray, values: np.ndarray, vocab_size: int, alpha: float):
        self.vocab_size = vocab_size
        self.alpha = alpha
        self.by_ctx: dict[tuple, dict[int, float]] = defaultdict(dict)
        self.totals: dict[tuple, float] = defaultdict(float)
        for row, v in zip(ngrams.astype(np.int64), values.astype(np.float64)):
            ctx = tuple(int(x) for x in row[:-1])
            self.by_ctx[ctx][int(row[-1])] = float(v)
            self.totals[ctx] += float(v)

    def prob(self, ctx: tuple, target: int) -> float:
        c = self.by_ctx.get(ctx, {}).get(target, 0.0)
        return (c + self.alpha) / (self.totals.get(ctx, 0.0) + self.alpha * self.vocab_size)

    def distribution(self, ctx: tuple) -> np.ndarray:
        p = np.full(self.vocab_size, self.alpha, dtype=np.float64)
        for t, c in self.by_ctx.get(ctx, {}).items():
            p[t] += c
        return p / (self.totals.get(ctx, 0.0) + self.alpha * self.vocab_size)
