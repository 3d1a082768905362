from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UNK = "<unk>"
EOS = "<eos>"


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {t: i for i, t in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("vocabulary tokens are not unique")
        for special in (UNK, EOS):
            if special not in index:
                raise ValueError(f"vocabulary lacks {special}")
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, tok):
        return tok in self._index

    @property
    def unk_id(self) -> int:
        return self._index[UNK]

    @property
    def eos_id(self) -> int:
        return self._index[EOS]

    def id(self, tok: str) -> int:
        return self._index.get(tok, self._index[UNK])

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        unk = self.unk_id
        return np.array([self._index.get(t, unk) for t in tokens], dtype=np.int64)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[int(i)] for i in ids]

    @classmethod
    def build(cls, corpus: Sequence[str], min_count: int = 2) -> "Vocabulary":
        """Tokens seen at least ``min_count`` times, most frequent first."""
        counts = Counter(corpus)
        keep = sorted((t for t, c in counts.items() if c >= min_count and t not in (UNK, EOS)),
                      key=lambda t: (-counts[t], t))
        return cls((EOS, UNK, *keep))
