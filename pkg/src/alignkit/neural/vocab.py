from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

from ..errors import DataError

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"


class Vocabulary:
    """Token <-> id table shared by source and target; ids 0-3 are reserved."""

    def __init__(self, tokens: Sequence[str]):
        self.itos = [PAD, UNK, BOS, EOS] + [t for t in tokens if t not in (PAD, UNK, BOS, EOS)]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise DataError("duplicate tokens in vocabulary")

    pad = 0
    unk = 1
    bos = 2
    eos = 3

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocabulary":
        counts = Counter(tok for sent in sentences for tok in sent)
        return cls(sorted(counts, key=lambda t: (-counts[t], t)))

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, tokens: Sequence[str], strict: bool = False) -> list[int]:
        if strict:
            missing = [t for t in tokens if t not in self.stoi]
            if missing:
                raise DataError(f"unknown tokens: {missing[:5]}")
        return [self.stoi.get(t, self.unk) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]
