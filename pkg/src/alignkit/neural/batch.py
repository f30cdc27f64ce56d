"""Per-sentence training examples and padded batches."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from ..decomp import aligned_input_weights, decompose, sizes_to_labels
from .vocab import Vocabulary


@dataclass
class Example:
    src: np.ndarray  # (M,) token ids
    word_map: np.ndarray  # (M,) source word index per subword
    tgt: Optional[np.ndarray] = None  # (N,)
    c: Optional[np.ndarray] = None  # (W,) fertility per source word
    r: Optional[np.ndarray] = None  # (N,)
    perm: Optional[np.ndarray] = None  # (L,) perm[t] = s
    A: Optional[np.ndarray] = None  # (N, W)

    @property
    def num_words(self) -> int:
        return int(self.word_map[-1]) + 1


def make_example(pair, A, vocab: Vocabulary) -> Example:
    """Encode a sentence pair; ``A`` (target x source words) may be None at inference."""
    ex = Example(
        src=np.asarray(vocab.encode(pair.source_tokens), dtype=np.int64),
        word_map=np.asarray(pair.source_word_map, dtype=np.int64),
        tgt=np.asarray(vocab.encode(pair.target_tokens), dtype=np.int64),
    )
    if A is not None:
        d = decompose(A)
        ex.c, ex.r, ex.perm, ex.A = d.c, d.r, d.perm, np.asarray(A, dtype=np.uint8)
    return ex


@dataclass
class Batch:
    src: torch.Tensor  # (B, M)
    src_pad: torch.Tensor  # (B, M) True at padding
    word_pool: torch.Tensor  # (B, W, M) subword -> word averaging weights
    word_pad: torch.Tensor  # (B, W)
    tgt: Optional[torch.Tensor] = None  # (B, N)
    tgt_pad: Optional[torch.Tensor] = None
    c: Optional[torch.Tensor] = None  # (B, W), 0 at padding
    perm: Optional[torch.Tensor] = None  # (B, L), 0 at padding
    slot_pad: Optional[torch.Tensor] = None  # (B, L)
    group_labels: Optional[torch.Tensor] = None  # (B, L)
    input_weights: Optional[torch.Tensor] = None  # (B, N, W) row-normalized A

    def __len__(self) -> int:
        return self.src.shape[0]

    def to(self, dtype) -> "Batch":
        self.word_pool = self.word_pool.to(dtype)
        if self.input_weights is not None:
            self.input_weights = self.input_weights.to(dtype)
        return self


def _pad(seqs, value=0, dtype=torch.long):
    width = max(len(s) for s in seqs)
    out = torch.full((len(seqs), width), value, dtype=dtype)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.as_tensor(np.asarray(s), dtype=dtype)
    return out


def _pad_mask(seqs):
    width = max(len(s) for s in seqs)
    lengths = torch.tensor([len(s) for s in seqs])
    return torch.arange(width)[None, :] >= lengths[:, None]


def collate(examples: Sequence[Example], with_alignment: bool = True) -> Batch:
    B = len(examples)
    W = max(ex.num_words for ex in examples)
    M = max(len(ex.src) for ex in examples)
    pool = torch.zeros(B, W, M)
    for b, ex in enumerate(examples):
        counts = np.bincount(ex.word_map)
        pool[b, torch.as_tensor(ex.word_map), torch.arange(len(ex.src))] = torch.as_tensor(
            1.0 / counts[ex.word_map], dtype=torch.float32
        )
    batch = Batch(
        src=_pad([ex.src for ex in examples]),
        src_pad=_pad_mask([ex.src for ex in examples]),
        word_pool=pool,
        word_pad=_pad_mask([np.arange(ex.num_words) for ex in examples]),
    )
    if examples[0].tgt is not None:
        batch.tgt = _pad([ex.tgt for ex in examples])
        batch.tgt_pad = _pad_mask([ex.tgt for ex in examples])
    if with_alignment and examples[0].c is not None:
        batch.c = _pad([ex.c for ex in examples])
        batch.perm = _pad([ex.perm for ex in examples])
        batch.slot_pad = _pad_mask([ex.perm for ex in examples])
        batch.group_labels = _pad([sizes_to_labels(ex.r) for ex in examples])
        N = batch.tgt.shape[1]
        weights = torch.zeros(B, N, W)
        for b, ex in enumerate(examples):
            w = aligned_input_weights(ex.A)
            weights[b, : w.shape[0], : w.shape[1]] = torch.as_tensor(w, dtype=torch.float32)
        batch.input_weights = weights
    return batch

