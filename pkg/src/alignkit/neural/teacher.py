"""Small autoregressive encoder-decoder used to rank re-scoring candidates."""
from __future__ import annotations

import itertools
import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import NumericError
from .batch import _pad, _pad_mask
from .checkpoint import Checkpoint, load_model_tensors, model_tensors, read_checkpoint, write_checkpoint
from .config import ModelConfig, OptimConfig
from .layers import Positions, Stack
from .optim import build_optimizer, learning_rate, set_learning_rate
from .vocab import Vocabulary


class TeacherART(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.model_dim
        self.embed = nn.Embedding(cfg.vocab_size, dim, padding_idx=0)
        nn.init.normal_(self.embed.weight, std=dim**-0.5)
        self.positions = Positions(cfg.max_positions, dim)
        self.dropout = nn.Dropout(cfg.dropout_rate)
        self.encoder = Stack(cfg, cfg.encoder_layers)
        self.decoder = nn.ModuleList(
            nn.TransformerDecoderLayer(
                dim, cfg.attention_heads, cfg.hidden_dim, cfg.dropout_rate, batch_first=True, norm_first=True
            )
            for _ in range(cfg.decoder_layers)
        )
        self.norm = nn.LayerNorm(dim)
        self.out = nn.Linear(dim, cfg.vocab_size)

    def _embed(self, ids):
        return self.dropout(self.positions(self.embed(ids) * math.sqrt(self.cfg.model_dim)))

    def forward(self, src, src_pad, prev, prev_pad):
        memory = self.encoder(self._embed(src), src_pad)
        x = self._embed(prev)
        causal = torch.triu(torch.ones(prev.shape[1], prev.shape[1], dtype=torch.bool), diagonal=1)
        for layer in self.decoder:
            x = layer(x, memory, tgt_mask=causal, tgt_key_padding_mask=prev_pad, memory_key_padding_mask=src_pad)
        return self.out(self.norm(x))


def _teacher_batch(pairs, vocab: Vocabulary):
    src = [np.asarray(vocab.encode(s)) for s, _ in pairs]
    prev = [np.asarray([vocab.bos] + vocab.encode(t)) for _, t in pairs]
    gold = [np.asarray(vocab.encode(t) + [vocab.eos]) for _, t in pairs]
    return _pad(src), _pad_mask(src), _pad(prev), _pad_mask(prev), _pad(gold)


class TeacherScorer:
    """``scorer(source_tokens, candidates)`` -> log p(candidate + EOS | source) per candidate."""

    def __init__(self, model: TeacherART, vocab: Vocabulary):
        self.model = model.eval()
        self.vocab = vocab

    @torch.no_grad()
    def __call__(self, source, candidates):
        # one candidate per forward pass: padding changes float32 reductions, and the
        # same sequence must get the same score whatever it is ranked against
        scores = []
        for c in candidates:
            src, src_pad, prev, prev_pad, gold = _teacher_batch([(source, list(c))], self.vocab)
            log_probs = torch.log_softmax(self.model(src, src_pad, prev, prev_pad), -1).double()
            scores.append(float(log_probs.gather(-1, gold[..., None]).sum()))
        return scores

    @classmethod
    def load(cls, path) -> "TeacherScorer":
        ckpt = read_checkpoint(path)
        model = TeacherART(ModelConfig.from_dict(ckpt.meta["model"]))
        load_model_tensors(model, ckpt.tensors)
        return cls(model, Vocabulary(ckpt.meta["vocab"][4:]))


def train_teacher(pairs, vocab: Vocabulary, cfg: ModelConfig, optim_cfg: OptimConfig, steps: int, batch_size=32, seed=1):
    """Train on (source tokens, target tokens) pairs with teacher forcing."""
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    cfg.vocab_size = len(vocab)
    model = TeacherART(cfg)
    optimizer = build_optimizer(model, optim_cfg)
    model.train()

    def batches():
        while True:
            order = rng.permutation(len(pairs))
            for start in range(0, max(len(order) - batch_size + 1, 1), batch_size):
                yield [pairs[i] for i in order[start : start + batch_size]]

    for step, chunk in enumerate(itertools.islice(batches(), steps), start=1):
        set_learning_rate(optimizer, learning_rate(step, optim_cfg))
        src, src_pad, prev, prev_pad, gold = _teacher_batch(chunk, vocab)
        logits = model(src, src_pad, prev, prev_pad)
        loss = F.cross_entropy(
            logits.reshape(-1, logits.shape[-1]), gold.reshape(-1), ignore_index=0, label_smoothing=cfg.label_smoothing
        )
        if not torch.isfinite(loss):
            raise NumericError(f"non-finite teacher loss at step {step}")
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), optim_cfg.clip_norm)
        optimizer.step()
    model.eval()
    return model


def save_teacher(path, model: TeacherART, vocab: Vocabulary, extra=None) -> None:
    meta = {"kind": "teacher", "model": model.cfg.to_dict(), "vocab": vocab.itos, "extra": extra or {}}
    write_checkpoint(path, Checkpoint(meta=meta, tensors=model_tensors(model)))
