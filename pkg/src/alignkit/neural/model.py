"""The encoder, the three-headed Aligner and the shallow non-autoregressive decoder."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from ..errors import DataError
from .config import ModelConfig
from .layers import ConvPredictor, Decoder, PermutationPredictor, Positions, Stack


@dataclass
class DuplicatedStates:
    states: torch.Tensor  # (B, L, d) with copy position embeddings added
    pad: torch.Tensor  # (B, L)
    source: torch.Tensor  # (B, L) source word index of every slot


class AligNART(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.model_dim
        self.embed = nn.Embedding(cfg.vocab_size, dim, padding_idx=0)
        nn.init.normal_(self.embed.weight, std=dim**-0.5)
        self.embed_scale = math.sqrt(dim)
        self.positions = Positions(cfg.max_positions, dim)
        self.embed_dropout = nn.Dropout(cfg.dropout_rate)
        self.encoder = Stack(cfg, cfg.encoder_layers)
        self.decoder = Decoder(cfg)
        if cfg.architecture == "alignart":
            self.duplication = ConvPredictor(dim, cfg.max_duplication_class + 1, cfg.dropout_rate)
            self.copy_embed = nn.Embedding(cfg.max_duplication_class, dim)
            nn.init.normal_(self.copy_embed.weight, std=dim**-0.5)
            self.permutation = PermutationPredictor(cfg)
            self.grouping = ConvPredictor(dim, 2, cfg.dropout_rate)

    # encoder --------------------------------------------------------------------------------

    def encode(self, src, src_pad, word_pool=None):
        """Subword states (B, M, d) and their word-level mean pooling (B, W, d)."""
        if int(src.max()) >= self.cfg.vocab_size or int(src.min()) < 0:
            raise DataError(f"token id out of range for vocabulary of {self.cfg.vocab_size}")
        x = self.embed_dropout(self.positions(self.embed(src) * self.embed_scale))
        h = self.encoder(x, src_pad)
        if word_pool is None:
            return h, h
        return h, word_pool.to(h.dtype) @ h

    # aligner --------------------------------------------------------------------------------

    def predict_duplication(self, h, pad):
        return self.duplication(h, pad)

    def duplicate_states(self, h, c) -> DuplicatedStates:
        """Copy word state m ``c[m]`` times, adding copy position embedding j to copy j."""
        c = torch.as_tensor(c, dtype=torch.long)
        if int(c.max()) > self.cfg.max_duplication_class:
            raise DataError(f"duplication count above the class cap {self.cfg.max_duplication_class}")
        lengths = c.sum(dim=1)
        if int(lengths.min()) < 1:
            raise DataError("every sentence needs at least one duplicated state")
        B, L = c.shape[0], int(lengths.max())
        source = torch.zeros(B, L, dtype=torch.long)
        copy = torch.zeros(B, L, dtype=torch.long)
        for b in range(B):
            cb = c[b]
            idx = torch.repeat_interleave(torch.arange(len(cb)), cb)
            starts = torch.cumsum(cb, 0) - cb
            source[b, : len(idx)] = idx
            copy[b, : len(idx)] = torch.arange(len(idx)) - starts[idx]
        pad = torch.arange(L)[None, :] >= lengths[:, None]
        states = torch.gather(h, 1, source[..., None].expand(-1, -1, h.shape[-1]))
        states = states + self.copy_embed(copy).to(h.dtype)
        states = states.masked_fill(pad[..., None], 0.0)
        return DuplicatedStates(states, pad, source.masked_fill(pad, 0))

    def predict_permutation(self, dup: DuplicatedStates):
        return self.permutation(dup.states, dup.pad)

    @staticmethod
    def permute(dup: DuplicatedStates, perm) -> torch.Tensor:
        """d'[t] = h'[perm[t]]."""
        states = torch.gather(dup.states, 1, perm[..., None].expand(-1, -1, dup.states.shape[-1]))
        return states.masked_fill(dup.pad[..., None], 0.0)

    def predict_grouping(self, permuted, pad):
        return self.grouping(permuted, pad)

    # decoder --------------------------------------------------------------------------------

    @staticmethod
    def aligned_inputs(h_words, weights):
        """d_n = sum_m W[n, m] h_m with W the row-normalized alignment."""
        return weights.to(h_words.dtype) @ h_words

    @staticmethod
    def uniform_copy_weights(num_words, tgt_len, W_max=None):
        """Monotonic copy inputs: target n reads source floor((n + 0.5) W / N)."""
        B = len(num_words)
        N = int(max(tgt_len))
        W_max = W_max or int(max(num_words))
        weights = torch.zeros(B, N, W_max)
        for b in range(B):
            n = torch.arange(int(tgt_len[b]))
            m = torch.clamp(((n + 0.5) * int(num_words[b]) / int(tgt_len[b])).long(), max=int(num_words[b]) - 1)
            weights[b, n, m] = 1.0
        return weights

    def decode(self, d, tgt_pad, h, src_pad):
        return self.decoder(d, tgt_pad, h, src_pad)

    # teacher-forced forward -----------------------------------------------------------------

    def forward(self, batch, weights: Optional[torch.Tensor] = None) -> dict:
        """All predictor outputs with ground-truth D, P and G driving the states."""
        h, hw = self.encode(batch.src, batch.src_pad, batch.word_pool)
        out = {}
        if self.cfg.architecture == "alignart":
            out["dup_logits"] = self.predict_duplication(hw, batch.word_pad)
            dup = self.duplicate_states(hw, batch.c)
            out["perm_log_probs"], out["gate_logits"], _ = self.predict_permutation(dup)
            permuted = self.permute(dup, batch.perm)
            out["group_logits"] = self.predict_grouping(permuted, dup.pad)
            if weights is None:
                weights = batch.input_weights
        elif weights is None:
            num_words = (~batch.word_pad).sum(1)
            tgt_len = (~batch.tgt_pad).sum(1)
            weights = self.uniform_copy_weights(num_words, tgt_len, hw.shape[1])
        d = self.aligned_inputs(hw, weights)
        out["token_logits"] = self.decode(d, batch.tgt_pad, h, batch.src_pad)
        return out
