from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn


def sinusoidal_table(length: int, dim: int) -> torch.Tensor:
    position = torch.arange(length, dtype=torch.float64)[:, None]
    freq = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * freq)
    table[:, 1::2] = torch.cos(position * freq[: dim // 2])
    return table.float()


class Positions(nn.Module):
    def __init__(self, max_positions: int, dim: int):
        super().__init__()
        self.register_buffer("table", sinusoidal_table(max_positions, dim), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.table[: x.shape[1]].to(x.dtype)[None]


def encoder_layer(cfg) -> nn.TransformerEncoderLayer:
    return nn.TransformerEncoderLayer(
        cfg.model_dim,
        cfg.attention_heads,
        cfg.hidden_dim,
        cfg.dropout_rate,
        batch_first=True,
        norm_first=True,
    )


class Stack(nn.Module):
    """Pre-norm self-attention layers with a closing layer norm."""

    def __init__(self, cfg, depth: int):
        super().__init__()
        self.layers = nn.ModuleList(encoder_layer(cfg) for _ in range(depth))
        self.norm = nn.LayerNorm(cfg.model_dim)

    def forward(self, x, pad):
        for layer in self.layers:
            x = layer(x, src_key_padding_mask=pad)
        return self.norm(x)


class ConvPredictor(nn.Module):
    """Convolution, ReLU, layer norm, dropout, projection."""

    def __init__(self, dim: int, n_classes: int, dropout: float, kernel_size: int = 3):
        super().__init__()
        self.conv = nn.Conv1d(dim, dim, kernel_size, padding=kernel_size // 2)
        self.norm = nn.LayerNorm(dim)
        self.dropout = nn.Dropout(dropout)
        self.proj = nn.Linear(dim, n_classes)

    def forward(self, x, pad):
        x = x.masked_fill(pad[..., None], 0.0)
        x = self.conv(x.transpose(1, 2)).transpose(1, 2)
        x = self.dropout(self.norm(F.relu(x)))
        return self.proj(x)


class PermutationPredictor(nn.Module):
    """Pre-network, query and key networks, and a gated single-head attention.

    The gate ``g = sigmoid(Q u)`` is the probability that a slot keeps its own
    element; the remaining mass follows the attention with its diagonal masked:

        P = diag(g) + (I - diag(g)) softmax(mask + Q K^T)

    Everything is computed in log space.
    """

    def __init__(self, cfg):
        super().__init__()
        dim = cfg.model_dim
        self.positions = Positions(cfg.max_positions, dim)
        self.pre = encoder_layer(cfg)
        self.query_net = encoder_layer(cfg)
        self.key_net = encoder_layer(cfg)
        self.query_proj = nn.Linear(dim, dim)
        self.key_proj = nn.Linear(dim, dim)
        self.u = nn.Parameter(torch.randn(dim) * dim**-0.5)
        self.scale = dim**-0.25
        # added to the gate logits; tests use it to saturate the gate
        self.gate_bias = 0.0

    def forward(self, x, pad):
        """Return (log P, gate logits, log of the pre-gate attention)."""
        L = x.shape[1]
        x = self.pre(self.positions(x), src_key_padding_mask=pad)
        Q = self.query_proj(self.query_net(x, src_key_padding_mask=pad)) * self.scale
        K = self.key_proj(self.key_net(x, src_key_padding_mask=pad)) * self.scale
        gate = Q @ self.u + self.gate_bias

        eye = torch.eye(L, dtype=torch.bool, device=x.device)
        blocked = eye[None] | pad[:, None, :]
        scores = (Q @ K.transpose(1, 2)).masked_fill(blocked, float("-inf"))
        # rows with no off-diagonal candidate (L == 1) keep all mass on the diagonal
        lonely = blocked.all(dim=-1)
        log_bar = torch.log_softmax(scores.masked_fill(lonely[..., None], 0.0), dim=-1)
        log_bar = log_bar.masked_fill(blocked, float("-inf"))

        log_keep = torch.where(lonely, torch.zeros_like(gate), F.logsigmoid(gate))
        log_move = F.logsigmoid(-gate)
        log_p = torch.where(eye[None], log_keep[..., None], log_move[..., None] + log_bar)
        log_p = log_p.masked_fill(pad[:, None, :] & ~eye[None], float("-inf"))
        return log_p, gate, log_bar


class Decoder(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.cross_attention = cfg.cross_attention
        self.positions = Positions(cfg.max_positions, cfg.model_dim)
        if cfg.cross_attention:
            self.layers = nn.ModuleList(
                nn.TransformerDecoderLayer(
                    cfg.model_dim,
                    cfg.attention_heads,
                    cfg.hidden_dim,
                    cfg.dropout_rate,
                    batch_first=True,
                    norm_first=True,
                )
                for _ in range(cfg.decoder_layers)
            )
        else:
            self.layers = nn.ModuleList(encoder_layer(cfg) for _ in range(cfg.decoder_layers))
        self.dropout = nn.Dropout(cfg.dropout_rate)
        self.norm = nn.LayerNorm(cfg.model_dim)
        self.out = nn.Linear(cfg.model_dim, cfg.vocab_size)

    def forward(self, d, tgt_pad, memory, memory_pad):
        x = self.dropout(self.positions(d))
        for layer in self.layers:
            if self.cross_attention:
                x = layer(x, memory, tgt_key_padding_mask=tgt_pad, memory_key_padding_mask=memory_pad)
            else:
                x = layer(x, src_key_padding_mask=tgt_pad)
        return self.out(self.norm(x))
