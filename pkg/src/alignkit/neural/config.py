from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..errors import ConfigError


@dataclass
class ModelConfig:
    vocab_size: int = 0
    model_dim: int = 64
    hidden_dim: int = 256
    encoder_layers: int = 2
    decoder_layers: int = 1
    attention_heads: int = 4
    dropout_rate: float = 0.1
    max_duplication_class: int = 16
    label_smoothing: float = 0.1
    # duplication/grouping targets are unsmoothed unless this is set
    smooth_alignment_labels: bool = False
    loss_weights: tuple = (0.5, 0.5, 0.5)
    cross_attention: bool = True
    # "alignart" or "nat" (aligner disabled, uniform-copy decoder inputs)
    architecture: str = "alignart"
    max_positions: int = 1024

    def __post_init__(self):
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ConfigError("encoder_layers and decoder_layers must be >= 1")
        if self.model_dim % self.attention_heads:
            raise ConfigError("model_dim must be divisible by attention_heads")
        if len(self.loss_weights) != 3:
            raise ConfigError("loss_weights holds (duplication, permutation, grouping) weights")
        if not 0.0 <= self.dropout_rate < 1.0 or not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("dropout_rate and label_smoothing must lie in [0, 1)")
        if self.architecture not in ("alignart", "nat"):
            raise ConfigError(f"unknown architecture {self.architecture!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["loss_weights"] = list(self.loss_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class OptimConfig:
    peak_lr: float = 1e-3
    init_lr: float = 1e-7
    warmup_steps: int = 200
    betas: tuple = (0.9, 0.98)
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float = 1.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimConfig":
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)
