from __future__ import annotations

import torch

from .config import OptimConfig


def learning_rate(step: int, cfg: OptimConfig) -> float:
    """Linear warmup from ``init_lr`` to ``peak_lr``, then inverse square root decay."""
    step = max(step, 1)
    if step < cfg.warmup_steps:
        return cfg.init_lr + (cfg.peak_lr - cfg.init_lr) * step / cfg.warmup_steps
    return cfg.peak_lr * (cfg.warmup_steps / step) ** 0.5


def build_optimizer(model: torch.nn.Module, cfg: OptimConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        model.parameters(),
        lr=learning_rate(1, cfg),
        betas=tuple(cfg.betas),
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )


def set_learning_rate(optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr
