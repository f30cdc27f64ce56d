"""Label-smoothed negative log-likelihoods for the four training signals.

Each loss is averaged over the valid positions of the batch (positions for
duplication, rows for permutation, slots for grouping, target tokens for
translation). With one sentence this is exactly the per-sentence mean.
"""
from __future__ import annotations

import torch


def smoothed_nll(log_probs, target, valid, eps: float = 0.0, class_valid=None):
    """Mean over ``valid`` positions of ``-(1-eps) log p[y] - eps * mean_k log p[k]``.

    ``class_valid`` (broadcastable to ``log_probs``) restricts the smoothing
    support and the mean to a subset of classes, e.g. the unpadded columns of a
    permutation row.
    """
    nll = -log_probs.gather(-1, target[..., None]).squeeze(-1)
    if eps > 0:
        if class_valid is None:
            uniform = -log_probs.mean(dim=-1)
        else:
            class_valid = class_valid.expand_as(log_probs)
            total = log_probs.masked_fill(~class_valid, 0.0).sum(dim=-1)
            uniform = -total / class_valid.sum(dim=-1).clamp(min=1)
        nll = (1.0 - eps) * nll + eps * uniform
    nll = nll.masked_fill(~valid, 0.0)
    return nll.sum() / valid.sum().clamp(min=1)


def loss_duplication(dup_logits, c, word_pad, eps: float = 0.0):
    return smoothed_nll(torch.log_softmax(dup_logits, dim=-1), c, ~word_pad, eps)


def loss_permutation(perm_log_probs, perm, slot_pad, eps: float = 0.1):
    """Cross-entropy of each predicted row against the smoothed one-hot ground truth."""
    return smoothed_nll(perm_log_probs, perm, ~slot_pad, eps, class_valid=~slot_pad[:, None, :])


def loss_grouping(group_logits, labels, slot_pad, eps: float = 0.0):
    return smoothed_nll(torch.log_softmax(group_logits, dim=-1), labels, ~slot_pad, eps)


def loss_translation(token_logits, tgt, tgt_pad, eps: float = 0.1):
    return smoothed_nll(torch.log_softmax(token_logits, dim=-1), tgt, ~tgt_pad, eps)


def total_loss(translation, duplication, permutation, grouping, weights=(0.5, 0.5, 0.5)):
    alpha, beta, gamma = weights
    return translation + alpha * duplication + beta * permutation + gamma * grouping


def compute_losses(model, batch, outputs) -> dict:
    cfg = model.cfg
    losses = {
        "translation": loss_translation(outputs["token_logits"], batch.tgt, batch.tgt_pad, cfg.label_smoothing)
    }
    if cfg.architecture == "alignart":
        align_eps = cfg.label_smoothing if cfg.smooth_alignment_labels else 0.0
        losses["duplication"] = loss_duplication(outputs["dup_logits"], batch.c, batch.word_pad, align_eps)
        losses["permutation"] = loss_permutation(
            outputs["perm_log_probs"], batch.perm, batch.slot_pad, cfg.label_smoothing
        )
        losses["grouping"] = loss_grouping(outputs["group_logits"], batch.group_labels, batch.slot_pad, align_eps)
        losses["total"] = total_loss(
            losses["translation"], losses["duplication"], losses["permutation"], losses["grouping"], cfg.loss_weights
        )
    else:
        losses["total"] = losses["translation"]
    return losses
