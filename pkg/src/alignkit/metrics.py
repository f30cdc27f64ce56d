"""Aligner accuracy, token repetition ratio, token accuracy and corpus BLEU."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .assign import SMOOTHING_EPS, solve_lsap
from .errors import DataError
from .neural.batch import collate


@dataclass
class AlignerAccuracy:
    dup_acc: float
    perm_acc: float
    group_acc: float


@dataclass
class RepetitionReport:
    repeat_ratio: float
    token_count: int


def repetition_ratio(corpus: Sequence[Sequence[str]]) -> RepetitionReport:
    """Fraction of tokens equal to their immediate predecessor, pooled over the corpus."""
    total = sum(len(s) for s in corpus)
    if total == 0:
        raise DataError("repetition ratio of an empty corpus")
    repeats = sum(sum(a == b for a, b in zip(s, s[1:])) for s in corpus)
    return RepetitionReport(repeats / total, total)


def token_accuracy(hypotheses, references) -> float:
    """Position-wise matches over the longer of each hypothesis/reference pair."""
    if len(hypotheses) != len(references):
        raise DataError(f"{len(hypotheses)} hypotheses for {len(references)} references")
    matches = sum(sum(a == b for a, b in zip(h, r)) for h, r in zip(hypotheses, references))
    total = sum(max(len(h), len(r)) for h, r in zip(hypotheses, references))
    if total == 0:
        raise DataError("token accuracy of an empty corpus")
    return matches / total


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses, references, max_ngram: int = 4, smooth: bool = True) -> float:
    """Corpus BLEU in [0, 100] with brevity penalty, one reference per hypothesis.

    With ``smooth`` a zero n-gram match count is floored to 0.1 before the
    geometric mean; a corpus without a single matching unigram still scores 0.
    Orders longer than every hypothesis are left out of the mean, so an exact
    match of short sentences scores 100.
    """
    if len(hypotheses) != len(references):
        raise DataError(f"{len(hypotheses)} hypotheses for {len(references)} references")
    matches = [0] * max_ngram
    totals = [0] * max_ngram
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp, ref = list(hyp), list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_ngram + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(count, r[g]) for g, count in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    orders = [(m, t) for m, t in zip(matches, totals) if t > 0]
    log_precision = 0.0
    for m, t in orders:
        if m == 0:
            if not smooth:
                return 0.0
            m = 0.1
        log_precision += math.log(m / t) / len(orders)
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


@torch.no_grad()
def aligner_accuracy(model, examples, batch_size: int = 64) -> AlignerAccuracy:
    """Per-head accuracy against gold factors, each head fed gold upstream factors.

    Duplication: argmax class vs gold count per source word. Permutation: rows
    of the LSAP-hardened prediction (gold D given) equal to the gold rows.
    Grouping: argmax label vs gold label per slot (gold D and P given).
    """
    if any(ex.c is None for ex in examples):
        raise DataError("aligner accuracy needs gold alignments for every example")
    model.eval()
    counts = np.zeros((3, 2))
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        batch = collate(chunk)
        out = model(batch)
        valid = ~batch.word_pad
        counts[0] += [(out["dup_logits"].argmax(-1) == batch.c)[valid].sum().item(), valid.sum().item()]
        valid = ~batch.slot_pad
        counts[2] += [(out["group_logits"].argmax(-1) == batch.group_labels)[valid].sum().item(), valid.sum().item()]
        probs = out["perm_log_probs"].exp().double().numpy()
        for k, ex in enumerate(chunk):
            L = len(ex.perm)
            sigma = solve_lsap(-np.log(probs[k, :L, :L] + SMOOTHING_EPS))
            counts[1] += [int((sigma == ex.perm).sum()), L]
    dup, perm, group = (float(m / t) for m, t in counts)
    return AlignerAccuracy(dup, perm, group)
