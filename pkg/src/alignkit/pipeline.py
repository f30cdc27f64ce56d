"""Training, aligned inference, oracle decoding and re-scoring."""
from __future__ import annotations

import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, fields
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .assign import SMOOTHING_EPS, solve_lsap
from .decomp import (
    aligned_input_weights,
    duplication_to_matrix,
    grouping_to_matrix,
    labels_to_sizes,
    permutation_matrix,
    recompose,
)
from .errors import ConfigError, NumericError
from .neural.batch import Example, collate, make_example
from .neural.checkpoint import Checkpoint, load_model_tensors, model_tensors, read_checkpoint, write_checkpoint
from .neural.config import ModelConfig, OptimConfig
from .neural.losses import compute_losses
from .neural.model import AligNART
from .neural.optim import build_optimizer, learning_rate, set_learning_rate
from .neural.vocab import Vocabulary

logger = logging.getLogger(__name__)

ABLATIONS = ("D", "P", "G")


def _from_dict(cls, d):
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass
class TrainingConfig:
    steps: int = 4000
    batch_size: int = 32
    seed: int = 1
    log_every: int = 100

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class RescoreConfig:
    m_prime: int = 4
    l_prime: int = 4
    a: int = 4
    b: int = 2
    # False: one grouping pass on the top duplication candidate's states
    regroup_per_candidate: bool = True

    def __post_init__(self):
        if self.a > 2**self.m_prime or self.b > 2**self.l_prime:
            raise ConfigError("need a <= 2**m_prime and b <= 2**l_prime")
        if min(self.a, self.b) < 1:
            raise ConfigError("a and b must be >= 1")

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class TranslationResult:
    tokens: list[str]
    alignment: np.ndarray  # (N, W) predicted word-level alignment
    component_scores: tuple  # (duplication, grouping, translation) joint log-probs
    scorer_log_prob: Optional[float] = None
    candidates: int = 1


# Training ---------------------------------------------------------------------------------


class Trainer:
    """Single-writer training loop with teacher-forced alignment."""

    def __init__(self, model: AligNART, vocab: Vocabulary, optim_cfg: OptimConfig, train_cfg: TrainingConfig):
        self.model = model
        self.vocab = vocab
        self.optim_cfg = optim_cfg
        self.train_cfg = train_cfg
        self.optimizer = build_optimizer(model, optim_cfg)
        self.step = 0
        self.rng = np.random.default_rng(train_cfg.seed)

    @classmethod
    def create(cls, model_cfg: ModelConfig, vocab: Vocabulary, optim_cfg=None, train_cfg=None) -> "Trainer":
        train_cfg = train_cfg or TrainingConfig()
        torch.manual_seed(train_cfg.seed)
        model_cfg.vocab_size = len(vocab)
        return cls(AligNART(model_cfg), vocab, optim_cfg or OptimConfig(), train_cfg)

    def train_step(self, examples: Sequence[Example]) -> dict:
        """One optimizer step; returns the loss components as floats."""
        self.model.train()
        batch = collate(examples)
        set_learning_rate(self.optimizer, learning_rate(self.step + 1, self.optim_cfg))
        losses = compute_losses(self.model, batch, self.model(batch))
        values = {k: v.item() for k, v in losses.items()}
        if not all(math.isfinite(v) for v in values.values()):
            raise NumericError(f"non-finite loss at step {self.step + 1}: {values}")
        self.optimizer.zero_grad(set_to_none=True)
        losses["total"].backward()
        if self.optim_cfg.clip_norm:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.optim_cfg.clip_norm)
        self.optimizer.step()
        self.step += 1
        return values

    def batches(self, examples: Sequence[Example]):
        """Endless seeded shuffle over the training examples."""
        bs = self.train_cfg.batch_size
        while True:
            order = self.rng.permutation(len(examples))
            for start in range(0, len(order) - bs + 1 if len(order) >= bs else 1, bs):
                yield [examples[i] for i in order[start : start + bs]]

    def fit(self, examples: Sequence[Example], steps: Optional[int] = None, log=None) -> list[dict]:
        steps = self.train_cfg.steps if steps is None else steps
        history = []
        start = time.time()
        for batch in itertools.islice(self.batches(examples), steps):
            values = self.train_step(batch)
            if self.step % self.train_cfg.log_every == 0 or self.step == 1:
                record = {"step": self.step, "lr": self.optimizer.param_groups[0]["lr"], **values}
                record["elapsed"] = round(time.time() - start, 2)
                history.append(record)
                if log is not None:
                    log.write(json.dumps(record) + "\n")
                    log.flush()
                logger.debug("step %d %s", self.step, values)
        return history

    def checkpoint(self, extra: Optional[dict] = None) -> Checkpoint:
        meta = {
            "model": self.model.cfg.to_dict(),
            "optimizer": self.optim_cfg.to_dict(),
            "training": vars(self.train_cfg),
            "vocab": self.vocab.itos,
            "step": self.step,
            "seed": self.train_cfg.seed,
            "extra": extra or {},
        }
        return Checkpoint(meta=meta, tensors=model_tensors(self.model, self.optimizer))

    def save(self, path, extra: Optional[dict] = None) -> None:
        write_checkpoint(path, self.checkpoint(extra))

    @classmethod
    def load(cls, path) -> "Trainer":
        ckpt = read_checkpoint(path)
        vocab = Vocabulary(ckpt.meta["vocab"][4:])
        model = AligNART(ModelConfig.from_dict(ckpt.meta["model"]))
        trainer = cls(
            model,
            vocab,
            OptimConfig.from_dict(ckpt.meta["optimizer"]),
            TrainingConfig.from_dict(ckpt.meta["training"]),
        )
        load_model_tensors(model, ckpt.tensors, trainer.optimizer, ckpt.meta["step"])
        trainer.step = ckpt.meta["step"]
        trainer.extra = ckpt.meta.get("extra", {})
        model.eval()
        return trainer


def prepare_examples(corpus, vocab: Vocabulary) -> list[Example]:
    return [make_example(pair, A, vocab) for pair, A in corpus]


# Candidate generation ---------------------------------------------------------------------


def _toggle_candidates(log_probs: np.ndarray, positions: np.ndarray, keep: int, forced=None):
    """Top-``keep`` label vectors by joint log-prob, toggling ``positions`` between top-1 and top-2."""
    order = np.argsort(-log_probs, axis=-1, kind="stable")
    best, second = order[:, 0].copy(), order[:, 1]
    if forced is not None:
        for pos, value in forced.items():
            best[pos] = value
    pool = []
    seen = set()
    for mask in range(2 ** len(positions)):
        labels = best.copy()
        for bit, pos in enumerate(positions):
            if mask >> bit & 1:
                labels[pos] = second[pos]
        key = labels.tobytes()
        if key in seen:
            continue
        seen.add(key)
        joint = float(log_probs[np.arange(len(labels)), labels].sum())
        pool.append((joint, mask, labels))
    pool.sort(key=lambda item: (-item[0], item[1]))
    return [(labels, joint) for joint, _, labels in pool[:keep]]


def _least_confident(log_probs: np.ndarray, count: int, exclude_first: bool = False) -> np.ndarray:
    confidence = log_probs.max(axis=-1)
    candidates = np.arange(1 if exclude_first else 0, len(confidence))
    count = min(count, len(candidates))
    ranked = candidates[np.argsort(confidence[candidates], kind="stable")]
    return np.sort(ranked[:count])


def generate_duplication_candidates(dup_log_probs, m_prime: int, a: int):
    """Up to ``a`` (counts, joint log-prob) pairs, best first."""
    dup_log_probs = np.asarray(dup_log_probs, dtype=np.float64)
    positions = _least_confident(dup_log_probs, m_prime)
    return _toggle_candidates(dup_log_probs, positions, a)


def generate_grouping_candidates(group_log_probs, l_prime: int, b: int):
    """Up to ``b`` (labels, joint log-prob) pairs, best first; slot 0 is always label 0."""
    group_log_probs = np.asarray(group_log_probs, dtype=np.float64)
    positions = _least_confident(group_log_probs, l_prime, exclude_first=True)
    return _toggle_candidates(group_log_probs, positions, b, forced={0: 0})


def fix_empty_duplication(c: np.ndarray, dup_log_probs: np.ndarray) -> np.ndarray:
    """All-zero counts decode nothing; give one copy to the word most likely to be kept."""
    if c.sum() > 0:
        return c
    c = c.copy()
    keep_prob = 1.0 - np.exp(dup_log_probs[:, 0])
    c[int(np.argmax(keep_prob))] = 1
    return c


# Inference --------------------------------------------------------------------------------


@dataclass
class _Alignment:
    c: np.ndarray
    perm: np.ndarray
    r: np.ndarray
    dup_score: float
    group_score: float

    @property
    def A(self) -> np.ndarray:
        return recompose(duplication_to_matrix(self.c), permutation_matrix(self.perm), grouping_to_matrix(self.r))


class Translator:
    """Frozen-model inference: sequential D -> P -> G estimation and aligned decoding."""

    def __init__(self, model: AligNART, vocab: Vocabulary, batch_size: int = 64):
        self.model = model.eval()
        self.vocab = vocab
        self.batch_size = batch_size

    @classmethod
    def from_checkpoint(cls, path) -> "Translator":
        trainer = Trainer.load(path)
        return cls(trainer.model, trainer.vocab)

    # helpers -----------------------------------------------------------------------------

    def _encode(self, examples):
        batch = collate(examples, with_alignment=False)
        h, hw = self.model.encode(batch.src, batch.src_pad, batch.word_pool)
        return batch, h, hw

    def _permutations(self, hw_rows, counts, ablate):
        """Hard permutation per candidate count vector, plus the duplicated states."""
        C = torch.as_tensor(np.stack(_pad_rows(counts)), dtype=torch.long)
        dup = self.model.duplicate_states(hw_rows, C)
        L = [int(c.sum()) for c in counts]
        if ablate == "P":
            perms = [np.arange(n) for n in L]
        else:
            log_p, _, _ = self.model.predict_permutation(dup)
            probs = log_p.exp().double().numpy()
            perms = [solve_lsap(-np.log(probs[k, :n, :n] + SMOOTHING_EPS)) for k, n in enumerate(L)]
        return dup, perms, L

    def _group_log_probs(self, dup, perms):
        P = torch.as_tensor(np.stack(_pad_rows(perms)), dtype=torch.long)
        permuted = self.model.permute(dup, P)
        logits = self.model.predict_grouping(permuted, dup.pad)
        return torch.log_softmax(logits, dim=-1).double().numpy()

    def _decode(self, h_rows, src_pad_rows, hw_rows, alignments):
        weights = [aligned_input_weights(al.A) for al in alignments]
        N = max(w.shape[0] for w in weights)
        W = hw_rows.shape[1]
        Wt = torch.zeros(len(weights), N, W, dtype=hw_rows.dtype)
        tgt_pad = torch.ones(len(weights), N, dtype=torch.bool)
        for k, w in enumerate(weights):
            Wt[k, : w.shape[0], : w.shape[1]] = torch.as_tensor(w)
            tgt_pad[k, : w.shape[0]] = False
        d = self.model.aligned_inputs(hw_rows, Wt)
        logits = self.model.decode(d, tgt_pad, h_rows, src_pad_rows)
        log_probs = torch.log_softmax(logits, dim=-1)
        best = log_probs.max(dim=-1)
        out = []
        for k, w in enumerate(weights):
            n = w.shape[0]
            ids = best.indices[k, :n].tolist()
            out.append((self.vocab.decode(ids), float(best.values[k, :n].sum())))
        return out

    # public ------------------------------------------------------------------------------

    @torch.no_grad()
    def translate_examples(self, examples, ablate: Optional[str] = None) -> list[TranslationResult]:
        if ablate is not None and ablate not in ABLATIONS:
            raise ConfigError(f"ablate must be one of {ABLATIONS}")
        if self.model.cfg.architecture == "nat":
            return self._translate_nat(examples)
        results = []
        for start in range(0, len(examples), self.batch_size):
            chunk = examples[start : start + self.batch_size]
            batch, h, hw = self._encode(chunk)
            dup_lp = torch.log_softmax(self.model.predict_duplication(hw, batch.word_pad), -1).double().numpy()
            counts = []
            for k, ex in enumerate(chunk):
                W = ex.num_words
                if ablate == "D":
                    counts.append(np.ones(W, dtype=np.int64))
                else:
                    c = dup_lp[k, :W].argmax(-1)
                    counts.append(fix_empty_duplication(c, dup_lp[k, :W]))
            dup, perms, L = self._permutations(hw, counts, ablate)
            group_lp = self._group_log_probs(dup, perms)
            alignments = []
            for k in range(len(chunk)):
                W = chunk[k].num_words
                lp = group_lp[k, : L[k]]
                g = np.zeros(L[k], dtype=np.int64) if ablate == "G" else lp.argmax(-1)
                g[0] = 0
                alignments.append(
                    _Alignment(
                        c=counts[k],
                        perm=perms[k],
                        r=labels_to_sizes(g),
                        dup_score=float(dup_lp[k, np.arange(W), counts[k]].sum()),
                        group_score=float(lp[np.arange(L[k]), g].sum()),
                    )
                )
            decoded = self._decode(h, batch.src_pad, hw, alignments)
            for al, (tokens, score) in zip(alignments, decoded):
                results.append(TranslationResult(tokens, al.A, (al.dup_score, al.group_score, score)))
        return results

    @torch.no_grad()
    def oracle_translate_examples(self, examples, ablate: Optional[str] = None) -> list[TranslationResult]:
        """Decode with gold alignments; an ablated factor becomes the identity.

        Factors downstream of an ablated duplication are predicted, because the
        gold ones no longer fit the changed number of slots.
        """
        if ablate == "D":
            return self.translate_examples(examples, ablate="D")
        results = []
        for start in range(0, len(examples), self.batch_size):
            chunk = examples[start : start + self.batch_size]
            batch, h, hw = self._encode(chunk)
            alignments = []
            for ex in chunk:
                perm = np.arange(len(ex.perm)) if ablate == "P" else ex.perm
                r = np.ones(len(ex.perm), dtype=np.int64) if ablate == "G" else ex.r
                alignments.append(_Alignment(c=ex.c, perm=perm, r=r, dup_score=0.0, group_score=0.0))
            decoded = self._decode(h, batch.src_pad, hw, alignments)
            for al, (tokens, score) in zip(alignments, decoded):
                results.append(TranslationResult(tokens, al.A, (0.0, 0.0, score)))
        return results

    @torch.no_grad()
    def _translate_nat(self, examples):
        """Aligner-free baseline: uniform copy of the source states at the reference length."""
        results = []
        for start in range(0, len(examples), self.batch_size):
            chunk = examples[start : start + self.batch_size]
            batch, h, hw = self._encode(chunk)
            num_words = [ex.num_words for ex in chunk]
            lengths = [len(ex.tgt) for ex in chunk]
            weights = self.model.uniform_copy_weights(num_words, lengths, hw.shape[1])
            tgt_pad = torch.arange(weights.shape[1])[None, :] >= torch.tensor(lengths)[:, None]
            logits = self.model.decode(self.model.aligned_inputs(hw, weights), tgt_pad, h, batch.src_pad)
            best = torch.log_softmax(logits, -1).max(-1)
            for k, n in enumerate(lengths):
                A = weights[k, :n, : num_words[k]].numpy().astype(np.uint8)
                tokens = self.vocab.decode(best.indices[k, :n].tolist())
                results.append(TranslationResult(tokens, A, (0.0, 0.0, float(best.values[k, :n].sum()))))
        return results

    @torch.no_grad()
    def rescore_examples(self, examples, cfg: RescoreConfig, scorer: Callable) -> list[TranslationResult]:
        """Decode up to a*b alignment candidates per sentence and keep the scorer's favourite.

        ``scorer(source_tokens, candidate_token_lists)`` returns one log-probability
        per candidate. If it raises, the single-candidate translation is returned.
        """
        results = []
        for ex in examples:
            batch, h, hw = self._encode([ex])
            W = ex.num_words
            dup_lp = torch.log_softmax(self.model.predict_duplication(hw, batch.word_pad), -1)[0, :W]
            dup_lp = dup_lp.double().numpy()
            dup_cands = []
            seen = set()
            for c, joint in generate_duplication_candidates(dup_lp, cfg.m_prime, cfg.a):
                c = fix_empty_duplication(c, dup_lp)
                if c.tobytes() not in seen:
                    seen.add(c.tobytes())
                    dup_cands.append((c, float(dup_lp[np.arange(W), c].sum())))
            counts = [c for c, _ in dup_cands]
            rows = hw.expand(len(counts), -1, -1)
            dup, perms, L = self._permutations(rows, counts, None)
            group_lp = self._group_log_probs(dup, perms)
            alignments = []
            for k, (c, dscore) in enumerate(dup_cands):
                # without regrouping, candidates reuse the top candidate's grouping when the slot counts agree
                shared = not cfg.regroup_per_candidate and L[k] == L[0]
                lp = group_lp[0 if shared else k, : L[k]]
                for g, gscore in generate_grouping_candidates(lp, cfg.l_prime, cfg.b):
                    alignments.append(_Alignment(c=c, perm=perms[k], r=labels_to_sizes(g), dup_score=dscore, group_score=gscore))
            n = len(alignments)
            decoded = self._decode(h.expand(n, -1, -1), batch.src_pad.expand(n, -1), hw.expand(n, -1, -1), alignments)
            source = self.vocab.decode(ex.src.tolist())
            try:
                scores = [float(s) for s in scorer(source, [tokens for tokens, _ in decoded])]
                if len(scores) != n or not all(math.isfinite(s) for s in scores):
                    raise NumericError("scorer returned unusable scores")
            except Exception as exc:  # scorer failure -> single candidate
                logger.warning("scorer failed (%s); falling back to single-candidate decoding", exc)
                single = self.translate_examples([ex])[0]
                results.append(single)
                continue
            best = int(np.argmax(scores))
            al = alignments[best]
            tokens, tscore = decoded[best]
            results.append(
                TranslationResult(tokens, al.A, (al.dup_score, al.group_score, tscore), scores[best], candidates=n)
            )
        return results


def _pad_rows(rows):
    width = max(len(r) for r in rows)
    return [np.pad(np.asarray(r, dtype=np.int64), (0, width - len(r))) for r in rows]
