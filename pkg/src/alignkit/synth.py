"""Seeded synthetic language with exact gold alignments.

A sentence is a run of clauses separated by delimiter tokens. Translation:

1. reordering: inside every clause the source positions are rotated left by
   ``rotate_k`` (delimiters stay put);
2. fertility: source token ``t`` emits ``fertility[t]`` target tokens, the j-th
   being ``lexicon[t][j]`` (one-to-many, and zero-fertility deletion);
3. grouping: a particle token's single output fuses with the next emitted
   token when that token comes from a later source position in the same clause
   (many-to-one).

The language (fertility table, particle set) is a pure function of
``language_seed``; a corpus is a pure function of (spec, n, seed).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .align_data import SentencePair


@dataclass
class SynthLanguageSpec:
    source_vocab: int = 50
    num_delimiters: int = 2
    max_fertility: int = 3
    # probabilities of fertility 0, 1, 2, 3 for content tokens
    fertility_weights: tuple = (0.08, 0.62, 0.2, 0.1)
    rotate_k: int = 1
    clause_length: tuple = (2, 4)
    clauses: tuple = (1, 3)
    # fraction of content tokens that are particles (fuse with their successor)
    merge_rate: float = 0.1
    language_seed: int = 7

    def __post_init__(self):
        self.fertility_weights = tuple(self.fertility_weights)
        self.clause_length = tuple(self.clause_length)
        self.clauses = tuple(self.clauses)
        if len(self.fertility_weights) != self.max_fertility + 1:
            raise ValueError("fertility_weights needs one entry per fertility 0..max_fertility")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SynthLanguage:
    spec: SynthLanguageSpec
    fertility: dict = field(default_factory=dict)
    particles: frozenset = frozenset()

    @classmethod
    def from_spec(cls, spec: SynthLanguageSpec) -> "SynthLanguage":
        rng = np.random.default_rng(spec.language_seed)
        content = list(range(spec.num_delimiters, spec.source_vocab))
        fert = {t: 1 for t in range(spec.num_delimiters)}
        weights = np.asarray(spec.fertility_weights, dtype=float)
        for t in content:
            fert[t] = int(rng.choice(len(weights), p=weights / weights.sum()))
        is_particle = rng.random(len(content)) < spec.merge_rate
        particles = frozenset(t for t, p in zip(content, is_particle) if p)
        for t in particles:
            fert[t] = 1
        return cls(spec=spec, fertility=fert, particles=particles)

    def is_delimiter(self, t: int) -> bool:
        return t < self.spec.num_delimiters

    @staticmethod
    def source_token(t: int) -> str:
        return f"s{t}"

    def target_token(self, t: int, j: int) -> str:
        if self.is_delimiter(t):
            return f"p{t}"
        return f"t{t}" if j == 1 else f"t{t}.{j}"

    @staticmethod
    def fused_token(particle: int, t: int, j: int) -> str:
        return f"f{particle}+{t}" if j == 1 else f"f{particle}+{t}.{j}"

    def sample_source(self, rng) -> list[int]:
        spec = self.spec
        content = np.arange(spec.num_delimiters, spec.source_vocab)
        while True:
            tokens = []
            for k in range(int(rng.integers(spec.clauses[0], spec.clauses[1] + 1))):
                if k:
                    tokens.append(int(rng.integers(0, spec.num_delimiters)))
                length = int(rng.integers(spec.clause_length[0], spec.clause_length[1] + 1))
                tokens.extend(int(t) for t in rng.choice(content, size=length))
            if sum(self.fertility[t] for t in tokens) > 0:
                return tokens

    def translate(self, source: list[int]):
        """Target token strings and the (source, target) alignment pairs."""
        order = []
        clause = []
        for m, t in enumerate(source + [None]):
            if t is None or self.is_delimiter(t):
                k = self.spec.rotate_k % len(clause) if clause else 0
                order.extend(clause[k:] + clause[:k])
                clause = []
                if t is not None:
                    order.append(m)
            else:
                clause.append(m)

        elements = [(m, j) for m in order for j in range(1, self.fertility[source[m]] + 1)]
        clause_id = np.cumsum([self.is_delimiter(t) for t in source])
        target, pairs = [], set()
        i = 0
        while i < len(elements):
            m, j = elements[i]
            t = source[m]
            if t in self.particles and i + 1 < len(elements):
                m2, j2 = elements[i + 1]
                t2 = source[m2]
                if (
                    m2 > m
                    and clause_id[m2] == clause_id[m]
                    and not self.is_delimiter(t2)
                    and t2 not in self.particles
                ):
                    n = len(target)
                    target.append(self.fused_token(t, t2, j2))
                    pairs.update({(m, n), (m2, n)})
                    i += 2
                    continue
            pairs.add((m, len(target)))
            target.append(self.target_token(t, j))
            i += 1
        return target, frozenset(pairs)


def synth_generate(spec: SynthLanguageSpec, n_sentences: int, seed: int):
    """``n_sentences`` of (SentencePair, gold Pharaoh pair set)."""
    lang = SynthLanguage.from_spec(spec)
    rng = np.random.default_rng(seed)
    corpus = []
    for _ in range(n_sentences):
        source = lang.sample_source(rng)
        target, pairs = lang.translate(source)
        pair = SentencePair([lang.source_token(t) for t in source], target)
        corpus.append((pair, pairs))
    return corpus
