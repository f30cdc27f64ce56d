"""Parallel corpora, Pharaoh alignments, and alignment preprocessing.

Alignment matrices are dense ``uint8`` arrays with one row per target token and
one column per source token. Pharaoh pairs are ``"i-j"`` with ``i`` the source
index and ``j`` the target index, both 0-based.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    AlignmentRangeError,
    ConfigError,
    DataError,
    ParseError,
    ShapeError,
    UnprocessableSampleError,
)

logger = logging.getLogger(__name__)

SPURIOUS_TOKEN = "<spurious>"
DEFAULT_CONTINUATION_MARKER = "@@"


class NullFill(str, enum.Enum):
    COPY_PREVIOUS = "copy"
    SPURIOUS_TOKEN = "spurious"


@dataclass
class FilterConfig:
    max_duplication: int = 16
    score_filter_ratio: float = 0.05
    null_fill_strategy: NullFill = NullFill.SPURIOUS_TOKEN

    def __post_init__(self):
        self.null_fill_strategy = NullFill(self.null_fill_strategy)
        if self.max_duplication < 1:
            raise ConfigError(f"max_duplication must be >= 1, got {self.max_duplication}")
        if not 0.0 <= self.score_filter_ratio < 1.0:
            raise ConfigError(f"score_filter_ratio must lie in [0, 1), got {self.score_filter_ratio}")


@dataclass
class SentencePair:
    source_tokens: list[str]
    target_tokens: list[str]
    source_word_map: list[int] = field(default=None)
    target_word_map: Optional[list[int]] = None
    alignment_score: Optional[float] = None

    def __post_init__(self):
        self.source_tokens = list(self.source_tokens)
        self.target_tokens = list(self.target_tokens)
        if not self.source_tokens or not self.target_tokens:
            raise DataError("source and target must both be non-empty")
        if self.source_word_map is None:
            self.source_word_map = list(range(len(self.source_tokens)))
        self.source_word_map = _check_word_map(self.source_word_map, len(self.source_tokens), "source")
        if self.target_word_map is not None:
            self.target_word_map = _check_word_map(self.target_word_map, len(self.target_tokens), "target")

    @property
    def M(self) -> int:
        return len(self.source_tokens)

    @property
    def N(self) -> int:
        return len(self.target_tokens)

    @property
    def num_source_words(self) -> int:
        return self.source_word_map[-1] + 1

    def same_target_word(self, n: int, marker: str = DEFAULT_CONTINUATION_MARKER) -> bool:
        """Whether target tokens ``n-1`` and ``n`` belong to one word."""
        if n == 0:
            return False
        if self.target_word_map is not None:
            return self.target_word_map[n] == self.target_word_map[n - 1]
        return bool(marker) and self.target_tokens[n - 1].endswith(marker)


def _check_word_map(word_map, length, side):
    word_map = [int(w) for w in word_map]
    if len(word_map) != length:
        raise DataError(f"{side} word map has {len(word_map)} entries for {length} tokens")
    if word_map[0] != 0:
        raise DataError(f"{side} word map must start at word 0")
    for a, b in zip(word_map, word_map[1:]):
        if b < a or b > a + 1:
            raise DataError(f"{side} word map must be nondecreasing in unit steps: {word_map}")
    return word_map


# Pharaoh format ---------------------------------------------------------------------------


def parse_pharaoh(text: str, M: int, N: int, line: Optional[int] = None) -> frozenset[tuple[int, int]]:
    """Parse one line of ``i-j`` tokens into a set of (source, target) pairs."""
    pairs = set()
    column = 0
    for token in text.split():
        column = text.index(token, column) + 1
        src, sep, tgt = token.partition("-")
        if not sep or not src.isdigit() or not tgt.isdigit():
            raise ParseError(f"malformed alignment token {token!r}", line=line, column=column)
        i, j = int(src), int(tgt)
        if i >= M or j >= N:
            raise AlignmentRangeError(
                f"alignment {token!r} out of range for M={M}, N={N}"
                + (f" (line {line}, column {column})" if line is not None else "")
            )
        pairs.add((i, j))
        column += len(token) - 1
    return frozenset(pairs)


def format_pharaoh(pairs: Iterable[tuple[int, int]]) -> str:
    return " ".join(f"{i}-{j}" for i, j in sorted(pairs))


def to_matrix(pairs: Iterable[tuple[int, int]], M: int, N: int) -> np.ndarray:
    A = np.zeros((N, M), dtype=np.uint8)
    for i, j in pairs:
        A[j, i] = 1
    return A


def to_pairs(A: np.ndarray) -> frozenset[tuple[int, int]]:
    rows, cols = np.nonzero(A)
    return frozenset(zip(cols.tolist(), rows.tolist()))


# Word-level reduction ---------------------------------------------------------------------


def subword_to_word_matrix(word_map: Sequence[int]) -> np.ndarray:
    """Indicator ``S`` with one row per subword and one column per word."""
    word_map = np.asarray(word_map, dtype=np.int64)
    S = np.zeros((len(word_map), int(word_map.max()) + 1), dtype=np.uint8)
    S[np.arange(len(word_map)), word_map] = 1
    return S


def word_to_subword(A: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Reduce a target-subword x source-subword alignment to source words.

    ``S`` is the subword-to-word indicator (rows: source subwords). A target
    token is aligned to a word if it is aligned to any of the word's subwords.
    """
    A = np.asarray(A)
    S = np.asarray(S)
    if A.shape[1] != S.shape[0]:
        raise ShapeError(f"alignment has {A.shape[1]} source columns but S has {S.shape[0]} rows")
    if not np.all(S.sum(axis=1) == 1):
        raise ShapeError("every subword must belong to exactly one word")
    return np.minimum(A.astype(np.int64) @ S.astype(np.int64), 1).astype(np.uint8)


def expand_word_alignment(A_ws: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Broadcast a word-level alignment back onto every subword of each word."""
    if A_ws.shape[1] != S.shape[1]:
        raise ShapeError(f"word alignment has {A_ws.shape[1]} columns but S has {S.shape[1]} words")
    return np.minimum(A_ws.astype(np.int64) @ S.T.astype(np.int64), 1).astype(np.uint8)


# Null rows --------------------------------------------------------------------------------


def fill_null_rows(
    A: np.ndarray,
    pair: SentencePair,
    strategy: NullFill | str,
    marker: str = DEFAULT_CONTINUATION_MARKER,
) -> tuple[np.ndarray, bool]:
    """Give every target row at least one source link.

    ``copy``: a null row takes the previous row's links; a null first row is
    unrepairable. ``spurious``: a source column for a spurious token is
    appended; a null row copies its predecessor when both target tokens are in
    one word, otherwise it links to the spurious column alone.
    """
    strategy = NullFill(strategy)
    A = np.array(A, dtype=np.uint8)
    null = A.sum(axis=1) == 0
    if not null.any():
        return A, False

    if strategy is NullFill.COPY_PREVIOUS:
        if null[0]:
            raise UnprocessableSampleError("first target token has no alignment")
        for n in np.flatnonzero(null):
            A[n] = A[n - 1]
        return A, False

    A = np.concatenate([A, np.zeros((A.shape[0], 1), dtype=np.uint8)], axis=1)
    spurious = A.shape[1] - 1
    for n in np.flatnonzero(null):
        if pair.same_target_word(int(n), marker):
            A[n] = A[n - 1]
        else:
            A[n, spurious] = 1
    return A, True


def append_spurious_token(pair: SentencePair) -> SentencePair:
    return SentencePair(
        source_tokens=pair.source_tokens + [SPURIOUS_TOKEN],
        target_tokens=pair.target_tokens,
        source_word_map=pair.source_word_map + [pair.num_source_words],
        target_word_map=pair.target_word_map,
        alignment_score=pair.alignment_score,
    )


# Corpus filters ---------------------------------------------------------------------------


def filter_by_duplication(corpus, cap: int = 16):
    """Drop samples whose largest source fertility (column sum) exceeds ``cap``."""
    return [(pair, A) for pair, A in corpus if A.shape[1] == 0 or int(A.sum(axis=0).max()) <= cap]


def filter_by_score(corpus, ratio: float):
    """Remove the lowest-scoring ``floor(ratio * size)`` samples of every target-length bucket.

    Ties go by original corpus order. Output keeps the input order.
    """
    if not 0.0 <= ratio < 1.0:
        raise ConfigError(f"score filter ratio must lie in [0, 1), got {ratio}")
    corpus = list(corpus)
    if ratio == 0:
        return corpus
    buckets: dict[int, list[int]] = {}
    for idx, (pair, _) in enumerate(corpus):
        if pair.alignment_score is None:
            raise ConfigError(f"sample {idx} has no alignment score; score filtering needs one per sample")
        buckets.setdefault(pair.N, []).append(idx)
    dropped = set()
    for members in buckets.values():
        k = int(np.floor(ratio * len(members)))
        ranked = sorted(members, key=lambda i: (corpus[i][0].alignment_score, i))
        dropped.update(ranked[:k])
    return [item for idx, item in enumerate(corpus) if idx not in dropped]


@dataclass
class PreprocessStats:
    total: int = 0
    score_filtered: int = 0
    unprocessable: int = 0
    duplication_filtered: int = 0
    spurious_used: int = 0

    @property
    def kept(self) -> int:
        return self.total - self.score_filtered - self.unprocessable - self.duplication_filtered


def preprocess(corpus, config: FilterConfig, word_level: bool = True, marker: str = DEFAULT_CONTINUATION_MARKER):
    """Score filter, word-level reduction, null filling and the duplication cap, in that order.

    ``corpus`` holds (SentencePair, subword alignment matrix) items. Under the
    spurious strategy every kept sample gets the spurious source token so that
    training and inference see the same source layout. Returns the kept samples
    and a ``PreprocessStats``.
    """
    corpus = list(corpus)
    stats = PreprocessStats(total=len(corpus))
    if config.score_filter_ratio > 0:
        before = len(corpus)
        corpus = filter_by_score(corpus, config.score_filter_ratio)
        stats.score_filtered = before - len(corpus)

    prepared = []
    for pair, A in corpus:
        if word_level:
            A = word_to_subword(A, subword_to_word_matrix(pair.source_word_map))
        try:
            A, added = fill_null_rows(A, pair, config.null_fill_strategy, marker)
        except UnprocessableSampleError:
            stats.unprocessable += 1
            continue
        if config.null_fill_strategy is NullFill.SPURIOUS_TOKEN:
            if not added:
                A = np.concatenate([A, np.zeros((A.shape[0], 1), dtype=np.uint8)], axis=1)
            else:
                stats.spurious_used += 1
            pair = append_spurious_token(pair)
        prepared.append((pair, A))

    if stats.unprocessable:
        logger.info("dropped %d samples with a null first target row", stats.unprocessable)
    kept = filter_by_duplication(prepared, config.max_duplication)
    stats.duplication_filtered = len(prepared) - len(kept)
    return kept, stats


# File I/O ---------------------------------------------------------------------------------


def _read_lines(path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    return path.read_text(encoding="utf-8").splitlines()


def read_corpus(
    source_path,
    target_path,
    alignment_path=None,
    score_path=None,
    source_map_path=None,
    target_map_path=None,
    word_level: bool = False,
):
    """Load aligned text files into ``(SentencePair, matrix or None)`` items.

    Alignment columns index source subwords, or source words when
    ``word_level`` is set (the layout ``preprocess`` writes).
    """
    src = _read_lines(source_path)
    tgt = _read_lines(target_path)
    if len(src) != len(tgt):
        raise DataError(f"{source_path} has {len(src)} lines but {target_path} has {len(tgt)}")
    aligns = _read_lines(alignment_path) if alignment_path else None
    scores = _read_lines(score_path) if score_path else None
    src_maps = _read_lines(source_map_path) if source_map_path else None
    tgt_maps = _read_lines(target_map_path) if target_map_path else None
    for name, extra in (("alignment", aligns), ("score", scores), ("source map", src_maps), ("target map", tgt_maps)):
        if extra is not None and len(extra) != len(src):
            raise DataError(f"{name} file has {len(extra)} lines for {len(src)} sentence pairs")

    corpus = []
    for k, (s, t) in enumerate(zip(src, tgt)):
        try:
            pair = SentencePair(
                source_tokens=s.split(),
                target_tokens=t.split(),
                source_word_map=[int(w) for w in src_maps[k].split()] if src_maps else None,
                target_word_map=[int(w) for w in tgt_maps[k].split()] if tgt_maps else None,
                alignment_score=float(scores[k]) if scores else None,
            )
        except ValueError as exc:
            raise DataError(f"line {k + 1}: {exc}") from exc
        A = None
        if aligns is not None:
            width = pair.num_source_words if word_level else pair.M
            A = to_matrix(parse_pharaoh(aligns[k], width, pair.N, line=k + 1), width, pair.N)
        corpus.append((pair, A))
    return corpus


def write_corpus(corpus, out_dir, prefix: str):
    """Write ``prefix.{src,tgt,srcmap}`` plus ``align``, ``tgtmap`` and ``score`` when every sample has them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {ext: [] for ext in ("src", "tgt", "align", "srcmap", "tgtmap", "score")}
    for pair, A in corpus:
        files["src"].append(" ".join(pair.source_tokens))
        files["tgt"].append(" ".join(pair.target_tokens))
        files["srcmap"].append(" ".join(map(str, pair.source_word_map)))
        if A is not None:
            files["align"].append(format_pharaoh(to_pairs(A)))
        if pair.target_word_map is not None:
            files["tgtmap"].append(" ".join(map(str, pair.target_word_map)))
        if pair.alignment_score is not None:
            files["score"].append(repr(float(pair.alignment_score)))
    for ext, lines in files.items():
        optional = ext in ("align", "tgtmap", "score")
        if optional and (not lines or len(lines) != len(corpus)):
            continue
        (out_dir / f"{prefix}.{ext}").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
