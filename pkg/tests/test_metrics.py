import math
from types import SimpleNamespace

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from alignkit.errors import DataError
from alignkit.metrics import aligner_accuracy, corpus_bleu, repetition_ratio, token_accuracy

from conftest import synth_corpus, vocab_for
from alignkit.pipeline import prepare_examples
from alignkit.synth import SynthLanguageSpec


def test_repetition_examples():
    assert repetition_ratio([["a", "b", "c"]]).repeat_ratio == 0.0
    assert repetition_ratio([["a", "a", "b"]]).repeat_ratio == pytest.approx(1 / 3)
    report = repetition_ratio([["a", "a", "a"]])
    assert report.repeat_ratio == pytest.approx(2 / 3) and report.token_count == 3


def test_repetition_does_not_cross_sentences():
    assert repetition_ratio([["a"], ["a"]]).repeat_ratio == 0.0


def test_repetition_empty_corpus():
    with pytest.raises(DataError):
        repetition_ratio([[]])


@given(st.lists(st.lists(st.sampled_from("abc"), min_size=1, max_size=6), min_size=1, max_size=6), st.randoms())
def test_repetition_order_invariant_and_bounded(corpus, random):
    shuffled = list(corpus)
    random.shuffle(shuffled)
    r = repetition_ratio(corpus).repeat_ratio
    assert 0.0 <= r <= 1.0
    assert r == pytest.approx(repetition_ratio(shuffled).repeat_ratio)


def test_token_accuracy():
    assert token_accuracy([["a", "b"]], [["a", "c", "d"]]) == pytest.approx(1 / 3)
    with pytest.raises(DataError):
        token_accuracy([["a"]], [])


# BLEU --------------------------------------------------------------------------------------

HYP = ["the cat sat on the mat".split(), "a dog runs".split(), "hello world".split()]
REF = ["the cat sat on a mat".split(), "the dog runs fast".split(), "hello world".split()]


def test_bleu_hand_fixture():
    # clipped matches / candidate n-grams per order, summed over the three sentences:
    #   1-grams 9/11, 2-grams 5/8, 3-grams 2/5, 4-grams 1/3
    # hypothesis length 11 < reference length 12 -> brevity penalty exp(1 - 12/11)
    expected = 100 * math.exp(-1 / 11) * (9 / 11 * 5 / 8 * 2 / 5 * 1 / 3) ** 0.25
    assert corpus_bleu(HYP, REF) == pytest.approx(expected, abs=1e-9)


def test_bleu_exact_match_and_symmetry():
    assert corpus_bleu(REF, REF) == pytest.approx(100.0)
    assert corpus_bleu([["a"]], [["a"]]) == pytest.approx(100.0)


def test_bleu_no_overlap():
    assert corpus_bleu([["x", "y"]], [["a", "b"]]) == 0.0


def test_bleu_smoothing_floor():
    # unigram precision 1/2, bigram 0 matches floored to 0.1 of 1; no 3-/4-grams
    assert corpus_bleu([["a", "b"]], [["a", "c"]]) == pytest.approx(100 * math.sqrt(0.5 * 0.1))
    assert corpus_bleu([["a", "b"]], [["a", "c"]], smooth=False) == 0.0


def test_bleu_length_mismatch():
    with pytest.raises(DataError):
        corpus_bleu(HYP, REF[:2])


# aligner accuracy --------------------------------------------------------------------------


class StubModel:
    """Returns fixed logits built from the batch, standing in for a trained aligner."""

    def __init__(self, dup_class=None):
        self.dup_class = dup_class
        self.cfg = SimpleNamespace(max_duplication_class=16)

    def eval(self):
        return self

    def __call__(self, batch):
        big = 50.0
        if self.dup_class is None:
            dup = torch.nn.functional.one_hot(batch.c, 17).float() * big
        else:
            dup = torch.zeros(*batch.c.shape, 17)
            dup[..., self.dup_class] = big
        perm = torch.nn.functional.one_hot(batch.perm, batch.perm.shape[1]).float()
        group = torch.nn.functional.one_hot(batch.group_labels, 2).float() * big
        return {"dup_logits": dup, "perm_log_probs": torch.log(perm + 1e-12), "group_logits": group}


@pytest.fixture(scope="module")
def gold_examples():
    corpus = synth_corpus(SynthLanguageSpec(), 60, 3)
    return prepare_examples(corpus, vocab_for(corpus))


def test_perfect_predictor(gold_examples):
    acc = aligner_accuracy(StubModel(), gold_examples, batch_size=16)
    assert (acc.dup_acc, acc.perm_acc, acc.group_acc) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("cls", [0, 1, 2])
def test_constant_duplication_predictor_scores_class_frequency(gold_examples, cls):
    counts = np.concatenate([ex.c for ex in gold_examples])
    acc = aligner_accuracy(StubModel(dup_class=cls), gold_examples, batch_size=7)
    assert acc.dup_acc == pytest.approx(float(np.mean(counts == cls)))
    assert 0.0 <= acc.dup_acc <= 1.0


def test_aligner_accuracy_needs_gold(gold_examples):
    ex = gold_examples[0]
    bare = type(ex)(src=ex.src, word_map=ex.word_map, tgt=ex.tgt)
    with pytest.raises(DataError):
        aligner_accuracy(StubModel(), [bare])
