import itertools

import numpy as np
import pytest
import torch

from alignkit.decomp import check_structure, decompose
from alignkit.errors import ConfigError, NumericError
from alignkit.neural.config import ModelConfig, OptimConfig
from alignkit.pipeline import (
    RescoreConfig,
    Trainer,
    TrainingConfig,
    Translator,
    fix_empty_duplication,
    generate_duplication_candidates,
    generate_grouping_candidates,
    prepare_examples,
)
from alignkit.synth import SynthLanguageSpec

from conftest import synth_corpus, vocab_for


def log_probs(rng, M, K):
    return np.log(rng.dirichlet(np.ones(K), size=M))


# candidates --------------------------------------------------------------------------------


def test_zero_toggles_gives_argmax(rng):
    lp = log_probs(rng, 6, 5)
    cands = generate_duplication_candidates(lp, 0, 4)
    assert len(cands) == 1
    np.testing.assert_array_equal(cands[0][0], lp.argmax(-1))


def test_two_toggles_fill_a_pool_of_four(rng):
    lp = log_probs(rng, 6, 5)
    cands = generate_duplication_candidates(lp, 2, 4)
    assert len(cands) == 4
    low = np.sort(np.argsort(lp.max(-1))[:2])
    top2 = np.argsort(-lp, axis=-1)[:, :2]
    expected = set()
    for choice in itertools.product((0, 1), repeat=2):
        c = lp.argmax(-1).copy()
        for pos, k in zip(low, choice):
            c[pos] = top2[pos, k]
        expected.add(tuple(c))
    assert {tuple(c) for c, _ in cands} == expected


def test_candidates_sorted_by_joint_and_unique(rng):
    for _ in range(50):
        lp = log_probs(rng, int(rng.integers(1, 9)), 4)
        cands = generate_duplication_candidates(lp, 4, 16)
        joints = [j for _, j in cands]
        assert joints == sorted(joints, reverse=True)
        for c, j in cands:
            assert j == pytest.approx(lp[np.arange(len(c)), c].sum())
        assert len({c.tobytes() for c, _ in cands}) == len(cands) <= 2 ** 4
        np.testing.assert_array_equal(cands[0][0], lp.argmax(-1))


def test_grouping_candidates_never_toggle_first_slot(rng):
    for _ in range(50):
        L = int(rng.integers(1, 9))
        lp = log_probs(rng, L, 2)
        cands = generate_grouping_candidates(lp, 4, 16)
        assert all(g[0] == 0 for g, _ in cands)
        assert len({g.tobytes() for g, _ in cands}) == len(cands) <= 2 ** min(4, L - 1)
        joints = [j for _, j in cands]
        assert joints == sorted(joints, reverse=True)
    assert len(generate_grouping_candidates(log_probs(rng, 5, 2), 0, 2)) == 1
    assert len(generate_grouping_candidates(log_probs(rng, 5, 2), 2, 4)) == 4


def test_fix_empty_duplication():
    lp = np.log(np.array([[0.9, 0.1], [0.6, 0.4], [0.8, 0.2]]))
    np.testing.assert_array_equal(fix_empty_duplication(np.zeros(3, dtype=int), lp), [0, 1, 0])
    np.testing.assert_array_equal(fix_empty_duplication(np.array([1, 0, 0]), lp), [1, 0, 0])


def test_rescore_config_validation():
    with pytest.raises(ConfigError):
        RescoreConfig(m_prime=1, a=3)
    with pytest.raises(ConfigError):
        RescoreConfig(b=0)
    cfg = RescoreConfig()
    assert (cfg.m_prime, cfg.l_prime, cfg.a, cfg.b) == (4, 4, 4, 2)


# training ----------------------------------------------------------------------------------


def small_setup(**model_kw):
    corpus = synth_corpus(SynthLanguageSpec(), 8, 1)
    vocab = vocab_for(corpus)
    cfg = ModelConfig(model_dim=16, hidden_dim=32, attention_heads=2, dropout_rate=0.0, **model_kw)
    trainer = Trainer.create(cfg, vocab, OptimConfig(), TrainingConfig(batch_size=8))
    return trainer, prepare_examples(corpus, vocab)


def test_first_step_losses_finite_and_nonnegative():
    trainer, examples = small_setup()
    values = trainer.train_step(examples)
    assert set(values) == {"translation", "duplication", "permutation", "grouping", "total"}
    assert all(np.isfinite(v) and v >= 0 for v in values.values())


def test_zero_weights_leave_translation_loss():
    trainer, examples = small_setup(loss_weights=(0.0, 0.0, 0.0))
    values = trainer.train_step(examples)
    assert values["total"] == values["translation"]


def test_non_finite_loss_aborts():
    trainer, examples = small_setup()
    with torch.no_grad():
        trainer.model.decoder.out.bias.fill_(float("nan"))
    with pytest.raises(NumericError):
        trainer.train_step(examples)


def test_overfit_single_pair():
    # without label smoothing the translation loss can approach zero
    trainer, examples = small_setup(label_smoothing=0.0)
    trainer.optim_cfg.peak_lr = 3e-3
    for _ in range(500):
        values = trainer.train_step(examples[:1])
    assert values["translation"] < 0.1
    out = Translator(trainer.model, trainer.vocab).oracle_translate_examples(examples[:1])
    assert out[0].tokens == trainer.vocab.decode(examples[0].tgt.tolist())


def test_fit_logs_are_seeded():
    a, examples = small_setup()
    b, _ = small_setup()
    ha = a.fit(examples, steps=3)
    hb = b.fit(examples, steps=3)
    assert [{k: v for k, v in r.items() if k != "elapsed"} for r in ha] == [
        {k: v for k, v in r.items() if k != "elapsed"} for r in hb
    ]


# inference ---------------------------------------------------------------------------------


def test_copy_model_translates_with_identity_alignment(copy_model):
    trainer, test = copy_model
    examples = prepare_examples([(p, None) for p, _ in test], trainer.vocab)
    results = Translator(trainer.model, trainer.vocab).translate_examples(examples)
    for res, (pair, _) in zip(results, test):
        assert res.tokens == pair.target_tokens
        np.testing.assert_array_equal(res.alignment, np.eye(pair.N))


def test_translate_alignment_invariants_and_determinism(copy_model):
    trainer, _ = copy_model
    corpus = synth_corpus(SynthLanguageSpec(source_vocab=20, num_delimiters=1), 30, 9)
    examples = prepare_examples([(p, None) for p, _ in corpus], trainer.vocab)
    translator = Translator(trainer.model, trainer.vocab, batch_size=7)
    first = translator.translate_examples(examples)
    again = translator.translate_examples(examples)
    for a, b in zip(first, again):
        assert a.tokens == b.tokens and np.array_equal(a.alignment, b.alignment)
        A = a.alignment
        assert set(np.unique(A)) <= {0, 1}
        assert np.all(A.sum(axis=1) >= 1)
        assert A.shape[0] == len(a.tokens)
        check_structure(decompose(A))


def test_oracle_at_least_as_accurate_as_predicted(copy_model):
    trainer, test = copy_model
    examples = prepare_examples(test, trainer.vocab)
    translator = Translator(trainer.model, trainer.vocab)

    def correct(results):
        return sum(sum(a == b for a, b in zip(r.tokens, p.target_tokens)) for r, (p, _) in zip(results, test))

    assert correct(translator.oracle_translate_examples(examples)) >= correct(translator.translate_examples(examples))


def test_ablations_run(copy_model):
    trainer, test = copy_model
    examples = prepare_examples(test[:5], trainer.vocab)
    translator = Translator(trainer.model, trainer.vocab)
    for ablate in ("D", "P", "G"):
        assert len(translator.translate_examples(examples, ablate=ablate)) == 5
        assert len(translator.oracle_translate_examples(examples, ablate=ablate)) == 5
    with pytest.raises(ConfigError):
        translator.translate_examples(examples, ablate="X")


# re-scoring --------------------------------------------------------------------------------


def length_scorer(source, candidates):
    return [-abs(len(c) - len(source)) + 0.01 * len(set(c)) for c in candidates]


def test_rescore_single_candidate_equals_translate(copy_model):
    trainer, test = copy_model
    examples = prepare_examples([(p, None) for p, _ in test[:10]], trainer.vocab)
    translator = Translator(trainer.model, trainer.vocab)
    plain = translator.translate_examples(examples)
    cfg = RescoreConfig(m_prime=0, l_prime=0, a=1, b=1)
    rescored = translator.rescore_examples(examples, cfg, length_scorer)
    for p, r in zip(plain, rescored):
        assert p.tokens == r.tokens and r.candidates == 1
        np.testing.assert_array_equal(p.alignment, r.alignment)


def test_rescore_bounds_and_improves_scorer(copy_model):
    trainer, test = copy_model
    examples = prepare_examples([(p, None) for p, _ in test[:10]], trainer.vocab)
    translator = Translator(trainer.model, trainer.vocab)
    plain = translator.translate_examples(examples)
    rescored = translator.rescore_examples(examples, RescoreConfig(), length_scorer)
    for ex, p, r in zip(examples, plain, rescored):
        assert 1 <= r.candidates <= 8
        source = trainer.vocab.decode(ex.src.tolist())
        assert r.scorer_log_prob >= length_scorer(source, [p.tokens])[0]


def test_rescore_falls_back_when_scorer_fails(copy_model):
    trainer, test = copy_model
    examples = prepare_examples([(p, None) for p, _ in test[:3]], trainer.vocab)
    translator = Translator(trainer.model, trainer.vocab)

    def broken(source, candidates):
        raise RuntimeError("scorer offline")

    plain = translator.translate_examples(examples)
    rescored = translator.rescore_examples(examples, RescoreConfig(), broken)
    assert [r.tokens for r in rescored] == [p.tokens for p in plain]
    assert all(r.scorer_log_prob is None for r in rescored)


def test_rescore_without_regrouping(copy_model):
    trainer, test = copy_model
    examples = prepare_examples([(p, None) for p, _ in test[:5]], trainer.vocab)
    translator = Translator(trainer.model, trainer.vocab)
    out = translator.rescore_examples(examples, RescoreConfig(regroup_per_candidate=False), length_scorer)
    assert all(1 <= r.candidates <= 8 for r in out)


def test_nat_baseline_decodes_at_reference_length():
    trainer, examples = small_setup(architecture="nat")
    trainer.train_step(examples)
    results = Translator(trainer.model, trainer.vocab).translate_examples(examples)
    assert [len(r.tokens) for r in results] == [len(ex.tgt) for ex in examples]
