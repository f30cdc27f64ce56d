import numpy as np
import pytest
import torch

from alignkit.align_data import to_matrix
from alignkit.neural.vocab import Vocabulary
from alignkit.synth import SynthLanguageSpec, synth_generate

torch.set_num_threads(1)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def synth_corpus(spec, n, seed):
    return [(pair, to_matrix(pairs, pair.M, pair.N)) for pair, pairs in synth_generate(spec, n, seed)]


@pytest.fixture(scope="session")
def copy_language():
    """Every token has one output, no reordering, no grouping."""
    return SynthLanguageSpec(
        source_vocab=20, num_delimiters=1, fertility_weights=(0.0, 1.0, 0.0, 0.0), rotate_k=0, merge_rate=0.0
    )


def vocab_for(corpus):
    return Vocabulary.build([pair.source_tokens + pair.target_tokens for pair, _ in corpus])


@pytest.fixture(scope="session")
def copy_model(copy_language):
    """Small model trained on the copy language, with its vocabulary and held-out corpus."""
    from alignkit.neural.config import ModelConfig, OptimConfig
    from alignkit.pipeline import Trainer, TrainingConfig, prepare_examples

    train = synth_corpus(copy_language, 800, 1)
    test = synth_corpus(copy_language, 50, 2)
    vocab = vocab_for(train + test)
    trainer = Trainer.create(
        ModelConfig(model_dim=32, hidden_dim=64, attention_heads=2, dropout_rate=0.0),
        vocab,
        OptimConfig(peak_lr=3e-3, warmup_steps=50),
        TrainingConfig(steps=300, batch_size=32, seed=1),
    )
    trainer.fit(prepare_examples(train, vocab))
    return trainer, test
