"""Test suite shared objects and setup"""

import json

import numpy as np
import pytest
from typer.testing import CliRunner

from forgetmari.checkpoint import save_checkpoint
from forgetmari.corpus import (
    Corpus,
    SplitSpec,
    load_corpus,
    make_split,
    synthesize_corpus,
    write_corpus,
)
from forgetmari.langmodel import ModelArch, SequenceBatch, init_checkpoint
from forgetmari.unlearner import UnlearnConfig, finetune
from forgetmari.vocab import Vocabulary

# Small enough for finite-difference checks over every parameter
TINY_ARCH = ModelArch(vocab_size=5, context_len=2, embed_dim=2, hidden_dim=3)

AB_TEXT = ["abababab", "babababa", "abababab", "babababa"]


# ============================================================
# CLI Runner Fixtures
# ============================================================


@pytest.fixture
def runner():
    """Typer CLI test runner."""
    return CliRunner()


@pytest.fixture
def cli(runner):
    """
    Convenience fixture for invoking CLI commands.

    Usage:
        result = cli("detect", "model.ckpt", "--members", "u.jsonl", "--holdout", "h.jsonl")
        assert result.exit_code == 0
    """
    from forgetmari.cli import app

    def invoke(*args):
        return runner.invoke(app, [str(a) for a in args])

    return invoke


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Keep every test away from the user's ~/.forgetmari and MARI_* variables."""
    monkeypatch.setenv("FORGETMARI_CONFIG", str(tmp_path / "forgetmari-config.toml"))
    for var in (
        "FORGETMARI_OUTPUT_DIR",
        "MARI_SEED",
        "MARI_OUTPUT_DIR",
        "MARI_METHOD",
        "MARI_LAMBDA",
        "MARI_MODE",
        "MARI_EPOCHS",
        "MARI_LR",
        "MARI_K_FRACTION",
    ):
        monkeypatch.delenv(var, raising=False)


# ============================================================
# Model Fixtures
# ============================================================


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_ckpt():
    """Randomly initialized model over 3 symbols plus <pad>/<bos>."""
    return init_checkpoint(TINY_ARCH, seed=3, scale=0.5)


@pytest.fixture
def tiny_batches():
    """(retain, unlearn) batches with padding, T=4."""
    retain = SequenceBatch.from_ids([[2, 3, 4, 2], [3, 3, 2]], 4)
    unlearn = SequenceBatch.from_ids([[4, 4, 2, 3], [2, 4], [3, 2, 4, 4]], 4)
    return retain, unlearn


@pytest.fixture
def ab_vocab():
    return Vocabulary.build(AB_TEXT)


@pytest.fixture
def ab_batch(ab_vocab):
    return SequenceBatch.from_texts(ab_vocab, AB_TEXT, 8)


# ============================================================
# Corpus Fixtures
# ============================================================


@pytest.fixture
def synthetic_files(tmp_path):
    """Small synthetic corpus split into unlearn/retain/validation/holdout files."""
    corpora = synthesize_corpus(n_sentences=24, overlap=0.2, seed=1, n_holdout=8, n_validation=8)
    sents = corpora.train.sentences()
    d_u, d_r = make_split(sents, SplitSpec())
    files = {
        "train": write_corpus(corpora.train, tmp_path / "train.jsonl"),
        "unlearn": write_corpus(Corpus(tuple(d_u)), tmp_path / "unlearn.jsonl"),
        "retain": write_corpus(Corpus(tuple(d_r)), tmp_path / "retain.jsonl"),
        "validation": write_corpus(corpora.validation, tmp_path / "validation.jsonl"),
        "holdout": write_corpus(corpora.holdout, tmp_path / "holdout.jsonl"),
    }
    return files


@pytest.fixture
def tiny_experiment(tmp_path):
    """Experiment JSON with a few sentences and a couple of epochs per phase."""
    path = tmp_path / "experiment.json"
    path.write_text(
        json.dumps(
            {
                "seed": 4,
                "corpus": {"synthetic": {"n_sentences": 16, "n_holdout": 6, "n_validation": 6}},
                "model": {"context_len": 3, "embed_dim": 4, "hidden_dim": 8, "seq_len": 12},
                "finetune": {"epochs": 2, "lr": 0.5, "batch_size": 8},
                "unlearn": {"epochs": 2, "lr": 0.1, "batch_size": 4, "stop_policy": "none"},
                "bounds": {"epsilon": 0.1, "n_paths": 2},
            }
        )
    )
    return path


@pytest.fixture
def trained_ckpt(tmp_path, synthetic_files):
    """Briefly fine-tuned checkpoint whose vocabulary covers every synthetic file."""
    texts = [s for path in synthetic_files.values() for s in load_corpus(path).sentences()]
    vocab = Vocabulary.build(texts)
    batch = SequenceBatch.from_texts(vocab, texts, 16)
    init = init_checkpoint(ModelArch(vocab.size, 2, 3, 8), seed=0, vocab=vocab)
    cfg = UnlearnConfig(method="none", lr=0.5, epochs=2, batch_size=16, optimizer="sgd")
    ckpt, _ = finetune(init, batch, cfg)
    return save_checkpoint(ckpt, tmp_path / "trained.ckpt")


# ============================================================
# Assertion Helpers
# ============================================================


def assert_json_output(result, required_keys: list = None):
    """Assert CLI output is valid JSON with optional required keys."""
    assert result.exit_code == 0, f"Command failed: {result.stdout}{result.stderr}"
    try:
        data = json.loads(result.stdout)
    except json.JSONDecodeError:
        pytest.fail(f"Output is not valid JSON: {result.stdout}")
    for key in required_keys or []:
        assert key in data, f"Missing key {key} in output"
    return data
