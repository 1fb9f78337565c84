# tests/test_cli/test_train_commands.py

"""Tests for forgetmari finetune, gold and unlearn."""

import csv

import numpy as np
import pytest

from forgetmari.checkpoint import load_checkpoint
from forgetmari.const import TRACE_COLUMNS
from tests.conftest import assert_json_output

TINY_DIMS = ["--context-len", "2", "--embed-dim", "3", "--hidden-dim", "6", "--seq-len", "16"]


def data_args(files, holdout=True):
    args = [
        "--unlearn",
        files["unlearn"],
        "--retain",
        files["retain"],
        "--validation",
        files["validation"],
    ]
    if holdout:
        args += ["--vocab-corpus", files["holdout"]]
    return args


@pytest.fixture
def baseline(cli, tmp_path, synthetic_files):
    """Checkpoint written by 'forgetmari finetune'."""
    out = tmp_path / "baseline.ckpt"
    result = cli("finetune", *data_args(synthetic_files), *TINY_DIMS, "--epochs", 2, "-o", out)
    assert result.exit_code == 0, result.stderr
    return out


class TestFinetune:
    """Tests for: forgetmari finetune"""

    def test_writes_checkpoint_and_trace(self, cli, tmp_path, synthetic_files):
        out, trace = tmp_path / "m.ckpt", tmp_path / "trace.csv"

        result = cli(
            "finetune",
            *data_args(synthetic_files),
            *TINY_DIMS,
            "--epochs",
            3,
            "-o",
            out,
            "--trace",
            trace,
        )

        data = assert_json_output(result, ["checkpoint", "epochs_run", "final"])
        assert data["epochs_run"] == 3
        assert load_checkpoint(out).arch.hidden_dim == 6
        with open(trace) as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == TRACE_COLUMNS
        assert [int(r["epoch"]) for r in rows] == [0, 1, 2, 3]

    def test_zero_epochs(self, cli, tmp_path, synthetic_files):
        out = tmp_path / "m.ckpt"

        result = cli("finetune", *data_args(synthetic_files), *TINY_DIMS, "--epochs", 0, "-o", out)

        assert assert_json_output(result)["epochs_run"] == 0

    def test_rejects_zero_lr(self, cli, tmp_path, synthetic_files):
        out = tmp_path / "m.ckpt"

        result = cli("finetune", *data_args(synthetic_files), *TINY_DIMS, "--lr", 0, "-o", out)

        assert result.exit_code != 0
        assert not out.exists()

    def test_missing_input(self, cli, tmp_path, synthetic_files):
        result = cli(
            "finetune",
            "--unlearn",
            tmp_path / "nope.jsonl",
            "--retain",
            synthetic_files["retain"],
            "--validation",
            synthetic_files["validation"],
            "-o",
            tmp_path / "m.ckpt",
        )

        assert result.exit_code != 0


class TestGold:
    """Tests for: forgetmari gold"""

    def test_same_vocabulary_as_baseline(self, cli, tmp_path, synthetic_files, baseline):
        out = tmp_path / "gold.ckpt"

        result = cli("gold", *data_args(synthetic_files), *TINY_DIMS, "--epochs", 2, "-o", out)

        assert result.exit_code == 0
        assert load_checkpoint(out).vocab == load_checkpoint(baseline).vocab
        gold, base = load_checkpoint(out).params, load_checkpoint(baseline).params
        assert not np.array_equal(gold, base)


class TestUnlearn:
    """Tests for: forgetmari unlearn"""

    @pytest.mark.parametrize("method", ["mari", "ga", "gd", "klga"])
    def test_methods(self, cli, tmp_path, synthetic_files, baseline, method):
        out = tmp_path / f"{method}.ckpt"

        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            "--method",
            method,
            "--epochs",
            1,
            "--batch-size",
            4,
            "--seq-len",
            16,
            "--stop-policy",
            "none",
            "-o",
            out,
        )

        data = assert_json_output(result, ["epochs_run"])
        assert data["epochs_run"] == 1
        assert out.exists()

    def test_token_wise_mode(self, cli, tmp_path, synthetic_files, baseline):
        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            "--mode",
            "token_wise",
            "--epochs",
            1,
            "--seq-len",
            16,
            "-o",
            tmp_path / "u.ckpt",
        )

        assert result.exit_code == 0

    def test_detector_policy(self, cli, tmp_path, synthetic_files, baseline):
        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            "--holdout",
            synthetic_files["holdout"],
            "--stop-policy",
            "detector",
            "--epochs",
            2,
            "--seq-len",
            16,
            "-o",
            tmp_path / "u.ckpt",
        )

        assert result.exit_code == 0

    def test_detector_policy_needs_holdout(self, cli, tmp_path, synthetic_files, baseline):
        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            "--stop-policy",
            "detector",
            "-o",
            tmp_path / "u.ckpt",
        )

        assert result.exit_code != 0
        assert not (tmp_path / "u.ckpt").exists()

    def test_unknown_method(self, cli, tmp_path, synthetic_files, baseline):
        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            "--method",
            "npo",
            "-o",
            tmp_path / "u.ckpt",
        )

        assert result.exit_code != 0

    def test_lambda_out_of_range(self, cli, tmp_path, synthetic_files, baseline):
        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            "--lambda",
            1.5,
            "-o",
            tmp_path / "u.ckpt",
        )

        assert result.exit_code != 0

    def test_corrupt_checkpoint(self, cli, tmp_path, synthetic_files):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"garbage")

        result = cli(
            "unlearn", bad, *data_args(synthetic_files, holdout=False), "-o", tmp_path / "u.ckpt"
        )

        assert result.exit_code == 2
        assert "Error" in result.stderr

    @pytest.mark.parametrize("option", [["--k", 0], ["--lr", 0], ["--lr", -0.1]])
    def test_rejects_non_positive(self, cli, tmp_path, synthetic_files, baseline, option):
        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            *option,
            "-o",
            tmp_path / "u.ckpt",
        )

        assert result.exit_code != 0
        assert not (tmp_path / "u.ckpt").exists()

    def test_sgd_optimizer(self, cli, tmp_path, synthetic_files, baseline):
        result = cli(
            "unlearn",
            baseline,
            *data_args(synthetic_files, holdout=False),
            "--optimizer",
            "sgd",
            "--lr",
            0.1,
            "--epochs",
            1,
            "--seq-len",
            16,
            "--stop-policy",
            "none",
            "-o",
            tmp_path / "u.ckpt",
        )

        assert assert_json_output(result)["epochs_run"] == 1
