# tests/test_cli/test_config_commands.py

"""Tests for forgetmari config CLI commands."""

import json

import pytest

from forgetmari.cli.config_manager import DEFAULTS


@pytest.fixture
def temp_config(tmp_path, monkeypatch):
    """A CLI config file with a custom output directory."""
    path = tmp_path / "config.toml"
    path.write_text('[output]\ndir = "/tmp/mari-runs"\n')
    monkeypatch.setenv("FORGETMARI_CONFIG", str(path))
    return path


class TestConfigShow:
    """Tests for: forgetmari config show"""

    def test_shows_defaults_without_file(self, cli):
        """Defaults are shown when no config file exists."""
        result = cli("config", "show")

        assert result.exit_code == 0
        assert json.loads(result.stdout) == DEFAULTS

    def test_shows_file_values(self, cli, temp_config):
        """File values override defaults."""
        result = cli("config", "show")

        data = json.loads(result.stdout)
        assert data["output"]["dir"] == "/tmp/mari-runs"
        assert data["detector"]["k_fraction"] == 0.2

    def test_show_section(self, cli):
        """A single section can be shown."""
        result = cli("config", "show", "detector")

        assert result.exit_code == 0
        assert json.loads(result.stdout)["detector"] == "min_k"

    def test_missing_section(self, cli):
        """Unknown sections are an error."""
        result = cli("config", "show", "store")

        assert result.exit_code == 2
        assert "not found" in result.stderr


class TestConfigGet:
    """Tests for: forgetmari config get <key>"""

    def test_gets_value(self, cli, temp_config):
        """Gets a dotted key."""
        result = cli("config", "get", "output.dir")

        assert result.exit_code == 0
        assert json.loads(result.stdout) == {"value": "/tmp/mari-runs"}

    def test_env_override(self, cli, temp_config, monkeypatch):
        """FORGETMARI_OUTPUT_DIR beats the file."""
        monkeypatch.setenv("FORGETMARI_OUTPUT_DIR", "/elsewhere")

        result = cli("config", "get", "output.dir")

        assert json.loads(result.stdout)["value"] == "/elsewhere"

    def test_missing_key(self, cli):
        """Returns error for nonexistent key."""
        result = cli("config", "get", "nonexistent.key")

        assert result.exit_code != 0


class TestConfigSet:
    """Tests for: forgetmari config set <key> <value>"""

    def test_sets_value(self, cli, temp_config):
        """Sets a value and coerces numbers."""
        result = cli("config", "set", "detector.k_fraction", "0.1")
        assert result.exit_code == 0

        result = cli("config", "get", "detector.k_fraction")
        assert json.loads(result.stdout)["value"] == 0.1

    def test_creates_file(self, cli, tmp_path):
        """Setting a key creates the config file."""
        result = cli("config", "set", "output.dir", "runs/desk")

        assert result.exit_code == 0
        assert (tmp_path / "forgetmari-config.toml").exists()


class TestConfigPath:
    """Tests for: forgetmari config path"""

    def test_respects_env(self, cli, temp_config):
        result = cli("config", "path")

        assert result.stdout.strip() == str(temp_config)


class TestConfigValidate:
    """Tests for: forgetmari config validate"""

    def test_valid_file(self, cli, temp_config):
        result = cli("config", "validate")

        assert result.exit_code == 0
        assert "valid" in result.stderr.lower()

    def test_missing_file(self, cli):
        result = cli("config", "validate")

        assert result.exit_code == 2

    def test_valid_experiment(self, cli, tiny_experiment):
        result = cli("config", "validate", tiny_experiment)

        assert result.exit_code == 0

    def test_invalid_experiment(self, cli, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"unlearn": {"lambda": 2.0}}))

        result = cli("config", "validate", path)

        assert result.exit_code == 2
        assert "Validation failed" in result.stderr
