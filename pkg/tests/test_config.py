"""Tests for PCRPO process settings."""

from src.config import Settings


class TestSettings:
    """Test Settings loads from environment."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("PCRPO_OUTPUT_ROOT", raising=False)
        s = Settings()
        assert s.output_root == "runs"
        assert s.jobs == 1
        assert s.default_seeds == [0, 1, 2, 3, 4]
        assert s.gradient_dims == [2, 8, 64]

    def test_env_prefix(self, settings_env, monkeypatch):
        monkeypatch.setenv("PCRPO_JOBS", "4")
        s = Settings()
        assert s.jobs == 4
        assert s.log_level == "warning"

    def test_list_from_env(self, monkeypatch):
        monkeypatch.setenv("PCRPO_DEFAULT_SEEDS", "[7, 8]")
        assert Settings().default_seeds == [7, 8]
