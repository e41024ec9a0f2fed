"""Shared test fixtures for the PCRPO toolkit."""

import json
from pathlib import Path
from typing import Any, Callable

import pytest

from src.cmdp import CmdpSpec, build_gridworld, build_random

# ---------------------------------------------------------------------------
# Environment fixture (needed by any test that instantiates Settings)
# ---------------------------------------------------------------------------


@pytest.fixture
def settings_env(monkeypatch, tmp_path):
    """Point output at a temp dir and keep logs quiet."""
    monkeypatch.setenv("PCRPO_OUTPUT_ROOT", str(tmp_path / "runs"))
    monkeypatch.setenv("PCRPO_LOG_LEVEL", "warning")


# ---------------------------------------------------------------------------
# CMDP fixtures
# ---------------------------------------------------------------------------

# Shortcut through the hazard: V_r = 8.1, V_c = 0.9.
# Detour around it: V_r = 6.561, V_c = 0.
GRID_SHORTCUT_REWARD = 8.1
GRID_SHORTCUT_COST = 0.9
GRID_DETOUR_REWARD = 6.561


@pytest.fixture
def gridworld() -> CmdpSpec:
    """3x3 grid, start (0,1), hazard (1,1), goal (2,1), b = 0.45."""
    return build_gridworld(3, 3, [(1, 1)], (2, 1), gamma=0.9, cost_limit=0.45, start=(0, 1))


@pytest.fixture
def random_cmdp() -> CmdpSpec:
    return build_random(5, 3, gamma=0.8, seed=0)


@pytest.fixture
def two_cost_cmdp() -> CmdpSpec:
    return build_random(4, 2, n_costs=2, gamma=0.8, seed=3)


# ---------------------------------------------------------------------------
# Document helpers
# ---------------------------------------------------------------------------


@pytest.fixture
def write_doc(tmp_path) -> Callable[[str, Any], Path]:
    """Write a JSON document under tmp_path and return its path."""

    def _write(name: str, payload: Any) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return _write
