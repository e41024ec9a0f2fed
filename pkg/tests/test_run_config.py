"""Tests for src.run_config."""

from pathlib import Path

import pytest

from src.run_config import (
    ConfigError,
    GridworldEnv,
    RandomEnv,
    RunConfig,
    SweepSpec,
    apply_override,
    apply_overrides,
    field_for,
    load_run_config,
    load_sweep_spec,
)
from src.trainer import Algorithm, SlackCase


@pytest.fixture
def run_doc():
    return {
        "name": "grid",
        "environment": {"builder": "gridworld"},
        "trainer": {"total_iters": 5},
        "seeds": [0, 1],
    }


# -------------------------------------------------------------------
# documents
# -------------------------------------------------------------------


def test_defaults_build_the_reference_gridworld():
    cfg = RunConfig()
    spec = cfg.environment.build()
    assert spec.n_states == 9
    assert spec.limits[0] == 0.45
    assert cfg.trainer.algorithm == Algorithm.PCRPO


def test_environment_union_dispatches_on_builder():
    cfg = RunConfig.model_validate({"environment": {"builder": "random", "n_states": 4}})
    assert isinstance(cfg.environment, RandomEnv)
    assert cfg.environment.build().n_states == 4


def test_file_environment_requires_existing_document(tmp_path):
    cfg = RunConfig.model_validate({"environment": {"builder": "file", "path": str(tmp_path / "nope.json")}})
    with pytest.raises(ConfigError, match="not found"):
        cfg.environment.build()


def test_seeds_must_be_distinct_and_nonempty():
    with pytest.raises(ValueError, match="distinct"):
        RunConfig(seeds=[1, 1])
    with pytest.raises(ValueError, match="at least one seed"):
        RunConfig(seeds=[])


def test_unknown_slack_preset_rejected():
    with pytest.raises(ValueError, match="unknown slack preset"):
        RunConfig(slack_preset="7S")


def test_explicit_slack_wins_over_preset():
    cfg = RunConfig.model_validate({"slack": {"case": "two"}, "slack_preset": "4S-F"})
    assert cfg.resolve_slack(GridworldEnv().build()).case == SlackCase.TWO


def test_preset_scaled_to_cost_limit():
    slack = RunConfig(slack_preset="4S-F").resolve_slack(GridworldEnv(cost_limit=40.0).build())
    assert (slack.h_plus, slack.h_minus) == (20.0, -20.0)


def test_output_dir_defaults_under_settings_root():
    assert RunConfig(name="abc").resolve_output_dir() == Path("runs") / "abc"
    assert RunConfig(output_dir="/tmp/x").resolve_output_dir() == Path("/tmp/x")


def test_document_echo_writes_null_for_infinite_slack():
    doc = RunConfig.model_validate({"slack": {"case": "one"}}).to_document()
    assert doc["slack"]["h_plus"] is None
    assert RunConfig.model_validate(doc).slack.h_plus == float("inf")


# -------------------------------------------------------------------
# overrides
# -------------------------------------------------------------------


def test_field_for_walks_nested_models():
    assert field_for(RunConfig, "trainer.eta").annotation is float
    assert field_for(RunConfig, "environment.gamma").annotation is float
    with pytest.raises(ConfigError, match="Unknown configuration key"):
        field_for(RunConfig, "trainer.momentum")


def test_apply_override_parses_declared_types():
    cfg = apply_overrides(
        RunConfig(),
        ["trainer.eta=0.05", "trainer.total_iters=12", "trainer.normalize_gradients=false", "seeds=[3, 4]"],
    )
    assert cfg.trainer.eta == 0.05
    assert cfg.trainer.total_iters == 12
    assert cfg.trainer.normalize_gradients is False
    assert cfg.seeds == [3, 4]


def test_apply_override_does_not_mutate_original():
    base = RunConfig()
    apply_override(base, "trainer.eval_mode", "td")
    assert base.trainer.eval_mode == "exact"


def test_apply_override_validates_whole_document():
    with pytest.raises(ConfigError, match="Validation failed"):
        apply_override(RunConfig(), "trainer.beta_r", "0.9")
    with pytest.raises(ConfigError, match="Validation failed"):
        apply_override(RunConfig(), "trainer.total_iters", "many")
    with pytest.raises(ConfigError, match="Validation failed"):
        apply_override(RunConfig(), "trainer.eval_mode", "mc")


def test_apply_overrides_requires_key_value():
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides(RunConfig(), ["trainer.eta"])


# -------------------------------------------------------------------
# loading
# -------------------------------------------------------------------


def test_load_run_config(write_doc, run_doc):
    cfg = load_run_config(write_doc("run.json", run_doc))
    assert cfg.name == "grid"
    assert cfg.seeds == [0, 1]


def test_load_run_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="config file not found"):
        load_run_config(tmp_path / "missing.json")


def test_load_run_config_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(path)


def test_sweep_runs_get_own_directories(run_doc, tmp_path):
    sweep = SweepSpec(
        name="eta",
        base=RunConfig.model_validate(run_doc | {"output_dir": str(tmp_path / "sweep")}),
        axis="trainer.eta",
        values=[0.01, 0.02],
    )
    runs = sweep.runs()
    assert [label for label, _ in runs] == ["trainer.eta=0.01", "trainer.eta=0.02"]
    assert runs[1][1].trainer.eta == 0.02
    assert runs[0][1].output_dir != runs[1][1].output_dir
    assert Path(runs[0][1].output_dir).parent == tmp_path / "sweep"


def test_sweep_unknown_axis_rejected(write_doc, run_doc):
    path = write_doc("sweep.json", {"base": run_doc, "axis": "trainer.warp", "values": [1]})
    with pytest.raises(ConfigError, match="Unknown configuration key"):
        load_sweep_spec(path)


def test_sweep_needs_values(write_doc, run_doc):
    path = write_doc("sweep.json", {"base": run_doc, "axis": "trainer.eta", "values": []})
    with pytest.raises(ConfigError):
        load_sweep_spec(path)


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("name", ["gridworld.json", "pointmass_td.json"])
def test_shipped_run_documents_load(name):
    cfg = load_run_config(CONFIGS / name)
    spec = cfg.environment.build()
    assert cfg.resolve_slack(spec) is not None


@pytest.mark.parametrize("name", ["sweep_slack.json", "sweep_algorithm.json"])
def test_shipped_sweep_documents_expand(name):
    sweep = load_sweep_spec(CONFIGS / name)
    assert len(sweep.runs()) == len(sweep.values)
