"""Tests for src.artifacts."""

import csv
import json

import pytest

from src.artifacts import (
    COMPARISON_COLUMNS,
    plot_data,
    read_train_log,
    train_log_columns,
    validate_log,
    write_comparison,
    write_json,
    write_plot_data,
    write_train_log,
)
from src.trainer import Algorithm, SlackCase, SlackConfig, TrainerConfig, TrainRecord, UpdateMode, train


def _rec(t, v_r, v_c, mode, h_plus=5.0, h_minus=-5.0, kl=0.001):
    return TrainRecord(t, v_r, tuple(v_c), mode, None, kl, h_plus, h_minus, 1.0)


# -------------------------------------------------------------------
# training logs
# -------------------------------------------------------------------


def test_columns_follow_cost_count():
    assert train_log_columns(2) == [
        "iter", "v_r", "v_c_0", "v_c_1", "mode", "theta_deg", "kl", "h_plus", "h_minus", "step_scale",
    ]


def test_write_and_read_train_log(tmp_path):
    records = [
        _rec(0, 1.5, [47.0], UpdateMode.safety_only(0)),
        _rec(1, 1.25, [42.0], UpdateMode.projection(0)),
    ]
    path = tmp_path / "seed_0.csv"
    write_train_log(records, path, n_costs=1)
    rows = read_train_log(path)
    assert [r["mode"] for r in rows] == ["SafetyOnly", "Projection"]
    assert rows[0]["theta_deg"] == ""
    assert float(rows[1]["v_r"]) == 1.25
    assert path.read_text().splitlines()[0] == ",".join(train_log_columns(1))


def test_identical_runs_write_identical_logs(tmp_path, gridworld):
    slack = SlackConfig.preset("default", 0.45)
    for name in ("a.csv", "b.csv"):
        result = train(TrainerConfig(total_iters=8, seed=2), gridworld, slack)
        write_train_log(result.records, tmp_path / name, gridworld.n_costs)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


# -------------------------------------------------------------------
# validation
# -------------------------------------------------------------------


def _rows(tmp_path, records, n_costs=1):
    path = tmp_path / "log.csv"
    write_train_log(records, path, n_costs)
    return read_train_log(path)


def test_validate_log_accepts_consistent_modes(tmp_path):
    rows = _rows(
        tmp_path,
        [
            _rec(0, 0.0, [47.0], UpdateMode.safety_only(0)),
            _rec(1, 0.0, [42.0], UpdateMode.projection(0)),
            _rec(2, 0.0, [30.0], UpdateMode.reward_only()),
        ],
    )
    assert validate_log(rows, [40.0], SlackCase.THREE) == []


def test_validate_log_flags_wrong_mode_and_kl(tmp_path):
    rows = _rows(
        tmp_path,
        [
            _rec(0, 0.0, [47.0], UpdateMode.projection(0)),
            _rec(1, 0.0, [30.0], UpdateMode.reward_only(), kl=0.5),
        ],
    )
    problems = validate_log(rows, [40.0], SlackCase.THREE, kl_threshold=0.01)
    assert len(problems) == 2
    assert "iter 0" in problems[0] and "SafetyOnly" in problems[0]
    assert "kl" in problems[1]


def test_validate_log_crpo_and_warmup(tmp_path):
    rows = _rows(
        tmp_path,
        [
            _rec(0, 0.0, [47.0], UpdateMode.reward_only()),
            _rec(1, 0.0, [40.5], UpdateMode.safety_only(0)),
            _rec(2, 0.0, [40.0], UpdateMode.reward_only()),
        ],
    )
    assert validate_log(rows, [40.0], SlackCase.THREE, algorithm=Algorithm.CRPO, warmup_iters=1) == []


def test_trained_log_validates(tmp_path, gridworld):
    slack = SlackConfig.preset("default", 0.45)
    config = TrainerConfig(total_iters=25)
    result = train(config, gridworld, slack)
    rows = _rows(tmp_path, result.records)
    assert validate_log(rows, [0.45], slack.case, kl_threshold=config.kl_threshold) == []


# -------------------------------------------------------------------
# aggregates
# -------------------------------------------------------------------


def test_plot_data_mean_and_std(tmp_path):
    logs = [
        [_rec(0, 1.0, [2.0], UpdateMode.reward_only()), _rec(1, 3.0, [2.0], UpdateMode.reward_only())],
        [_rec(0, 3.0, [4.0], UpdateMode.reward_only())],
    ]
    rows = plot_data(logs)
    assert len(rows) == 1
    assert rows[0]["v_r_mean"] == 2.0
    assert rows[0]["v_r_std"] == 1.0
    assert rows[0]["v_c_0_mean"] == 3.0

    path = tmp_path / "plot_data.csv"
    write_plot_data(path, rows, n_costs=1)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["iter", "v_r_mean", "v_r_std", "v_c_0_mean", "v_c_0_std"]


def test_plot_data_empty():
    assert plot_data([]) == []


def test_comparison_marks_failures(tmp_path):
    path = tmp_path / "comparison.csv"
    write_comparison(
        path,
        [
            {"label": "eta=0.01", "status": "ok", "seeds": 2, "final_reward": 6.5, "final_cost": 0.4},
            {"label": "eta=9", "status": "failed", "seeds": 2, "error": "boom"},
        ],
    )
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == COMPARISON_COLUMNS
    assert rows[1]["status"] == "failed"
    assert rows[1]["final_reward"] == ""
    assert rows[1]["error"] == "boom"


def test_write_json_is_sorted(tmp_path):
    path = tmp_path / "x.json"
    write_json(path, {"b": 1, "a": 2})
    assert list(json.loads(path.read_text())) == ["a", "b"]
    assert path.read_text().endswith("\n")


@pytest.mark.parametrize("case", [SlackCase.ONE, SlackCase.TWO])
def test_validate_log_handles_infinite_bounds(tmp_path, case):
    slack = SlackConfig.case_one() if case == SlackCase.ONE else SlackConfig.case_two()
    mode = UpdateMode.projection(0)
    rows = _rows(tmp_path, [_rec(0, 0.0, [50.0] if case == SlackCase.ONE else [10.0], mode, slack.h_plus, slack.h_minus)])
    assert validate_log(rows, [40.0], case) == []
