"""
Run artifacts: training-log CSVs, JSON summaries, plot data and sweep
comparison tables, plus a post-hoc validator for logged update modes.

Floats are written with ``repr`` so identical runs produce byte-identical
files.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import structlog

from .trainer import (
    Algorithm,
    ModeKind,
    SlackCase,
    SlackConfig,
    TrainRecord,
    crpo_mode,
    select_mode,
)

logger = structlog.get_logger(__name__)

TRAIN_LOG_SCHEMA = "trainlog/v1"
PLOT_DATA_SCHEMA = "plotdata/v1"
COMPARISON_SCHEMA = "comparison/v1"


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def train_log_columns(n_costs: int) -> list[str]:
    return (
        ["iter", "v_r"]
        + [f"v_c_{i}" for i in range(n_costs)]
        + ["mode", "theta_deg", "kl", "h_plus", "h_minus", "step_scale"]
    )


def write_train_log(records: Sequence[TrainRecord], path: Path, n_costs: int) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(train_log_columns(n_costs))
        for r in records:
            writer.writerow(
                [r.iter, _fmt(r.v_r)]
                + [_fmt(v) for v in r.v_c]
                + [str(r.mode), _fmt(r.theta_deg), _fmt(r.kl), _fmt(r.h_plus), _fmt(r.h_minus), _fmt(r.step_scale)]
            )


def read_train_log(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# =============================================================================
# VALIDATION
# =============================================================================


def validate_log(
    rows: Iterable[dict[str, str]],
    limits: Sequence[float],
    case: SlackCase,
    algorithm: Algorithm = Algorithm.PCRPO,
    kl_threshold: float = math.inf,
    warmup_iters: int = 0,
) -> list[str]:
    """Re-derive every row's update mode from its logged values and slack.

    Returns one message per inconsistent row (empty when the log is clean).
    """
    problems: list[str] = []
    n = len(limits)
    for row in rows:
        t = int(row["iter"])
        values = [float(row[f"v_c_{i}"]) for i in range(n)]
        if t < warmup_iters:
            expected = ModeKind.REWARD_ONLY
        elif algorithm == Algorithm.CRPO:
            expected = crpo_mode(values, limits).kind
        else:
            slack = SlackConfig.model_construct(
                case=case,
                h_plus=float(row["h_plus"]),
                h_minus=float(row["h_minus"]),
            )
            expected = select_mode(values, limits, slack).kind
        if row["mode"] != expected.value:
            problems.append(f"iter {t}: logged {row['mode']}, decision table gives {expected.value}")
        kl = float(row["kl"])
        if kl > kl_threshold:
            problems.append(f"iter {t}: kl {kl!r} exceeds threshold {kl_threshold!r}")
    return problems


# =============================================================================
# AGGREGATES
# =============================================================================


def plot_data(logs: Sequence[Sequence[TrainRecord]]) -> list[dict[str, float]]:
    """Per-iteration mean and standard deviation of every value column across seeds.

    Only iterations present in every log are aggregated.
    """
    if not logs:
        return []
    length = min(len(log) for log in logs)
    n_costs = len(logs[0][0].v_c) if length else 0
    rows = []
    for t in range(length):
        v_r = np.array([log[t].v_r for log in logs])
        v_c = np.array([log[t].v_c for log in logs])
        row: dict[str, float] = {"iter": t, "v_r_mean": float(v_r.mean()), "v_r_std": float(v_r.std())}
        for i in range(n_costs):
            row[f"v_c_{i}_mean"] = float(v_c[:, i].mean())
            row[f"v_c_{i}_std"] = float(v_c[:, i].std())
        rows.append(row)
    return rows


def write_rows(path: Path, rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def write_plot_data(path: Path, rows: Sequence[dict[str, float]], n_costs: int) -> None:
    columns = ["iter", "v_r_mean", "v_r_std"]
    for i in range(n_costs):
        columns += [f"v_c_{i}_mean", f"v_c_{i}_std"]
    write_rows(path, rows, columns)


COMPARISON_COLUMNS = [
    "label",
    "status",
    "seeds",
    "final_reward",
    "final_cost",
    "cost_limit",
    "flip_count",
    "error",
]


def write_comparison(path: Path, rows: Sequence[dict[str, Any]]) -> None:
    write_rows(path, rows, COMPARISON_COLUMNS)
    logger.info("artifacts.comparison_written", path=str(path), runs=len(rows))
