"""
Command-line front end for the PCRPO toolkit.

    python -m src.harness train CONFIG [--set key=value ...] [--eval-mode exact|td]
    python -m src.harness verify-gradients [--samples N] [--dims 2 8 64] [--seed S]
    python -m src.harness verify-theorems [--instances N] [--seed S]
    python -m src.harness sweep SWEEP [--jobs J]
    python -m src.harness export CONFIG --out DIR [--policy CHECKPOINT] [--k-td K]

Exit codes: 0 success, 1 asserted property or run failure, 2 usage or
config error.
"""

import argparse
import asyncio
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import structlog

from .artifacts import (
    TRAIN_LOG_SCHEMA,
    plot_data,
    read_train_log,
    validate_log,
    write_comparison,
    write_json,
    write_plot_data,
    write_train_log,
)
from .cmdp import BadGeometryError, SpecValidationError, describe, save_spec
from .config import settings
from .evaluation import exact_q_tables, td_q_estimates
from .metrics import RunMetrics
from .policy import load_checkpoint, save_checkpoint, uniform
from .run_config import (
    ConfigError,
    RunConfig,
    apply_override,
    apply_overrides,
    load_run_config,
    load_sweep_spec,
)
from .trainer import TrainRecord, train
from .verification import run_gradient_properties, run_theorem_suite

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def configure_logging(level: str = "info", json_output: bool = False) -> None:
    renderer = structlog.processors.JSONRenderer() if json_output else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level.upper(), logging.INFO)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


# =============================================================================
# RUNS
# =============================================================================


@dataclass
class RunOutcome:
    output_dir: Path
    seeds: list[int]
    final_rewards: list[float] = field(default_factory=list)
    final_costs: list[tuple[float, ...]] = field(default_factory=list)
    flip_counts: list[int] = field(default_factory=list)
    cost_limit: float = 0.0
    problems: list[str] = field(default_factory=list)


def run_seeds(cfg: RunConfig) -> RunOutcome:
    """Train every seed of ``cfg`` and write its artifacts.

    Per seed: ``seed_<s>.csv`` training log, ``seed_<s>.json`` summary,
    ``seed_<s>.metrics.prom`` and ``policy_seed_<s>.json``. Per run:
    ``config.json`` echo and ``plot_data.csv``.
    """
    spec = cfg.environment.build()
    slack = cfg.resolve_slack(spec)
    out = cfg.resolve_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_document())

    outcome = RunOutcome(output_dir=out, seeds=list(cfg.seeds), cost_limit=float(spec.limits[0]))
    logs: list[list[TrainRecord]] = []
    for seed in cfg.seeds:
        trainer_cfg = cfg.trainer.model_copy(update={"seed": seed})
        metrics = RunMetrics(trainer_cfg.algorithm.value)
        result = train(trainer_cfg, spec, slack, metrics=metrics)
        logs.append(result.records)

        log_path = out / f"seed_{seed}.csv"
        write_train_log(result.records, log_path, spec.n_costs)
        metrics.write(out / f"seed_{seed}.metrics.prom")
        save_checkpoint(result.policy, out / f"policy_seed_{seed}.json", seed=seed, env=spec.name)

        final_r, final_c = result.final_means()
        write_json(
            out / f"seed_{seed}.json",
            {
                "schema": TRAIN_LOG_SCHEMA,
                "seed": seed,
                "algorithm": trainer_cfg.algorithm.value,
                "environment": spec.name,
                "limits": spec.limits.tolist(),
                "iterations": len(result.records),
                "final_reward": final_r,
                "final_costs": list(final_c),
                "flip_count": result.flip_count,
                "kl_stalls": sum(1 for r in result.records if r.stalled),
                "wall_seconds": result.wall_seconds,
                "slack": slack.to_document(),
                "config": cfg.to_document() | {"trainer": trainer_cfg.model_dump(mode="json")},
            },
        )
        problems = validate_log(
            read_train_log(log_path),
            spec.limits.tolist(),
            slack.case,
            algorithm=trainer_cfg.algorithm,
            kl_threshold=trainer_cfg.kl_threshold,
            warmup_iters=trainer_cfg.safety_warmup_iters,
        )
        outcome.problems += [f"seed {seed}: {p}" for p in problems]
        outcome.final_rewards.append(final_r)
        outcome.final_costs.append(final_c)
        outcome.flip_counts.append(result.flip_count)

    write_plot_data(out / "plot_data.csv", plot_data(logs), spec.n_costs)
    logger.info("harness.run_written", output_dir=str(out), seeds=list(cfg.seeds), problems=len(outcome.problems))
    return outcome


async def run_sweep(runs: Sequence[tuple[str, RunConfig]], jobs: int) -> list[dict[str, Any]]:
    """Run every sweep entry, at most ``jobs`` at a time; failures become rows."""
    semaphore = asyncio.Semaphore(max(1, jobs))

    async def one(label: str, cfg: RunConfig) -> dict[str, Any]:
        async with semaphore:
            try:
                outcome = await asyncio.to_thread(run_seeds, cfg)
            except Exception as exc:
                logger.error("harness.sweep_run_failed", label=label, error=str(exc))
                return {"label": label, "status": "failed", "seeds": len(cfg.seeds), "error": str(exc)}
        status = "ok" if not outcome.problems else "inconsistent"
        return {
            "label": label,
            "status": status,
            "seeds": len(outcome.seeds),
            "final_reward": float(np.mean(outcome.final_rewards)),
            "final_cost": float(np.mean([c[0] for c in outcome.final_costs])),
            "cost_limit": outcome.cost_limit,
            "flip_count": float(np.mean(outcome.flip_counts)),
            "error": "; ".join(outcome.problems[:3]),
        }

    return list(await asyncio.gather(*(one(label, cfg) for label, cfg in runs)))


# =============================================================================
# COMMANDS
# =============================================================================


def _print(payload: dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def cmd_train(
    config_path: Path,
    overrides: Sequence[str] = (),
    eval_mode: Optional[str] = None,
    output_dir: Optional[str] = None,
) -> int:
    try:
        cfg = apply_overrides(load_run_config(config_path), list(overrides))
        if eval_mode is not None:
            cfg = apply_override(cfg, "trainer.eval_mode", eval_mode)
        if output_dir is not None:
            cfg = apply_override(cfg, "output_dir", output_dir)
        outcome = run_seeds(cfg)
    except (ConfigError, BadGeometryError, SpecValidationError) as exc:
        return _usage_error(str(exc))

    _print(
        {
            "output_dir": str(outcome.output_dir),
            "seeds": outcome.seeds,
            "final_rewards": outcome.final_rewards,
            "final_costs": [list(c) for c in outcome.final_costs],
            "flip_counts": outcome.flip_counts,
            "problems": outcome.problems,
        }
    )
    return EXIT_FAILED if outcome.problems else EXIT_OK


def cmd_verify_gradients(samples: int, dims: Sequence[int], seed: int = 0) -> int:
    if samples < 1:
        return _usage_error(f"--samples must be >= 1, got {samples}")
    if not dims or min(dims) < 1:
        return _usage_error(f"--dims must be positive, got {list(dims)}")
    report = run_gradient_properties(samples, dims, seed)
    _print(report.to_dict())
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_verify_theorems(instances: int, seed: int = 0) -> int:
    if instances < 1:
        return _usage_error(f"--instances must be >= 1, got {instances}")
    report = run_theorem_suite(instances, seed)
    _print(report.to_dict())
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_sweep(sweep_path: Path, jobs: Optional[int] = None) -> int:
    try:
        sweep = load_sweep_spec(sweep_path)
        runs = sweep.runs()
    except ConfigError as exc:
        return _usage_error(str(exc))

    rows = asyncio.run(run_sweep(runs, jobs or settings.jobs))
    root = Path(sweep.base.output_dir) if sweep.base.output_dir else Path(settings.output_root) / sweep.name
    root.mkdir(parents=True, exist_ok=True)
    write_comparison(root / "comparison.csv", rows)
    _print({"comparison": str(root / "comparison.csv"), "runs": rows})
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_FAILED


def cmd_export(
    config_path: Path,
    out: Path,
    policy_path: Optional[Path] = None,
    k_td: int = 20_000,
    seed: int = 0,
    exact: bool = False,
) -> int:
    """Write the environment document and per-channel Q tables for a policy."""
    try:
        cfg = load_run_config(config_path)
        spec = cfg.environment.build()
        if policy_path is not None and not policy_path.is_file():
            raise ConfigError(f"policy checkpoint not found: {policy_path}")
        policy = load_checkpoint(policy_path) if policy_path else uniform(spec)
    except (ConfigError, BadGeometryError, SpecValidationError) as exc:
        return _usage_error(str(exc))
    if policy.logits.shape != (spec.n_states, spec.n_actions):
        return _usage_error(f"checkpoint shape {policy.logits.shape} does not fit {spec.name}")

    out.mkdir(parents=True, exist_ok=True)
    save_spec(spec, out / "environment.json")
    estimates = exact_q_tables(spec, policy) if exact else td_q_estimates(spec, policy, spec.channels(), k_td, seed=seed)
    written = []
    for q in estimates:
        path = out / f"qhat_{q.channel}.csv"
        q.to_csv(path)
        written.append(str(path))
    _print({"environment": str(out / "environment.json"), "cmdp": describe(spec), "q_tables": written})
    return EXIT_OK


# =============================================================================
# ENTRY POINT
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcrpo", description="Soft-switching constrained policy optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train every seed of a run document")
    p_train.add_argument("config", type=Path)
    p_train.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p_train.add_argument("--eval-mode", choices=["exact", "td"])
    p_train.add_argument("--output-dir")

    p_grad = sub.add_parser("verify-gradients", help="projection algebra property suite")
    p_grad.add_argument("--samples", type=int, default=settings.gradient_samples)
    p_grad.add_argument("--dims", type=int, nargs="+", default=list(settings.gradient_dims))
    p_grad.add_argument("--seed", type=int, default=0)

    p_thm = sub.add_parser("verify-theorems", help="improvement-bound sweep on random quadratics")
    p_thm.add_argument("--instances", type=int, default=settings.theorem_instances)
    p_thm.add_argument("--seed", type=int, default=0)

    p_sweep = sub.add_parser("sweep", help="one run per axis value plus a comparison table")
    p_sweep.add_argument("sweep", type=Path)
    p_sweep.add_argument("--jobs", type=int)

    p_export = sub.add_parser("export", help="environment document and Q-table CSVs")
    p_export.add_argument("config", type=Path)
    p_export.add_argument("--out", type=Path, required=True)
    p_export.add_argument("--policy", type=Path)
    p_export.add_argument("--k-td", type=int, default=20_000)
    p_export.add_argument("--seed", type=int, default=0)
    p_export.add_argument("--exact", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(settings.log_level, settings.log_json)

    if args.command == "train":
        return cmd_train(args.config, args.overrides, args.eval_mode, args.output_dir)
    if args.command == "verify-gradients":
        return cmd_verify_gradients(args.samples, args.dims, args.seed)
    if args.command == "verify-theorems":
        return cmd_verify_theorems(args.instances, args.seed)
    if args.command == "sweep":
        return cmd_sweep(args.sweep, args.jobs)
    if args.command == "export":
        return cmd_export(args.config, args.out, args.policy, args.k_td, args.seed, args.exact)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
