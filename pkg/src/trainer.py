"""
Soft-switching constrained policy optimization.

Each iteration estimates per-channel Q tables, reads the reward and cost
values off them, and picks one of three updates from where the costs sit
relative to their limits and the slack band:

- RewardOnly: natural-gradient ascent on reward.
- SafetyOnly(i): natural-gradient descent on cost channel i.
- Projection(i): a step along the conflict-aware combination of the reward
  and cost-i gradients.

CRPO (hard switch, no band, no combination) and SCRPO (one-sided surgery
instead of the two-sided projection) run through the same loop.
"""

import math
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Literal, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .cmdp import CmdpSpec, discounted_occupancy
from .evaluation import QEstimate, ValueEstimates, estimate_values, evaluate_channels
from .gradmanip import EPS, GradientPair, ZeroGradientError, manipulate, surgery_combine
from .metrics import RunMetrics
from .policy import (
    SoftmaxPolicy,
    advantage,
    direction_update,
    kl_divergence,
    npg_update,
    random_init,
    value_gradient,
)

logger = structlog.get_logger(__name__)


# =============================================================================
# CONFIGURATION
# =============================================================================


class SlackCase(str, Enum):
    ONE = "one"
    TWO = "two"
    THREE = "three"


class DecayLaw(str, Enum):
    GEOMETRIC = "geometric"
    LINEAR = "linear"


class Algorithm(str, Enum):
    PCRPO = "PCRPO"
    CRPO = "CRPO"
    SCRPO = "SCRPO"


SLACK_PRESETS = ("2SR", "2SC", "3SR-G", "4S-F", "4S-G", "default")


class SlackConfig(BaseModel):
    """Slack band around the cost limits.

    Case one: h_plus = +inf, h_minus = 0 (never safety-only).
    Case two: h_plus = 0, h_minus = -inf (never reward-only).
    Case three: finite h_plus >= 0 >= h_minus, not both zero.

    ``h_plus0``/``h_minus0`` remember the starting bounds for linear decay.
    Infinite bounds serialize as null and are restored from the case.
    """

    model_config = ConfigDict(ser_json_inf_nan="null")

    case: SlackCase
    h_plus: Optional[float] = None
    h_minus: Optional[float] = None
    decay_plus: bool = False
    decay_minus: bool = False
    decay_law: DecayLaw = DecayLaw.GEOMETRIC
    h_plus0: Optional[float] = None
    h_minus0: Optional[float] = None

    @model_validator(mode="after")
    def _check_case(self) -> "SlackConfig":
        if self.case == SlackCase.ONE:
            self.h_plus = math.inf if self.h_plus is None else self.h_plus
            self.h_minus = 0.0 if self.h_minus is None else self.h_minus
            if self.h_plus != math.inf or self.h_minus != 0.0:
                raise ValueError("case one requires h_plus = +inf and h_minus = 0")
        elif self.case == SlackCase.TWO:
            self.h_plus = 0.0 if self.h_plus is None else self.h_plus
            self.h_minus = -math.inf if self.h_minus is None else self.h_minus
            if self.h_plus != 0.0 or self.h_minus != -math.inf:
                raise ValueError("case two requires h_plus = 0 and h_minus = -inf")
        else:
            if self.h_plus is None or self.h_minus is None:
                raise ValueError("case three requires finite h_plus and h_minus")
            if not (math.isfinite(self.h_plus) and math.isfinite(self.h_minus)):
                raise ValueError("case three requires finite h_plus and h_minus")
            if self.h_plus < 0 or self.h_minus > 0:
                raise ValueError("case three requires h_plus >= 0 >= h_minus")
            if self.h_plus == 0 and self.h_minus == 0:
                raise ValueError("case three requires a nonzero band")
        if self.case != SlackCase.THREE and (self.decay_plus or self.decay_minus):
            raise ValueError("slack decay applies to case three only")
        if self.h_plus0 is None:
            self.h_plus0 = self.h_plus
        if self.h_minus0 is None:
            self.h_minus0 = self.h_minus
        return self

    def to_document(self) -> dict:
        data = self.model_dump(mode="json")
        for key in ("h_plus", "h_minus", "h_plus0", "h_minus0"):
            value = getattr(self, key)
            if value is None or not math.isfinite(value):
                data[key] = None
        return data

    @classmethod
    def case_one(cls) -> "SlackConfig":
        return cls(case=SlackCase.ONE)

    @classmethod
    def case_two(cls) -> "SlackConfig":
        return cls(case=SlackCase.TWO)

    @classmethod
    def case_three(
        cls,
        h_plus: float,
        h_minus: float,
        decay_plus: bool = False,
        decay_minus: bool = False,
        decay_law: DecayLaw = DecayLaw.GEOMETRIC,
    ) -> "SlackConfig":
        return cls(
            case=SlackCase.THREE,
            h_plus=h_plus,
            h_minus=h_minus,
            decay_plus=decay_plus,
            decay_minus=decay_minus,
            decay_law=decay_law,
        )

    @classmethod
    def preset(cls, name: str, cost_limit: float) -> "SlackConfig":
        """Named slack variants; band widths scale with the cost limit.

        2SR: case one. 2SC: case two. 3SR-G: decaying upper bound only.
        4S-F: fixed two-sided band. 4S-G: decaying two-sided band.
        default: two-sided band of 0.125 * limit, both sides decaying.
        """
        scale = abs(cost_limit) / 40.0
        if name == "2SR":
            return cls.case_one()
        if name == "2SC":
            return cls.case_two()
        if name == "3SR-G":
            return cls.case_three(20 * scale, 0.0, decay_plus=True)
        if name == "4S-F":
            return cls.case_three(20 * scale, -20 * scale)
        if name == "4S-G":
            return cls.case_three(20 * scale, -20 * scale, decay_plus=True, decay_minus=True)
        if name == "default":
            band = 0.125 * abs(cost_limit)
            return cls.case_three(band, -band, decay_plus=True, decay_minus=True)
        raise ValueError(f"Unknown slack preset {name!r}; expected one of {', '.join(SLACK_PRESETS)}")


class TrainerConfig(BaseModel):
    total_iters: int = Field(1000, ge=0)
    eta: float = Field(0.01, gt=0)
    kl_threshold: float = Field(0.01, gt=0)
    max_halvings: int = Field(20, ge=0)
    k_td: int = Field(20_000, ge=1)
    lr0: float = Field(0.05, gt=0)
    eval_mode: Literal["exact", "td"] = "exact"
    seed: int = 0
    algorithm: Algorithm = Algorithm.PCRPO
    normalize_gradients: bool = True
    rescale_direction: bool = True
    gradient_source: Literal["npg", "vanilla"] = "npg"
    beta_r: float = Field(0.5, ge=0, le=1)
    beta_c: float = Field(0.5, ge=0, le=1)
    beta_r_plus: float = Field(0.5, ge=0, le=1)
    beta_c_plus: float = Field(0.5, ge=0, le=1)
    init_scale: float = Field(0.1, ge=0)
    safety_warmup_iters: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_weights(self) -> "TrainerConfig":
        if abs(self.beta_r + self.beta_c - 1.0) > 1e-9 or abs(self.beta_r_plus + self.beta_c_plus - 1.0) > 1e-9:
            raise ValueError("combination weights must sum to 1 in each regime")
        return self


# =============================================================================
# MODES AND RECORDS
# =============================================================================


class ModeKind(str, Enum):
    REWARD_ONLY = "RewardOnly"
    SAFETY_ONLY = "SafetyOnly"
    PROJECTION = "Projection"


@dataclass(frozen=True)
class UpdateMode:
    kind: ModeKind
    constraint: Optional[int] = None

    @classmethod
    def reward_only(cls) -> "UpdateMode":
        return cls(ModeKind.REWARD_ONLY)

    @classmethod
    def safety_only(cls, i: int) -> "UpdateMode":
        return cls(ModeKind.SAFETY_ONLY, i)

    @classmethod
    def projection(cls, i: int) -> "UpdateMode":
        return cls(ModeKind.PROJECTION, i)

    def __str__(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class TrainRecord:
    iter: int
    v_r: float
    v_c: tuple[float, ...]
    mode: UpdateMode
    theta_deg: Optional[float]
    kl: float
    h_plus: float
    h_minus: float
    step_scale: float
    halvings: int = 0
    stalled: bool = False


# =============================================================================
# MODE SELECTION
# =============================================================================


def _worst(indices: Sequence[int], values: Sequence[float], limits: Sequence[float]) -> int:
    """Index with the largest normalized violation (v - b) / max(1, |b|); ties go to the lowest index."""
    return max(indices, key=lambda i: ((values[i] - limits[i]) / max(1.0, abs(limits[i])), -i))


def select_mode(values: Sequence[float], limits: Sequence[float], slack: SlackConfig) -> UpdateMode:
    """Decision table over cost values, limits and the current slack band.

    Case three treats the middle band as closed: a value exactly on
    b + h_plus or b + h_minus selects Projection. A channel above the band
    wins over channels below it.
    """
    if len(values) != len(limits) or not values:
        raise ValueError(f"{len(values)} cost values for {len(limits)} limits")
    everyone = range(len(values))

    if slack.case == SlackCase.ONE:
        violated = [i for i in everyone if values[i] >= limits[i]]
        return UpdateMode.projection(_worst(violated, values, limits)) if violated else UpdateMode.reward_only()

    if slack.case == SlackCase.TWO:
        violated = [i for i in everyone if values[i] >= limits[i]]
        if violated:
            return UpdateMode.safety_only(_worst(violated, values, limits))
        return UpdateMode.projection(_worst(list(everyone), values, limits))

    h_plus, h_minus = float(slack.h_plus), float(slack.h_minus)  # type: ignore[arg-type]
    above = [i for i in everyone if values[i] > limits[i] + h_plus]
    if above:
        return UpdateMode.safety_only(_worst(above, values, limits))
    band = [i for i in everyone if values[i] >= limits[i] + h_minus]
    if band:
        return UpdateMode.projection(_worst(band, values, limits))
    return UpdateMode.reward_only()


def crpo_mode(values: Sequence[float], limits: Sequence[float]) -> UpdateMode:
    violated = [i for i in range(len(values)) if values[i] > limits[i]]
    return UpdateMode.safety_only(_worst(violated, values, limits)) if violated else UpdateMode.reward_only()


def decay_slack(slack: SlackConfig, total_iters: int) -> SlackConfig:
    """One decay application: enabled bounds shrink toward zero.

    Geometric: h <- h - h / T. Linear: h <- h - h0 / T, stopping at zero
    after T applications.
    """
    if slack.case != SlackCase.THREE or total_iters < 1:
        return slack
    h_plus, h_minus = float(slack.h_plus), float(slack.h_minus)  # type: ignore[arg-type]
    if slack.decay_law == DecayLaw.GEOMETRIC:
        if slack.decay_plus:
            h_plus -= h_plus / total_iters
        if slack.decay_minus:
            h_minus -= h_minus / total_iters
    else:
        if slack.decay_plus:
            h_plus = max(0.0, h_plus - float(slack.h_plus0) / total_iters)  # type: ignore[arg-type]
        if slack.decay_minus:
            h_minus = min(0.0, h_minus - float(slack.h_minus0) / total_iters)  # type: ignore[arg-type]
    return slack.model_copy(update={"h_plus": h_plus, "h_minus": h_minus})


def mode_flip_count(records: Sequence[TrainRecord]) -> int:
    """Number of consecutive iteration pairs whose update kinds differ."""
    return sum(1 for prev, cur in zip(records, records[1:]) if prev.mode.kind != cur.mode.kind)


# =============================================================================
# STEPS
# =============================================================================


@dataclass
class TrainState:
    policy: SoftmaxPolicy
    slack: SlackConfig
    config: TrainerConfig
    spec: CmdpSpec
    t: int = 0
    metrics: Optional[RunMetrics] = None


def _iteration_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([seed, t]).generate_state(1)[0])


def _channel_gradients(state: TrainState, q_r: QEstimate, q_c: QEstimate) -> tuple[np.ndarray, np.ndarray]:
    """Reward and cost gradients in ascent orientation (cost gradient is negated)."""
    spec, policy, cfg = state.spec, state.policy, state.config
    if cfg.gradient_source == "vanilla":
        g_r = value_gradient(spec, policy, q_r.table)
        g_c = -value_gradient(spec, policy, q_c.table)
    else:
        scale = 1.0 / (1.0 - spec.gamma)
        g_r = scale * advantage(policy, q_r.table).reshape(-1)
        g_c = -scale * advantage(policy, q_c.table).reshape(-1)
    return g_r, g_c


def _combined_direction(state: TrainState, q_r: QEstimate, q_c: QEstimate, surgery: bool) -> tuple[np.ndarray, Optional[float]]:
    cfg = state.config
    g_r, g_c = _channel_gradients(state, q_r, q_c)
    pair = GradientPair(
        g_r=g_r,
        g_c=g_c,
        beta_r=cfg.beta_r,
        beta_c=cfg.beta_c,
        beta_r_plus=cfg.beta_r_plus,
        beta_c_plus=cfg.beta_c_plus,
    )
    work = pair.normalized() if cfg.normalize_gradients else pair
    try:
        result = manipulate(work)
    except ZeroGradientError:
        return np.zeros_like(g_r), None
    direction, theta = result.direction, result.theta_deg
    if surgery:
        direction = surgery_combine(work)
    if cfg.normalize_gradients and cfg.rescale_direction:
        norms = [n for n in (float(np.linalg.norm(g_r)), float(np.linalg.norm(g_c))) if n > EPS]
        direction = direction * min(norms)
    return direction, theta


def _step(state: TrainState, surgery: bool, hard_switch: bool) -> tuple[TrainState, TrainRecord]:
    spec, cfg, policy = state.spec, state.config, state.policy
    qhats = evaluate_channels(spec, policy, cfg.eval_mode, cfg.k_td, lr0=cfg.lr0, seed=_iteration_seed(cfg.seed, state.t))
    values: ValueEstimates = estimate_values(spec, policy, qhats)
    q_r, q_costs = qhats[0], qhats[1:]

    slack = state.slack
    warm = state.t < cfg.safety_warmup_iters
    if warm:
        mode = UpdateMode.reward_only()
    elif hard_switch:
        mode = crpo_mode(values.costs, spec.limits)
    else:
        slack = decay_slack(slack, cfg.total_iters)
        mode = select_mode(values.costs, spec.limits, slack)

    theta: Optional[float] = None
    direction: Optional[np.ndarray] = None
    if mode.kind == ModeKind.PROJECTION:
        direction, theta = _combined_direction(state, q_r, q_costs[mode.constraint], surgery)  # type: ignore[index]

    def candidate(step: float) -> SoftmaxPolicy:
        if direction is not None:
            return direction_update(policy, direction, step)
        if mode.kind == ModeKind.SAFETY_ONLY:
            return npg_update(policy, q_costs[mode.constraint], step, spec.gamma, sign=-1)  # type: ignore[index]
        return npg_update(policy, q_r, step, spec.gamma, sign=+1)

    weights = discounted_occupancy(spec, policy, normalized=True)
    weights = weights / weights.sum()
    scale, halvings, stalled = 1.0, 0, False
    new_policy = candidate(cfg.eta)
    kl = kl_divergence(policy, new_policy, weights)
    while kl > cfg.kl_threshold:
        if halvings == cfg.max_halvings:
            new_policy, kl, scale, stalled = policy, 0.0, 0.0, True
            logger.warning("trainer.kl_stall", iter=state.t, halvings=halvings, mode=str(mode))
            break
        halvings += 1
        scale *= 0.5
        new_policy = candidate(cfg.eta * scale)
        kl = kl_divergence(policy, new_policy, weights)

    record = TrainRecord(
        iter=state.t,
        v_r=values.reward,
        v_c=values.costs,
        mode=mode,
        theta_deg=theta,
        kl=kl,
        h_plus=float(slack.h_plus),  # type: ignore[arg-type]
        h_minus=float(slack.h_minus),  # type: ignore[arg-type]
        step_scale=scale,
        halvings=halvings,
        stalled=stalled,
    )
    if state.metrics is not None:
        state.metrics.record_iteration(str(mode), values.reward, values.costs, halvings, stalled)
    logger.debug(
        "trainer.step",
        iter=state.t,
        mode=str(mode),
        v_r=round(values.reward, 6),
        v_c=[round(v, 6) for v in values.costs],
        kl=kl,
        halvings=halvings,
    )
    return replace(state, policy=new_policy, slack=slack, t=state.t + 1), record


def pcrpo_step(state: TrainState) -> tuple[TrainState, TrainRecord]:
    """One soft-switching iteration with the two-sided projection."""
    return _step(state, surgery=False, hard_switch=False)


def crpo_step(state: TrainState) -> tuple[TrainState, TrainRecord]:
    """Reward ascent unless some cost exceeds its limit, then descent on that cost."""
    return _step(state, surgery=False, hard_switch=True)


def scrpo_step(state: TrainState) -> tuple[TrainState, TrainRecord]:
    """Soft switching with one-sided gradient surgery in Projection mode."""
    return _step(state, surgery=True, hard_switch=False)


STEPS = {
    Algorithm.PCRPO: pcrpo_step,
    Algorithm.CRPO: crpo_step,
    Algorithm.SCRPO: scrpo_step,
}


# =============================================================================
# TRAINING LOOP
# =============================================================================


@dataclass(frozen=True)
class TrainResult:
    records: list[TrainRecord]
    policy: SoftmaxPolicy
    slack: SlackConfig
    wall_seconds: float

    @property
    def flip_count(self) -> int:
        return mode_flip_count(self.records)

    def final_means(self, window: int = 10) -> tuple[float, tuple[float, ...]]:
        """Mean reward and per-channel cost over the last ``window`` records."""
        tail = self.records[-window:]
        if not tail:
            return math.nan, ()
        v_r = float(np.mean([r.v_r for r in tail]))
        v_c = tuple(float(x) for x in np.mean([r.v_c for r in tail], axis=0))
        return v_r, v_c


def train(
    config: TrainerConfig,
    spec: CmdpSpec,
    slack: SlackConfig,
    initial_policy: Optional[SoftmaxPolicy] = None,
    metrics: Optional[RunMetrics] = None,
) -> TrainResult:
    """Run ``config.total_iters`` iterations of the configured algorithm."""
    policy = initial_policy or random_init(spec, config.seed, config.init_scale)
    state = TrainState(policy=policy, slack=slack, config=config, spec=spec, metrics=metrics)
    step = STEPS[config.algorithm]
    if metrics is not None:
        metrics.run_info.info({"algorithm": config.algorithm.value, "env": spec.name, "seed": str(config.seed)})

    logger.info(
        "trainer.start",
        algorithm=config.algorithm.value,
        env=spec.name,
        seed=config.seed,
        iters=config.total_iters,
        eval_mode=config.eval_mode,
        slack_case=slack.case.value,
    )
    start = time.perf_counter()
    records: list[TrainRecord] = []
    for _ in range(config.total_iters):
        if metrics is not None:
            with metrics.time_iteration():
                state, record = step(state)
        else:
            state, record = step(state)
        records.append(record)
    wall = time.perf_counter() - start

    logger.info(
        "trainer.finish",
        algorithm=config.algorithm.value,
        seed=config.seed,
        iters=len(records),
        flips=mode_flip_count(records),
        wall_seconds=round(wall, 3),
    )
    return TrainResult(records=records, policy=state.policy, slack=state.slack, wall_seconds=wall)
