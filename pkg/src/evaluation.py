"""
Per-channel Q-function estimation.

On-policy TD(0) over one persistent behaviour trajectory, an expected-update
(synchronous) variant, and the exact-oracle pass-through the trainer uses to
take TD noise out of the loop.
"""

import bisect
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import structlog

from .cmdp import Channel, CmdpSpec, QTable, SingularSystemError, default_horizon, exact_q
from .policy import ChannelMismatchError, SoftmaxPolicy

logger = structlog.get_logger(__name__)

DEFAULT_LR0 = 0.05


class EvaluationFailureError(RuntimeError):
    """Q estimation produced no usable table."""


@dataclass(frozen=True)
class LrSchedule:
    lr0: float
    tau: float
    law: str = "lr0/(1+k/tau)"

    def rate(self, k: int) -> float:
        if self.law == "constant":
            return self.lr0
        return self.lr0 / (1.0 + k / self.tau)

    def describe(self) -> str:
        if self.law in ("constant", "exact"):
            return f"{self.law} lr0={self.lr0:g}"
        return f"{self.law} lr0={self.lr0:g} tau={self.tau:g}"


@dataclass(frozen=True)
class QEstimate:
    table: np.ndarray
    channel: Channel
    k_td: int
    lr_schedule: LrSchedule

    def __post_init__(self):
        if self.k_td < 1:
            raise ValueError(f"k_td must be >= 1, got {self.k_td}")
        if not np.all(np.isfinite(self.table)):
            raise EvaluationFailureError(f"{self.channel} estimate has non-finite entries")

    def to_csv(self, path: Path) -> None:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "a", "qhat"])
            for (s, a), value in np.ndenumerate(self.table):
                writer.writerow([s, a, repr(float(value))])


@dataclass(frozen=True)
class ValueEstimates:
    reward: float
    costs: tuple[float, ...]


# =============================================================================
# TD(0)
# =============================================================================


def td_q_estimates(
    spec: CmdpSpec,
    policy: SoftmaxPolicy,
    channels: Sequence[Channel],
    k_td: int,
    lr0: float = DEFAULT_LR0,
    seed: int = 0,
    horizon: Optional[int] = None,
    tau: Optional[float] = None,
) -> list[QEstimate]:
    """Run ``k_td`` TD(0) updates for every channel on one shared trajectory.

    Q <- Q + l_k [x(s,a) + gamma Q(s',a') - Q(s,a)] with l_k = lr0/(1 + k/tau),
    tau = k_td/10 by default. The trajectory restarts from rho every
    ``horizon`` steps. Initial Q is zero.
    """
    if k_td < 1:
        raise ValueError(f"k_td must be >= 1, got {k_td}")
    if lr0 <= 0:
        raise ValueError(f"lr0 must be positive, got {lr0}")
    horizon = horizon or default_horizon(spec.gamma)
    schedule = LrSchedule(lr0=lr0, tau=tau if tau is not None else max(k_td / 10.0, 1.0))

    rng = np.random.default_rng(seed)
    gamma = spec.gamma
    n_actions = spec.n_actions
    cum_rho = np.cumsum(spec.rho).tolist()
    cum_pi = np.cumsum(policy.probs(), axis=1).tolist()
    cum_p = np.cumsum(spec.transition, axis=2).tolist()
    signals = [spec.channel_table(ch).tolist() for ch in channels]
    tables = [[[0.0] * n_actions for _ in range(spec.n_states)] for _ in channels]
    rates = [schedule.rate(k) for k in range(k_td)]
    draws = rng.random((k_td, 2)).tolist()
    last_s, last_a = spec.n_states - 1, n_actions - 1

    def start() -> tuple[int, int]:
        s0 = min(bisect.bisect_right(cum_rho, rng.random()), last_s)
        return s0, min(bisect.bisect_right(cum_pi[s0], rng.random()), last_a)

    s, a = start()
    for k in range(k_td):
        u_s, u_a = draws[k]
        s2 = min(bisect.bisect_right(cum_p[s][a], u_s), last_s)
        a2 = min(bisect.bisect_right(cum_pi[s2], u_a), last_a)
        lr = rates[k]
        for q, x in zip(tables, signals):
            row = q[s]
            row[a] += lr * (x[s][a] + gamma * q[s2][a2] - row[a])
        if (k + 1) % horizon == 0:
            s, a = start()
        else:
            s, a = s2, a2

    out = []
    for ch, q in zip(channels, tables):
        table = np.array(q)
        if not np.all(np.isfinite(table)):
            raise EvaluationFailureError(f"TD estimate for {ch} diverged")
        out.append(QEstimate(table=table, channel=ch, k_td=k_td, lr_schedule=schedule))
    logger.debug("td.estimated", channels=[str(c) for c in channels], k_td=k_td, seed=seed)
    return out


def td_q_estimate(
    spec: CmdpSpec,
    policy: SoftmaxPolicy,
    channel: Channel,
    k_td: int,
    lr0: float = DEFAULT_LR0,
    seed: int = 0,
    horizon: Optional[int] = None,
    tau: Optional[float] = None,
) -> QEstimate:
    return td_q_estimates(spec, policy, [channel], k_td, lr0, seed, horizon, tau)[0]


def synchronous_td(
    spec: CmdpSpec,
    policy: SoftmaxPolicy,
    channel: Channel,
    iterations: int,
    lr: float = 1.0,
) -> QEstimate:
    """Expected-update TD: Q <- Q + lr (R + gamma P pi Q - Q), from Q = 0."""
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    probs = policy.probs()
    reward = spec.channel_table(channel)
    q = np.zeros_like(reward)
    for _ in range(iterations):
        v_next = np.einsum("sa,sa->s", probs, q)
        target = reward + spec.gamma * np.einsum("sat,t->sa", spec.transition, v_next)
        q = q + lr * (target - q)
    return QEstimate(table=q, channel=channel, k_td=iterations, lr_schedule=LrSchedule(lr0=lr, tau=1.0, law="constant"))


def exact_q_tables(spec: CmdpSpec, policy: SoftmaxPolicy) -> list[QEstimate]:
    """Oracle Q tables for every channel, wrapped as estimates."""
    schedule = LrSchedule(lr0=0.0, tau=1.0, law="exact")
    return [
        QEstimate(table=exact_q(spec, policy, ch).table, channel=ch, k_td=1, lr_schedule=schedule)
        for ch in spec.channels()
    ]


def evaluate_channels(
    spec: CmdpSpec,
    policy: SoftmaxPolicy,
    mode: str,
    k_td: int,
    lr0: float = DEFAULT_LR0,
    seed: int = 0,
) -> list[QEstimate]:
    """Q estimates for reward then each cost channel, by ``exact`` or ``td``."""
    try:
        if mode == "exact":
            return exact_q_tables(spec, policy)
        if mode == "td":
            return td_q_estimates(spec, policy, spec.channels(), k_td, lr0=lr0, seed=seed)
    except SingularSystemError as exc:
        raise EvaluationFailureError(str(exc)) from exc
    raise ValueError(f"Unknown evaluation mode: {mode!r}")


# =============================================================================
# VALUES
# =============================================================================


def estimate_values(spec: CmdpSpec, policy: SoftmaxPolicy, qhats: Sequence[QEstimate]) -> ValueEstimates:
    """V(rho) = sum_s rho(s) sum_a pi(a|s) Qhat(s,a) for reward and every cost."""
    by_channel = {q.channel: q for q in qhats}
    expected = spec.channels()
    if len(qhats) != len(expected) or set(by_channel) != set(expected):
        raise ChannelMismatchError(
            f"expected one estimate per channel {[str(c) for c in expected]}, "
            f"got {[str(q.channel) for q in qhats]}"
        )
    probs = policy.probs()

    def at_rho(q: QEstimate) -> float:
        return float(spec.rho @ np.einsum("sa,sa->s", probs, q.table))

    return ValueEstimates(
        reward=at_rho(by_channel[Channel.reward()]),
        costs=tuple(at_rho(by_channel[Channel.cost(i)]) for i in range(spec.n_costs)),
    )


def max_norm_error(estimate: QEstimate, exact: QTable) -> float:
    if estimate.channel != exact.channel:
        raise ChannelMismatchError(f"comparing {estimate.channel} against {exact.channel}")
    return float(np.max(np.abs(estimate.table - exact.table)))
