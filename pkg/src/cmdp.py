"""
Finite constrained MDPs.

Holds the tabular CMDP model, the desk-scale environment builders (hazard
gridworld, point-mass velocity lattice, random instances), trajectory
sampling, and the exact linear-solve oracles for values, Q tables and
discounted occupancy that every estimator in the package is checked
against.
"""

import bisect
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Optional, Sequence

import numpy as np
import scipy.linalg
import structlog
from pydantic import BaseModel, Field

if TYPE_CHECKING:
    from .policy import SoftmaxPolicy

logger = structlog.get_logger(__name__)

PROB_TOL = 1e-9
SCHEMA_VERSION = "cmdp/v1"

# Gridworld actions: (dx, dy)
MOVES: list[tuple[int, int]] = [(0, -1), (1, 0), (0, 1), (-1, 0)]
ACTION_NAMES = ["up", "right", "down", "left"]


class BadGeometryError(ValueError):
    """Environment builder arguments do not describe a valid layout."""


class SingularSystemError(RuntimeError):
    """The policy-evaluation linear system could not be solved."""


class SpecValidationError(ValueError):
    """A CmdpSpec violates its invariants."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        summary = "; ".join(v.message for v in violations[:5])
        super().__init__(f"{len(violations)} CMDP violation(s): {summary}")


# =============================================================================
# CHANNELS
# =============================================================================


class ChannelKind(str, Enum):
    REWARD = "reward"
    COST = "cost"


@dataclass(frozen=True)
class Channel:
    """Selects the reward signal or one cost signal of a CMDP."""

    kind: ChannelKind
    index: int = 0

    @classmethod
    def reward(cls) -> "Channel":
        return cls(ChannelKind.REWARD)

    @classmethod
    def cost(cls, index: int) -> "Channel":
        return cls(ChannelKind.COST, index)

    @classmethod
    def parse(cls, text: str) -> "Channel":
        if text == "reward":
            return cls.reward()
        if text.startswith("cost_") and text[5:].isdigit():
            return cls.cost(int(text[5:]))
        raise ValueError(f"Unknown channel: {text!r}")

    @property
    def is_reward(self) -> bool:
        return self.kind == ChannelKind.REWARD

    def __str__(self) -> str:
        return "reward" if self.is_reward else f"cost_{self.index}"


# =============================================================================
# MODEL
# =============================================================================


@dataclass(frozen=True)
class CmdpSpec:
    """Tabular CMDP: P[s,a,s'], r[s,a], c_i[s,a], limits b_i, discount, rho."""

    transition: np.ndarray
    reward: np.ndarray
    costs: np.ndarray
    limits: np.ndarray
    gamma: float
    rho: np.ndarray
    name: str = "cmdp"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=float))
        costs = np.asarray(self.costs, dtype=float)
        if costs.ndim == 2:
            costs = costs[None, :, :]
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "limits", np.asarray(self.limits, dtype=float).reshape(-1))
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return int(self.transition.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.transition.shape[1])

    @property
    def n_costs(self) -> int:
        return int(self.costs.shape[0])

    def channels(self) -> list[Channel]:
        return [Channel.reward()] + [Channel.cost(i) for i in range(self.n_costs)]

    def channel_table(self, channel: Channel) -> np.ndarray:
        if channel.is_reward:
            return self.reward
        if not 0 <= channel.index < self.n_costs:
            raise ValueError(f"{channel} is not a channel of {self.name}")
        return self.costs[channel.index]


@dataclass(frozen=True)
class QTable:
    """Per-(s, a) action values of one channel."""

    table: np.ndarray
    channel: Channel

    def state_values(self, probs: np.ndarray) -> np.ndarray:
        return np.einsum("sa,sa->s", probs, self.table)


@dataclass(frozen=True)
class Step:
    state: int
    action: int
    reward: float
    costs: tuple[float, ...]
    next_state: int


@dataclass(frozen=True)
class Trajectory:
    steps: list[Step]
    horizon: int

    def states(self) -> list[int]:
        return [st.state for st in self.steps]

    def discounted_return(self, channel: Channel, gamma: float) -> float:
        total = 0.0
        for t, st in enumerate(self.steps):
            value = st.reward if channel.is_reward else st.costs[channel.index]
            total += (gamma**t) * value
        return total


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    index: tuple = ()


# =============================================================================
# VALIDATION
# =============================================================================


def validate(spec: CmdpSpec) -> list[Violation]:
    """Return every invariant violation of ``spec`` (empty list when valid)."""
    found: list[Violation] = []
    p = spec.transition
    if p.ndim != 3 or p.shape[0] != p.shape[2]:
        found.append(Violation("shape", f"transition must be S x A x S, got {p.shape}"))
        return found
    s_count, a_count = p.shape[0], p.shape[1]

    if spec.reward.shape != (s_count, a_count):
        found.append(Violation("shape", f"reward must be {s_count}x{a_count}, got {spec.reward.shape}"))
    if spec.costs.ndim != 3 or spec.costs.shape[1:] != (s_count, a_count):
        found.append(Violation("shape", f"costs must be n x {s_count} x {a_count}, got {spec.costs.shape}"))
    if spec.costs.shape[0] < 1:
        found.append(Violation("channels", "at least one cost channel is required"))
    if spec.costs.shape[0] != spec.limits.shape[0]:
        found.append(
            Violation(
                "channels",
                f"{spec.costs.shape[0]} cost channels but {spec.limits.shape[0]} limits",
            )
        )
    if not 0.0 <= spec.gamma < 1.0:
        found.append(Violation("gamma", f"gamma must be in [0, 1), got {spec.gamma}"))

    negative = np.argwhere(p < 0)
    for s, a, s2 in negative:
        found.append(
            Violation("negative_probability", f"P[{s},{a},{s2}] = {p[s, a, s2]} < 0", (int(s), int(a), int(s2)))
        )
    row_sums = p.sum(axis=2)
    for s, a in np.argwhere(np.abs(row_sums - 1.0) > PROB_TOL):
        found.append(
            Violation("row_sum", f"P[{s},{a},:] sums to {row_sums[s, a]:.12g}", (int(s), int(a)))
        )

    if spec.rho.shape != (s_count,):
        found.append(Violation("shape", f"rho must have {s_count} entries, got {spec.rho.shape}"))
    else:
        if np.any(spec.rho < 0):
            found.append(Violation("rho", "rho has negative entries"))
        if abs(float(spec.rho.sum()) - 1.0) > PROB_TOL:
            found.append(Violation("rho", f"rho sums to {float(spec.rho.sum()):.12g}"))

    for name, arr in (("reward", spec.reward), ("costs", spec.costs), ("limits", spec.limits)):
        if not np.all(np.isfinite(arr)):
            found.append(Violation("finite", f"{name} has non-finite entries"))
    return found


def ensure_valid(spec: CmdpSpec) -> CmdpSpec:
    found = validate(spec)
    if found:
        raise SpecValidationError(found)
    return spec


# =============================================================================
# EXACT ORACLES
# =============================================================================


def _probs(policy: "SoftmaxPolicy | np.ndarray") -> np.ndarray:
    if isinstance(policy, np.ndarray):
        return policy
    return policy.probs()


def policy_transition(spec: CmdpSpec, probs: np.ndarray) -> np.ndarray:
    return np.einsum("sa,sat->st", probs, spec.transition)


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        out = scipy.linalg.solve(matrix, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError(f"policy evaluation system is singular: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise SingularSystemError("policy evaluation produced non-finite values")
    return out


def exact_state_values(spec: CmdpSpec, policy, channel: Channel) -> np.ndarray:
    """V(s) from (I - gamma P_pi) V = R_pi."""
    probs = _probs(policy)
    r_pi = np.einsum("sa,sa->s", probs, spec.channel_table(channel))
    matrix = np.eye(spec.n_states) - spec.gamma * policy_transition(spec, probs)
    return _solve(matrix, r_pi)


def exact_value(spec: CmdpSpec, policy, channel: Channel) -> float:
    """V^pi(rho) for one channel, by direct solve."""
    return float(spec.rho @ exact_state_values(spec, policy, channel))


def exact_q(spec: CmdpSpec, policy, channel: Channel) -> QTable:
    """Q(s,a) = R(s,a) + gamma * sum_s' P(s'|s,a) V(s')."""
    v = exact_state_values(spec, policy, channel)
    q = spec.channel_table(channel) + spec.gamma * np.einsum("sat,t->sa", spec.transition, v)
    return QTable(table=q, channel=channel)


def discounted_occupancy(spec: CmdpSpec, policy, normalized: bool = True) -> np.ndarray:
    """State occupancy sum_t gamma^t Pr(s_t = s); scaled by (1 - gamma) when normalized."""
    probs = _probs(policy)
    matrix = np.eye(spec.n_states) - spec.gamma * policy_transition(spec, probs)
    occ = _solve(matrix.T, spec.rho)
    if normalized:
        occ = (1.0 - spec.gamma) * occ
    return occ


def default_horizon(gamma: float, tol: float = 1e-3) -> int:
    """Smallest H with gamma^H / (1 - gamma) < tol."""
    if gamma <= 0.0:
        return 1
    return max(1, int(math.ceil(math.log(tol * (1.0 - gamma)) / math.log(gamma))))


# =============================================================================
# SAMPLING
# =============================================================================


class Sampler:
    """Sequential categorical sampling with precomputed cumulative tables."""

    def __init__(self, spec: CmdpSpec, probs: np.ndarray, rng: np.random.Generator):
        self._rng = rng
        self._cum_rho = np.cumsum(spec.rho).tolist()
        self._cum_pi = [np.cumsum(row).tolist() for row in probs]
        self._cum_p = [[np.cumsum(spec.transition[s, a]).tolist() for a in range(spec.n_actions)] for s in range(spec.n_states)]

    @staticmethod
    def _draw(cum: list[float], u: float) -> int:
        return min(bisect.bisect_right(cum, u), len(cum) - 1)

    def initial_state(self) -> int:
        return self._draw(self._cum_rho, self._rng.random())

    def action(self, state: int) -> int:
        return self._draw(self._cum_pi[state], self._rng.random())

    def next_state(self, state: int, action: int) -> int:
        return self._draw(self._cum_p[state][action], self._rng.random())


def sample_trajectory(spec: CmdpSpec, policy, horizon: int, seed: int) -> Trajectory:
    """Roll out ``horizon`` steps from rho; identical seeds give identical paths."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    sampler = Sampler(spec, _probs(policy), np.random.default_rng(seed))
    steps: list[Step] = []
    s = sampler.initial_state()
    for _ in range(horizon):
        a = sampler.action(s)
        s2 = sampler.next_state(s, a)
        steps.append(
            Step(
                state=s,
                action=a,
                reward=float(spec.reward[s, a]),
                costs=tuple(float(c) for c in spec.costs[:, s, a]),
                next_state=s2,
            )
        )
        s = s2
    return Trajectory(steps=steps, horizon=horizon)


def _draw_batch(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def rollout_batch(
    spec: CmdpSpec, policy, episodes: int, horizon: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``episodes`` independent rollouts in lockstep.

    Returns state and action index arrays of shape (episodes, horizon).
    """
    probs = _probs(policy)
    cum_pi = np.cumsum(probs, axis=1)
    cum_p = np.cumsum(spec.transition, axis=2)
    states = np.empty((episodes, horizon), dtype=int)
    actions = np.empty((episodes, horizon), dtype=int)
    s = _draw_batch(np.broadcast_to(np.cumsum(spec.rho), (episodes, spec.n_states)), rng.random(episodes))
    for t in range(horizon):
        a = _draw_batch(cum_pi[s], rng.random(episodes))
        states[:, t] = s
        actions[:, t] = a
        s = _draw_batch(cum_p[s, a], rng.random(episodes))
    return states, actions


def monte_carlo_value(
    spec: CmdpSpec,
    policy,
    channel: Channel,
    episodes: int,
    horizon: Optional[int] = None,
    seed: int = 0,
) -> tuple[float, float]:
    """Truncated discounted-return estimate of V^pi(rho): (mean, standard error)."""
    horizon = horizon or default_horizon(spec.gamma)
    states, actions = rollout_batch(spec, policy, episodes, horizon, np.random.default_rng(seed))
    table = spec.channel_table(channel)
    discounts = spec.gamma ** np.arange(horizon)
    returns = (table[states, actions] * discounts).sum(axis=1)
    stderr = float(returns.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else float("inf")
    return float(returns.mean()), stderr


# =============================================================================
# BRUTE-FORCE FEASIBLE OPTIMUM
# =============================================================================


@dataclass(frozen=True)
class DeterministicOptimum:
    actions: tuple[int, ...]
    reward_value: float
    cost_values: tuple[float, ...]


def _action_invariant_states(spec: CmdpSpec) -> set[int]:
    fixed = set()
    for s in range(spec.n_states):
        p = spec.transition[s]
        if (
            np.allclose(p, p[0])
            and np.allclose(spec.reward[s], spec.reward[s, 0])
            and np.allclose(spec.costs[:, s, :], spec.costs[:, s, :1])
        ):
            fixed.add(s)
    return fixed


def deterministic_optimum(
    spec: CmdpSpec,
    max_policies: int = 1 << 20,
    chunk: int = 8192,
) -> Optional[DeterministicOptimum]:
    """Best reward value over deterministic policies satisfying every cost limit.

    States whose dynamics and signals ignore the action are pinned to action
    0. Returns None when no deterministic policy is feasible.
    """
    free = [s for s in range(spec.n_states) if s not in _action_invariant_states(spec)]
    total = spec.n_actions ** len(free)
    if total > max_policies:
        raise ValueError(f"{total} deterministic policies exceed the search limit {max_policies}")

    s_idx = np.arange(spec.n_states)
    signals = np.concatenate([spec.reward[None], spec.costs], axis=0)  # (1+n, S, A)
    eye = np.eye(spec.n_states)
    radix = spec.n_actions ** np.arange(len(free))
    best: Optional[DeterministicOptimum] = None

    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total))
        acts = np.zeros((len(ids), spec.n_states), dtype=int)
        if free:
            acts[:, free] = (ids[:, None] // radix) % spec.n_actions
        p_pi = spec.transition[s_idx, acts]  # (K, S, S)
        rhs = np.moveaxis(signals[:, s_idx, acts], 0, -1)  # (K, S, 1+n)
        values = np.linalg.solve(eye - spec.gamma * p_pi, rhs)
        at_rho = np.einsum("s,ksc->kc", spec.rho, values)
        feasible = np.all(at_rho[:, 1:] <= spec.limits + 1e-12, axis=1)
        if not np.any(feasible):
            continue
        k = int(np.argmax(np.where(feasible, at_rho[:, 0], -np.inf)))
        if best is None or at_rho[k, 0] > best.reward_value:
            best = DeterministicOptimum(
                actions=tuple(int(a) for a in acts[k]),
                reward_value=float(at_rho[k, 0]),
                cost_values=tuple(float(c) for c in at_rho[k, 1:]),
            )
    return best


# =============================================================================
# BUILDERS
# =============================================================================

Cell = tuple[int, int]


def build_gridworld(
    width: int,
    height: int,
    hazards: Iterable[Sequence[int]],
    goal: Sequence[int],
    slip: float = 0.0,
    gamma: float = 0.9,
    cost_limit: float = 1.0,
    start: Sequence[int] = (0, 0),
) -> CmdpSpec:
    """Hazard gridworld with an absorbing goal.

    Reward 1 per step spent at the goal, cost 1 per step spent on a hazard
    cell. Actions are up/right/down/left; moves off the grid stay put. With
    probability ``slip`` the move is replaced by one of the other three.
    """
    if width < 1 or height < 1 or width * height < 2:
        raise BadGeometryError(f"grid {width}x{height} needs at least two cells")
    if not 0.0 <= slip < 1.0:
        raise BadGeometryError(f"slip must be in [0, 1), got {slip}")

    def inside(cell: Sequence[int]) -> bool:
        return 0 <= cell[0] < width and 0 <= cell[1] < height

    goal_c: Cell = (int(goal[0]), int(goal[1]))
    start_c: Cell = (int(start[0]), int(start[1]))
    hazard_set: set[Cell] = {(int(h[0]), int(h[1])) for h in hazards}
    for name, cell in [("goal", goal_c), ("start", start_c), *[("hazard", h) for h in hazard_set]]:
        if not inside(cell):
            raise BadGeometryError(f"{name} {cell} is outside the {width}x{height} grid")
    if goal_c in hazard_set:
        raise BadGeometryError(f"goal {goal_c} cannot be a hazard")

    n = width * height

    def index(cell: Cell) -> int:
        return cell[1] * width + cell[0]

    transition = np.zeros((n, 4, n))
    reward = np.zeros((n, 4))
    cost = np.zeros((n, 4))
    for y in range(height):
        for x in range(width):
            s = index((x, y))
            if (x, y) == goal_c:
                transition[s, :, s] = 1.0
                reward[s, :] = 1.0
                continue
            if (x, y) in hazard_set:
                cost[s, :] = 1.0
            for a in range(4):
                for outcome, (dx, dy) in enumerate(MOVES):
                    prob = 1.0 - slip if outcome == a else slip / 3.0
                    if prob == 0.0:
                        continue
                    nxt = (x + dx, y + dy)
                    s2 = index(nxt) if inside(nxt) else s
                    transition[s, a, s2] += prob

    rho = np.zeros(n)
    rho[index(start_c)] = 1.0
    spec = CmdpSpec(
        transition=transition,
        reward=reward,
        costs=cost[None],
        limits=np.array([cost_limit]),
        gamma=gamma,
        rho=rho,
        name=f"gridworld-{width}x{height}",
        meta={
            "builder": "gridworld",
            "width": width,
            "height": height,
            "hazards": sorted(hazard_set),
            "goal": goal_c,
            "start": start_c,
            "slip": slip,
        },
    )
    return ensure_valid(spec)


def build_pointmass_velocity(
    n_positions: int,
    n_velocities: int,
    action_levels: int,
    alpha_r: float = 1.0,
    alpha_c: float = 1.0,
    gamma: float = 0.9,
    cost_limit: float = 1.0,
    friction: float = 0.5,
) -> CmdpSpec:
    """Point mass on a circular track with discretized velocity.

    Action k pushes the velocity up by k lattice steps; friction takes one
    step away with probability ``friction``. Reward is alpha_r times the
    normalized velocity, cost is alpha_c times the squared normalized
    thrust.
    """
    if min(n_positions, n_velocities, action_levels) < 2:
        raise BadGeometryError("positions, velocities and action levels must all be >= 2")
    if not 0.0 <= friction <= 1.0:
        raise BadGeometryError(f"friction must be in [0, 1], got {friction}")

    n = n_positions * n_velocities
    thrust = np.linspace(0.0, 1.0, action_levels)

    def index(pos: int, vel: int) -> int:
        return pos * n_velocities + vel

    transition = np.zeros((n, action_levels, n))
    reward = np.zeros((n, action_levels))
    cost = np.zeros((n, action_levels))
    for pos in range(n_positions):
        for vel in range(n_velocities):
            s = index(pos, vel)
            reward[s, :] = alpha_r * vel / (n_velocities - 1)
            cost[s, :] = alpha_c * thrust**2
            for k in range(action_levels):
                for drag, prob in ((1, friction), (0, 1.0 - friction)):
                    if prob == 0.0:
                        continue
                    v2 = min(max(vel + k - drag, 0), n_velocities - 1)
                    p2 = (pos + v2) % n_positions
                    transition[s, k, index(p2, v2)] += prob

    rho = np.zeros(n)
    rho[index(0, 0)] = 1.0
    spec = CmdpSpec(
        transition=transition,
        reward=reward,
        costs=cost[None],
        limits=np.array([cost_limit]),
        gamma=gamma,
        rho=rho,
        name=f"pointmass-{n_positions}x{n_velocities}x{action_levels}",
        meta={
            "builder": "pointmass_velocity",
            "n_positions": n_positions,
            "n_velocities": n_velocities,
            "action_levels": action_levels,
            "alpha_r": alpha_r,
            "alpha_c": alpha_c,
            "friction": friction,
        },
    )
    return ensure_valid(spec)


def build_random(
    n_states: int,
    n_actions: int,
    n_costs: int = 1,
    gamma: float = 0.9,
    seed: int = 0,
    cost_limits: Optional[Sequence[float]] = None,
) -> CmdpSpec:
    """Dense random CMDP: Dirichlet(1) transitions, U[0,1] rewards and costs."""
    if n_states < 1 or n_actions < 1 or n_costs < 1:
        raise BadGeometryError("random CMDP needs at least one state, action and cost")
    rng = np.random.default_rng(seed)
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    limits = (
        np.asarray(cost_limits, dtype=float)
        if cost_limits is not None
        else np.full(n_costs, 0.5 / (1.0 - gamma))
    )
    spec = CmdpSpec(
        transition=transition,
        reward=rng.random((n_states, n_actions)),
        costs=rng.random((n_costs, n_states, n_actions)),
        limits=limits,
        gamma=gamma,
        rho=rng.dirichlet(np.ones(n_states)),
        name=f"random-{n_states}x{n_actions}-seed{seed}",
        meta={"builder": "random", "seed": seed},
    )
    return ensure_valid(spec)


# =============================================================================
# SERIALIZATION
# =============================================================================


class CmdpDocument(BaseModel):
    """JSON document form of a CmdpSpec (see docs in CONTRIBUTING.md)."""

    schema_version: str = Field(SCHEMA_VERSION, alias="schema")
    name: str = "cmdp"
    gamma: float
    rho: list[float]
    transition: list[list[list[float]]]
    reward: list[list[float]]
    costs: list[list[list[float]]]
    limits: list[float]
    meta: dict[str, Any] = {}

    model_config = {"populate_by_name": True}


def to_document(spec: CmdpSpec) -> dict[str, Any]:
    doc = CmdpDocument(
        name=spec.name,
        gamma=spec.gamma,
        rho=spec.rho.tolist(),
        transition=spec.transition.tolist(),
        reward=spec.reward.tolist(),
        costs=spec.costs.tolist(),
        limits=spec.limits.tolist(),
        meta=json.loads(json.dumps(spec.meta, default=list)),
    )
    return doc.model_dump(by_alias=True)


def from_document(data: dict[str, Any]) -> CmdpSpec:
    doc = CmdpDocument.model_validate(data)
    if doc.schema_version != SCHEMA_VERSION:
        raise ValueError(f"Unsupported CMDP schema {doc.schema_version!r}")
    spec = CmdpSpec(
        transition=np.array(doc.transition),
        reward=np.array(doc.reward),
        costs=np.array(doc.costs),
        limits=np.array(doc.limits),
        gamma=doc.gamma,
        rho=np.array(doc.rho),
        name=doc.name,
        meta=doc.meta,
    )
    return ensure_valid(spec)


def save_spec(spec: CmdpSpec, path: Path) -> None:
    path.write_text(json.dumps(to_document(spec), indent=2) + "\n", encoding="utf-8")


def load_spec(path: Path) -> CmdpSpec:
    return from_document(json.loads(path.read_text(encoding="utf-8")))


def describe(spec: CmdpSpec) -> dict[str, Any]:
    return {
        "name": spec.name,
        "n_states": spec.n_states,
        "n_actions": spec.n_actions,
        "n_costs": spec.n_costs,
        "gamma": spec.gamma,
        "limits": spec.limits.tolist(),
    }
