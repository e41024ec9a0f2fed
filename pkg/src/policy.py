"""
Tabular softmax policies.

A policy is the logit table w[s, a]; probabilities are the row-wise
softmax. Updates return new policies and never touch the old logits.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy.special import log_softmax, rel_entr, softmax

from .cmdp import Channel, CmdpSpec, QTable, default_horizon, discounted_occupancy, rollout_batch

logger = structlog.get_logger(__name__)

CHECKPOINT_SCHEMA = "policy/v1"


class ChannelMismatchError(ValueError):
    """A Q table was computed for a different channel than the caller expects."""


class DimensionMismatchError(ValueError):
    """Parameter-space vector does not match the policy's logit count."""


@dataclass(frozen=True)
class SoftmaxPolicy:
    logits: np.ndarray

    def __post_init__(self):
        w = np.array(self.logits, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise DimensionMismatchError(f"logits must be an S x A table, got shape {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "logits", w)

    @property
    def n_states(self) -> int:
        return int(self.logits.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.logits.shape[1])

    @property
    def size(self) -> int:
        return int(self.logits.size)

    def probs(self) -> np.ndarray:
        return softmax(self.logits, axis=1)

    def log_probs(self) -> np.ndarray:
        return log_softmax(self.logits, axis=1)


QLike = Union[QTable, "np.ndarray", Any]


def _table(q: QLike) -> np.ndarray:
    return np.asarray(getattr(q, "table", q), dtype=float)


def _check_shape(policy: SoftmaxPolicy, table: np.ndarray) -> None:
    if table.shape != policy.logits.shape:
        raise DimensionMismatchError(
            f"table shape {table.shape} does not match policy logits {policy.logits.shape}"
        )


# =============================================================================
# CONSTRUCTION
# =============================================================================


def uniform(spec: CmdpSpec) -> SoftmaxPolicy:
    return SoftmaxPolicy(np.zeros((spec.n_states, spec.n_actions)))


def random_init(spec: CmdpSpec, seed: int, scale: float = 0.1) -> SoftmaxPolicy:
    """Logits drawn from N(0, scale^2)."""
    rng = np.random.default_rng(seed)
    return SoftmaxPolicy(rng.normal(0.0, scale, size=(spec.n_states, spec.n_actions)))


def deterministic(spec: CmdpSpec, actions, sharpness: float = 50.0) -> SoftmaxPolicy:
    """Near-deterministic policy putting almost all mass on ``actions[s]``."""
    w = np.zeros((spec.n_states, spec.n_actions))
    w[np.arange(spec.n_states), np.asarray(actions, dtype=int)] = sharpness
    return SoftmaxPolicy(w)


def flatten(policy: SoftmaxPolicy) -> np.ndarray:
    return policy.logits.reshape(-1).copy()


def unflatten(vector: np.ndarray, n_states: int, n_actions: int) -> SoftmaxPolicy:
    vector = np.asarray(vector, dtype=float)
    if vector.size != n_states * n_actions:
        raise DimensionMismatchError(f"vector of size {vector.size} cannot fill {n_states}x{n_actions}")
    return SoftmaxPolicy(vector.reshape(n_states, n_actions))


# =============================================================================
# PROBABILITIES AND SCORES
# =============================================================================


def action_probs(policy: SoftmaxPolicy, s: int) -> np.ndarray:
    return softmax(policy.logits[s])


def score(policy: SoftmaxPolicy, s: int, a: int) -> np.ndarray:
    """Flattened grad_w log pi(a|s): row s holds 1{a'=a} - pi(a'|s)."""
    out = np.zeros_like(policy.logits)
    out[s] = -action_probs(policy, s)
    out[s, a] += 1.0
    return out.reshape(-1)


def advantage(policy: SoftmaxPolicy, q: QLike) -> np.ndarray:
    """Q(s,a) - sum_a' pi(a'|s) Q(s,a')."""
    table = _table(q)
    _check_shape(policy, table)
    baseline = np.einsum("sa,sa->s", policy.probs(), table)
    return table - baseline[:, None]


# =============================================================================
# GRADIENTS
# =============================================================================


def value_gradient(
    spec: CmdpSpec,
    policy: SoftmaxPolicy,
    q: QTable,
    channel: Optional[Channel] = None,
    mode: str = "exact",
    episodes: int = 1000,
    horizon: Optional[int] = None,
    seed: int = 0,
) -> np.ndarray:
    """grad_w V(rho) = E[ Q(s,a) * score(s,a) ] under the discounted occupancy.

    ``exact`` weights by the linear-solve occupancy; ``sampled`` averages
    gamma^t Q(s_t,a_t) score(s_t,a_t) over seeded rollouts.
    """
    if channel is not None and getattr(q, "channel", channel) != channel:
        raise ChannelMismatchError(f"Q table is for {q.channel}, expected {channel}")
    table = _table(q)
    _check_shape(policy, table)
    probs = policy.probs()

    if mode == "exact":
        occupancy = discounted_occupancy(spec, probs, normalized=False)
        return (occupancy[:, None] * probs * advantage(policy, table)).reshape(-1)

    if mode != "sampled":
        raise ValueError(f"Unknown gradient mode: {mode!r}")

    horizon = horizon or default_horizon(spec.gamma)
    states, actions = rollout_batch(spec, probs, episodes, horizon, np.random.default_rng(seed))
    weights = (spec.gamma ** np.arange(horizon))[None, :] * table[states, actions]
    s_flat, a_flat, w_flat = states.reshape(-1), actions.reshape(-1), weights.reshape(-1)
    grad = np.zeros_like(table)
    np.add.at(grad, (s_flat, a_flat), w_flat)
    np.add.at(grad, s_flat, -w_flat[:, None] * probs[s_flat])
    return (grad / episodes).reshape(-1)


# =============================================================================
# UPDATES
# =============================================================================


def npg_update(policy: SoftmaxPolicy, qhat: QLike, eta: float, gamma: float, sign: int = 1) -> SoftmaxPolicy:
    """w' = w + sign * eta / (1 - gamma) * Qhat."""
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    table = _table(qhat)
    _check_shape(policy, table)
    return SoftmaxPolicy(policy.logits + sign * eta / (1.0 - gamma) * table)


def direction_update(policy: SoftmaxPolicy, d: np.ndarray, eta: float) -> SoftmaxPolicy:
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.size != policy.size:
        raise DimensionMismatchError(f"direction has {d.size} entries, policy has {policy.size} logits")
    return SoftmaxPolicy(policy.logits + eta * d.reshape(policy.logits.shape))


def kl_divergence(old: SoftmaxPolicy, new: SoftmaxPolicy, state_weights: np.ndarray) -> float:
    """sum_s d(s) KL(pi_old(.|s) || pi_new(.|s))."""
    weights = np.asarray(state_weights, dtype=float)
    if old.logits.shape != new.logits.shape:
        raise DimensionMismatchError(f"policies differ in shape: {old.logits.shape} vs {new.logits.shape}")
    if weights.shape != (old.n_states,) or abs(float(weights.sum()) - 1.0) > 1e-9:
        raise ValueError("state_weights must be a distribution over states")
    per_state = rel_entr(old.probs(), new.probs()).sum(axis=1)
    return max(0.0, float(weights @ per_state))


# =============================================================================
# CHECKPOINTS
# =============================================================================


class PolicyCheckpoint(BaseModel):
    schema_version: str = Field(CHECKPOINT_SCHEMA, alias="schema")
    logits: list[list[float]]
    meta: dict[str, Any] = {}

    model_config = {"populate_by_name": True}


def to_document(policy: SoftmaxPolicy, **meta: Any) -> dict[str, Any]:
    return PolicyCheckpoint(logits=policy.logits.tolist(), meta=meta).model_dump(by_alias=True)


def from_document(data: dict[str, Any]) -> SoftmaxPolicy:
    doc = PolicyCheckpoint.model_validate(data)
    if doc.schema_version != CHECKPOINT_SCHEMA:
        raise ValueError(f"Unsupported policy schema {doc.schema_version!r}")
    return SoftmaxPolicy(np.array(doc.logits))


def save_checkpoint(policy: SoftmaxPolicy, path: Path, **meta: Any) -> None:
    path.write_text(json.dumps(to_document(policy, **meta), indent=2) + "\n", encoding="utf-8")
    logger.debug("policy.checkpoint.saved", path=str(path))


def load_checkpoint(path: Path) -> SoftmaxPolicy:
    return from_document(json.loads(path.read_text(encoding="utf-8")))
