"""
Gradient manipulation kernel for reward/cost soft switching.

Pure vector math on numpy arrays: normal-plane projection, the
conflict-aware combination used by PCRPO, the one-sided gradient-surgery
variant used by SCRPO, norm comparisons between the strategies, and the
L-smooth improvement bounds together with a quadratic test bed that
checks them numerically.

Nothing in here holds state; every function is safe to call from any
thread.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
import structlog

logger = structlog.get_logger(__name__)

EPS = 1e-12

# Below this cosine the surgery direction can be longer than the projected one
# on unit-norm pairs (root of 2c^2 - c - 2 = 0 in c = cos(theta)).
SURGERY_DOMINANCE_MIN_COS = -(math.sqrt(17.0) - 1.0) / 4.0


class ZeroGradientError(ValueError):
    """A gradient needed by the operation has (numerically) zero norm."""


class StepTooLargeError(ValueError):
    """Step size violates eta <= 1/L."""


class ManipulationMode(str, Enum):
    CONFLICT_PROJECTED = "conflict_projected"
    ALIGNED_AVERAGED = "aligned_averaged"


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    return arr


@dataclass(frozen=True)
class GradientPair:
    """Reward gradient, cost gradient and the two pairs of combination weights.

    ``beta_r``/``beta_c`` weight the plain average, ``beta_r_plus``/
    ``beta_c_plus`` weight the projected combination.
    """

    g_r: np.ndarray
    g_c: np.ndarray
    beta_r: float = 0.5
    beta_c: float = 0.5
    beta_r_plus: float = 0.5
    beta_c_plus: float = 0.5

    def __post_init__(self):
        g_r = _as_vector(self.g_r)
        g_c = _as_vector(self.g_c)
        if g_r.size < 1 or g_r.shape != g_c.shape:
            raise ValueError(
                f"gradient dimensions must match and be >= 1, got {g_r.size} and {g_c.size}"
            )
        if not (np.all(np.isfinite(g_r)) and np.all(np.isfinite(g_c))):
            raise ValueError("gradients must be finite")
        for name, (a, b) in {
            "beta_r/beta_c": (self.beta_r, self.beta_c),
            "beta_r_plus/beta_c_plus": (self.beta_r_plus, self.beta_c_plus),
        }.items():
            if a < 0 or b < 0 or abs(a + b - 1.0) > 1e-12:
                raise ValueError(f"{name} must be nonnegative and sum to 1, got {a}, {b}")
        object.__setattr__(self, "g_r", g_r)
        object.__setattr__(self, "g_c", g_c)

    @property
    def dim(self) -> int:
        return int(self.g_r.size)

    def normalized(self) -> "GradientPair":
        """Rescale each nonzero gradient to unit norm; zero gradients stay zero."""
        return replace(self, g_r=_unit_or_zero(self.g_r), g_c=_unit_or_zero(self.g_c))


@dataclass(frozen=True)
class ManipulationResult:
    """Combined update direction and how it was obtained.

    ``effective_weights`` are the (lambda_r, lambda_c) with
    direction = lambda_r * g_r + lambda_c * g_c for the gradients actually
    combined (after normalization when it was requested).
    """

    direction: np.ndarray
    cos_theta: float
    theta_deg: float
    mode: ManipulationMode
    effective_weights: tuple[float, float]
    degenerate: bool = False

    @property
    def conflicting(self) -> bool:
        return self.mode == ManipulationMode.CONFLICT_PROJECTED


def _unit_or_zero(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n <= EPS:
        return np.zeros_like(v)
    return v / n


def _require_nonzero(*vectors: np.ndarray) -> None:
    for v in vectors:
        if float(np.linalg.norm(v)) <= EPS:
            raise ZeroGradientError("gradient norm is below 1e-12")


# =============================================================================
# PRIMITIVES
# =============================================================================


def cos_angle(g_a, g_b) -> float:
    """Cosine of the angle between two nonzero vectors, clamped to [-1, 1]."""
    a = _as_vector(g_a)
    b = _as_vector(g_b)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= EPS or nb <= EPS:
        raise ZeroGradientError("cannot take the angle of a zero gradient")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def theta_degrees(cos_theta: float) -> float:
    return math.degrees(math.acos(min(1.0, max(-1.0, cos_theta))))


def project_onto_normal_plane(g_a, g_b) -> np.ndarray:
    """Remove from ``g_a`` its component along ``g_b``."""
    a = _as_vector(g_a)
    b = _as_vector(g_b)
    nb2 = float(np.dot(b, b))
    if math.sqrt(nb2) <= EPS:
        raise ZeroGradientError("cannot project onto the normal plane of a zero gradient")
    return a - (float(np.dot(a, b)) / nb2) * b


def combine_conflicting(pair: GradientPair) -> np.ndarray:
    """beta_r+ * g_r+ + beta_c+ * g_c+ with mutual normal-plane projections."""
    _require_nonzero(pair.g_r, pair.g_c)
    g_r_plus = project_onto_normal_plane(pair.g_r, pair.g_c)
    g_c_plus = project_onto_normal_plane(pair.g_c, pair.g_r)
    return pair.beta_r_plus * g_r_plus + pair.beta_c_plus * g_c_plus


def combine_aligned(pair: GradientPair) -> np.ndarray:
    """beta_r * g_r + beta_c * g_c."""
    _require_nonzero(pair.g_r, pair.g_c)
    return pair.beta_r * pair.g_r + pair.beta_c * pair.g_c


def surgery_combine(pair: GradientPair) -> np.ndarray:
    """One-sided surgery: only the cost gradient is projected, and only on conflict.

    A single zero gradient is handled like ``manipulate``: the other one is
    returned scaled by its averaging weight.
    """
    r_zero = float(np.linalg.norm(pair.g_r)) <= EPS
    c_zero = float(np.linalg.norm(pair.g_c)) <= EPS
    if r_zero and c_zero:
        raise ZeroGradientError("both reward and cost gradients are zero")
    if r_zero:
        return pair.beta_c * pair.g_c
    if c_zero:
        return pair.beta_r * pair.g_r
    cos_t = cos_angle(pair.g_r, pair.g_c)
    if cos_t < 0:
        g_c_plus = project_onto_normal_plane(pair.g_c, pair.g_r)
        return pair.beta_r_plus * pair.g_r + pair.beta_c_plus * g_c_plus
    return pair.beta_r * pair.g_r + pair.beta_c * pair.g_c


def manipulate(pair: GradientPair, normalize: bool = False) -> ManipulationResult:
    """Conflict-aware combination of reward and cost gradients.

    Projects both gradients onto each other's normal plane when they
    conflict (cos < 0), otherwise takes the weighted average. cos == 0
    goes to the averaging branch; both branches agree there.

    If exactly one gradient is zero the other one is returned scaled by its
    averaging weight. ``normalize`` rescales both gradients to unit norm
    first.
    """
    work = pair.normalized() if normalize else pair
    r_zero = float(np.linalg.norm(work.g_r)) <= EPS
    c_zero = float(np.linalg.norm(work.g_c)) <= EPS

    if r_zero and c_zero:
        raise ZeroGradientError("both reward and cost gradients are zero")
    if r_zero or c_zero:
        weights = (0.0, work.beta_c) if r_zero else (work.beta_r, 0.0)
        direction = weights[0] * work.g_r + weights[1] * work.g_c
        return ManipulationResult(
            direction=direction,
            cos_theta=0.0,
            theta_deg=90.0,
            mode=ManipulationMode.ALIGNED_AVERAGED,
            effective_weights=weights,
            degenerate=True,
        )

    cos_t = cos_angle(work.g_r, work.g_c)
    if cos_t < 0:
        p = float(np.dot(work.g_r, work.g_c))
        lam_r = work.beta_r_plus - work.beta_c_plus * p / float(np.dot(work.g_r, work.g_r))
        lam_c = work.beta_c_plus - work.beta_r_plus * p / float(np.dot(work.g_c, work.g_c))
        direction = combine_conflicting(work)
        mode = ManipulationMode.CONFLICT_PROJECTED
    else:
        lam_r, lam_c = work.beta_r, work.beta_c
        direction = combine_aligned(work)
        mode = ManipulationMode.ALIGNED_AVERAGED

    return ManipulationResult(
        direction=direction,
        cos_theta=cos_t,
        theta_deg=theta_degrees(cos_t),
        mode=mode,
        effective_weights=(float(lam_r), float(lam_c)),
    )


# =============================================================================
# NORM ANALYSIS
# =============================================================================


@dataclass(frozen=True)
class NormComparison:
    """Norms of the three candidate combinations for one input scaling."""

    norm_projected: float
    norm_average: float
    norm_surgery: float
    theta_deg: float
    projected_ge_average: bool
    projected_ge_surgery: bool

    def to_dict(self) -> dict:
        return {
            "norm_projected": self.norm_projected,
            "norm_average": self.norm_average,
            "norm_surgery": self.norm_surgery,
            "theta_deg": self.theta_deg,
            "projected_ge_average": self.projected_ge_average,
            "projected_ge_surgery": self.projected_ge_surgery,
        }


@dataclass(frozen=True)
class NormDominanceReport:
    raw: NormComparison
    normalized: NormComparison

    def to_dict(self) -> dict:
        return {"raw": self.raw.to_dict(), "normalized": self.normalized.to_dict()}


def _compare_norms(pair: GradientPair) -> NormComparison:
    cos_t = cos_angle(pair.g_r, pair.g_c)
    n_proj = float(np.linalg.norm(combine_conflicting(pair)))
    n_avg = float(np.linalg.norm(combine_aligned(pair)))
    n_surg = float(np.linalg.norm(surgery_combine(pair)))
    tol = 1e-12 * max(1.0, n_proj)
    return NormComparison(
        norm_projected=n_proj,
        norm_average=n_avg,
        norm_surgery=n_surg,
        theta_deg=theta_degrees(cos_t),
        projected_ge_average=n_proj + tol >= n_avg,
        projected_ge_surgery=n_proj + tol >= n_surg,
    )


def norm_dominance_report(pair: GradientPair) -> NormDominanceReport:
    """Compare ||g|| (projected), ||g-|| (average) and ||g'|| (surgery).

    Reported for the raw gradients and for their unit-normalized versions;
    the inequalities are only guaranteed in the normalized regime.
    """
    _require_nonzero(pair.g_r, pair.g_c)
    return NormDominanceReport(raw=_compare_norms(pair), normalized=_compare_norms(pair.normalized()))


# =============================================================================
# IMPROVEMENT BOUNDS
# =============================================================================


def _check_step(eta: float, lipschitz: float) -> None:
    if lipschitz <= 0:
        raise ValueError(f"smoothness constant must be positive, got {lipschitz}")
    if eta <= 0:
        raise ValueError(f"step size must be positive, got {eta}")
    if eta > (1.0 / lipschitz) * (1.0 + 1e-12):
        raise StepTooLargeError(f"eta={eta} exceeds 1/L={1.0 / lipschitz}")


def improvement_bounds(pair: GradientPair, eta: float, lipschitz: float) -> tuple[float, float]:
    """Lower and upper bounds on f(w + eta*d) - f(w) for an L-smooth f = f_r + f_c.

    Uses the expressions that follow from the quadratic expansion (equal
    weights): for conflicting gradients the projected direction, otherwise
    the plain average.
    """
    _check_step(eta, lipschitz)
    _require_nonzero(pair.g_r, pair.g_c)
    c = cos_angle(pair.g_r, pair.g_c)
    nr = float(np.linalg.norm(pair.g_r))
    nc = float(np.linalg.norm(pair.g_c))
    sq = nr * nr + nc * nc
    cross = nr * nc

    if c < 0:
        lower = eta * (3 * sq - 3 * c * c * sq - 2 * c**3 * cross + 2 * c * cross) / 8.0
        upper = (5 * sq - 5 * c * c * sq + 2 * c**3 * cross - 2 * c * cross) / (8.0 * lipschitz)
    else:
        lower = eta * (3 * nr * nr + 6 * c * cross + 3 * nc * nc) / 8.0
        upper = (5 * nr * nr + 10 * c * cross + 5 * nc * nc) / (8.0 * lipschitz)
    return float(lower), float(upper)


@dataclass(frozen=True)
class QuadraticTestSpec:
    """Concave quadratic surrogates f_i(w) = b_i.w + 0.5 w'H_i w.

    ``lipschitz`` must dominate the spectral norm of H_r + H_c.
    """

    h_r: np.ndarray
    h_c: np.ndarray
    b_r: np.ndarray
    b_c: np.ndarray
    lipschitz: float
    w0: np.ndarray

    def __post_init__(self):
        dim = len(self.b_r)
        for name, h in (("h_r", self.h_r), ("h_c", self.h_c)):
            if h.shape != (dim, dim):
                raise ValueError(f"{name} must be {dim}x{dim}")
            if not np.allclose(h, h.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
            if np.max(np.linalg.eigvalsh(h)) > 1e-10:
                raise ValueError(f"{name} must be negative semidefinite")
        spectral = float(np.linalg.norm(self.h_r + self.h_c, ord=2))
        if self.lipschitz < spectral * (1.0 - 1e-12):
            raise ValueError(f"L={self.lipschitz} below spectral norm {spectral}")

    @property
    def dim(self) -> int:
        return len(self.b_r)

    def value(self, w: np.ndarray) -> float:
        h = self.h_r + self.h_c
        return float(np.dot(self.b_r + self.b_c, w) + 0.5 * w @ h @ w)

    def gradients(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.b_r + self.h_r @ w, self.b_c + self.h_c @ w

    @classmethod
    def random(
        cls,
        dim: int,
        rng: np.random.Generator,
        regime: Optional[str] = None,
    ) -> "QuadraticTestSpec":
        """Random instance; ``regime`` ("conflict" / "aligned") fixes the sign of g_r.g_c at w0."""
        a_r = rng.normal(size=(dim, dim))
        a_c = rng.normal(size=(dim, dim))
        h_r = -(a_r.T @ a_r) / dim
        h_c = -(a_c.T @ a_c) / dim
        lipschitz = float(np.linalg.norm(h_r + h_c, ord=2)) or 1.0
        w0 = rng.normal(size=dim)
        g_r = rng.normal(size=dim)
        g_c = rng.normal(size=dim)
        dot = float(np.dot(g_r, g_c))
        if (regime == "conflict" and dot >= 0) or (regime == "aligned" and dot < 0):
            g_c = -g_c
        return cls(
            h_r=h_r,
            h_c=h_c,
            b_r=g_r - h_r @ w0,
            b_c=g_c - h_c @ w0,
            lipschitz=lipschitz,
            w0=w0,
        )


@dataclass(frozen=True)
class TheoremCheck:
    delta_f: float
    lower: float
    upper: float
    cos_theta: float
    passed: bool
    upper_holds: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "delta_f": self.delta_f,
            "lower": self.lower,
            "upper": self.upper,
            "cos_theta": self.cos_theta,
            "passed": self.passed,
            "upper_holds": self.upper_holds,
            **self.details,
        }


def verify_theorem_bounds(spec: QuadraticTestSpec, eta: float) -> TheoremCheck:
    """Take one manipulated ascent step on a quadratic and check the bounds."""
    _check_step(eta, spec.lipschitz)
    g_r, g_c = spec.gradients(spec.w0)
    pair = GradientPair(g_r, g_c)
    result = manipulate(pair, normalize=False)
    w1 = spec.w0 + eta * result.direction

    delta_f = spec.value(w1) - spec.value(spec.w0)
    lower, upper = improvement_bounds(pair, eta, spec.lipschitz)
    tol = 1e-9 * max(1.0, abs(lower), abs(upper))
    check = TheoremCheck(
        delta_f=float(delta_f),
        lower=lower,
        upper=upper,
        cos_theta=result.cos_theta,
        passed=lower - tol <= delta_f,
        upper_holds=delta_f <= upper + tol,
        details={"eta": eta, "lipschitz": spec.lipschitz, "dim": spec.dim},
    )
    if not check.passed:
        logger.warning("theorem_lower_bound_failed", **check.to_dict())
    return check
