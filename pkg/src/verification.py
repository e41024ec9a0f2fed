"""
Property and bound suites for the gradient-manipulation kernel.

The gradient suite checks the projection algebra on random pairs; the
theorem suite takes one manipulated step on random concave quadratics and
compares the realized improvement with the analytic bounds. Asserted
properties decide the exit code; informational ones are reported only.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
import structlog

from .gradmanip import (
    SURGERY_DOMINANCE_MIN_COS,
    GradientPair,
    QuadraticTestSpec,
    combine_aligned,
    combine_conflicting,
    cos_angle,
    norm_dominance_report,
    project_onto_normal_plane,
    surgery_combine,
    verify_theorem_bounds,
)

logger = structlog.get_logger(__name__)

TOL = 1e-9
KERNEL_SPOT_CHECKS = 64

# Unequal raw norms break ||g|| >= ||g-||.
RAW_NORM_COUNTEREXAMPLE = (np.array([1.0, 0.0]), np.array([-2.0, 0.1]))


@dataclass
class PropertyResult:
    name: str
    asserted: bool
    checked: int = 0
    failures: int = 0
    counterexample: Optional[dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, ok: bool, **example: Any) -> None:
        self.checked += 1
        if not ok:
            self.failures += 1
            if self.counterexample is None:
                self.counterexample = {k: _jsonable(v) for k, v in example.items()}

    def record_many(self, ok: np.ndarray, example: Callable[[int], dict[str, Any]]) -> None:
        """Record a batch of outcomes; ``example(i)`` describes the i-th one."""
        ok = np.asarray(ok, dtype=bool)
        bad = np.flatnonzero(~ok)
        self.checked += int(ok.size)
        self.failures += int(bad.size)
        if bad.size and self.counterexample is None:
            self.counterexample = {k: _jsonable(v) for k, v in example(int(bad[0])).items()}

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "asserted": self.asserted,
            "checked": self.checked,
            "failures": self.failures,
            "counterexample": self.counterexample,
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.floating):
        return float(value)
    return value


@dataclass
class SuiteReport:
    results: list[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results if r.asserted)

    def get(self, name: str) -> PropertyResult:
        return next(r for r in self.results if r.name == name)

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "properties": [r.to_dict() for r in self.results]}


# =============================================================================
# GRADIENT PROPERTIES
# =============================================================================


def _rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def _unit_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    fallback = np.eye(v.shape[1])[0]
    return np.where(norms > 0, v / np.where(norms > 0, norms, 1.0), fallback)


def random_unit_pairs(rng: np.random.Generator, n: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` unit pairs as (n, dim) arrays, angles uniform on [0, 180] degrees."""
    g_r = _unit_rows(rng.normal(size=(n, dim)))
    theta = rng.uniform(0.0, np.pi, size=n)
    if dim == 1:
        return g_r, np.where((theta < np.pi / 2)[:, None], g_r, -g_r)
    u = rng.normal(size=(n, dim))
    u = _unit_rows(u - _rowdot(u, g_r)[:, None] * g_r)
    return g_r, np.cos(theta)[:, None] * g_r + np.sin(theta)[:, None] * u


def random_unit_pair(rng: np.random.Generator, dim: int) -> tuple[np.ndarray, np.ndarray]:
    g_r, g_c = random_unit_pairs(rng, 1, dim)
    return g_r[0], g_c[0]


@dataclass
class _Combined:
    """Row-wise combinations of equal-weight gradient pairs."""

    cos: np.ndarray
    g_r_plus: np.ndarray
    g_c_plus: np.ndarray
    projected: np.ndarray
    average: np.ndarray
    surgery: np.ndarray

    @classmethod
    def of(cls, g_r: np.ndarray, g_c: np.ndarray) -> "_Combined":
        dot = _rowdot(g_r, g_c)
        nr2, nc2 = _rowdot(g_r, g_r), _rowdot(g_c, g_c)
        cos = np.clip(dot / np.sqrt(nr2 * nc2), -1.0, 1.0)
        g_r_plus = g_r - (dot / nc2)[:, None] * g_c
        g_c_plus = g_c - (dot / nr2)[:, None] * g_r
        average = 0.5 * (g_r + g_c)
        surgery = np.where((cos < 0)[:, None], 0.5 * (g_r + g_c_plus), average)
        return cls(cos, g_r_plus, g_c_plus, 0.5 * (g_r_plus + g_c_plus), average, surgery)


def _kernel_agrees(g_r: np.ndarray, g_c: np.ndarray, batch: _Combined, i: int) -> bool:
    pair = GradientPair(g_r[i], g_c[i])
    checks = [
        (cos_angle(pair.g_r, pair.g_c), batch.cos[i]),
        (project_onto_normal_plane(pair.g_r, pair.g_c), batch.g_r_plus[i]),
        (project_onto_normal_plane(pair.g_c, pair.g_r), batch.g_c_plus[i]),
        (combine_conflicting(pair), batch.projected[i]),
        (combine_aligned(pair), batch.average[i]),
        (surgery_combine(pair), batch.surgery[i]),
    ]
    return all(np.allclose(kernel, row, rtol=0.0, atol=1e-12) for kernel, row in checks)


def run_gradient_properties(samples: int, dims: Sequence[int], seed: int = 0) -> SuiteReport:
    """Projection algebra over ``samples`` random pairs per dimension.

    Pairs are checked in batch; the first ``KERNEL_SPOT_CHECKS`` of each
    dimension also go through the scalar kernel, which must agree with the
    batch rows.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)

    kernel = PropertyResult("kernel_agreement", asserted=True)
    orthogonal = PropertyResult("orthogonality", asserted=True)
    equal_norm = PropertyResult("equal_norm_dominance", asserted=True)
    surgery = PropertyResult("surgery_dominance", asserted=True)
    ascent = PropertyResult("ascent_identity", asserted=True)
    surgery_wide = PropertyResult("surgery_dominance_below_min_cos", asserted=False)
    raw_norm = PropertyResult("raw_norm_dominance", asserted=False)

    g_r, g_c = RAW_NORM_COUNTEREXAMPLE
    raw = norm_dominance_report(GradientPair(g_r, g_c)).raw
    raw_norm.record(raw.projected_ge_average, g_r=g_r, g_c=g_c, **raw.to_dict())

    for dim in dims:
        g_r, g_c = random_unit_pairs(rng, samples, dim)
        unit = _Combined.of(g_r, g_c)
        cos_t = unit.cos

        def pair_at(i: int, **extra: Any) -> dict[str, Any]:
            return {"g_r": g_r[i], "g_c": g_c[i], "cos": cos_t[i], **extra}

        for i in range(min(samples, KERNEL_SPOT_CHECKS)):
            kernel.record(_kernel_agrees(g_r, g_c, unit, i), **pair_at(i))

        orthogonal.record_many(
            (np.abs(_rowdot(unit.g_r_plus, g_c)) <= TOL) & (np.abs(_rowdot(unit.g_c_plus, g_r)) <= TOL),
            pair_at,
        )

        n_proj = np.linalg.norm(unit.projected, axis=1)
        n_avg = np.linalg.norm(unit.average, axis=1)
        n_surg = np.linalg.norm(unit.surgery, axis=1)
        opposed = np.flatnonzero(cos_t <= 0)
        equal_norm.record_many(
            (np.abs(n_proj - (1.0 - cos_t) * n_avg) <= TOL)[opposed] & (n_proj + TOL >= n_avg)[opposed],
            lambda k: pair_at(int(opposed[k]), norm_projected=n_proj[opposed[k]], norm_average=n_avg[opposed[k]]),
        )
        dominated = n_proj + TOL >= n_surg
        for target, rows in (
            (surgery, np.flatnonzero((cos_t < 0) & (cos_t >= SURGERY_DOMINANCE_MIN_COS))),
            (surgery_wide, np.flatnonzero(cos_t < SURGERY_DOMINANCE_MIN_COS)),
        ):
            target.record_many(dominated[rows], lambda k, rows=rows: pair_at(int(rows[k])))

        # Same identity on unequal norms.
        scales = np.exp(rng.normal(size=(samples, 2)))
        s_r, s_c = scales[:, :1] * g_r, scales[:, 1:] * g_c
        scaled = _Combined.of(s_r, s_c)
        magnitude = scales[:, 0] ** 2 + scales[:, 1] ** 2
        expected = (1.0 - cos_t**2) * magnitude / 2.0
        got = _rowdot(s_r + s_c, scaled.projected)
        ascent.record_many(
            np.abs(got - expected) <= TOL * np.maximum(1.0, magnitude),
            lambda i: {"g_r": s_r[i], "g_c": s_c[i], "got": got[i], "expected": expected[i]},
        )

        conflicting = np.flatnonzero(cos_t < 0)
        raw_ok = np.linalg.norm(scaled.projected, axis=1) + TOL >= np.linalg.norm(scaled.average, axis=1)
        raw_norm.record_many(
            raw_ok[conflicting],
            lambda k: {"g_r": s_r[conflicting[k]], "g_c": s_c[conflicting[k]]},
        )

    report = SuiteReport([kernel, orthogonal, equal_norm, surgery, ascent, surgery_wide, raw_norm])
    logger.info(
        "verification.gradients",
        samples=samples,
        dims=list(dims),
        passed=report.passed,
        failures={r.name: r.failures for r in report.results},
    )
    return report


# =============================================================================
# THEOREM BOUNDS
# =============================================================================


def edge_instances() -> list[tuple[str, QuadraticTestSpec]]:
    """Opposed and parallel gradients at w0 on H = -I, L = 2."""
    eye = -np.eye(2)
    zero = np.zeros(2)
    return [
        ("opposed", QuadraticTestSpec(eye, eye, np.array([1.0, 0.0]), np.array([-1.0, 0.0]), 2.0, zero)),
        ("parallel", QuadraticTestSpec(eye, eye, np.array([1.0, 0.0]), np.array([2.0, 0.0]), 2.0, zero)),
    ]


@dataclass
class TheoremReport:
    instances: int = 0
    lower_passes: int = 0
    upper_holds: int = 0
    strict_failures: int = 0
    failures: list[dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.lower_passes == self.instances and self.strict_failures == 0

    @property
    def upper_rate(self) -> float:
        return self.upper_holds / self.instances if self.instances else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "instances": self.instances,
            "lower_passes": self.lower_passes,
            "upper_holds": self.upper_holds,
            "upper_rate": self.upper_rate,
            "strict_failures": self.strict_failures,
            "failures": self.failures,
        }


def run_theorem_suite(instances: int, seed: int = 0, dims: Sequence[int] = (2, 4, 16)) -> TheoremReport:
    """``instances`` random quadratics per regime, each at eta = 1/L and 1/(2L).

    Lower bound must hold everywhere, and the step must strictly improve f
    whenever the gradients are not collinear.
    """
    if instances < 1:
        raise ValueError(f"instances must be >= 1, got {instances}")
    rng = np.random.default_rng(seed)
    report = TheoremReport()

    def check(label: str, spec: QuadraticTestSpec, eta: float) -> None:
        result = verify_theorem_bounds(spec, eta)
        report.instances += 1
        report.lower_passes += int(result.passed)
        report.upper_holds += int(result.upper_holds)
        sin2 = 1.0 - result.cos_theta**2
        strict_ok = result.delta_f > 0 or sin2 <= 1e-12
        if not strict_ok:
            report.strict_failures += 1
        if not (result.passed and strict_ok):
            report.failures.append({"label": label, **result.to_dict()})

    for label, spec in edge_instances():
        check(label, spec, 1.0 / spec.lipschitz)

    for regime in ("conflict", "aligned"):
        for i in range(instances):
            spec = QuadraticTestSpec.random(dims[i % len(dims)], rng, regime=regime)
            for eta in (1.0 / spec.lipschitz, 0.5 / spec.lipschitz):
                check(f"{regime}-{i}", spec, eta)

    logger.info("verification.theorems", **{k: v for k, v in report.to_dict().items() if k != "failures"})
    return report
