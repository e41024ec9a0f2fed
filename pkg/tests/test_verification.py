"""Tests for src.verification."""

import time

import numpy as np
import pytest

from src.gradmanip import cos_angle
from src.verification import (
    edge_instances,
    random_unit_pair,
    random_unit_pairs,
    run_gradient_properties,
    run_theorem_suite,
)


@pytest.fixture(scope="module")
def gradient_report():
    return run_gradient_properties(samples=10_000, dims=[2, 8, 64], seed=0)


# -------------------------------------------------------------------
# gradient properties
# -------------------------------------------------------------------


def test_random_unit_pair_is_unit():
    rng = np.random.default_rng(1)
    for dim in (1, 2, 16):
        g_r, g_c = random_unit_pair(rng, dim)
        assert np.linalg.norm(g_r) == pytest.approx(1.0)
        assert np.linalg.norm(g_c) == pytest.approx(1.0)


def test_random_unit_pairs_batch_shapes():
    g_r, g_c = random_unit_pairs(np.random.default_rng(3), 50, 8)
    assert g_r.shape == g_c.shape == (50, 8)
    np.testing.assert_allclose(np.linalg.norm(g_c, axis=1), 1.0)


def test_random_unit_pairs_cover_conflicts():
    rng = np.random.default_rng(2)
    cosines = [cos_angle(*random_unit_pair(rng, 8)) for _ in range(200)]
    assert min(cosines) < -0.5 < 0.5 < max(cosines)


def test_asserted_properties_pass(gradient_report):
    assert gradient_report.passed
    for name in ("kernel_agreement", "orthogonality", "equal_norm_dominance", "surgery_dominance", "ascent_identity"):
        result = gradient_report.get(name)
        assert result.asserted
        assert result.checked > 0
        assert result.failures == 0


def test_raw_norm_dominance_reports_counterexample(gradient_report):
    raw = gradient_report.get("raw_norm_dominance")
    assert not raw.asserted
    assert raw.failures >= 1
    assert raw.counterexample["g_c"] == [-2.0, 0.1]


def test_report_serializes(gradient_report):
    doc = gradient_report.to_dict()
    assert doc["passed"] is True
    assert {p["name"] for p in doc["properties"]} >= {"orthogonality", "raw_norm_dominance"}


@pytest.mark.timeout(60)
def test_gradient_suite_full_size_within_budget():
    start = time.perf_counter()
    report = run_gradient_properties(samples=10_000, dims=[2, 8, 64], seed=7)
    assert time.perf_counter() - start < 5.0
    assert report.passed
    assert report.get("orthogonality").checked == 3 * 10_000


def test_gradient_suite_rejects_empty_run():
    with pytest.raises(ValueError, match="samples"):
        run_gradient_properties(samples=0, dims=[2])


# -------------------------------------------------------------------
# theorem bounds
# -------------------------------------------------------------------


def test_edge_instances():
    names = [name for name, _ in edge_instances()]
    assert names == ["opposed", "parallel"]


def test_theorem_suite_passes():
    report = run_theorem_suite(instances=100, seed=0)
    assert report.instances == 2 + 4 * 100
    assert report.passed
    assert report.lower_passes == report.instances
    assert report.failures == []
    assert 0.0 <= report.upper_rate <= 1.0


def test_theorem_suite_rejects_empty_run():
    with pytest.raises(ValueError, match="instances"):
        run_theorem_suite(instances=0)
