"""End-to-end training on the 3x3 hazard gridworld (full 1000-iteration runs)."""

import pytest

from src.cmdp import build_gridworld, deterministic_optimum
from src.trainer import Algorithm, SlackConfig, TrainerConfig, train

SEEDS = range(5)
COST_LIMIT = 0.45


@pytest.fixture(scope="module")
def spec():
    return build_gridworld(3, 3, [(1, 1)], (2, 1), gamma=0.9, cost_limit=COST_LIMIT, start=(0, 1))


@pytest.fixture(scope="module")
def runs(spec):
    slack = SlackConfig.preset("default", COST_LIMIT)
    out = {}
    for algorithm in (Algorithm.PCRPO, Algorithm.CRPO):
        out[algorithm] = [train(TrainerConfig(seed=seed, algorithm=algorithm), spec, slack) for seed in SEEDS]
    return out


@pytest.mark.timeout(600)
def test_pcrpo_is_feasible_and_near_optimal(spec, runs):
    optimum = deterministic_optimum(spec)
    assert optimum is not None
    for result in runs[Algorithm.PCRPO]:
        v_r, v_c = result.final_means(window=10)
        assert v_c[0] <= 1.05 * COST_LIMIT
        assert v_r >= 0.95 * optimum.reward_value


@pytest.mark.timeout(600)
def test_pcrpo_switches_no_more_than_crpo(runs):
    for pcrpo, crpo in zip(runs[Algorithm.PCRPO], runs[Algorithm.CRPO]):
        assert pcrpo.flip_count <= crpo.flip_count


@pytest.mark.timeout(600)
def test_every_logged_kl_within_threshold(runs):
    for results in runs.values():
        for result in results:
            assert max(r.kl for r in result.records) <= TrainerConfig().kl_threshold
