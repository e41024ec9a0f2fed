"""Tests for src.cmdp."""

import numpy as np
import pytest

from src.cmdp import (
    BadGeometryError,
    Channel,
    CmdpSpec,
    SpecValidationError,
    build_gridworld,
    build_pointmass_velocity,
    build_random,
    default_horizon,
    deterministic_optimum,
    discounted_occupancy,
    ensure_valid,
    exact_q,
    exact_value,
    load_spec,
    monte_carlo_value,
    sample_trajectory,
    save_spec,
    _draw_batch,
    validate,
)

from .conftest import GRID_DETOUR_REWARD, GRID_SHORTCUT_COST, GRID_SHORTCUT_REWARD

RIGHT = 1


def _one_hot(spec: CmdpSpec, action: int) -> np.ndarray:
    probs = np.zeros((spec.n_states, spec.n_actions))
    probs[:, action] = 1.0
    return probs


# -------------------------------------------------------------------
# channels
# -------------------------------------------------------------------


def test_channel_parse_and_str():
    assert Channel.parse("reward") == Channel.reward()
    assert Channel.parse("cost_1") == Channel.cost(1)
    assert str(Channel.cost(2)) == "cost_2"
    with pytest.raises(ValueError, match="Unknown channel"):
        Channel.parse("penalty")


def test_channel_table_rejects_missing_cost(gridworld):
    with pytest.raises(ValueError):
        gridworld.channel_table(Channel.cost(3))


# -------------------------------------------------------------------
# validation
# -------------------------------------------------------------------


def test_builders_produce_valid_specs(gridworld, random_cmdp, two_cost_cmdp):
    for spec in (gridworld, random_cmdp, two_cost_cmdp, build_pointmass_velocity(4, 4, 3)):
        assert validate(spec) == []


def test_two_dimensional_costs_are_promoted(gridworld):
    spec = CmdpSpec(
        gridworld.transition, gridworld.reward, gridworld.costs[0], [0.45], 0.9, gridworld.rho
    )
    assert spec.costs.shape == (1, 9, 4)
    assert spec.n_costs == 1


def test_validate_reports_row_sum_and_gamma(gridworld):
    transition = gridworld.transition.copy()
    transition[0, 0, 0] += 0.5
    spec = CmdpSpec(transition, gridworld.reward, gridworld.costs, gridworld.limits, 1.0, gridworld.rho)
    codes = {v.code for v in validate(spec)}
    assert {"row_sum", "gamma"} <= codes


def test_ensure_valid_raises_with_violations(gridworld):
    spec = CmdpSpec(
        gridworld.transition, gridworld.reward, gridworld.costs, [0.1, 0.2], gridworld.gamma, gridworld.rho
    )
    with pytest.raises(SpecValidationError) as exc_info:
        ensure_valid(spec)
    assert exc_info.value.violations[0].code == "channels"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"hazards": [(2, 1)], "goal": (2, 1)},
        {"hazards": [(5, 5)], "goal": (2, 1)},
        {"hazards": [], "goal": (2, 1), "slip": 1.0},
    ],
)
def test_gridworld_rejects_bad_geometry(kwargs):
    with pytest.raises(BadGeometryError):
        build_gridworld(3, 3, **kwargs)


# -------------------------------------------------------------------
# exact oracles
# -------------------------------------------------------------------


def test_shortcut_values(gridworld):
    probs = _one_hot(gridworld, RIGHT)
    assert exact_value(gridworld, probs, Channel.reward()) == pytest.approx(GRID_SHORTCUT_REWARD)
    assert exact_value(gridworld, probs, Channel.cost(0)) == pytest.approx(GRID_SHORTCUT_COST)


def test_exact_q_is_consistent_with_value(random_cmdp):
    probs = np.full((random_cmdp.n_states, random_cmdp.n_actions), 1.0 / random_cmdp.n_actions)
    q = exact_q(random_cmdp, probs, Channel.reward())
    v = q.state_values(probs)
    assert float(random_cmdp.rho @ v) == pytest.approx(exact_value(random_cmdp, probs, Channel.reward()))


def test_occupancy_is_a_distribution(random_cmdp):
    probs = np.full((random_cmdp.n_states, random_cmdp.n_actions), 1.0 / random_cmdp.n_actions)
    occ = discounted_occupancy(random_cmdp, probs)
    assert occ.sum() == pytest.approx(1.0)
    assert np.all(occ >= 0)
    raw = discounted_occupancy(random_cmdp, probs, normalized=False)
    assert raw.sum() == pytest.approx(1.0 / (1.0 - random_cmdp.gamma))


def test_default_horizon():
    assert default_horizon(0.9) == 88
    assert default_horizon(0.0) == 1


def test_deterministic_optimum_takes_detour(gridworld):
    best = deterministic_optimum(gridworld)
    assert best is not None
    assert best.reward_value == pytest.approx(GRID_DETOUR_REWARD)
    assert best.cost_values[0] == pytest.approx(0.0)


def test_deterministic_optimum_none_when_infeasible():
    spec = build_gridworld(2, 1, [(0, 0)], (1, 0), cost_limit=0.5)
    assert deterministic_optimum(spec) is None


def test_two_cell_grid_value_is_geometric():
    spec = build_gridworld(2, 1, [], (1, 0), gamma=0.9)
    assert exact_value(spec, _one_hot(spec, RIGHT), Channel.reward()) == pytest.approx(0.9 / (1 - 0.9))
    assert deterministic_optimum(spec).reward_value == pytest.approx(9.0)


def test_no_slip_gives_one_hot_transitions(gridworld):
    rows = gridworld.transition.reshape(-1, gridworld.n_states)
    assert np.all((rows == 0.0) | (rows == 1.0))
    np.testing.assert_array_equal(rows.max(axis=1), 1.0)


# -------------------------------------------------------------------
# point mass
# -------------------------------------------------------------------


def test_pointmass_zero_thrust_is_free():
    spec = build_pointmass_velocity(4, 3, 3)
    assert exact_value(spec, _one_hot(spec, 0), Channel.cost(0)) == pytest.approx(0.0, abs=1e-12)


def test_pointmass_full_thrust_earns_and_costs_more():
    spec = build_pointmass_velocity(4, 3, 3)
    idle, full = _one_hot(spec, 0), _one_hot(spec, spec.n_actions - 1)
    assert exact_value(spec, full, Channel.reward()) > exact_value(spec, idle, Channel.reward())
    assert exact_value(spec, full, Channel.cost(0)) > exact_value(spec, idle, Channel.cost(0))


def test_pointmass_without_cost_weight_is_free_for_any_policy():
    spec = build_pointmass_velocity(4, 3, 3, alpha_c=0.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        probs = rng.dirichlet(np.ones(spec.n_actions), size=spec.n_states)
        assert exact_value(spec, probs, Channel.cost(0)) == pytest.approx(0.0, abs=1e-12)


# -------------------------------------------------------------------
# sampling
# -------------------------------------------------------------------


def test_sample_trajectory_is_seed_deterministic(random_cmdp):
    probs = np.full((random_cmdp.n_states, random_cmdp.n_actions), 1.0 / random_cmdp.n_actions)
    a = sample_trajectory(random_cmdp, probs, horizon=30, seed=11)
    b = sample_trajectory(random_cmdp, probs, horizon=30, seed=11)
    assert a.states() == b.states()
    assert len(a.steps) == 30


def test_trajectory_return_on_shortcut(gridworld):
    traj = sample_trajectory(gridworld, _one_hot(gridworld, RIGHT), horizon=3, seed=0)
    assert traj.states() == [3, 4, 5]
    assert traj.discounted_return(Channel.cost(0), 0.9) == pytest.approx(0.9)


def test_monte_carlo_matches_exact(random_cmdp):
    probs = np.full((random_cmdp.n_states, random_cmdp.n_actions), 1.0 / random_cmdp.n_actions)
    exact = exact_value(random_cmdp, probs, Channel.cost(0))
    mean, stderr = monte_carlo_value(random_cmdp, probs, Channel.cost(0), episodes=4000, seed=2)
    assert abs(mean - exact) <= 5 * stderr + 1e-2


def test_discounted_visit_frequencies_match_occupancy(random_cmdp):
    probs = np.full((random_cmdp.n_states, random_cmdp.n_actions), 1.0 / random_cmdp.n_actions)
    gamma = random_cmdp.gamma
    horizon = default_horizon(gamma)
    weights = (1 - gamma) * gamma ** np.arange(horizon)
    visits = np.zeros(random_cmdp.n_states)
    episodes = 6000
    for seed in range(episodes):
        states = sample_trajectory(random_cmdp, probs, horizon=horizon, seed=seed).states()
        np.add.at(visits, states, weights)
    np.testing.assert_allclose(visits / episodes, discounted_occupancy(random_cmdp, probs), atol=0.01)


def test_batch_draw_skips_zero_probability_outcomes():
    cum = np.array([[0.0, 0.5, 1.0], [0.25, 0.25, 1.0]])
    np.testing.assert_array_equal(_draw_batch(cum[:1].repeat(3, axis=0), np.array([0.0, 0.5, 0.75])), [1, 2, 2])
    np.testing.assert_array_equal(_draw_batch(cum[1:].repeat(2, axis=0), np.array([0.1, 0.25])), [0, 2])


# -------------------------------------------------------------------
# serialization
# -------------------------------------------------------------------


def test_save_and_load_spec(tmp_path, two_cost_cmdp):
    path = tmp_path / "env.json"
    save_spec(two_cost_cmdp, path)
    loaded = load_spec(path)
    np.testing.assert_allclose(loaded.transition, two_cost_cmdp.transition)
    np.testing.assert_allclose(loaded.limits, two_cost_cmdp.limits)
    assert loaded.name == two_cost_cmdp.name


def test_random_builder_default_limits():
    spec = build_random(3, 2, n_costs=2, gamma=0.5)
    np.testing.assert_allclose(spec.limits, [1.0, 1.0])
