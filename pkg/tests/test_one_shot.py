import itertools

import numpy as np
import pytest

from teamreach import one_shot as os_
from teamreach.one_shot import LocalGame, OneShotConfig


def _local(payoff):
    payoff = np.asarray(payoff, float)
    team = tuple(tuple(range(n)) for n in payoff.shape[:-1])
    return LocalGame(team, tuple(range(payoff.shape[-1])), payoff)


def door_local():
    # team picks (L/R, L/R); opponent opens L or R; value 1 on a match with the open door
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 1.0
    return _local(p)


def test_project_simplex():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(50, 4)) * 3
    x = os_.project_simplex(v)
    assert np.allclose(x.sum(axis=1), 1) and (x >= 0).all()
    # a point already in the simplex is fixed
    y = rng.dirichlet(np.ones(4), size=10)
    assert np.allclose(os_.project_simplex(y), y)


def test_matching_pennies():
    value, x = os_.matrix_game(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert value == pytest.approx(0.5)
    assert x == pytest.approx([0.5, 0.5])


def test_matrix_game_prefers_pure_when_equal():
    value, x = os_.matrix_game(np.array([[1.0, 1.0], [0.0, 2.0]]))
    assert value == pytest.approx(1.0)


def test_door_local_values():
    lg = door_local()
    assert os_.solve_shared(lg).value == pytest.approx(0.5)
    ind = os_.solve_independent(lg)
    assert ind.value == pytest.approx(0.25, abs=1e-6)
    assert os_.best_response_value(lg, ind.selector) == pytest.approx(ind.value)


def test_independent_never_exceeds_shared():
    rng = np.random.default_rng(5)
    for _ in range(40):
        lg = _local(rng.random((2, 3, 2)))
        assert os_.solve_independent(lg).value <= os_.solve_shared(lg).value + 1e-9


def test_independent_matches_grid_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n, m = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        lg = _local(rng.random((n, n, m)) ** 3)
        grid = os_.brute_force_independent(lg, 40)
        assert os_.solve_independent(lg).value >= grid - 1e-6


def test_single_player_is_lp():
    lg = _local(np.array([[1.0, 0.0], [0.0, 1.0]]))
    sol = os_.solve_independent(lg)
    assert sol.value == pytest.approx(0.5)


def test_constant_payoff():
    lg = _local(np.full((2, 2, 3), 0.7))
    assert os_.solve_independent(lg).value == pytest.approx(0.7)


def test_seed_determinism():
    rng = np.random.default_rng(1)
    lg = _local(rng.random((3, 3, 3)))
    cfg = OneShotConfig(seed=4)
    a = os_.solve_independent(lg, cfg)
    b = os_.solve_independent(lg, cfg)
    assert a.value == b.value
    for x, y in zip(a.selector, b.selector):
        assert np.array_equal(x, y)


def test_warm_start_never_hurts():
    rng = np.random.default_rng(2)
    lg = _local(rng.random((3, 2, 3)))
    good = os_.solve_independent(lg)
    again = os_.solve_independent(lg, OneShotConfig(restarts=1, max_steps=1), warm_start=good.selector)
    assert again.value >= good.value - 1e-12


def test_simplex_grid_counts():
    g = os_.simplex_grid(3, 4)
    assert len(g) == 15 and np.allclose(g.sum(axis=1), 1)
    pts = {tuple(p) for p in g}
    assert len(pts) == 15


def test_bad_config():
    with pytest.raises(ValueError):
        os_.solve_independent(door_local(), OneShotConfig(restarts=0))
    with pytest.raises(ValueError):
        os_.best_response_value(door_local(), (np.ones(2),))


def test_build_local_game(door):
    lg = os_.build_local_game(door, "s0", {"s0": 0.5, "s_goal": 1.0, "s_fail": 0.0})
    assert lg.payoff.shape == (2, 2, 2)
    assert lg.payoff[0, 0, 0] == 1.0 and lg.payoff[0, 0, 1] == 0.5 and lg.payoff[0, 1, 0] == 0.0
    with pytest.raises(KeyError):
        os_.build_local_game(door, "nope", {})
