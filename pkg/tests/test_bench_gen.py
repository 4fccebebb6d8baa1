import numpy as np
import pytest

from teamreach import bench_gen as bg
from teamreach import model_io
from teamreach.game import validate


def _size(g):
    return len(g.states), g.transition_count()


@pytest.mark.parametrize("number, size", [
    (1, (27, 512)), (3, (64, 729)), (4, (125, 1331)), (5, (256, 65536)), (6, (1296, 38416)),
])
def test_pursuit_scenario_sizes(number, size):
    assert _size(bg.pursuit_scenario(number)) == size


def test_pursuit_scenario_two_count():
    # the published transition count for this scenario is not reproduced (see notes)
    assert _size(bg.pursuit_scenario(2)) == (64, 2744)


@pytest.mark.parametrize("number, size", [
    (1, (16, 2000)), (2, (36, 4500)), (3, (81, 10125)), (4, (144, 18000)),
])
def test_robot_scenario_sizes(number, size):
    assert _size(bg.robot_scenario(number)) == size


@pytest.mark.parametrize("channels, buffers, size", [
    (2, [1, 1], (5, 135)), (2, [2, 2], (10, 270)), (3, [3, 3], (17, 1088)),
    (3, [4, 4], (26, 1664)), (4, [5, 5], (37, 4625)), (4, [6, 6], (50, 6250)),
])
def test_jamming_sizes(channels, buffers, size):
    assert _size(bg.gen_jamming(channels, buffers)) == size


def test_generators_are_deterministic():
    a = model_io.serialize_game(bg.pursuit_scenario(1))
    b = model_io.serialize_game(bg.pursuit_scenario(1))
    assert a == b
    r1 = bg.gen_random(np.random.default_rng(4))
    r2 = bg.gen_random(np.random.default_rng(4))
    assert r1 == r2


def test_door_shape(door):
    assert door.team == ("1", "2") and door.opponent == "env"
    assert door.delta("s0", ("L", "L"), "L").positive() == {"s_goal"}
    assert door.delta("s0", ("L", "L"), "R").positive() == {"s0"}
    assert door.delta("s0", ("L", "R"), "L").positive() == {"s_fail"}


def test_memory_game_shape(memory):
    assert validate(memory).ok
    assert len(memory.states) == 5


def test_pursuit_capture_and_goal():
    g = bg.pursuit_scenario(1)
    assert g.holds("goal") == g.targets
    assert g.holds("capture")
    assert not (g.holds("capture") & g.targets)


def test_robot_collisions_absorb():
    g = bg.robot_scenario(1)
    for s in g.holds("crash"):
        for joint in g.team_joint_actions(s):
            for b in g.opponent_actions(s):
                assert g.delta(s, joint, b).positive() == {s}


def test_clique_game_sizes():
    g = bg.gen_clique(*bg.complete_graph(3), 3)
    assert g.states == ("s", "top", "bot")
    assert validate(g).ok


def test_bad_arguments():
    with pytest.raises(ValueError):
        bg.pursuit_scenario(9)
    with pytest.raises(ValueError):
        bg.robot_scenario(0)
    with pytest.raises(ValueError):
        bg.builtin("nope")
    with pytest.raises(ValueError):
        bg.gen_random(np.random.default_rng(0), n_states=0)
