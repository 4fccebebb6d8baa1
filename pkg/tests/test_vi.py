import numpy as np
import pytest

from oracles import min_reach_by_policy_enumeration, random_games
from teamreach import bench_gen, vi
from teamreach.game import MemorylessProfile, induced_mdp
from teamreach.one_shot import OneShotConfig


def test_door_independent(door):
    r = vi.value_iteration(door, mode=vi.INDEPENDENT)
    assert r.converged
    assert r.value() == pytest.approx(1 / 3, abs=3e-3)
    assert vi.certify(r.game, r.profile)["s0"] == pytest.approx(1 / 3, abs=1e-6)


def test_door_shared_goes_to_one(door):
    r = vi.value_iteration(door, mode=vi.SHARED)
    assert r.converged and r.value() >= 0.999
    assert len(r.game.team) == 1


def test_memory_game(memory):
    r = vi.value_iteration(memory)
    assert r.value() == pytest.approx(0.25, abs=2e-3)
    assert vi.value_iteration(memory, mode=vi.SHARED).value() == pytest.approx(0.5, abs=1e-6)


def test_uniform_door_profile_certifies_one_third(door):
    # each round: goal 1/4, fail 1/2, stay 1/4, so the value is 1/3
    cert = vi.certify(door, MemorylessProfile.uniform(door))
    assert cert["s0"] == pytest.approx(1 / 3, abs=1e-9)
    assert cert["s_goal"] == 1.0 and cert["s_fail"] == 0.0


def test_certify_matches_policy_enumeration():
    for g in random_games(21, 40):
        prof = MemorylessProfile.uniform(g)
        got = vi.certify(g, prof)
        want = min_reach_by_policy_enumeration(induced_mdp(g, prof))
        for s in g.states:
            assert got[s] == pytest.approx(want[s], abs=1e-8)


def test_certified_never_above_iterate():
    for g in random_games(8, 25):
        r = vi.value_iteration(g)
        cert = vi.certify(r.game, r.profile)
        for s in g.states:
            assert cert[s] >= r.values[s] - 1e-6


def test_iterates_monotone_in_both_modes():
    for g in [bench_gen.door_game(), bench_gen.memory_game(), *random_games(4, 15)]:
        for mode in (vi.SHARED, vi.INDEPENDENT):
            r = vi.value_iteration(g, mode=mode, record_trace=True)
            for a, b in zip(r.trace, r.trace[1:]):
                assert (b >= a - 1e-12).all()


def test_jobs_do_not_change_results():
    g = bench_gen.gen_jamming(2, [1, 1])
    a = vi.value_iteration(g, jobs=1)
    b = vi.value_iteration(g, jobs=4)
    assert a.values == b.values and a.iterations == b.iterations


def test_seed_reproducible(door):
    cfg = OneShotConfig(seed=9)
    a = vi.value_iteration(door, config=cfg)
    b = vi.value_iteration(door, config=cfg)
    assert a.values == b.values and a.history == b.history


def test_iteration_cap(door):
    r = vi.value_iteration(door, mode=vi.SHARED, stop=vi.StopRule(1e-4, 3))
    assert r.iterations == 3 and not r.converged


def test_stop_rule_validation():
    with pytest.raises(ValueError):
        vi.StopRule(0.0)
    with pytest.raises(ValueError):
        vi.StopRule(1e-4, -1)


def test_mdp_without_team(door):
    mdp = induced_mdp(door, MemorylessProfile.uniform(door))
    r = vi.value_iteration(mdp)
    assert r.value() == pytest.approx(1 / 3, abs=1e-3)


def test_threshold_semidecision(door):
    assert vi.decide_threshold_vi(door, "3/10").verdict == vi.YES
    assert vi.decide_threshold_vi(door, "2/5").verdict == vi.UNKNOWN
    with pytest.raises(ValueError):
        vi.decide_threshold_vi(door, 2)
    start_in_target = door.replace(initial="s_goal")
    assert vi.decide_threshold_vi(start_in_target, "99/100").verdict == vi.YES


def test_smt_backend_without_solver(door):
    from teamreach.smt_bridge import SolverConfigError

    with pytest.raises(SolverConfigError):
        vi.value_iteration(door, backend=vi.SMT)


def test_hybrid_falls_back_without_solver(door, caplog):
    r = vi.value_iteration(door, backend=vi.HYBRID)
    assert r.backend == vi.OPT
    assert "falls back" in caplog.text


def test_hybrid_with_solver(door, smt_endpoint):
    r = vi.value_iteration(door, backend=vi.HYBRID, endpoint=smt_endpoint)
    assert vi.certify(r.game, r.profile)["s0"] >= 0.33


def test_unknown_mode(door):
    with pytest.raises(ValueError):
        vi.value_iteration(door, mode="both")


def test_min_reachability_chain():
    # a plain chain: s0 -> s1 w.p. 1/2, else stays; s1 target
    g = bench_gen.door_game()
    mdp = induced_mdp(g, MemorylessProfile({("1", "s0"): {"L": 1, "R": 0},
                                            ("2", "s0"): {"L": 1, "R": 0},
                                            ("1", "s_goal"): {"L": 1}, ("2", "s_goal"): {"L": 1},
                                            ("1", "s_fail"): {"L": 1}, ("2", "s_fail"): {"L": 1}}))
    u, _ = vi.min_reachability(mdp, vi.CERTIFY_STOP)
    # the opponent opens R forever
    assert u[mdp.state_index["s0"]] == 0.0
    assert np.isclose(u[mdp.state_index["s_goal"]], 1.0)
