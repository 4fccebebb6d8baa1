import numpy as np
import pytest

from oracles import random_games
from teamreach import almost_sure as asure
from teamreach import iratl
from teamreach.game import coalition_game
from teamreach.iratl import FALSE, TRUE, UNKNOWN


def test_parse_round_trip():
    for text in [
        "<<1,2>>^sh_almost F goal",
        "<<1,2>>^ind_>3/10 F goal",
        "!fail & (<<1>>^ind_sure X goal | <<2>>^sh_almost G !fail)",
        "<<1>>^ind_>1/2 (p U q)",
    ]:
        f = iratl.parse_formula(text)
        assert iratl.parse_formula(str(f)) == f


def test_precedence():
    f = iratl.parse_formula("a | b & !c")
    assert isinstance(f, iratl.Or) and isinstance(f.right, iratl.And)
    assert isinstance(f.right.right, iratl.Not)


@pytest.mark.parametrize("text, column", [
    ("<<1>>^sh_sure", 14),
    ("<<1>>^both_sure F a", 6),
    ("<<1>>^sh_sometimes F a", 6),
    ("a &", 4),
    ("<<1>>^sure F a", 6),
    ("<<1,1>>^sh_sure F a", 1),
    ("a $ b", 3),
    ("<<1>>^ind_>3/2 F a", 6),
])
def test_syntax_errors_are_located(text, column):
    with pytest.raises(iratl.FormulaSyntaxError) as info:
        iratl.parse_formula(text)
    assert info.value.position + 1 == column


def test_fragment_errors():
    with pytest.raises(iratl.FragmentError):
        iratl.parse_formula("<<1>>^ind_limit F goal")
    with pytest.raises(iratl.FragmentError):
        iratl.parse_formula("<<1>>^ind_>1/2 G goal")


def test_door_formulas(door):
    assert iratl.satisfying_states(door, "<<1,2>>^sh_almost F goal").at("s0") == TRUE
    assert iratl.satisfying_states(door, "<<1,2>>^ind_>3/10 F goal").at("s0") == TRUE
    assert iratl.satisfying_states(door, "<<1,2>>^ind_almost F goal").at("s0") == FALSE


def test_threshold_gap_is_unknown_without_solver(door):
    res = iratl.satisfying_states(door, "<<1,2>>^ind_>2/5 F goal")
    assert res.verdicts == {"s0": UNKNOWN, "s_goal": TRUE, "s_fail": FALSE}
    neg = iratl.satisfying_states(door, "!<<1,2>>^ind_>2/5 F goal")
    assert neg.at("s0") == UNKNOWN and neg.at("s_fail") == TRUE


def test_threshold_gap_closed_by_solver(door, smt_endpoint):
    res = iratl.satisfying_states(door, "<<1,2>>^ind_>2/5 F goal", iratl.Backends(endpoint=smt_endpoint))
    assert res.at("s0") == FALSE


def test_sure_operators(door):
    assert iratl.satisfying_states(door, "<<1,2>>^ind_sure F goal").states() == {"s_goal"}
    assert iratl.satisfying_states(door, "<<1,2>>^ind_sure G !fail").states() == {"s0", "s_goal"}
    assert iratl.satisfying_states(door, "<<1,2>>^ind_sure X fail").states() == {"s0", "s_fail"}
    assert iratl.satisfying_states(door, "<<1,2>>^ind_almost G true").states() == {"s0", "s_goal", "s_fail"}


def test_threshold_next(door):
    # one step: independent 1/4, shared 1/2
    res = iratl.satisfying_states(door, "<<1,2>>^ind_>1/5 X goal")
    assert res.at("s0") == TRUE
    res = iratl.satisfying_states(door, "<<1,2>>^ind_>3/10 X goal")
    assert res.at("s0") in (UNKNOWN, FALSE)
    assert iratl.satisfying_states(door, "<<1,2>>^sh_>2/5 X goal").at("s0") == TRUE
    assert iratl.satisfying_states(door, "<<1,2>>^sh_>1/2 X goal").at("s0") == FALSE


def test_single_player_coalition(door):
    # alone, player 1 cannot stop player 2 from mismatching
    assert iratl.satisfying_states(door, "<<1>>^ind_>0 F goal").at("s0") == FALSE
    assert iratl.satisfying_states(door, "<<1>>^ind_sure G !fail").at("s0") == FALSE


def test_unknown_player(door):
    with pytest.raises(ValueError):
        iratl.satisfying_states(door, "<<7>>^ind_sure F goal")


def test_nested_formula(door):
    res = iratl.satisfying_states(door, "<<1,2>>^sh_almost F (<<1,2>>^ind_sure G goal)")
    assert res.at("s0") == TRUE
    assert res.provenance


def _almost_box_direct(game, safe):
    return asure.brute_force_almost_sure_safety(game, safe)


def test_almost_box_matches_oracle():
    rng = np.random.default_rng(77)
    for g in random_games(78, 60):
        safe = {s for s in g.states if rng.random() < 0.7}
        rewritten = iratl.solve_sure(g, iratl.Box(iratl.Const(True)), safe)
        assert rewritten == _almost_box_direct(g, safe)


def test_almost_box_for_a_subcoalition():
    rng = np.random.default_rng(3)
    for g in random_games(4, 20):
        sub = coalition_game(g, ["1"])
        safe = {s for s in g.states if rng.random() < 0.7}
        assert iratl.solve_sure(sub, iratl.Box(iratl.Const(True)), safe) == \
            asure.brute_force_almost_sure_safety(sub, safe)


def test_positive_until_matches_uniform_certificate():
    from teamreach.game import MemorylessProfile
    from teamreach.vi import certify

    for g in random_games(90, 60):
        cert = certify(g, MemorylessProfile.uniform(g))
        want = {s for s in g.states if cert[s] > 1e-9}
        assert iratl.positive_until(g, set(g.states), g.targets) == want
        res = iratl.satisfying_states(g.replace(labels={t: {"goal"} for t in g.targets}),
                                      "<<1,2>>^ind_>0 F goal")
        assert res.states() == want and not res.states(UNKNOWN)
