import sys
import textwrap

import numpy as np
import pytest

from oracles import perturb, random_games
from teamreach import almost_sure as asure
from teamreach import bench_gen
from teamreach.almost_sure import RankCertificate


@pytest.mark.parametrize("encoding", [asure.BINARY, asure.UNARY])
@pytest.mark.parametrize("name, expected", [
    ("door", False), ("door-merged", True), ("memory", False),
])
def test_named_games(name, expected, encoding):
    res = asure.solve_almost_sure(bench_gen.builtin(name), rank_encoding=encoding)
    assert res.winning is expected
    assert (res.certificate is not None) is expected


def test_merged_door_certificate():
    g = bench_gen.builtin("door-merged")
    cert = asure.solve_almost_sure(g).certificate
    assert asure.verify_certificate(g, cert).ok
    assert cert.rank == {"s_goal": 0, "s0": 1}
    (meta,) = g.team
    # both matching joint choices must be played so each door is covered
    assert cert.supports[(meta, "s0")] == {"(L,L)", "(R,R)"}


@pytest.mark.parametrize("graph, expected", [
    (bench_gen.complete_graph(3), True), (bench_gen.path_graph(3), False),
])
def test_clique_games(graph, expected):
    g = bench_gen.gen_clique(*graph, 3)
    assert asure.solve_almost_sure(g).winning is expected
    assert asure.brute_force_almost_sure(g) is expected


def test_cycle_pursuit_is_winning():
    g = bench_gen.gen_pursuit(4, [(i, (i + 1) % 4) for i in range(4)] + [((i + 1) % 4, i) for i in range(4)],
                              (0, 2), 1)
    res = asure.solve_almost_sure(g)
    assert res.winning and asure.verify_certificate(g, res.certificate).ok


def test_agrees_with_brute_force_on_random_games():
    for g in random_games(101, 60):
        a = asure.solve_almost_sure(g).winning
        assert a == asure.solve_almost_sure(g, rank_encoding=asure.UNARY).winning
        assert a == asure.brute_force_almost_sure(g)


def test_verdict_ignores_probability_values():
    rng = np.random.default_rng(5)
    for g in random_games(55, 20):
        base = asure.solve_almost_sure(g).winning
        for _ in range(3):
            assert asure.solve_almost_sure(perturb(g, rng)).winning == base


def test_tampered_certificates_are_rejected():
    g = bench_gen.builtin("door-merged")
    (meta,) = g.team
    good = asure.solve_almost_sure(g).certificate
    narrow = RankCertificate(good.winning, good.rank,
                             {**good.supports, (meta, "s0"): frozenset({"(L,L)"})})
    v = asure.verify_certificate(g, narrow)
    assert not v.ok and v.kind == "progress"
    leaky = RankCertificate(good.winning, good.rank,
                            {**good.supports, (meta, "s0"): frozenset({"(L,R)", "(L,L)"})})
    v = asure.verify_certificate(g, leaky)
    assert not v.ok and v.kind == "safety"
    flat = RankCertificate(good.winning, {"s_goal": 0, "s0": 0}, good.supports)
    assert asure.verify_certificate(g, flat).kind == "rank-consistency"
    empty = RankCertificate(frozenset({"s_goal"}), {"s_goal": 0}, {})
    assert asure.verify_certificate(g, empty).kind == "initial"


def test_compute_ranks():
    g = bench_gen.builtin("door-merged")
    (meta,) = g.team
    res = asure.compute_ranks(g, {(meta, "s0"): {"(L,L)", "(R,R)"}})
    assert res.ranks == {"s_goal": 0, "s0": 1}
    res = asure.compute_ranks(g, {(meta, "s0"): {"(L,L)"}})
    assert res.ranks is None and res.failure.kind == "progress"
    with pytest.raises(ValueError):
        asure.compute_ranks(g, {(meta, "s0"): {"nope"}})


@pytest.mark.parametrize("width", range(1, 7))
def test_comparator_exhaustive(width):
    assert asure.check_bslt(width)


def test_rank_width():
    assert [asure.rank_width(n) for n in (1, 2, 3, 4, 7, 8)] == [1, 2, 2, 3, 3, 4]


def test_dimacs_output():
    cnf = asure.encode(bench_gen.door_game())
    text = cnf.to_dimacs()
    header = [ln for ln in text.splitlines() if ln.startswith("p ")]
    assert header == [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    assert "c w[s0] 1" in text
    body = [ln for ln in text.splitlines() if ln and ln[0] not in "cp"]
    assert all(ln.endswith(" 0") for ln in body)


def test_gates_are_equivalences():
    from pysat.solvers import Solver

    cnf = asure.CnfInstance()
    a, b = cnf.var("a"), cnf.var("b")
    g_and, g_or, g_eq = cnf.and_gate("and", [a, b]), cnf.or_gate("or", [a, b]), cnf.eq_gate("eq", a, b)
    with Solver(bootstrap_with=cnf.clauses) as s:
        for va in (False, True):
            for vb in (False, True):
                lits = [a if va else -a, b if vb else -b]
                for gate, want in [(g_and, va and vb), (g_or, va or vb), (g_eq, va == vb)]:
                    assert s.solve(assumptions=lits + [gate]) == want
                    assert s.solve(assumptions=lits + [-gate]) == (not want)


def test_external_backend(tmp_path):
    script = tmp_path / "dimacs_solver.py"
    script.write_text(textwrap.dedent("""
        import sys
        from pysat.formula import CNF
        from pysat.solvers import Solver
        cnf = CNF(from_string=sys.stdin.read())
        with Solver(bootstrap_with=cnf.clauses) as s:
            if s.solve():
                print("s SATISFIABLE")
                print("v " + " ".join(map(str, s.get_model())) + " 0")
            else:
                print("s UNSATISFIABLE")
    """))
    backend = asure.SatBackend.parse(f"external:{sys.executable} {script}")
    assert backend.command[0] == sys.executable
    assert asure.solve_almost_sure(bench_gen.builtin("door-merged"), backend).winning
    assert not asure.solve_almost_sure(bench_gen.door_game(), backend).winning


def test_backend_errors(tmp_path):
    with pytest.raises(asure.SatBackendError):
        asure.solve_almost_sure(bench_gen.door_game(), asure.SatBackend(name="no-such-solver"))
    with pytest.raises(asure.SatBackendError):
        asure.solve_almost_sure(bench_gen.door_game(), asure.SatBackend.parse("external:/no/such/bin"))
    with pytest.raises(asure.SatBackendError):
        asure.solve_almost_sure(bench_gen.door_game(), asure.SatBackend.parse("external:true"))


def test_brute_force_guard():
    g = bench_gen.gen_jamming(2, [1, 1])
    with pytest.raises(asure.GuardExceeded):
        asure.brute_force_almost_sure(g, limit=2)


def test_safety_oracle_on_door(door):
    assert asure.brute_force_almost_sure_safety(door, {"s0", "s_goal"}) == {"s0", "s_goal"}
    assert asure.brute_force_almost_sure_safety(door, {"s0"}) == frozenset()
