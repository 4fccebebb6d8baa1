"""Command-line entry point: ``teamreach <subcommand> ...``.

Exit codes: 0 success / yes / true, 1 no / false / invalid game,
10 unknown, 2 usage or input errors, 3 backend or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import almost_sure, bench_gen, iratl, model_io, smt_bridge, vi
from .game import InvalidGameError, validate
from .one_shot import OneShotConfig
from .rational import format_fraction, parse_probability

EXIT_OK, EXIT_NO, EXIT_USAGE, EXIT_BACKEND, EXIT_UNKNOWN = 0, 1, 2, 3, 10


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{float(x):.6f}"


def _read_game(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return model_io.parse_game(text)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _report(args, payload: dict) -> None:
    if getattr(args, "report", None):
        Path(args.report).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _threshold(text: str) -> Fraction:
    try:
        t = parse_probability(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not 0 <= t <= 1:
        raise argparse.ArgumentTypeError("threshold must lie in [0, 1]")
    return t


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _cells(text: str) -> list[tuple[int, int]]:
    try:
        return [tuple(int(v) for v in c.split(",")) for c in text.split(";") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected cells like '0,0;1,1', got {text!r}") from None


def _edges(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        sep = ">" if ">" in item else "-"
        try:
            u, v = item.split(sep)
            out.append((int(u), int(v)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad edge {item!r}; use 'u>v' or 'u-v'") from None
    return out


def _endpoint(args, required: bool):
    ep = smt_bridge.SolverEndpoint.from_env(args.solver, args.solver_args, args.timeout)
    if ep is None and required:
        raise smt_bridge.SolverConfigError("no SMT solver configured (use --solver or TEAMREACH_SMT_SOLVER)")
    if ep is not None and (required or args.solver):
        ep.check()
    return ep


def _add_solver_flags(p):
    p.add_argument("--solver", help="SMT solver executable (default: $TEAMREACH_SMT_SOLVER, then z3 on PATH)")
    p.add_argument("--solver-args", help="argument string for the solver (default for z3: '-in -smt2')")
    p.add_argument("--timeout", type=_positive_float, help="seconds per solver query")


def _add_vi_flags(p):
    p.add_argument("--tol", type=_positive_float, default=1e-4, help="stop when the largest change is below this")
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--restarts", type=int, default=16, help="local-search restarts per state")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None, help="parallel per-state solves (default: CPU count)")


def _one_shot_config(args) -> OneShotConfig:
    if args.restarts < 1:
        raise UsageError("--restarts must be at least 1")
    return OneShotConfig(restarts=args.restarts, seed=args.seed)


# --- subcommands -------------------------------------------------------------

def cmd_gen(args) -> int:
    fam = args.family
    if fam == "builtin":
        game = bench_gen.builtin(args.name or "door")
    elif fam == "pursuit":
        if args.scenario is not None:
            game = bench_gen.pursuit_scenario(args.scenario)
        else:
            if args.nodes is None or args.edges is None or args.team is None or args.opponent is None:
                raise UsageError("pursuit needs --scenario or all of --nodes, --edges, --team, --opponent")
            game = bench_gen.gen_pursuit(args.nodes, args.edges, args.team, args.opponent)
    elif fam == "robot":
        if args.scenario is not None:
            game = bench_gen.robot_scenario(args.scenario)
        else:
            if args.height is None or args.width is None or args.starts is None:
                raise UsageError("robot needs --scenario or --height, --width, --starts and a target")
            target_cell = tuple(args.target_cell[0]) if args.target_cell else None
            game = bench_gen.gen_robot(args.height, args.width, args.starts,
                                       target_cells=args.target_config, target_cell=target_cell)
    elif fam == "jamming":
        if args.C is None or args.B is None:
            raise UsageError("jamming needs --C and --B")
        game = bench_gen.gen_jamming(args.C, args.B)
    elif fam == "clique":
        if args.k is None:
            raise UsageError("clique needs --k")
        if args.vertices is not None:
            vertices, edges = list(range(args.vertices)), args.edges or []
        else:
            makers = {"complete": bench_gen.complete_graph, "path": bench_gen.path_graph,
                      "cycle": bench_gen.cycle_graph}
            if args.graph not in makers or args.n is None:
                raise UsageError("clique needs --graph {complete,path,cycle} with --n, or --vertices/--edges")
            vertices, edges = makers[args.graph](args.n)
        game = bench_gen.gen_clique(vertices, edges, args.k)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown family {fam}")
    _write(args.output, model_io.serialize_game(game))
    print(f"states {len(game.states)} transitions {game.transition_count()}", file=sys.stderr)
    _report(args, {"command": "gen", "family": fam, "states": len(game.states),
                   "transitions": game.transition_count()})
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        text = Path(args.game).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {args.game}: {exc.strerror}") from None
    try:
        game = model_io.parse_game(text)
    except InvalidGameError as exc:
        print(str(exc.report))
        _report(args, {"command": "validate", "ok": False,
                       "issues": [vars(i) for i in exc.report.issues]})
        return EXIT_NO
    report = validate(game)
    print(f"ok: {len(game.states)} states, {len(game.players)} players, "
          f"{game.transition_count()} transitions")
    _report(args, {"command": "validate", "ok": report.ok, "states": len(game.states),
                   "transitions": game.transition_count()})
    return EXIT_OK


def _profile_lines(game, profile) -> list[str]:
    lines = []
    for s in game.states:
        if s in game.targets:
            continue
        for p in game.team:
            dist = profile.get(p, s)
            body = " ".join(f"{a}={_fmt(dist.get(a, 0))}" for a in game.available[(p, s)])
            lines.append(f"profile {s} {p}: {body}")
    return lines


def cmd_solve_threshold(args) -> int:
    game = _read_game(args.game)
    endpoint = None
    if args.backend != vi.OPT:
        endpoint = _endpoint(args, required=args.backend == vi.SMT)
    stop = vi.StopRule(args.tol, args.max_iters)
    result = vi.value_iteration(game, mode=args.mode, backend=args.backend, stop=stop,
                                config=_one_shot_config(args), endpoint=endpoint,
                                precision=args.eps, jobs=args.jobs)
    cert = vi.certify(result.game, result.profile)
    g = result.game
    print(f"mode {args.mode} backend {result.backend} iterations {result.iterations} "
          f"{'converged' if result.converged else 'stopped at iteration cap'}")
    print("certified lower bounds:")
    for s in g.states:
        print(f"{s} {_fmt(cert[s])}")
    print(f"value {_fmt(cert[g.initial])}")
    if not args.quiet:
        print("\n".join(_profile_lines(g, result.profile)))
    if args.values_out:
        _write(args.values_out, model_io.format_valuation(g, cert))
    if args.profile_out:
        _write(args.profile_out, model_io.serialize_profile(g, result.profile))
    verdict = None
    code = EXIT_OK
    if args.t is not None:
        yes = Fraction(cert[g.initial]) > args.t or (g.initial in g.targets and args.t < 1)
        verdict = "yes" if yes else "unknown"
        print(f"threshold {format_fraction(args.t)}: {verdict}")
        code = EXIT_OK if yes else EXIT_UNKNOWN
    _report(args, {
        "command": "solve-threshold", "mode": args.mode, "backend": result.backend,
        "iterations": result.iterations, "converged": result.converged,
        "history": result.history, "vi_values": result.values, "certified": cert,
        "value": cert[g.initial], "verdict": verdict, "seconds": result.seconds,
        "provenance": result.provenance,
    })
    return code


def cmd_solve_almost_sure(args) -> int:
    game = _read_game(args.game)
    backend = almost_sure.SatBackend.parse(args.sat)
    res = almost_sure.solve_almost_sure(game, backend, args.encoding)
    print(f"variables {res.variables} clauses {res.clauses}")
    payload = {"command": "solve-almost-sure", "winning": res.winning, "variables": res.variables,
               "clauses": res.clauses, "seconds": res.seconds, "encoding": args.encoding}
    if not res.winning:
        print("almost-sure: no")
        _report(args, payload)
        return EXIT_NO
    path = args.certificate or (args.game + ".cert.json")
    _write(path, model_io.serialize_certificate(res.certificate))
    print("almost-sure: yes (certificate verified)")
    if path != "-":
        print(f"certificate written to {path}")
    payload["certificate"] = path
    _report(args, payload)
    return EXIT_OK


def cmd_export_smt(args) -> int:
    game = _read_game(args.game)
    if args.local is not None:
        from .one_shot import build_local_game

        if args.local not in game.state_index:
            raise UsageError(f"unknown state {args.local!r}")
        if args.values:
            values = model_io.parse_valuation(Path(args.values).read_text(encoding="utf-8"))
        else:
            values = {s: 1.0 if s in game.targets else 0.0 for s in game.states}
        if args.c is None:
            raise UsageError("--local needs --c")
        script = smt_bridge.emit_local_game_query(build_local_game(game, args.local, values), args.c)
    else:
        if args.t is None:
            raise UsageError("export-smt needs --t (or --local with --c)")
        script = smt_bridge.emit_threshold_formula(game, args.t)
    _write(args.output, script.render())
    _report(args, {"command": "export-smt", "variables": len(script.declarations),
                   "assertions": len(script.assertions)})
    return EXIT_OK


def cmd_export_cnf(args) -> int:
    game = _read_game(args.game)
    cnf = almost_sure.encode(game, args.encoding)
    _write(args.output, cnf.to_dimacs())
    _report(args, {"command": "export-cnf", "variables": cnf.num_vars, "clauses": len(cnf.clauses)})
    return EXIT_OK


def cmd_check(args) -> int:
    game = _read_game(args.game)
    try:
        formula = iratl.parse_formula(args.formula)
    except iratl.FormulaSyntaxError as exc:
        raise UsageError(f"formula: {exc}") from None
    endpoint = _endpoint(args, required=False) if args.exact else None
    backends = iratl.Backends(endpoint=endpoint, sat=almost_sure.SatBackend.parse(args.sat),
                              stop=vi.StopRule(args.tol, args.max_iters),
                              config=_one_shot_config(args))
    res = iratl.satisfying_states(game, formula, backends)
    width = max(len(s) for s in game.states)
    print(f"formula {formula}")
    for s in game.states:
        mark = " (initial)" if s == game.initial else ""
        print(f"{s:<{width}}  {res.verdicts[s]}{mark}")
    for sub, how in res.provenance:
        print(f"# {sub}: {how}")
    state = args.state or game.initial
    if state not in res.verdicts:
        raise UsageError(f"unknown state {state!r}")
    verdict = res.verdicts[state]
    _report(args, {"command": "check", "formula": str(formula), "verdicts": res.verdicts,
                   "provenance": res.provenance, "state": state, "verdict": verdict})
    return {iratl.TRUE: EXIT_OK, iratl.FALSE: EXIT_NO}.get(verdict, EXIT_UNKNOWN)


def cmd_bisect(args) -> int:
    game = _read_game(args.game)
    endpoint = _endpoint(args, required=True)
    started = time.perf_counter()
    res = smt_bridge.bisect_value(game, Fraction(args.eps).limit_denominator(10 ** 12), endpoint)
    print(f"interval [{_fmt(res.lo)}, {_fmt(res.hi)}] after {res.queries} queries"
          + (" (partial: solver gave no verdict)" if res.partial else ""))
    _report(args, {"command": "bisect", "lo": str(res.lo), "hi": str(res.hi), "queries": res.queries,
                   "partial": res.partial, "seconds": time.perf_counter() - started,
                   "history": [[str(t), v] for t, v in res.history]})
    return EXIT_UNKNOWN if res.partial else EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teamreach", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--report", help="write a JSON report to this path")
        return p

    p = add("gen", cmd_gen, "generate a benchmark game")
    p.add_argument("--family", required=True, choices=["pursuit", "robot", "jamming", "clique", "builtin"])
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.add_argument("--name", choices=bench_gen.BUILTINS)
    p.add_argument("--scenario", type=int)
    p.add_argument("--nodes", type=int)
    p.add_argument("--edges", type=_edges, help="'0>1,1>2' (directed) or '0-1' (clique graphs)")
    p.add_argument("--team", type=_ints, help="team start nodes, e.g. 0,1")
    p.add_argument("--opponent", type=int, help="pursuer start node")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--starts", type=_cells, help="robot cells as 'x,y;x,y'")
    p.add_argument("--target-cell", type=_cells, help="win when some robot reaches this cell")
    p.add_argument("--target-config", type=_cells, help="win on this exact configuration")
    p.add_argument("--C", type=int, help="jamming: channel count")
    p.add_argument("--B", type=_ints, help="jamming: buffer sizes, e.g. 1,1")
    p.add_argument("--graph", choices=["complete", "path", "cycle"])
    p.add_argument("--n", type=int, help="clique: vertex count of the named graph")
    p.add_argument("--vertices", type=int, help="clique: vertex count for --edges")
    p.add_argument("--k", type=int)

    p = add("validate", cmd_validate, "check a game document")
    p.add_argument("game")

    p = add("solve-threshold", cmd_solve_threshold, "value iteration with certified lower bounds")
    p.add_argument("game")
    p.add_argument("--mode", choices=[vi.INDEPENDENT, vi.SHARED], default=vi.INDEPENDENT)
    p.add_argument("--backend", choices=[vi.OPT, vi.SMT, vi.HYBRID], default=vi.OPT)
    p.add_argument("--t", type=_threshold, help="answer whether the value exceeds t")
    p.add_argument("--eps", type=_positive_float, default=1e-4, help="bisection precision for smt/hybrid")
    p.add_argument("--values-out", help="write certified values ('state value' lines)")
    p.add_argument("--profile-out", help="write the extracted profile document")
    p.add_argument("-q", "--quiet", action="store_true", help="do not print the profile")
    _add_vi_flags(p)
    _add_solver_flags(p)

    p = add("solve-almost-sure", cmd_solve_almost_sure, "decide almost-sure reachability by SAT")
    p.add_argument("game")
    p.add_argument("--encoding", choices=[almost_sure.BINARY, almost_sure.UNARY], default=almost_sure.BINARY)
    p.add_argument("--sat", default="minisat22", help="embedded solver name or 'external:<command>'")
    p.add_argument("--certificate", help="certificate output path (default: <game>.cert.json)")

    p = add("export-smt", cmd_export_smt, "write an SMT-LIB threshold or local-game query")
    p.add_argument("game")
    p.add_argument("--t", type=_threshold)
    p.add_argument("--local", metavar="STATE", help="emit the one-shot query at this state instead")
    p.add_argument("--c", type=_threshold, help="guarantee level for --local")
    p.add_argument("--values", help="valuation file for --local (default: 1 on targets, 0 elsewhere)")
    p.add_argument("-o", "--output")

    p = add("export-cnf", cmd_export_cnf, "write the almost-sure CNF in DIMACS format")
    p.add_argument("game")
    p.add_argument("--encoding", choices=[almost_sure.BINARY, almost_sure.UNARY], default=almost_sure.BINARY)
    p.add_argument("-o", "--output")

    p = add("check", cmd_check, "model-check a formula")
    p.add_argument("game")
    p.add_argument("--formula", required=True)
    p.add_argument("--state", help="state whose verdict sets the exit code (default: initial)")
    p.add_argument("--exact", action="store_true", help="decide thresholds with the SMT solver")
    p.add_argument("--sat", default="minisat22")
    _add_vi_flags(p)
    _add_solver_flags(p)

    p = add("bisect", cmd_bisect, "narrow the value by SMT threshold queries")
    p.add_argument("game")
    p.add_argument("--eps", type=_positive_float, default=1e-4)
    _add_solver_flags(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", None) is None and hasattr(args, "jobs"):
        args.jobs = os.cpu_count() or 1
    try:
        return args.func(args)
    except (UsageError, model_io.GameFormatError, InvalidGameError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (smt_bridge.SolverConfigError, smt_bridge.SolverProtocolError,
            almost_sure.SatBackendError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
