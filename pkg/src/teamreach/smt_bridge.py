"""Exact nonlinear-real encodings and an SMT-LIB subprocess driver.

The threshold formula asks for memoryless team strategies ``x``, a valuation
``v`` and a discount ``lam`` in (0, 1) with ``v`` a sub-solution of the
discounted one-step equations and ``v(initial) > t``. Symbols are index based
(``x_<state>_<player>_<action>``, ``v_<state>``, ``lam``); comments in the
rendered script map them back to identifiers.
"""
from __future__ import annotations

import itertools
import os
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .game import Game, MemorylessProfile, ensure_valid
from .one_shot import LocalGame
from .rational import to_fraction

SAT, UNSAT, UNKNOWN, TIMEOUT = "sat", "unsat", "unknown", "timeout"

ENV_SOLVER = "TEAMREACH_SMT_SOLVER"
ENV_ARGS = "TEAMREACH_SMT_ARGS"
ENV_TIMEOUT = "TEAMREACH_SMT_TIMEOUT"


class SolverConfigError(RuntimeError):
    """No usable solver endpoint."""


class SolverProtocolError(RuntimeError):
    """The solver answered something we cannot interpret."""


def rational(value) -> str:
    q = to_fraction(value)
    if q.denominator == 1:
        body = str(abs(q.numerator))
    else:
        body = f"(/ {abs(q.numerator)} {q.denominator})"
    return f"(- {body})" if q < 0 else body


def _sum(terms: Sequence[str]) -> str:
    if not terms:
        return "0"
    if len(terms) == 1:
        return terms[0]
    return "(+ " + " ".join(terms) + ")"


def _prod(factors: Sequence[str]) -> str:
    if not factors:
        return "1"
    if len(factors) == 1:
        return factors[0]
    return "(* " + " ".join(factors) + ")"


@dataclass
class SmtScript:
    declarations: list[str] = field(default_factory=list)
    assertions: list[str] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)
    logic: str = "QF_NRA"

    def declare(self, name: str) -> str:
        self.declarations.append(name)
        return name

    def render(self, get_model: bool = True) -> str:
        out = [f"; {c}" for c in self.comments]
        out.append(f"(set-logic {self.logic})")
        out.append("(set-option :produce-models true)")
        out.extend(f"(declare-fun {n} () Real)" for n in self.declarations)
        out.extend(f"(assert {a})" for a in self.assertions)
        out.append("(check-sat)")
        if get_model:
            out.append("(get-model)")
        return "\n".join(out) + "\n"


@dataclass
class SolverVerdict:
    status: str
    model: dict[str, Fraction] | None = None
    detail: str = ""


@dataclass(frozen=True)
class SolverEndpoint:
    command: tuple[str, ...]
    timeout: float = 60.0

    @classmethod
    def from_env(cls, executable: str | None = None, args: str | None = None,
                 timeout: float | None = None) -> "SolverEndpoint | None":
        """Flags first, then environment variables, then ``z3`` on PATH."""
        exe = executable or os.environ.get(ENV_SOLVER)
        if exe is None:
            exe = shutil.which("z3")
            if exe is None:
                return None
            default_args = "-in -smt2"
        else:
            default_args = "-in -smt2" if os.path.basename(exe).startswith("z3") else ""
        argline = args if args is not None else os.environ.get(ENV_ARGS, default_args)
        if timeout is None:
            timeout = float(os.environ.get(ENV_TIMEOUT, "60"))
        return cls((exe, *shlex.split(argline)), timeout)

    def check(self) -> None:
        exe = self.command[0]
        if shutil.which(exe) is None and not os.access(exe, os.X_OK):
            raise SolverConfigError(f"solver executable not found: {exe}")


# --- encodings -------------------------------------------------------------

def _team_choice_matters(game: Game, s: str) -> bool:
    for b in game.opponent_actions(s):
        dists = {game.delta(s, joint, b) for joint in game.team_joint_actions(s)}
        if len(dists) > 1:
            return True
    return False


def strategy_symbol(game: Game, s: str, p: str, a: str) -> str:
    si = game.state_index[s]
    pi = game.team.index(p)
    ai = game.actions[p].index(a)
    return f"x_{si}_{pi}_{ai}"


def emit_threshold_formula(game: Game, t) -> SmtScript:
    """Existential formula that is satisfiable iff the team can exceed ``t``."""
    ensure_valid(game)
    t = to_fraction(t)
    script = SmtScript()
    script.comments.append(f"threshold query: value({game.initial}) > {t}")
    vsym = {s: f"v_{i}" for i, s in enumerate(game.states)}
    xsym: dict[tuple[str, str, str], str] = {}
    choosing = [s for s in game.states if s not in game.targets and _team_choice_matters(game, s)]
    for s in choosing:
        for p in game.team:
            for a in game.available[(p, s)]:
                name = strategy_symbol(game, s, p, a)
                xsym[(s, p, a)] = script.declare(name)
                script.comments.append(f"{name}: player {p} plays {a} at {s}")
    for s in game.states:
        script.declare(vsym[s])
        script.comments.append(f"{vsym[s]}: value of {s}")
    lam = script.declare("lam")

    # strategies
    for s in choosing:
        for p in game.team:
            names = [xsym[(s, p, a)] for a in game.available[(p, s)]]
            for n in names:
                script.assertions.append(f"(<= 0 {n})")
                script.assertions.append(f"(<= {n} 1)")
            script.assertions.append(f"(= {_sum(names)} 1)")
    # targets and bounds
    for s in game.states:
        if s in game.targets:
            script.assertions.append(f"(= {vsym[s]} 1)")
        else:
            script.assertions.append(f"(<= 0 {vsym[s]})")
            script.assertions.append(f"(<= {vsym[s]} 1)")
    # discounted one-step constraints
    chosen = set(choosing)
    for s in game.states:
        if s in game.targets:
            continue
        joints = game.team_joint_actions(s)
        for b in game.opponent_actions(s):
            terms = []
            if s in chosen:
                for joint in joints:
                    succ = _successor_sum(game.delta(s, joint, b), vsym)
                    if succ == "0":
                        continue
                    weights = [xsym[(s, p, a)] for p, a in zip(game.team, joint)]
                    terms.append(_prod(weights + [succ]))
            else:
                terms.append(_successor_sum(game.delta(s, joints[0], b), vsym))
            script.assertions.append(f"(<= {vsym[s]} (* {lam} {_sum(terms)}))")
    script.assertions.append(f"(< 0 {lam})")
    script.assertions.append(f"(< {lam} 1)")
    script.assertions.append(f"(> {vsym[game.initial]} {rational(t)})")
    return script


def _successor_sum(dist, vsym) -> str:
    terms = []
    for succ, q in dist.support:
        if q == 0:
            continue
        terms.append(vsym[succ] if q == 1 else f"(* {rational(q)} {vsym[succ]})")
    return _sum(terms)


def local_symbol(player_index: int, action_index: int) -> str:
    return f"x_{player_index}_{action_index}"


def emit_local_game_query(local: LocalGame, c) -> SmtScript:
    """Satisfiable iff some product selector guarantees at least ``c``."""
    script = SmtScript()
    script.comments.append(f"local one-shot query: guarantee >= {to_fraction(c)}")
    names = []
    for i, acts in enumerate(local.team_actions):
        row = [script.declare(local_symbol(i, j)) for j in range(len(acts))]
        names.append(row)
        for n in row:
            script.assertions.append(f"(<= 0 {n})")
        script.assertions.append(f"(= {_sum(row)} 1)")
    for j in range(len(local.opponent_actions)):
        terms = []
        for idx in itertools.product(*(range(len(a)) for a in local.team_actions)):
            coeff = float(local.payoff[idx + (j,)])
            if coeff == 0.0:
                continue
            factors = [names[p][i] for p, i in enumerate(idx)]
            terms.append(_prod([rational(coeff)] + factors) if coeff != 1.0 else _prod(factors))
        script.assertions.append(f"(>= {_sum(terms)} {rational(c)})")
    return script


def selector_from_model(local: LocalGame, model: Mapping[str, Fraction]) -> tuple[np.ndarray, ...] | None:
    out = []
    for i, acts in enumerate(local.team_actions):
        vals = [model.get(local_symbol(i, j)) for j in range(len(acts))]
        if any(v is None for v in vals):
            return None
        x = np.clip(np.array([float(v) for v in vals]), 0.0, None)
        if x.sum() <= 0:
            return None
        out.append(x / x.sum())
    return tuple(out)


def profile_from_model(game: Game, model: Mapping[str, Fraction]) -> MemorylessProfile:
    """Strategies read off a threshold-formula model; missing entries are uniform."""
    probs = {}
    for s in game.states:
        for p in game.team:
            acts = game.available[(p, s)]
            vals = [model.get(strategy_symbol(game, s, p, a)) for a in acts]
            if any(v is None for v in vals) or sum(vals) <= 0:
                probs[(p, s)] = {a: Fraction(1, len(acts)) for a in acts}
                continue
            vals = [max(v, Fraction(0)) for v in vals]
            total = sum(vals)
            probs[(p, s)] = {a: v / total for a, v in zip(acts, vals)}
    return MemorylessProfile(probs)


# --- solver driver ---------------------------------------------------------

def _tokens(text: str):
    text = text.replace("(", " ( ").replace(")", " ) ")
    return text.split()


def _parse_sexprs(text: str) -> list:
    stack: list[list] = [[]]
    for tok in _tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SolverProtocolError("unbalanced parenthesis in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SolverProtocolError("unbalanced parenthesis in solver output")
    return stack[0]


def _eval_number(expr) -> Fraction | None:
    if isinstance(expr, str):
        try:
            return Fraction(expr)
        except ValueError:
            return None
    if not expr:
        return None
    head, *args = expr
    vals = [_eval_number(a) for a in args]
    if any(v is None for v in vals):
        return None
    if head == "-" and len(vals) == 1:
        return -vals[0]
    if head == "-" and len(vals) == 2:
        return vals[0] - vals[1]
    if head == "/" and len(vals) == 2 and vals[1] != 0:
        return vals[0] / vals[1]
    if head == "+":
        return sum(vals, Fraction(0))
    if head == "*":
        out = Fraction(1)
        for v in vals:
            out *= v
        return out
    return None  # algebraic numbers (root-obj) are left out


def parse_solver_output(text: str) -> SolverVerdict:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SolverProtocolError("empty solver output")
    status = lines[0]
    if status not in (SAT, UNSAT, UNKNOWN):
        if status.startswith("timeout"):
            return SolverVerdict(TIMEOUT, detail=status)
        raise SolverProtocolError(f"unexpected solver answer: {status!r}")
    if status != SAT:
        return SolverVerdict(status)
    model: dict[str, Fraction] = {}
    rest = "\n".join(lines[1:])
    for item in _parse_sexprs(rest):
        entries = item[1:] if item and item[0] == "model" else item
        if not isinstance(entries, list):
            continue
        for d in entries:
            if isinstance(d, list) and len(d) == 5 and d[0] == "define-fun" and d[2] == []:
                value = _eval_number(d[4])
                if value is not None:
                    model[d[1]] = value
    return SolverVerdict(SAT, model)


def run_solver(script: SmtScript, endpoint: SolverEndpoint | None) -> SolverVerdict:
    if endpoint is None:
        raise SolverConfigError("no SMT solver configured (set --solver or TEAMREACH_SMT_SOLVER)")
    endpoint.check()
    try:
        proc = subprocess.run(
            list(endpoint.command), input=script.render(), capture_output=True,
            text=True, timeout=endpoint.timeout,
        )
    except subprocess.TimeoutExpired:
        return SolverVerdict(TIMEOUT, detail=f"no answer within {endpoint.timeout} s")
    except OSError as exc:
        raise SolverConfigError(f"cannot start solver: {exc}") from None
    return parse_solver_output(proc.stdout)


def decide_threshold_exact(game: Game, t, endpoint: SolverEndpoint | None) -> SolverVerdict:
    return run_solver(emit_threshold_formula(game, t), endpoint)


@dataclass
class BisectResult:
    lo: Fraction
    hi: Fraction
    queries: int
    partial: bool
    history: list[tuple[Fraction, str]]


def bisect_value(game: Game, precision, endpoint: SolverEndpoint | None) -> BisectResult:
    """Shrink [lo, hi] around the value of ``game`` with threshold queries.

    A sat answer at ``t`` moves ``lo`` up to ``t`` and an unsat answer moves
    ``hi`` down. Any other answer stops the search with ``partial`` set.
    """
    eps = to_fraction(precision)
    if eps <= 0:
        raise ValueError("precision must be positive")
    if endpoint is None:
        raise SolverConfigError("bisection needs an SMT solver endpoint")
    lo, hi = Fraction(0), Fraction(1)
    history = []
    while hi - lo > eps:
        mid = (lo + hi) / 2
        verdict = decide_threshold_exact(game, mid, endpoint)
        history.append((mid, verdict.status))
        if verdict.status == SAT:
            lo = mid
        elif verdict.status == UNSAT:
            hi = mid
        else:
            return BisectResult(lo, hi, len(history), True, history)
    return BisectResult(lo, hi, len(history), False, history)
