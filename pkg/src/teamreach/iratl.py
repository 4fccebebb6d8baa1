"""Model checking for a fragment of ATL with randomisation types.

Formulas quantify over a coalition, a randomisation type (``sh`` shared or
``ind`` independent) and a winning condition (``sure``, ``almost`` or a
strict threshold ``>t``). Thresholds decided only by value iteration can
yield a third verdict, ``unknown``; sets are therefore tracked as a pair
``(lower, upper)`` of surely-true and possibly-true states.

Grammar::

    formula := disj
    disj    := conj ("|" conj)*
    conj    := unary ("&" unary)*
    unary   := "!" unary | quant | "(" formula ")" | "true" | "false" | atom
    quant   := "<<" id ("," id)* ">>" "^" ("sh"|"ind") "_" ("sure"|"almost"|">" rational) path
    path    := "X" unary | "G" unary | "F" unary | unary "U" unary
             | "(" formula "U" formula ")"
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

from . import one_shot
from .almost_sure import SatBackend, solve_almost_sure
from .game import Game, can_reach, coalition_game, ensure_valid, merge_team, restrict_absorbing, with_targets
from .rational import format_fraction, parse_probability
from .vi import StopRule, certify, value_iteration

TRUE, FALSE, UNKNOWN = "true", "false", "unknown"
SURE, ALMOST = "sure", "almost"


class FormulaSyntaxError(ValueError):
    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"column {position + 1}: {message}")


class FragmentError(FormulaSyntaxError):
    """The formula uses an operator outside the decidable fragment."""


# --- syntax tree ---------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self):
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"{_wrap(self.left)} | {_wrap(self.right)}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"{_wrap(self.left)} & {_wrap(self.right)}"


@dataclass(frozen=True)
class Next:
    arg: "Formula"

    def __str__(self):
        return f"X {_wrap(self.arg)}"


@dataclass(frozen=True)
class Box:
    arg: "Formula"

    def __str__(self):
        return f"G {_wrap(self.arg)}"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        if self.left == Const(True):
            return f"F {_wrap(self.right)}"
        return f"{_wrap(self.left)} U {_wrap(self.right)}"


Path = Union[Next, Box, Until]


@dataclass(frozen=True)
class PathQuant:
    coalition: tuple[str, ...]
    randomisation: str  # "sh" or "ind"
    winning: Union[str, Fraction]  # "sure", "almost" or a threshold
    path: Path

    @property
    def threshold(self) -> Fraction | None:
        return self.winning if isinstance(self.winning, Fraction) else None

    def __str__(self):
        win = self.winning if isinstance(self.winning, str) else ">" + format_fraction(self.winning)
        return f"<<{','.join(self.coalition)}>>^{self.randomisation}_{win} {self.path}"


Formula = Union[Atom, Const, Not, Or, And, PathQuant]


def _wrap(f) -> str:
    text = str(f)
    return text if isinstance(f, (Atom, Const)) else f"({text})"


# --- parser ------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<quant>\^\s*(?P<rand>[A-Za-z]+)\s*_\s*(?P<win>sure|almost|limit|>\s*[0-9./]+|[A-Za-z]\w*))
  | (?P<open><<)
  | (?P<close>>>)
  | (?P<punct>[!|&(),])
  | (?P<id>[A-Za-z0-9_][A-Za-z0-9_.\-]*)
""", re.VERBOSE)

KEYWORDS = {"X", "G", "F", "U"}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int
    extra: tuple = ()


def _tokenize(text: str) -> list[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos] == "^":
                raise FormulaSyntaxError(pos, "expected '^sh_' or '^ind_' and a winning condition")
            raise FormulaSyntaxError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "ws":
            pass
        elif m.group("quant"):
            out.append(_Tok("quant", m.group(0), pos, (m.group("rand"), m.group("win"))))
        elif kind in ("open", "close", "punct"):
            out.append(_Tok(m.group(0), m.group(0), pos))
        else:
            word = m.group(0)
            out.append(_Tok("kw" if word in KEYWORDS else "id", word, pos))
        pos = m.end()
    out.append(_Tok("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: str | None = None, text: str | None = None) -> _Tok:
        tok = self.peek()
        if (kind is not None and tok.kind != kind) or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or "end of input"
            raise FormulaSyntaxError(tok.pos, f"expected {want!r}, found {got!r}")
        self.i += 1
        return tok

    def formula(self):
        left = self.conj()
        while self.peek().kind == "|":
            self.take("|")
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.unary()
        while self.peek().kind == "&":
            self.take("&")
            left = And(left, self.unary())
        return left

    def unary(self):
        tok = self.peek()
        if tok.kind == "!":
            self.take("!")
            return Not(self.unary())
        if tok.kind == "<<":
            return self.quant()
        if tok.kind == "(":
            self.take("(")
            f = self.formula()
            self.take(")")
            return f
        if tok.kind == "id":
            self.take()
            if tok.text == "true":
                return Const(True)
            if tok.text == "false":
                return Const(False)
            return Atom(tok.text)
        got = tok.text or "end of input"
        raise FormulaSyntaxError(tok.pos, f"expected a formula, found {got!r}")

    def quant(self):
        start = self.take("<<")
        ids = [self.take("id").text]
        while self.peek().kind == ",":
            self.take(",")
            ids.append(self.take("id").text)
        self.take(">>")
        qtok = self.take("quant")
        rand, win = qtok.extra
        if rand not in ("sh", "ind"):
            raise FormulaSyntaxError(qtok.pos, f"randomisation must be 'sh' or 'ind', not {rand!r}")
        if win == "limit":
            raise FragmentError(qtok.pos, "limit-sure winning is outside the supported fragment")
        if win.startswith(">"):
            try:
                t = parse_probability(win[1:].strip())
            except ValueError as exc:
                raise FormulaSyntaxError(qtok.pos, str(exc)) from None
            if not 0 <= t <= 1:
                raise FormulaSyntaxError(qtok.pos, "threshold must lie in [0, 1]")
            winning: Union[str, Fraction] = t
        elif win in (SURE, ALMOST):
            winning = win
        else:
            raise FormulaSyntaxError(qtok.pos, f"unknown winning condition {win!r}")
        path = self.path()
        if isinstance(winning, Fraction) and isinstance(path, Box):
            raise FragmentError(start.pos, "threshold safety (>t with G) is outside the supported fragment")
        if len(set(ids)) != len(ids):
            raise FormulaSyntaxError(start.pos, "coalition lists a player twice")
        return PathQuant(tuple(ids), rand, winning, path)

    def path(self):
        tok = self.peek()
        if tok.kind == "kw" and tok.text in ("X", "G", "F"):
            self.take()
            arg = self.unary()
            if tok.text == "X":
                return Next(arg)
            if tok.text == "G":
                return Box(arg)
            return Until(Const(True), arg)
        if tok.kind == "(":
            # "(phi U psi)": try the parenthesised until first, else fall through
            mark = self.i
            try:
                self.take("(")
                left = self.formula()
                self.take("kw", "U")
                right = self.formula()
                self.take(")")
                return Until(left, right)
            except FormulaSyntaxError:
                self.i = mark
        left = self.unary()
        self.take("kw", "U")
        return Until(left, self.unary())


def parse_formula(text: str) -> Formula:
    parser = _Parser(text)
    f = parser.formula()
    parser.take("end")
    return f


# --- evaluation ----------------------------------------------------------------

@dataclass
class Backends:
    """How threshold and almost-sure subgoals are decided."""

    endpoint: object | None = None  # SMT endpoint for exact thresholds
    sat: SatBackend = field(default_factory=SatBackend)
    stop: StopRule = field(default_factory=StopRule)
    config: one_shot.OneShotConfig = field(default_factory=one_shot.OneShotConfig)


@dataclass
class CheckResult:
    verdicts: dict[str, str]
    provenance: list[tuple[str, str]]
    formula: Formula

    def at(self, state: str) -> str:
        return self.verdicts[state]

    def states(self, verdict: str = TRUE) -> frozenset[str]:
        return frozenset(s for s, v in self.verdicts.items() if v == verdict)


class _Checker:
    def __init__(self, game: Game, backends: Backends):
        self.game = game
        self.b = backends
        self.all = frozenset(game.states)
        self.provenance: list[tuple[str, str]] = []

    def note(self, f, how: str):
        self.provenance.append((str(f), how))

    def eval(self, f) -> tuple[frozenset, frozenset]:
        if isinstance(f, Const):
            return (self.all, self.all) if f.value else (frozenset(), frozenset())
        if isinstance(f, Atom):
            s = self.game.holds(f.name)
            return s, s
        if isinstance(f, Not):
            lo, hi = self.eval(f.arg)
            return self.all - hi, self.all - lo
        if isinstance(f, Or):
            a, b = self.eval(f.left), self.eval(f.right)
            return a[0] | b[0], a[1] | b[1]
        if isinstance(f, And):
            a, b = self.eval(f.left), self.eval(f.right)
            return a[0] & b[0], a[1] & b[1]
        if isinstance(f, PathQuant):
            return self.quant(f)
        raise TypeError(f"not a formula: {f!r}")

    def quant(self, f: PathQuant):
        unknown = set(f.coalition) - set(self.game.players)
        if unknown:
            raise ValueError(f"coalition mentions unknown players {sorted(unknown)}")
        g = coalition_game(self.game, f.coalition)
        if f.randomisation == "sh" and f.winning != SURE:
            g = merge_team(g)
        path = f.path
        if isinstance(path, Until):
            args = [self.eval(path.left), self.eval(path.right)]
        else:
            args = [self.eval(path.arg)]
        # monotone in every argument: evaluate on lower and upper sets
        results = []
        for pick in (0, 1):
            sets = [a[pick] for a in args]
            if pick == 1 and all(a[0] == a[1] for a in args):
                results.append(results[0])
                break
            results.append(self.path_sets(f, g, path, sets))
        (lo, lo_hi), (hi_lo, hi) = results
        return lo, hi

    def path_sets(self, f: PathQuant, g: Game, path, sets) -> tuple[frozenset, frozenset]:
        """Definitely and possibly satisfying states for fixed argument sets."""
        if f.winning == SURE or (f.winning == ALMOST and isinstance(path, (Box, Next))):
            # pure strategies suffice; for G and X, almost-sure means surely
            how = "sure fixpoint" if f.winning == SURE else "almost-sure rewritten to sure"
            self.note(f, how)
            r = solve_sure(g, path, *sets)
            return r, r
        if f.winning == ALMOST:
            phi, psi = sets
            self.note(f, f"SAT ({self.b.sat.name}) per state")
            r = self.almost_until(g, phi, psi)
            return r, r
        t = f.winning
        if isinstance(path, Next):
            return self.threshold_next(f, g, sets[0], t)
        return self.threshold_until(f, g, sets[0], sets[1], t)

    def almost_until(self, g: Game, phi, psi) -> frozenset:
        if not psi:
            return frozenset()
        play = with_targets(restrict_absorbing(g, set(phi) | set(psi)), psi)
        out = set(psi)
        for s in g.states:
            if s in psi or s not in phi:
                continue
            if solve_almost_sure(play.replace(initial=s), self.b.sat).winning:
                out.add(s)
        return frozenset(out)

    def threshold_next(self, f, g: Game, target, t: Fraction):
        v = np.array([1.0 if s in target else 0.0 for s in g.states])
        lo, hi = set(), set()
        for s in g.states:
            local = one_shot.build_local_game(g, s, v)
            upper = one_shot.solve_shared(local).value  # shared randomness bounds independent
            if len(g.team) <= 1:
                lower = upper
            else:
                lower = one_shot.solve_independent(local, self.b.config).value
            if Fraction(lower) > t:
                lo.add(s)
                hi.add(s)
            elif Fraction(upper) > t + Fraction(1, 10 ** 9):
                hi.add(s)
        self.note(f, "one-shot value (LP bound and local search)")
        return frozenset(lo), frozenset(hi)

    def threshold_until(self, f, g: Game, phi, psi, t: Fraction):
        if not psi:
            self.note(f, "empty target")
            return frozenset(), frozenset()
        play = with_targets(restrict_absorbing(g, set(phi) | set(psi)), psi)
        if t == 0:
            # positive probability: uniform mixing is optimal, so a graph fixpoint decides it
            self.note(f, "positive-probability fixpoint")
            r = positive_until(play, phi, psi)
            return r, r
        mode = "sh" if len(play.team) <= 1 else "ind"
        res = value_iteration(play, mode=mode, stop=self.b.stop, config=self.b.config)
        cert = certify(res.game, res.profile)
        lo = {s for s in g.states if Fraction(cert[s]) > t}
        hi = set(lo)
        live = can_reach(play)  # elsewhere the value is 0
        undecided = [s for s in g.states if s not in lo and s in phi and s in live]
        how = "value iteration (certified)"
        if self.b.endpoint is not None:
            from .smt_bridge import SAT, UNSAT, decide_threshold_exact

            how += " + SMT"
            for s in undecided:
                verdict = decide_threshold_exact(play.replace(initial=s), t, self.b.endpoint)
                if verdict.status == SAT:
                    lo.add(s)
                    hi.add(s)
                elif verdict.status != UNSAT:
                    hi.add(s)
        else:
            hi.update(undecided)
        self.note(f, how)
        return frozenset(lo), frozenset(hi)


def cpre(game: Game, target) -> frozenset:
    """States where some pure team action keeps every possible successor in ``target``."""
    target = set(target)
    out = set()
    for s in game.states:
        for joint in game.team_joint_actions(s):
            if all(game.delta(s, joint, b).positive() <= target for b in game.opponent_actions(s)):
                out.add(s)
                break
    return frozenset(out)


def positive_until(game: Game, phi, psi) -> frozenset:
    """States where the team reaches ``psi`` through ``phi`` with positive probability.

    Every team action is played with positive probability, so a state qualifies
    when each opponent action has some joint team action with a successor that
    already qualifies.
    """
    x = set(psi)
    changed = True
    while changed:
        changed = False
        for s in game.states:
            if s in x or s not in phi:
                continue
            joints = game.team_joint_actions(s)
            if all(any(game.delta(s, j, b).positive() & x for j in joints)
                   for b in game.opponent_actions(s)):
                x.add(s)
                changed = True
    return frozenset(x)


def solve_sure(game: Game, path, *sets) -> frozenset:
    """Sure-winning states for ``X target``, ``G safe`` or ``phi U psi``."""
    if isinstance(path, Next):
        return cpre(game, sets[0])
    if isinstance(path, Box):
        safe = frozenset(sets[0])
        x = safe
        for _ in range(len(game.states) + 1):
            nxt = safe & cpre(game, x)
            if nxt == x:
                return x
            x = nxt
        return x
    if isinstance(path, Until):
        phi, psi = frozenset(sets[0]), frozenset(sets[1])
        x = psi
        for _ in range(len(game.states) + 1):
            nxt = psi | (phi & cpre(game, x))
            if nxt == x:
                return x
            x = nxt
        return x
    raise TypeError(f"not a path operator: {path!r}")


def satisfying_states(game: Game, formula: Formula | str, backends: Backends | None = None) -> CheckResult:
    ensure_valid(game)
    if isinstance(formula, str):
        formula = parse_formula(formula)
    checker = _Checker(game, backends or Backends())
    lo, hi = checker.eval(formula)
    verdicts = {s: TRUE if s in lo else (UNKNOWN if s in hi else FALSE) for s in game.states}
    return CheckResult(verdicts, checker.provenance, formula)
