"""Almost-sure reachability: SAT encoding, certificates, and an enumeration oracle.

Almost-sure winning under a memoryless profile depends only on its supports.
A certificate names a winning set ``W``, a rank per state of ``W`` (0 exactly
on targets) and per-player supports such that inside ``W`` the team never
leaves ``W`` and, whatever the opponent does, moves to a lower rank with
positive probability.
"""
from __future__ import annotations

import itertools
import math
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .game import Game, ensure_valid

BINARY, UNARY = "binary", "unary"


class CertificateError(RuntimeError):
    """A decoded certificate failed verification: the encoder is wrong."""


class SatBackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class RankCertificate:
    winning: frozenset[str]
    rank: Mapping[str, int]
    supports: Mapping[tuple[str, str], frozenset[str]]

    def support_profile(self, game: Game):
        """Uniform distributions over the supports (any full-support choice works)."""
        from fractions import Fraction

        from .game import MemorylessProfile

        probs = {}
        for p in game.team:
            for s in game.states:
                acts = self.supports.get((p, s)) or frozenset(game.available[(p, s)])
                ordered = [a for a in game.available[(p, s)] if a in acts]
                probs[(p, s)] = {a: Fraction(1, len(ordered)) for a in ordered}
        return MemorylessProfile(probs)


# --- CNF plumbing ------------------------------------------------------------

@dataclass
class CnfInstance:
    num_vars: int = 0
    clauses: list[list[int]] = field(default_factory=list)
    var_map: dict[str, int] = field(default_factory=dict)

    def var(self, name: str) -> int:
        v = self.var_map.get(name)
        if v is None:
            self.num_vars += 1
            v = self.var_map[name] = self.num_vars
        return v

    def add(self, clause: Iterable[int]) -> None:
        clause = list(clause)
        if any(lit == 0 for lit in clause):
            raise ValueError("zero literal in clause")
        self.clauses.append(clause)

    # Tseitin gates with both implication directions
    def and_gate(self, name: str, lits: Sequence[int]) -> int:
        if name in self.var_map:
            return self.var_map[name]
        out = self.var(name)
        for lit in lits:
            self.add([-out, lit])
        self.add([out] + [-lit for lit in lits])
        return out

    def or_gate(self, name: str, lits: Sequence[int]) -> int:
        if name in self.var_map:
            return self.var_map[name]
        out = self.var(name)
        for lit in lits:
            self.add([out, -lit])
        self.add([-out] + list(lits))
        return out

    def eq_gate(self, name: str, a: int, b: int) -> int:
        if name in self.var_map:
            return self.var_map[name]
        out = self.var(name)
        self.add([-out, -a, b])
        self.add([-out, a, -b])
        self.add([out, a, b])
        self.add([out, -a, -b])
        return out

    def to_dimacs(self) -> str:
        lines = [f"c {name} {idx}" for name, idx in sorted(self.var_map.items(), key=lambda kv: kv[1])]
        lines.append(f"p cnf {self.num_vars} {len(self.clauses)}")
        lines.extend(" ".join(map(str, c)) + " 0" for c in self.clauses)
        return "\n".join(lines) + "\n"


def rank_width(n_states: int) -> int:
    return max(1, math.ceil(math.log2(n_states + 1)))


def bslt(cnf: CnfInstance, t_bits: Sequence[int], s_bits: Sequence[int], name: str) -> int:
    """Variable equivalent to "number in t_bits < number in s_bits" (bit 0 least significant)."""
    if name in cnf.var_map:
        return cnf.var_map[name]
    width = len(t_bits)
    eqs = [cnf.eq_gate(f"{name}.eq{j}", t_bits[j], s_bits[j]) for j in range(width)]
    terms = []
    for i in range(width):
        lits = [-t_bits[i], s_bits[i]] + eqs[i + 1:]
        terms.append(cnf.and_gate(f"{name}.at{i}", lits))
    return cnf.or_gate(name, terms)


def _supp(game: Game, s, joint, b) -> list[str]:
    return sorted(game.delta(s, joint, b).positive(), key=game.state_index.get)


def encode(game: Game, rank_encoding: str = BINARY) -> CnfInstance:
    """CNF that is satisfiable iff the team wins almost surely from the initial state."""
    ensure_valid(game)
    if rank_encoding not in (BINARY, UNARY):
        raise ValueError(f"unknown rank encoding {rank_encoding!r}")
    cnf = CnfInstance()
    n = len(game.states)
    w = {s: cnf.var(f"w[{s}]") for s in game.states}
    u = {
        (s, p, a): cnf.var(f"u[{s},{p},{a}]")
        for s in game.states for p in game.team for a in game.available[(p, s)]
    }
    cnf.add([w[game.initial]])

    if rank_encoding == BINARY:
        width = rank_width(n)
        bits = {s: [cnf.var(f"b[{s},{j}]") for j in range(width)] for s in game.states}
        for s in game.targets:
            cnf.add([w[s]])
            for x in bits[s]:
                cnf.add([-x])
    else:
        r = {(s, k): cnf.var(f"r[{s},{k}]") for s in game.states for k in range(n + 1)}
        for s in game.states:
            ranks = [r[(s, k)] for k in range(n + 1)]
            cnf.add([-w[s]] + ranks)
            for x in ranks:
                cnf.add([w[s], -x])
            for j, k in itertools.combinations(range(n + 1), 2):
                cnf.add([-r[(s, j)], -r[(s, k)]])
            if s in game.targets:
                cnf.add([r[(s, 0)]])
            else:
                cnf.add([-r[(s, 0)]])

    # every player has a support inside W
    for s in game.states:
        for p in game.team:
            cnf.add([-w[s]] + [u[(s, p, a)] for a in game.available[(p, s)]])

    # supports never leave W
    for s in game.states:
        if s in game.targets:
            continue
        for joint in game.team_joint_actions(s):
            guard = [-w[s]] + [-u[(s, p, a)] for p, a in zip(game.team, joint)]
            for b in game.opponent_actions(s):
                for t in _supp(game, s, joint, b):
                    if t != s:
                        cnf.add(guard + [w[t]])

    # progress to a lower rank against every opponent action
    for s in game.states:
        if s in game.targets:
            continue
        joints = game.team_joint_actions(s)
        plays = {}
        for joint in joints:
            lits = [u[(s, p, a)] for p, a in zip(game.team, joint)]
            plays[joint] = cnf.and_gate(f"play[{s},{','.join(joint)}]", lits) if lits else None
        levels = [None] if rank_encoding == BINARY else range(1, n + 1)
        for k in levels:
            for b in game.opponent_actions(s):
                options = []
                for joint in joints:
                    succ = [t for t in _supp(game, s, joint, b) if t != s]
                    if not succ:
                        continue
                    if rank_encoding == BINARY:
                        lower = [bslt(cnf, bits[t], bits[s], f"lt[{t},{s}]") for t in succ]
                        key = f"down[{s}|{','.join(succ)}]"
                    else:
                        lower = [
                            cnf.or_gate(f"below[{t},{k}]", [r[(t, j)] for j in range(k)])
                            for t in succ
                        ]
                        key = f"down[{s}|{','.join(succ)}|{k}]"
                    down = cnf.or_gate(key, lower)
                    if plays[joint] is None:
                        options.append(down)
                    else:
                        options.append(cnf.and_gate(f"step[{s},{','.join(joint)},{b},{k}]",
                                                    [plays[joint], down]))
                guard = [-w[s]] if rank_encoding == BINARY else [-r[(s, k)]]
                cnf.add(guard + options)
    return cnf


def decode(game: Game, cnf: CnfInstance, model: Iterable[int], rank_encoding: str = BINARY) -> RankCertificate:
    true = {lit for lit in model if lit > 0}
    val = lambda name: cnf.var_map[name] in true  # noqa: E731
    winning = frozenset(s for s in game.states if val(f"w[{s}]"))
    raw = {}
    n = len(game.states)
    for s in winning:
        if rank_encoding == BINARY:
            width = rank_width(n)
            raw[s] = sum(1 << j for j in range(width) if val(f"b[{s},{j}]"))
        else:
            raw[s] = next(k for k in range(n + 1) if val(f"r[{s},{k}]"))
    # dense re-numbering keeps the order and bounds ranks by |S|
    levels = {v: i for i, v in enumerate(sorted(set(raw.values())))}
    rank = {s: levels[v] for s, v in raw.items()}
    supports = {}
    for s in winning:
        for p in game.team:
            supports[(p, s)] = frozenset(a for a in game.available[(p, s)] if val(f"u[{s},{p},{a}]"))
    return RankCertificate(winning, rank, supports)


# --- solving -----------------------------------------------------------------

@dataclass(frozen=True)
class SatBackend:
    """Embedded solver by name, or an external DIMACS solver command."""

    name: str = "minisat22"
    command: tuple[str, ...] | None = None
    timeout: float | None = None

    @classmethod
    def parse(cls, spec: str) -> "SatBackend":
        if spec.startswith("external:"):
            return cls(name="external", command=tuple(shlex.split(spec[len("external:"):])))
        return cls(name=spec)


def run_sat(cnf: CnfInstance, backend: SatBackend = SatBackend()) -> list[int] | None:
    """A model as a list of literals, or ``None`` when unsatisfiable."""
    if backend.command:
        return _run_external(cnf, backend)
    try:
        from pysat.solvers import Solver
    except ImportError as exc:  # pragma: no cover
        raise SatBackendError("python-sat is not installed") from exc
    try:
        solver = Solver(name=backend.name, bootstrap_with=cnf.clauses)
    except Exception as exc:
        raise SatBackendError(f"cannot start SAT solver {backend.name!r}: {exc}") from None
    with solver:
        if solver.solve():
            return list(solver.get_model() or [])
        return None


def _run_external(cnf: CnfInstance, backend: SatBackend) -> list[int] | None:
    try:
        proc = subprocess.run(list(backend.command), input=cnf.to_dimacs(), capture_output=True,
                              text=True, timeout=backend.timeout)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise SatBackendError(f"external SAT solver failed: {exc}") from None
    status, model = None, []
    for line in proc.stdout.splitlines():
        if line.startswith("s "):
            status = line[2:].strip()
        elif line.startswith("v "):
            model.extend(int(x) for x in line[2:].split() if x != "0")
    if status == "SATISFIABLE":
        return model
    if status == "UNSATISFIABLE":
        return None
    raise SatBackendError(f"external SAT solver gave no verdict (status line {status!r})")


@dataclass
class AlmostSureResult:
    winning: bool
    certificate: RankCertificate | None
    variables: int
    clauses: int
    seconds: float


def solve_almost_sure(game: Game, backend: SatBackend = SatBackend(),
                      rank_encoding: str = BINARY) -> AlmostSureResult:
    started = time.perf_counter()
    cnf = encode(game, rank_encoding)
    model = run_sat(cnf, backend)
    cert = None
    if model is not None:
        cert = decode(game, cnf, model, rank_encoding)
        check = verify_certificate(game, cert)
        if not check.ok:
            raise CertificateError(f"decoded certificate is invalid: {check}")
    return AlmostSureResult(model is not None, cert, cnf.num_vars, len(cnf.clauses),
                            time.perf_counter() - started)


# --- semantic checks ---------------------------------------------------------

@dataclass(frozen=True)
class Verification:
    ok: bool
    kind: str = ""
    state: str | None = None
    detail: str = ""

    def __str__(self):
        if self.ok:
            return "ok"
        return f"{self.kind} violated at {self.state}: {self.detail}"


def _support_joints(game: Game, s: str, supports) -> list[tuple[str, ...]]:
    return list(itertools.product(*(
        [a for a in game.available[(p, s)] if a in supports[(p, s)]] for p in game.team
    )))


def verify_certificate(game: Game, cert: RankCertificate) -> Verification:
    """Re-check a certificate against the game with exact probabilities."""
    W = set(cert.winning)
    if game.initial not in W:
        return Verification(False, "initial", game.initial, "initial state outside the winning set")
    for s in game.states:
        if s not in W:
            continue
        if s not in cert.rank:
            return Verification(False, "rank-consistency", s, "winning state without a rank")
        if (cert.rank[s] == 0) != (s in game.targets):
            return Verification(False, "rank-consistency", s, "rank 0 must hold exactly on targets")
        for p in game.team:
            sup = cert.supports.get((p, s))
            if not sup:
                return Verification(False, "support", s, f"empty support for {p}")
            if not set(sup) <= set(game.available[(p, s)]):
                return Verification(False, "support", s, f"unavailable actions for {p}")
    for s in game.states:
        if s not in W or s in game.targets:
            continue
        joints = _support_joints(game, s, cert.supports)
        for b in game.opponent_actions(s):
            progress = False
            for joint in joints:
                for t, q in game.transitions[(s, joint + (b,))].support:
                    if q <= 0:
                        continue
                    if t not in W:
                        return Verification(False, "safety", s,
                                            f"({','.join(joint)}) against {b} reaches {t}")
                    if cert.rank[t] < cert.rank[s]:
                        progress = True
            if not progress:
                return Verification(False, "progress", s, f"no rank decrease against {b}")
    return Verification(True)


@dataclass
class RankResult:
    ranks: dict[str, int] | None
    failure: Verification | None = None


def compute_ranks(game: Game, supports: Mapping[tuple[str, str], Iterable[str]],
                  winning: Iterable[str] | None = None) -> RankResult:
    """Rank layers of a candidate winning set under fully mixed play on ``supports``.

    Without ``winning``, the candidate set is the targets plus every state
    where all team players have a support.
    """
    supports = {k: frozenset(v) for k, v in supports.items()}
    for (p, s), acts in supports.items():
        if (p, s) not in game.available:
            raise ValueError(f"unknown player/state pair ({p}, {s})")
        bad = set(acts) - set(game.available[(p, s)])
        if bad:
            raise ValueError(f"support for {p} at {s} uses unavailable actions {sorted(bad)}")
        if not acts:
            raise ValueError(f"empty support for {p} at {s}")
    if winning is None:
        W = set(game.targets) | {s for s in game.states
                                 if all((p, s) in supports for p in game.team)}
    else:
        W = set(winning) | set(game.targets)
    inner = [s for s in game.states if s in W and s not in game.targets]
    for s in inner:
        if any((p, s) not in supports for p in game.team):
            raise ValueError(f"no support given at winning state {s}")
    succ = {}
    for s in inner:
        joints = _support_joints(game, s, supports)
        succ[s] = []
        for b in game.opponent_actions(s):
            out = set()
            for joint in joints:
                out |= game.delta(s, joint, b).positive()
            leak = out - W
            if leak:
                return RankResult(None, Verification(False, "safety", s,
                                                     f"reaches {sorted(leak)[0]} against {b}"))
            succ[s].append(out)
    ranks = {t: 0 for t in game.targets}
    k = 0
    while True:
        k += 1
        layer = [s for s in inner if s not in ranks
                 and all(any(ranks.get(t, k) < k for t in out) for out in succ[s])]
        if not layer:
            break
        for s in layer:
            ranks[s] = k
    for s in inner:
        if s not in ranks:
            return RankResult(None, Verification(False, "progress", s, "no finite rank"))
    return RankResult(ranks)


class GuardExceeded(ValueError):
    pass


BRUTE_FORCE_LIMIT = 10 ** 6


def _team_matters(game: Game, s: str) -> bool:
    joints = game.team_joint_actions(s)
    return any(
        len({game.delta(s, j, b) for j in joints}) > 1 for b in game.opponent_actions(s)
    )


def _subset_table(base, axis: int):
    """Replace action axis ``axis`` by its non-empty subsets, OR-ing successor masks."""
    n = base.shape[axis]
    moved = np.moveaxis(base, axis, 0)
    out = np.empty((2 ** n - 1,) + moved.shape[1:], dtype=base.dtype)
    for subset in range(1, 2 ** n):
        low = subset & -subset
        rest = subset ^ low
        row = moved[low.bit_length() - 1]
        out[subset - 1] = row if rest == 0 else (out[rest - 1] | row)
    return np.moveaxis(out, 0, axis)


def _behaviours(game: Game, s: str, bit: Mapping[str, int], dtype) -> list[tuple[int, ...]]:
    """Distinct per-opponent-action successor masks over all support choices at ``s``."""
    sizes = [len(game.available[(p, s)]) for p in game.team]
    opp = game.opponent_actions(s)
    base = np.zeros(tuple(sizes) + (len(opp),), dtype=dtype)
    for idx in itertools.product(*(range(n) for n in sizes)):
        joint = tuple(game.available[(p, s)][i] for p, i in zip(game.team, idx))
        for j, b in enumerate(opp):
            mask = 0
            for t in game.delta(s, joint, b).positive():
                mask |= bit[t]
            base[idx + (j,)] = mask
    for axis in range(len(sizes)):
        base = _subset_table(base, axis)
    rows = base.reshape(-1, len(opp))
    if dtype is object:
        return sorted({tuple(int(x) for x in r) for r in rows})
    return [tuple(int(x) for x in r) for r in np.unique(rows, axis=0)]


def brute_force_almost_sure(game: Game, limit: int = BRUTE_FORCE_LIMIT) -> bool:
    """Try every support assignment; a test oracle independent of the encoder.

    For each assignment the winning set is the nested fixpoint: drop states
    that can leave the set, drop states without a rank, repeat. Assignments
    with the same successor sets per opponent action behave identically, so
    each state keeps one representative per distinct behaviour.
    """
    ensure_valid(game)
    inner = [s for s in game.states if s not in game.targets]
    count = 1
    for s in inner:
        if not _team_matters(game, s):
            continue  # a single behaviour whatever the supports
        for p in game.team:
            count *= 2 ** len(game.available[(p, s)]) - 1
    if count > limit:
        raise GuardExceeded(f"{count} support assignments exceed the limit {limit}")
    bit = {s: 1 << i for i, s in enumerate(game.states)}
    dtype = np.uint64 if len(game.states) <= 64 else object
    choices = []
    for s in inner:
        if _team_matters(game, s):
            choices.append(_behaviours(game, s, bit, dtype))
        else:
            joint = game.team_joint_actions(s)[0]
            choices.append([tuple(
                sum(bit[t] for t in game.delta(s, joint, b).positive())
                for b in game.opponent_actions(s)
            )])
    full = (1 << len(game.states)) - 1
    targets = 0
    for t in game.targets:
        targets |= bit[t]
    inner_bits = [bit[s] for s in inner]
    start = bit[game.initial]
    for pick in itertools.product(*choices):
        W = full
        while True:
            safe = targets
            for sb, outs in zip(inner_bits, pick):
                if W & sb and all(out & ~W == 0 for out in outs):
                    safe |= sb
            ranked = targets
            grew = True
            while grew:
                grew = False
                for sb, outs in zip(inner_bits, pick):
                    if safe & sb and not ranked & sb and all(out & ranked for out in outs):
                        ranked |= sb
                        grew = True
            if ranked == W:
                break
            W = ranked
        if W & start:
            return True
    return False


def brute_force_almost_sure_safety(game: Game, safe: Iterable[str],
                                   limit: int = BRUTE_FORCE_LIMIT) -> frozenset[str]:
    """States from which some memoryless profile stays in ``safe`` with probability 1.

    Enumerates support assignments of mixed strategies (no pure-strategy
    shortcut): under a fully mixed profile the play stays in a set almost
    surely iff no supported move can leave it.
    """
    ensure_valid(game)
    safe_bits = 0
    bit = {s: 1 << i for i, s in enumerate(game.states)}
    for s in safe:
        safe_bits |= bit[s]
    cand = [s for s in game.states if bit[s] & safe_bits]
    count = 1
    for s in cand:
        if _team_matters(game, s):
            for p in game.team:
                count *= 2 ** len(game.available[(p, s)]) - 1
    if count > limit:
        raise GuardExceeded(f"{count} support assignments exceed the limit {limit}")
    dtype = np.uint64 if len(game.states) <= 64 else object
    choices = [_behaviours(game, s, bit, dtype) for s in cand]
    winners = 0
    for pick in itertools.product(*choices):
        X = safe_bits
        while True:
            nxt = 0
            for s, outs in zip(cand, pick):
                if X & bit[s] and all(out & ~X == 0 for out in outs):
                    nxt |= bit[s]
            if nxt == X:
                break
            X = nxt
        winners |= X
    return frozenset(s for s in game.states if winners & bit[s])


def bslt_reference(t: int, s: int) -> bool:
    return t < s


def check_bslt(width: int, backend: SatBackend = SatBackend()) -> bool:
    """Exhaustively confirm the comparator clauses for all input pairs of ``width`` bits."""
    from pysat.solvers import Solver

    cnf = CnfInstance()
    tb = [cnf.var(f"t{j}") for j in range(width)]
    sb = [cnf.var(f"s{j}") for j in range(width)]
    lt = bslt(cnf, tb, sb, "lt")
    with Solver(name=backend.name, bootstrap_with=cnf.clauses) as solver:
        for t in range(1 << width):
            for s in range(1 << width):
                assume = [v if (t >> j) & 1 else -v for j, v in enumerate(tb)]
                assume += [v if (s >> j) & 1 else -v for j, v in enumerate(sb)]
                expected = bslt_reference(t, s)
                if solver.solve(assumptions=assume + [lt]) != expected:
                    return False
                if solver.solve(assumptions=assume + [-lt]) == expected:
                    return False
    return True
