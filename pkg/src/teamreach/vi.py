"""Value iteration for the max-min reachability value, with certification.

``value_iteration`` computes ``v_{n+1} = Pre(v_n)`` from the valuation that is
1 on targets and 0 elsewhere. In independent mode the local solves are local
searches, so every iterate is only a lower bound; :func:`certify` turns the
extracted memoryless profile into an exact guarantee by solving the induced
MDP for the opponent.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from . import one_shot
from .game import Game, MemorylessProfile, can_reach, ensure_valid, induced_mdp, merge_team
from .one_shot import LocalSolution, OneShotConfig
from .rational import to_fraction

log = logging.getLogger(__name__)

INDEPENDENT, SHARED = "ind", "sh"
OPT, SMT, HYBRID = "opt", "smt", "hybrid"
HYBRID_STEP = 1e-4


@dataclass(frozen=True)
class StopRule:
    tolerance: float = 1e-4
    max_iters: int = 10_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("stop tolerance must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass
class VIResult:
    values: dict[str, float]
    iterations: int
    history: list[float]
    profile: MemorylessProfile
    mode: str
    backend: str
    game: Game  # the game the profile refers to (merged in shared mode)
    converged: bool
    trace: list[np.ndarray] | None = None
    seconds: float = 0.0
    provenance: dict[str, str] = field(default_factory=dict)

    def value(self, state: str | None = None) -> float:
        return self.values[self.game.initial if state is None else state]


def _initial_valuation(game: Game) -> np.ndarray:
    v = np.zeros(len(game.states))
    for t in game.targets:
        v[game.state_index[t]] = 1.0
    return v


def _selector_to_dists(game: Game, s: str, sol: LocalSolution, mode: str) -> dict:
    out = {}
    if mode == SHARED:
        (p,) = game.team
        out[(p, s)] = {a: float(x) for a, x in zip(game.available[(p, s)], sol.joint)}
    else:
        for p, x in zip(game.team, sol.selector):
            out[(p, s)] = {a: float(q) for a, q in zip(game.available[(p, s)], x)}
    return out


class _StateSolver:
    """Local solves for one state across iterations, remembering the last selector."""

    def __init__(self, game, state, idx, mode, backend, config, endpoint, precision):
        self.game, self.state, self.idx = game, state, idx
        self.mode, self.backend = mode, backend
        self.config, self.endpoint, self.precision = config, endpoint, precision
        self.last: LocalSolution | None = None
        self.how = backend

    def _reevaluate(self, local) -> float:
        if self.mode == SHARED:
            return one_shot.joint_value(local, self.last.joint)
        return one_shot.best_response_value(local, self.last.selector)

    def solve(self, valuation: np.ndarray, iteration: int) -> LocalSolution:
        local = one_shot.build_local_game(self.game, self.state, valuation)
        if self.mode == SHARED or len(self.game.team) == 0:
            sol = one_shot.solve_shared(local)
            if not self.game.team:
                sol = LocalSolution(sol.value, (), one_shot.EXACT)
        else:
            rng = np.random.default_rng([self.config.seed, iteration, self.idx])
            warm = self.last.selector if self.last is not None else None
            if self.backend == SMT:
                sol = self._solve_smt(local, 0.0, warm)
            else:
                sol = one_shot.solve_independent(local, self.config, warm_start=warm, rng=rng)
                if self.backend == HYBRID:
                    sol = self._solve_smt(local, sol.value, sol.selector)
        # keep the previous selector unless the new one is strictly better;
        # this makes the iterates monotone and the extracted profile stable
        if self.last is not None and self.game.team:
            old = self._reevaluate(local)
            if sol.value <= old + 1e-12:
                sol = LocalSolution(old, self.last.selector, self.last.status, self.last.joint)
        self.last = sol
        return sol

    def _solve_smt(self, local, lower: float, selector) -> LocalSolution:
        """Binary search with local queries above a known achievable value."""
        from . import smt_bridge as smt

        lo, hi = lower, 1.0
        best_sel = selector
        c = min(lower + HYBRID_STEP, 1.0) if self.backend == HYBRID else None
        while True:
            if c is None:
                if hi - lo <= self.precision:
                    break
                c = (lo + hi) / 2
            verdict = smt.run_solver(smt.emit_local_game_query(local, c), self.endpoint)
            if verdict.status == smt.SAT:
                sel = smt.selector_from_model(local, verdict.model or {})
                if sel is not None:
                    best_sel = sel
                lo = c
            elif verdict.status == smt.UNSAT:
                hi = c
            else:
                self.how = f"{self.backend} (solver {verdict.status}, kept local search)"
                break
            c = None
        if best_sel is None:
            best_sel = tuple(np.full(len(a), 1.0 / len(a)) for a in local.team_actions)
        value = one_shot.best_response_value(local, best_sel)
        return LocalSolution(value, tuple(best_sel), one_shot.EXACT)


def value_iteration(
    game: Game,
    mode: str = INDEPENDENT,
    backend: str = OPT,
    stop: StopRule = StopRule(),
    config: OneShotConfig = OneShotConfig(),
    endpoint=None,
    precision: float = 1e-4,
    jobs: int | None = 1,
    record_trace: bool = False,
) -> VIResult:
    """Iterate the predecessor operator until the largest change drops below tolerance.

    ``mode`` is ``"ind"`` (independent randomisation) or ``"sh"`` (the team is
    merged into one player and each local game is solved by LP). Backends
    ``"smt"`` and ``"hybrid"`` need an SMT endpoint; hybrid falls back to
    ``"opt"`` with a warning when none is given.
    """
    if mode not in (INDEPENDENT, SHARED):
        raise ValueError(f"unknown mode {mode!r}")
    if backend not in (OPT, SMT, HYBRID):
        raise ValueError(f"unknown backend {backend!r}")
    ensure_valid(game)
    started = time.perf_counter()
    if mode == SHARED:
        game = merge_team(game)
        if len(game.team) == 1 and backend != OPT:
            backend = OPT  # merged local games are solved exactly anyway
    if backend == SMT and endpoint is None:
        from .smt_bridge import SolverConfigError

        raise SolverConfigError("backend 'smt' needs an SMT solver endpoint")
    if backend == HYBRID and endpoint is None:
        log.warning("no SMT endpoint configured; hybrid backend falls back to opt")
        backend = OPT

    states = game.states
    useful = can_reach(game)
    active = [i for i, s in enumerate(states) if s not in game.targets and s in useful]
    solvers = {
        i: _StateSolver(game, states[i], i, mode, backend, config, endpoint, precision) for i in active
    }
    v = _initial_valuation(game)
    history: list[float] = []
    trace = [v.copy()] if record_trace else None
    workers = jobs if jobs is not None else (os.cpu_count() or 1)
    pool = ThreadPoolExecutor(workers) if workers > 1 and len(active) > 1 else None
    converged = False
    last: dict[int, LocalSolution] = {}
    try:
        for it in range(stop.max_iters):
            if not active:
                converged = True
                break
            if pool is None:
                sols = [solvers[i].solve(v, it) for i in active]
            else:
                sols = list(pool.map(lambda i: solvers[i].solve(v, it), active))
            new = v.copy()
            for i, sol in zip(active, sols):
                new[i] = min(max(sol.value, 0.0), 1.0)
                last[i] = sol
            delta = float(np.max(np.abs(new - v)))
            v = new
            history.append(delta)
            if trace is not None:
                trace.append(v.copy())
            if delta < stop.tolerance:
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    probs = MemorylessProfile.uniform(game).probs
    if game.team:
        for i, sol in last.items():
            probs.update(_selector_to_dists(game, states[i], sol, mode))
    provenance = {states[i]: solvers[i].how for i in active}
    return VIResult(
        values={s: float(v[i]) for i, s in enumerate(states)},
        iterations=len(history), history=history,
        profile=MemorylessProfile(probs), mode=mode, backend=backend, game=game,
        converged=converged, trace=trace, seconds=time.perf_counter() - started,
        provenance=provenance,
    )


def _mdp_rows(mdp: Game):
    """Sparse rows (state, opponent action) of the induced MDP."""
    idx = mdp.state_index
    offsets, cols, data, row_state = [], [], [], []
    for s in mdp.states:
        for b in mdp.opponent_actions(s):
            offsets.append(len(cols))
            row_state.append(idx[s])
            for t, q in mdp.delta(s, (), b).support:
                if q:
                    cols.append(idx[t])
                    data.append(float(q))
    return (np.array(offsets), np.array(cols, dtype=np.int64), np.array(data), np.array(row_state))


def min_reachability(mdp: Game, stop: StopRule) -> tuple[np.ndarray, int]:
    """Lower iterates of the opponent-minimised reachability probability."""
    from scipy.sparse import csr_matrix

    offsets, cols, data, row_state = _mdp_rows(mdp)
    n = len(mdp.states)
    indptr = np.append(offsets, len(cols))
    p = csr_matrix((data, cols, indptr), shape=(len(offsets), n))
    # rows are grouped by state in state order
    starts = np.searchsorted(row_state, np.arange(n))
    targets = np.zeros(n, bool)
    for t in mdp.targets:
        targets[mdp.state_index[t]] = True
    u = targets.astype(float)
    its = 0
    for its in range(1, stop.max_iters + 1):
        new = np.minimum.reduceat(p @ u, starts)
        new[targets] = 1.0
        delta = float(np.max(new - u))
        u = np.maximum(new, u)
        if delta < stop.tolerance:
            break
    return u, its


CERTIFY_STOP = StopRule(tolerance=1e-12, max_iters=1_000_000)


def certify(game: Game, profile: MemorylessProfile, stop: StopRule = CERTIFY_STOP) -> dict[str, float]:
    """Per-state lower bounds on what ``profile`` guarantees against any opponent."""
    mdp = induced_mdp(game, profile)
    u, _ = min_reachability(mdp, stop)
    return {s: float(u[i]) for i, s in enumerate(game.states)}


@dataclass
class ThresholdAnswer:
    verdict: str  # "yes" or "unknown"
    certified: float
    profile: MemorylessProfile | None
    game: Game
    result: VIResult | None = None
    certified_values: dict[str, float] | None = None


YES, NO, UNKNOWN = "yes", "no", "unknown"


def decide_threshold_vi(
    game: Game, t, mode: str = INDEPENDENT, stop: StopRule = StopRule(),
    config: OneShotConfig = OneShotConfig(), jobs: int | None = 1, **kwargs,
) -> ThresholdAnswer:
    """Semi-decision for "value at the initial state > t": answers yes or unknown."""
    t = to_fraction(t)
    if not 0 <= t <= 1:
        raise ValueError("threshold must lie in [0, 1]")
    ensure_valid(game)
    if game.initial in game.targets:
        verdict = YES if t < 1 else UNKNOWN
        return ThresholdAnswer(verdict, 1.0, MemorylessProfile.uniform(game), game)
    result = value_iteration(game, mode=mode, stop=stop, config=config, jobs=jobs, **kwargs)
    cert = certify(result.game, result.profile)
    bound = cert[result.game.initial]
    verdict = YES if Fraction(bound) > t else UNKNOWN
    return ThresholdAnswer(verdict, bound, result.profile, result.game, result, cert)


def valuation_array(game: Game, values: Mapping[str, float]) -> np.ndarray:
    return np.array([float(values[s]) for s in game.states])
