"""Local one-shot games behind the predecessor operator.

At a state ``s`` and valuation ``v`` the team picks a selector, the opponent
answers with an action ``b`` and the team earns ``sum_t delta(s, a, b)(t) v(t)``.
With shared randomness this is a matrix game solved by LP; with independent
randomisation the team's selector is a product of per-player distributions
and the objective is a non-concave polynomial, so we run certified local
search and re-evaluate whatever selector it returns.
"""
from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .game import Game

EXACT = "exact"
LOCAL_SEARCH = "local-search"
ORACLE = "oracle"


@dataclass(frozen=True)
class LocalGame:
    team_actions: tuple[tuple[str, ...], ...]
    opponent_actions: tuple[str, ...]
    payoff: np.ndarray  # shape (*team sizes, n_opponent)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.team_actions)

    def joint_matrix(self) -> np.ndarray:
        """Payoffs with the team's joint actions flattened into rows."""
        return self.payoff.reshape(-1, len(self.opponent_actions))


@dataclass
class LocalSolution:
    value: float
    selector: tuple[np.ndarray, ...] | None
    status: str
    joint: np.ndarray | None = None


@dataclass(frozen=True)
class OneShotConfig:
    """Local search settings for :func:`solve_independent`.

    The restart count and initial points are choices of this library, not
    prescribed values: one uniform start plus ``restarts - 1`` Dirichlet(1)
    starts drawn from ``seed``. The best pure joint action is always added as
    one extra start. For two-player teams where one player has two actions,
    a grid sweep over the other player's simplex (each point paired with its
    exact best two-action reply) adds one more start; ``sweep_resolution = 0``
    turns it off.
    """

    restarts: int = 16
    max_steps: int = 500
    stagnation_tol: float = 1e-9
    seed: int = 0
    step_size: float = 0.5
    temperature: tuple[float, float] = (5e-2, 1e-4)
    polish_rounds: int = 25
    polish_candidates: int = 3
    sweep_resolution: int = 100
    sweep_max_points: int = 5000


def build_local_game(game: Game, state: str, valuation: Mapping[str, float] | np.ndarray) -> LocalGame:
    """Tensor of expected next-step values at ``state``."""
    if state not in game.state_index:
        raise KeyError(f"unknown state {state!r}")
    if isinstance(valuation, np.ndarray):
        value_of = lambda t: float(valuation[game.state_index[t]])  # noqa: E731
    else:
        value_of = lambda t: float(valuation[t])  # noqa: E731
    team = tuple(game.team_actions(state))
    opp = game.opponent_actions(state)
    shape = tuple(len(a) for a in team) + (len(opp),)
    payoff = np.zeros(shape)
    for idx in itertools.product(*(range(n) for n in shape[:-1])):
        joint = tuple(team[p][i] for p, i in enumerate(idx))
        for j, b in enumerate(opp):
            payoff[idx + (j,)] = sum(q * value_of(t) for t, q in game.delta(state, joint, b).floats)
    return LocalGame(team, opp, payoff)


def _expected(payoff: np.ndarray, selector: Sequence[np.ndarray]) -> np.ndarray:
    out = payoff
    for x in selector:
        out = np.tensordot(x, out, axes=(0, 0))
    return out


def best_response_value(local: LocalGame, selector: Sequence[np.ndarray]) -> float:
    """Team payoff against the opponent's best pure reply.

    Linearity in the opponent's mixed action makes the pure minimum exact.
    """
    if len(selector) != len(local.team_actions):
        raise ValueError("selector has the wrong number of players")
    for x, acts in zip(selector, local.team_actions):
        if np.shape(x) != (len(acts),):
            raise ValueError(f"selector vector of shape {np.shape(x)} for {len(acts)} actions")
    return float(np.min(_expected(local.payoff, [np.asarray(x, float) for x in selector])))


def best_response_action(local: LocalGame, selector: Sequence[np.ndarray]) -> int:
    """Index of the opponent's best reply; ties go to the lowest index."""
    return int(np.argmin(_expected(local.payoff, [np.asarray(x, float) for x in selector])))


def joint_value(local: LocalGame, joint: np.ndarray) -> float:
    return float(np.min(np.asarray(joint, float) @ local.joint_matrix()))


def matrix_game(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximin mixed strategy for the row player of ``matrix``.

    Returns the re-evaluated guaranteed value and the strategy.
    """
    matrix = np.asarray(matrix, float)
    if np.isnan(matrix).any():
        raise ValueError("payoff matrix contains NaN")
    n, m = matrix.shape
    lo, hi = matrix.min(), matrix.max()
    if hi - lo <= 0.0:
        x = np.full(n, 1.0 / n)
        return float(np.min(x @ matrix)), x
    row_floor = matrix.min(axis=1)
    best_row = int(np.argmax(row_floor))
    # variables: x (n), v; maximise v s.t. v <= x . M[:, b]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-matrix.T, np.ones((m, 1))])
    b_ub = np.zeros(m)
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    bounds = [(0, None)] * n + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds,
                  method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    pure = np.zeros(n)
    pure[best_row] = 1.0
    pure_value = float(row_floor[best_row])
    if res.status != 0 or res.x is None:
        return pure_value, pure
    x = np.clip(res.x[:n], 0.0, None)
    x /= x.sum()
    value = float(np.min(x @ matrix))
    if pure_value >= value:
        return pure_value, pure
    return value, x


def solve_shared(local: LocalGame) -> LocalSolution:
    """Exact value of the local game when the team shares randomness."""
    value, joint = matrix_game(local.joint_matrix())
    return LocalSolution(value=value, selector=None, status=EXACT, joint=joint)


def _batched_payoffs(payoff: np.ndarray, xs: Sequence[np.ndarray], skip: int | None = None) -> np.ndarray:
    """Contract the payoff tensor with batched player vectors.

    ``xs[p]`` has shape (R, n_p). Returns (R, m), or (R, n_skip, m) when a
    player is left out.
    """
    k = len(xs)
    players = [p for p in range(k) if p != skip]
    if skip is not None:
        payoff = np.moveaxis(payoff, skip, k - 1)
    r = xs[0].shape[0]
    first = players[0] if players else None
    if first is None:
        return np.broadcast_to(payoff, (r,) + payoff.shape)
    t = xs[first] @ payoff.reshape(payoff.shape[0], -1)
    t = t.reshape((r,) + payoff.shape[1:])
    for p in players[1:]:
        t = np.einsum("rn...,rn->r...", t, xs[p])
    return t


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    v = np.atleast_2d(v)
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


def _polish(local: LocalGame, selector: list[np.ndarray], rounds: int) -> tuple[float, list[np.ndarray]]:
    """Block-coordinate ascent: each player in turn plays an exact LP best reply."""
    value = best_response_value(local, selector)
    for _ in range(rounds):
        improved = False
        for p in range(len(selector)):
            xs = [x[None, :] for x in selector]
            matrix = _batched_payoffs(local.payoff, xs, skip=p)[0]
            cand_value, cand = matrix_game(matrix)
            trial = list(selector)
            trial[p] = cand
            trial_value = best_response_value(local, trial)
            if trial_value > value + 1e-13:
                selector, value = trial, trial_value
                improved = True
        if not improved:
            break
    return value, selector


def _envelope_max(base: np.ndarray, slope: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise max over q in [0, 1] of min_b (base[:, b] + q slope[:, b]).

    The maximum of a lower envelope of lines sits at an endpoint or where two
    lines cross, so only those candidates are evaluated.
    """
    g, m = base.shape
    db = base[:, None, :] - base[:, :, None]
    ds = slope[:, :, None] - slope[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.where(np.abs(ds) > 1e-15, db / ds, 0.0).reshape(g, m * m)
    qs = np.clip(np.concatenate([np.zeros((g, 1)), np.ones((g, 1)), cross], axis=1), 0.0, 1.0)
    vals = (base[:, None, :] + qs[:, :, None] * slope[:, None, :]).min(axis=2)
    best = np.argmax(vals, axis=1)
    rows = np.arange(g)
    return vals[rows, best], qs[rows, best]


def _sweep_pair(payoff: np.ndarray, config: OneShotConfig) -> list[np.ndarray] | None:
    """Grid over one player's simplex with the exact reply of a two-action partner."""
    sizes = payoff.shape[:-1]
    if len(sizes) != 2 or 2 not in sizes or config.sweep_resolution < 1:
        return None
    inner = 1 if sizes[1] == 2 else 0
    outer = 1 - inner
    n = sizes[outer]
    res = config.sweep_resolution
    while res > 1 and _simplex_points(n, res) > config.sweep_max_points:
        res //= 2
    moved = np.moveaxis(payoff, outer, 0)  # (n, 2, m)

    def solve(grid):
        first = np.einsum("gn,nm->gm", grid, moved[:, 0, :])
        second = np.einsum("gn,nm->gm", grid, moved[:, 1, :])
        return _envelope_max(second, first - second)

    grid = simplex_grid(n, res)
    vals, qs = solve(grid)
    i = int(np.argmax(vals))
    x, q = grid[i], qs[i]
    if n == 2:
        # zoom in around the best grid point
        ps = np.clip(np.linspace(x[0] - 1.0 / res, x[0] + 1.0 / res, 201), 0.0, 1.0)
        fine = np.stack([ps, 1 - ps], axis=1)
        fvals, fqs = solve(fine)
        j = int(np.argmax(fvals))
        if fvals[j] > vals[i]:
            x, q = fine[j], fqs[j]
    sel = [None, None]
    sel[outer] = x
    sel[inner] = np.array([q, 1.0 - q])
    return sel


def solve_independent(
    local: LocalGame,
    config: OneShotConfig = OneShotConfig(),
    warm_start: Sequence[np.ndarray] | None = None,
    rng: np.random.Generator | None = None,
) -> LocalSolution:
    """Lower bound on the local value under independent randomisation.

    Multi-start projected ascent on a soft-min of the opponent's replies with
    an annealed temperature, followed by an exact-minimum polish on the best
    few starts. The returned value is always recomputed from the returned selector.
    """
    if config.restarts < 1:
        raise ValueError("restarts must be at least 1")
    sizes = local.shape
    k = len(sizes)
    payoff = local.payoff
    if k == 0:
        return LocalSolution(float(payoff.min()), (), LOCAL_SEARCH)
    if payoff.max() - payoff.min() <= 0.0:
        sel = tuple(np.full(n, 1.0 / n) for n in sizes)
        return LocalSolution(best_response_value(local, sel), sel, LOCAL_SEARCH)
    if k == 1:
        value, x = matrix_game(payoff)
        sol = (x,)
        if warm_start is not None:
            w = best_response_value(local, warm_start)
            if w >= value:
                return LocalSolution(w, tuple(np.asarray(v, float) for v in warm_start), LOCAL_SEARCH)
        return LocalSolution(value, sol, LOCAL_SEARCH)

    # shared randomness is an upper bound; a selector that reaches it is optimal
    upper, _ = matrix_game(local.joint_matrix())
    corner = np.unravel_index(int(np.argmax(payoff.min(axis=-1))), sizes)
    shortcuts = [tuple(np.eye(n)[i] for n, i in zip(sizes, corner))]
    if warm_start is not None:
        shortcuts.insert(0, tuple(np.asarray(w, float) for w in warm_start))
    for sel in shortcuts:
        value = best_response_value(local, sel)
        if value >= upper - 1e-12:
            return LocalSolution(value, sel, EXACT)

    rng = rng if rng is not None else np.random.default_rng(config.seed)
    r = config.restarts
    xs = []
    for n in sizes:
        x = rng.dirichlet(np.ones(n), size=r)
        x[0] = 1.0 / n
        xs.append(x)
    # best pure joint action as an extra start: local search from mixed
    # interiors can miss corner optima
    xs = [np.vstack([x, np.eye(n)[i][None, :]]) for x, n, i in zip(xs, sizes, corner)]
    sweep = _sweep_pair(payoff, config)
    if sweep is not None:
        xs = [np.vstack([x, w[None, :]]) for x, w in zip(xs, sweep)]
    if warm_start is not None:
        xs = [np.vstack([x, np.asarray(w, float)[None, :]]) for x, w in zip(xs, warm_start)]
    rows = xs[0].shape[0]

    best_vals = np.min(_batched_payoffs(payoff, xs), axis=1)
    best_xs = [x.copy() for x in xs]
    t_hi, t_lo = config.temperature
    steps = config.max_steps
    last_check, last_best = 0, best_vals.copy()
    for t in range(steps):
        tau = t_hi * (t_lo / t_hi) ** (t / max(steps - 1, 1))
        vals = _batched_payoffs(payoff, xs)
        shifted = -(vals - vals.min(axis=1, keepdims=True)) / tau
        w = np.exp(shifted)
        w /= w.sum(axis=1, keepdims=True)
        eta = config.step_size / np.sqrt(1.0 + t / 25.0)
        new_xs = []
        for p in range(k):
            grad = np.einsum("rnz,rz->rn", _batched_payoffs(payoff, xs, skip=p), w)
            new_xs.append(project_simplex(xs[p] + eta * grad))
        xs = new_xs
        vals = np.min(_batched_payoffs(payoff, xs), axis=1)
        better = vals > best_vals
        if better.any():
            best_vals = np.where(better, vals, best_vals)
            for p in range(k):
                best_xs[p][better] = xs[p][better]
        if t - last_check >= 50:
            if np.max(best_vals - last_best) < config.stagnation_tol:
                break
            last_check, last_best = t, best_vals.copy()

    order = np.argsort(-best_vals, kind="stable")
    candidates = [int(i) for i in order[:config.polish_candidates]]
    if warm_start is not None and rows - 1 not in candidates:
        candidates.append(rows - 1)
    if sweep is not None:
        sweep_row = rows - 1 - (warm_start is not None)
        if sweep_row not in candidates:
            candidates.append(sweep_row)
    best_value, best_sel = -np.inf, None
    for i in candidates:
        sel = [best_xs[p][i].copy() for p in range(k)]
        value, sel = _polish(local, sel, config.polish_rounds)
        if value > best_value + 1e-13:
            best_value, best_sel = value, sel
    best_sel = tuple(best_sel)
    return LocalSolution(best_response_value(local, best_sel), best_sel, LOCAL_SEARCH)


def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All points of the n-simplex with coordinates in multiples of 1/resolution."""
    pts = []
    for combo in itertools.combinations(range(resolution + n - 1), n - 1):
        prev, parts = -1, []
        for c in combo:
            parts.append(c - prev - 1)
            prev = c
        parts.append(resolution + n - 2 - prev)
        pts.append(parts)
    return np.array(pts, float) / resolution


def _simplex_points(n: int, resolution: int) -> int:
    from math import comb

    return comb(resolution + n - 1, n - 1)


def brute_force_independent(local: LocalGame, resolution: int, max_joint: int = 64,
                            max_points: int = 10**7) -> float:
    """Best product-selector value over a regular grid of each player's simplex.

    A test oracle: slow, but shares no code with the local search.
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    sizes = local.shape
    if int(np.prod(sizes, dtype=np.int64)) > max_joint:
        raise ValueError(f"team has more than {max_joint} joint actions")
    counts = [_simplex_points(n, resolution) for n in sizes]
    if int(np.prod(counts, dtype=np.float64)) > max_points:
        raise ValueError("grid too large")
    if not sizes:
        return float(local.payoff.min())
    grids = [simplex_grid(n, resolution) for n in sizes]
    # contract the last player's grid against all combinations of the others
    best = -np.inf
    last = grids[-1]
    for head in itertools.product(*(range(len(g)) for g in grids[:-1])):
        t = local.payoff
        for p, i in enumerate(head):
            t = np.tensordot(grids[p][i], t, axes=(0, 0))
        # t has shape (n_last, m)
        vals = (last @ t).min(axis=1)
        best = max(best, float(vals.max()))
    return best
