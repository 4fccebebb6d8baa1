"""Slow reference implementations shared by the test modules."""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from teamreach import bench_gen
from teamreach.game import can_reach
from teamreach.one_shot import brute_force_independent, build_local_game


def random_games(seed: int, count: int, **kw):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield bench_gen.gen_random(rng, n_states=int(rng.integers(2, 4)), **kw)


def selector_grid(n: int, resolution: int) -> np.ndarray:
    """Uniform simplex grid; two-action players also get points near each vertex.

    Some games only approach their value as one action's probability tends
    to zero, and a plain grid then has a strictly lower Pre fixpoint.
    """
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        ps = set(np.linspace(0.0, 1.0, resolution + 1))
        for j in range(2, 7):
            ps |= {10.0 ** -j, 1 - 10.0 ** -j}
        ps = np.array(sorted(ps))
        return np.stack([ps, 1 - ps], axis=1)
    from teamreach.one_shot import simplex_grid

    return simplex_grid(n, resolution)


def grid_local_value(payoff: np.ndarray, resolution: int) -> float:
    """max over grid selectors of the opponent's minimum, for up to two team players."""
    sizes = payoff.shape[:-1]
    if len(sizes) == 0:
        return float(payoff.min())
    if len(sizes) == 1:
        return float((selector_grid(sizes[0], resolution) @ payoff).min(axis=1).max())
    if len(sizes) != 2:
        return brute_force_independent_payoff(payoff, resolution)
    g1, g2 = selector_grid(sizes[0], resolution), selector_grid(sizes[1], resolution)
    vals = np.einsum("ia,jb,abz->ijz", g1, g2, payoff)
    return float(vals.min(axis=2).max())


def brute_force_independent_payoff(payoff, resolution):
    from teamreach.one_shot import LocalGame

    team = tuple(tuple(range(n)) for n in payoff.shape[:-1])
    return brute_force_independent(LocalGame(team, tuple(range(payoff.shape[-1])), payoff), resolution)


def grid_pre_fixpoint(game, resolution=60, tol=1e-7, max_iters=20000):
    """Value iteration where every local game is solved on a selector grid."""
    v = {s: 1.0 if s in game.targets else 0.0 for s in game.states}
    live = [s for s in game.states if s not in game.targets and s in can_reach(game)]
    for _ in range(max_iters):
        new = dict(v)
        for s in live:
            new[s] = grid_local_value(build_local_game(game, s, v).payoff, resolution)
        delta = max((abs(new[s] - v[s]) for s in game.states), default=0.0)
        v = new
        if delta < tol:
            break
    return v


def exact_expected(game, state, joint_dists, b, values):
    """Exact expected next value at ``state`` when team players mix with ``joint_dists``."""
    total = Fraction(0)
    acts = game.team_actions(state)
    for joint in itertools.product(*acts):
        w = Fraction(1)
        for p, a in zip(game.team, joint):
            w *= joint_dists[p].get(a, 0)
        if w:
            for t, q in game.delta(state, joint, b).support:
                total += w * q * values[t]
    return total


def perturb(game, rng, denominator=97):
    """Same supports, fresh random positive probabilities."""
    from teamreach.game import Distribution

    out = {}
    for key, dist in game.transitions.items():
        succ = [t for t, q in dist.support if q]
        weights = rng.integers(1, denominator, size=len(succ))
        total = int(weights.sum())
        out[key] = Distribution(tuple((t, Fraction(int(w), total)) for t, w in zip(succ, weights)))
    return game.replace(transitions=out)


def min_reach_by_policy_enumeration(mdp):
    """Minimum reachability over all deterministic memoryless opponent policies.

    Each policy gives a Markov chain whose reachability probabilities solve a
    linear system on the states that can still reach the target.
    """
    states = list(mdp.states)
    idx = {s: i for i, s in enumerate(states)}
    choices = [mdp.opponent_actions(s) for s in states]
    best = None
    for policy in itertools.product(*choices):
        n = len(states)
        P = np.zeros((n, n))
        for s, b in zip(states, policy):
            for t, q in mdp.delta(s, (), b).support:
                P[idx[s], idx[t]] += float(q)
        # states with a path to the target in this chain
        reach = set(mdp.targets)
        changed = True
        while changed:
            changed = False
            for s in states:
                if s not in reach and any(P[idx[s], idx[t]] > 0 for t in reach):
                    reach.add(s)
                    changed = True
        x = np.zeros(n)
        live = [idx[s] for s in states if s in reach and s not in mdp.targets]
        tgt = [idx[s] for s in mdp.targets]
        if live:
            A = np.eye(len(live)) - P[np.ix_(live, live)]
            rhs = P[np.ix_(live, tgt)].sum(axis=1)
            x[live] = np.linalg.solve(A, rhs)
        x[tgt] = 1.0
        best = x if best is None else np.minimum(best, x)
    return {s: float(best[idx[s]]) for s in states}


def eval_smt(expr, env):
    """Evaluate a parsed SMT-LIB term over Fractions (the operators the encoders use)."""
    if isinstance(expr, str):
        if expr in env:
            return env[expr]
        if expr in ("true", "false"):
            return expr == "true"
        return Fraction(expr)
    head, *args = expr
    vals = [eval_smt(a, env) for a in args]
    ops = {
        "+": lambda v: sum(v, Fraction(0)),
        "*": lambda v: _product(v),
        "-": lambda v: -v[0] if len(v) == 1 else v[0] - sum(v[1:], Fraction(0)),
        "/": lambda v: v[0] / v[1],
        "<=": lambda v: all(a <= b for a, b in zip(v, v[1:])),
        "<": lambda v: all(a < b for a, b in zip(v, v[1:])),
        ">=": lambda v: all(a >= b for a, b in zip(v, v[1:])),
        ">": lambda v: all(a > b for a, b in zip(v, v[1:])),
        "=": lambda v: all(a == b for a, b in zip(v, v[1:])),
        "and": all,
        "or": any,
    }
    return ops[head](vals)


def _product(vals):
    out = Fraction(1)
    for v in vals:
        out *= v
    return out
