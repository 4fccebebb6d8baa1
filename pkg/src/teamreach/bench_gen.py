"""Deterministic generators for the benchmark families and the named example games."""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .game import Distribution, Game, ensure_valid, merge_team

HALF = Fraction(1, 2)


def _build(players, opponent, states, actions, available, step, targets, initial, labels=None):
    """Assemble a game from a ``step(state, joint) -> {succ: prob}`` function."""
    order = [p for p in players if p != opponent] + [opponent]
    transitions = {}
    for s in states:
        for joint in itertools.product(*(available[(p, s)] for p in order)):
            transitions[(s, joint)] = Distribution(tuple(step(s, joint).items()))
    return ensure_valid(Game(
        players=tuple(players), opponent=opponent, states=tuple(states), actions=actions,
        available=available, transitions=transitions, targets=frozenset(targets),
        initial=initial, labels=labels or {},
    ))


def _full(players, states, actions):
    return {(p, s): tuple(actions[p]) for p in players for s in states}


# --- named games -------------------------------------------------------------

def door_game() -> Game:
    """Two players must pick the door the opponent leaves open; mismatches fail."""
    players = ("1", "2", "env")
    states = ("s0", "s_goal", "s_fail")
    actions = {p: ("L", "R") for p in players}

    def step(s, joint):
        if s != "s0":
            return {s: 1}
        a1, a2, b = joint
        if a1 != a2:
            return {"s_fail": 1}
        return {"s_goal": 1} if a1 == b else {"s0": 1}

    return _build(players, "env", states, actions, _full(players, states, actions), step,
                  {"s_goal"}, "s0", {"s_goal": {"goal"}, "s_fail": {"fail"}})


def memory_game() -> Game:
    """Player 1 may wait to learn the opponent's last move; player 2 never sees it."""
    players = ("P1", "P2", "O")
    states = ("S", "S_a", "S_b", "top", "bot")
    actions = {"P1": ("a", "b", "wait"), "P2": ("a", "b"), "O": ("a", "b")}

    def step(s, joint):
        if s in ("top", "bot"):
            return {s: 1}
        if s in ("S_a", "S_b"):
            return {"S": 1}
        a1, a2, b = joint
        if a1 == "wait":
            return {"S_" + b: 1}
        return {"top": 1} if a1 == a2 == b else {"bot": 1}

    return _build(players, "O", states, actions, _full(players, states, actions), step,
                  {"top"}, "S", {"top": {"goal"}, "bot": {"fail"}})


BUILTINS = ("door", "memory", "door-merged")


def builtin(name: str) -> Game:
    if name == "door":
        return door_game()
    if name == "memory":
        return memory_game()
    if name == "door-merged":
        return merge_team(door_game())
    raise ValueError(f"unknown builtin game {name!r}; choose from {', '.join(BUILTINS)}")


# --- pursuit-evasion with rendezvous -----------------------------------------

# Directed graphs of the six pursuit scenarios: (node count, edges, team starts, opponent start)
PURSUIT_SCENARIOS: dict[int, tuple[int, tuple[tuple[int, int], ...], tuple[int, ...], int]] = {
    1: (3, ((0, 2), (1, 0), (1, 2), (2, 0), (2, 1)), (0, 1), 2),
    2: (4, ((0, 1), (0, 2), (0, 3), (1, 0), (1, 2), (2, 0), (2, 1), (2, 3), (3, 0), (3, 2)), (1, 3), 2),
    3: (4, ((1, 0), (1, 2), (2, 0), (3, 0), (3, 2)), (1, 3), 2),
    4: (5, ((0, 3), (0, 4), (1, 3), (1, 4), (2, 3), (2, 4)), (0, 2), 1),
    5: (4, tuple((u, v) for u in range(4) for v in range(4) if u != v), (0, 1, 2), 3),
    6: (6, tuple((u, v) for u in range(4) for v in (4, 5)), (0, 1, 2), 3),
}


def pursuit_state(team: Sequence[int], opp: int) -> str:
    return ".".join(map(str, team)) + "|" + str(opp)


def gen_pursuit(n_nodes: int, edges: Iterable[tuple[int, int]], team_starts: Sequence[int],
                opp_start: int) -> Game:
    """Team of ``len(team_starts)`` agents tries to meet on one node before capture.

    Each agent moves along an edge or waits. Capture (an agent shares a node
    with the pursuer) is an absorbing loss and takes precedence over
    rendezvous (all agents on one node), which is an absorbing win.
    """
    if n_nodes < 1:
        raise ValueError("graph must have at least one node")
    k = len(team_starts)
    if k < 1:
        raise ValueError("team must have at least one agent")
    nodes = list(range(n_nodes))
    nbhd = {u: [u] for u in nodes}
    for u, v in edges:
        if u not in nbhd or v not in nbhd:
            raise ValueError(f"edge ({u}, {v}) mentions an unknown node")
        if v not in nbhd[u]:
            nbhd[u].append(v)
    for u in nodes:
        nbhd[u].sort()
    for x in list(team_starts) + [opp_start]:
        if x not in nbhd:
            raise ValueError(f"start node {x} is not in the graph")
    team = tuple(f"a{i + 1}" for i in range(k))
    players = team + ("pursuer",)
    positions = list(itertools.product(nodes, repeat=k + 1))
    name = {pos: pursuit_state(pos[:-1], pos[-1]) for pos in positions}
    states = [name[pos] for pos in positions]
    actions = {p: tuple(str(u) for u in nodes) for p in players}
    available = {}
    captured, met = set(), set()
    for pos in positions:
        s = name[pos]
        for p, u in zip(players, pos):
            available[(p, s)] = tuple(str(v) for v in nbhd[u])
        if any(x == pos[-1] for x in pos[:-1]):
            captured.add(s)
        elif len(set(pos[:-1])) == 1:
            met.add(s)

    def step(s, joint):
        if s in captured or s in met:
            return {s: 1}
        return {name[tuple(int(a) for a in joint)]: 1}

    labels = {s: {"goal"} for s in met}
    labels.update({s: {"capture"} for s in captured})
    return _build(players, "pursuer", states, actions, available, step, met,
                  name[tuple(team_starts) + (opp_start,)], labels)


def pursuit_scenario(number: int) -> Game:
    try:
        n, edges, team, opp = PURSUIT_SCENARIOS[number]
    except KeyError:
        raise ValueError(f"unknown pursuit scenario {number}; choose 1-6") from None
    return gen_pursuit(n, edges, team, opp)


# --- robot coordination ------------------------------------------------------

MOVES = {"N": (0, 1), "S": (0, -1), "E": (1, 0), "W": (-1, 0)}
ROBOT_ACTIONS = ("N", "S", "E", "W", "Wait")
WIND_ACTIONS = ("N", "S", "E", "W", "Calm")

# Robot scenarios: (height, width, starts, target cell); cells are (x, y)
ROBOT_SCENARIOS = {
    1: (2, 2, ((0, 0), (1, 1)), (1, 0)),
    2: (2, 3, ((0, 0), (1, 1)), (2, 0)),
    3: (3, 3, ((1, 2), (0, 1)), (2, 0)),
    4: (4, 3, ((1, 3), (0, 2)), (2, 0)),
}


def robot_state(cells: Sequence[tuple[int, int]]) -> str:
    return "|".join(f"{x},{y}" for x, y in cells)


def _robot_moves(cell, action, wind, height, width) -> dict:
    def shift(c, d):
        dx, dy = MOVES[d]
        return (min(max(c[0] + dx, 0), width - 1), min(max(c[1] + dy, 0), height - 1))

    if wind == "Calm":
        return {cell if action == "Wait" else shift(cell, action): Fraction(1)}
    if action == "Wait" or action == wind:
        return {shift(cell, wind): Fraction(1)}
    out: dict = {}
    for c, q in ((shift(cell, action), HALF), (shift(cell, wind), HALF)):
        out[c] = out.get(c, Fraction(0)) + q
    return out


def gen_robot(height: int, width: int, starts: Sequence[tuple[int, int]],
              target_cells: Sequence[tuple[int, int]] | None = None,
              target_cell: tuple[int, int] | None = None,
              stop_probability: Fraction = HALF) -> Game:
    """Robots on a grid against the wind.

    Give either ``target_cells`` (the exact configuration to reach, one cell
    per robot) or ``target_cell`` (win as soon as some robot stands on it).
    Every round ends the game with ``stop_probability``; that mass and every
    collision go to the canonical loss state with all robots on cell (0, 0).
    """
    if height < 1 or width < 1:
        raise ValueError("grid must be non-empty")
    k = len(starts)
    if k < 2:
        raise ValueError("need at least two robots")
    cells = [(x, y) for y in range(height) for x in range(width)]
    for c in starts:
        if c not in cells:
            raise ValueError(f"start cell {c} is off the grid")
    if len(set(map(tuple, starts))) != k:
        raise ValueError("robots start on the same cell")
    if (target_cells is None) == (target_cell is None):
        raise ValueError("give exactly one of target_cells or target_cell")
    if target_cells is not None:
        target_cells = [tuple(c) for c in target_cells]
        if len(target_cells) != k:
            raise ValueError("target configuration needs one cell per robot")
        if len(set(target_cells)) != k:
            raise ValueError("target configuration has two robots on one cell")
        if any(c not in cells for c in target_cells):
            raise ValueError("target cell off the grid")

        def is_target(cfg):
            return list(cfg) == target_cells
    else:
        target_cell = tuple(target_cell)
        if target_cell not in cells:
            raise ValueError("target cell off the grid")

        def is_target(cfg):
            return len(set(cfg)) == len(cfg) and target_cell in cfg

    configs = list(itertools.product(cells, repeat=k))
    sink_cfg = tuple([(0, 0)] * k)
    sink = robot_state(sink_cfg)
    states = [robot_state(c) for c in configs]
    collided = {robot_state(c) for c in configs if len(set(c)) < k}
    targets = {robot_state(c) for c in configs if is_target(c)}
    by_name = dict(zip(states, configs))
    team = tuple(f"r{i + 1}" for i in range(k))
    players = team + ("wind",)
    actions = {p: ROBOT_ACTIONS for p in team}
    actions["wind"] = WIND_ACTIONS
    go_on = 1 - Fraction(stop_probability)

    def step(s, joint):
        if s in collided or s in targets:
            return {s: 1}
        cfg, wind = by_name[s], joint[-1]
        out = {sink: Fraction(stop_probability)} if stop_probability else {}
        per_robot = [_robot_moves(c, a, wind, height, width).items() for c, a in zip(cfg, joint[:-1])]
        for combo in itertools.product(*per_robot):
            nxt = tuple(c for c, _ in combo)
            q = go_on
            for _, w in combo:
                q *= w
            succ = sink if len(set(nxt)) < k else robot_state(nxt)
            out[succ] = out.get(succ, Fraction(0)) + q
        return {t: q for t, q in out.items() if q}

    labels = {s: {"goal"} for s in targets}
    for s in collided:
        labels[s] = {"crash"}
    return _build(players, "wind", states, actions, _full(players, states, actions), step,
                  targets, robot_state(starts), labels)


def robot_scenario(number: int) -> Game:
    try:
        h, w, starts, cell = ROBOT_SCENARIOS[number]
    except KeyError:
        raise ValueError(f"unknown robot scenario {number}; choose 1-4") from None
    return gen_robot(h, w, starts, target_cell=cell)


# --- jamming multi-channel radio ---------------------------------------------

def jamming_state(buffers: Sequence[int]) -> str:
    return "b" + ".".join(map(str, buffers))


JAM_SINK = "lost"


def gen_jamming(channels: int, buffers: Sequence[int]) -> Game:
    """Sensors empty their packet buffers over channels the jammer may block.

    A transmission succeeds when its channel is neither jammed nor used by
    another sensor; any failed transmission loses the game. Sensors with an
    empty buffer may still transmit and face the same risks.
    """
    if channels < 1:
        raise ValueError("need at least one channel")
    if not buffers or any(b < 1 for b in buffers):
        raise ValueError("every buffer size must be at least 1")
    k = len(buffers)
    team = tuple(f"sensor{i + 1}" for i in range(k))
    players = team + ("jammer",)
    chans = tuple(str(c) for c in range(1, channels + 1))
    actions = {p: chans + ("wait",) for p in team}
    actions["jammer"] = chans + ("idle",)
    vectors = list(itertools.product(*(range(b + 1) for b in buffers)))
    states = [jamming_state(v) for v in vectors] + [JAM_SINK]
    by_name = dict(zip(states, vectors))
    goal = jamming_state([0] * k)

    def step(s, joint):
        if s == JAM_SINK or s == goal:
            return {s: 1}
        buf = list(by_name[s])
        jam = joint[-1]
        picks = joint[:-1]
        for i, c in enumerate(picks):
            if c == "wait":
                continue
            if c == jam or sum(1 for d in picks if d == c) > 1:
                return {JAM_SINK: 1}
            buf[i] = max(buf[i] - 1, 0)
        return {jamming_state(buf): 1}

    labels = {goal: {"goal"}, JAM_SINK: {"fail"}}
    return _build(players, "jammer", states, actions, _full(players, states, actions), step,
                  {goal}, jamming_state(buffers), labels)


# --- clique reduction --------------------------------------------------------

def gen_clique(vertices: Sequence, edges: Iterable[tuple], k: int) -> Game:
    """Two players claim (index, vertex) pairs; the opponent audits one index pair.

    A perfect audit outcome is only guaranteed when the graph has a k-clique.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    vertices = [str(v) for v in vertices]
    if len(set(vertices)) != len(vertices):
        raise ValueError("duplicate vertex")
    edge_set = set()
    for u, v in edges:
        u, v = str(u), str(v)
        if u not in vertices or v not in vertices:
            raise ValueError(f"edge ({u}, {v}) mentions an unknown vertex")
        if u == v:
            raise ValueError("self-loops are not allowed in a simple graph")
        edge_set.update({(u, v), (v, u)})
    idx = [str(i) for i in range(1, k + 1)]
    claims = tuple(f"{i}:{v}" for i in idx for v in vertices)
    audits = tuple(f"{i}:{j}" for i in idx for j in idx)
    players = ("P1", "P2", "O")
    states = ("s", "top", "bot")
    actions = {"P1": claims, "P2": claims, "O": audits}

    def step(s, joint):
        if s != "s":
            return {s: 1}
        (i, u), (j, v), (ai, aj) = (x.split(":", 1) for x in joint)
        if i != ai or j != aj:
            return {"s": 1}
        ok = (u == v) if ai == aj else ((u, v) in edge_set)
        return {"top": 1} if ok else {"bot": 1}

    return _build(players, "O", states, actions, _full(players, states, actions), step,
                  {"top"}, "s", {"top": {"goal"}, "bot": {"fail"}})


def complete_graph(n: int):
    return list(range(n)), [(u, v) for u in range(n) for v in range(u + 1, n)]


def path_graph(n: int):
    return list(range(n)), [(u, u + 1) for u in range(n - 1)]


def cycle_graph(n: int):
    return list(range(n)), [(u, (u + 1) % n) for u in range(n)]


# --- random small games ------------------------------------------------------

def _random_distribution(rng, states, max_support: int, denominator: int) -> dict:
    k = int(rng.integers(1, min(max_support, len(states)) + 1))
    succ = [states[i] for i in sorted(rng.choice(len(states), size=k, replace=False))]
    # split the denominator into k positive parts
    cuts = sorted(rng.choice(range(1, denominator), size=k - 1, replace=False)) if k > 1 else []
    parts = [b - a for a, b in zip([0, *cuts], [*cuts, denominator])]
    return {s: Fraction(int(p), denominator) for s, p in zip(succ, parts)}


def gen_random(rng, n_states: int = 3, team_size: int = 2, max_actions: int = 2,
               max_support: int = 2, denominator: int = 6, sink_probability: float = 0.5,
               labels=("p", "q")) -> Game:
    """A random game with rational probabilities for property tests.

    State ``s0`` is initial and the last state is an absorbing target; the
    others become targets with probability 1/4, and a non-target middle state
    becomes an absorbing sink with probability ``sink_probability``. Each state carries each label with
    probability 1/2. ``rng`` is a ``numpy.random.Generator``.
    """
    if n_states < 1 or denominator < max_support:
        raise ValueError("need at least one state and denominator >= max_support")
    team = [str(i + 1) for i in range(team_size)]
    players = tuple(team) + ("O",)
    states = tuple(f"s{i}" for i in range(n_states))
    pool = ("a", "b", "c", "d")[:max_actions]
    actions = {p: pool for p in players}
    available = {}
    for p in players:
        for s in states:
            k = int(rng.integers(1, max_actions + 1))
            available[(p, s)] = pool[:k]
    targets = {states[-1]} | {s for s in states[:-1] if rng.random() < 0.25}
    if n_states > 1:
        if rng.random() < 0.8:
            targets.discard("s0")
    sinks = {s for s in states[1:-1] if s not in targets and rng.random() < sink_probability}
    table = {}
    order = team + ["O"]
    for s in states:
        for joint in itertools.product(*(available[(p, s)] for p in order)):
            if s in targets or s in sinks:
                table[(s, joint)] = {s: Fraction(1)}
            else:
                table[(s, joint)] = _random_distribution(rng, states, max_support, denominator)
    marks = {s: {lab for lab in labels if rng.random() < 0.5} for s in states}
    return _build(players, "O", states, actions, available, lambda s, j: table[(s, j)],
                  targets, "s0", marks)
