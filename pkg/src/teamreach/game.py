"""Team concurrent stochastic game structures.

A :class:`Game` is a finite concurrent game in which a team of players
cooperates against a single opponent to reach a set of target states.
Probabilities are stored as exact rationals; float views are cached for the
numerical solvers.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rational import to_fraction

ERROR = "error"
WARNING = "warning"


class InvalidGameError(ValueError):
    """Raised when an operation receives a game that fails validation."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        errors = [i for i in report.issues if i.severity == ERROR]
        lines = [f"{i.location}: {i.message}" for i in errors[:10]]
        if len(errors) > 10:
            lines.append(f"... and {len(errors) - 10} more")
        super().__init__("invalid game:\n  " + "\n  ".join(lines))


@dataclass(frozen=True, eq=False)
class Distribution:
    """Finite probability distribution over state identifiers."""

    support: tuple[tuple[str, Fraction], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "support", tuple((s, to_fraction(p)) for s, p in self.support)
        )

    @classmethod
    def point(cls, state: str) -> "Distribution":
        return cls(((state, Fraction(1)),))

    @classmethod
    def from_dict(cls, probs: Mapping[str, object]) -> "Distribution":
        return cls(tuple(probs.items()))

    def as_dict(self) -> dict[str, Fraction]:
        out: dict[str, Fraction] = {}
        for s, p in self.support:
            out[s] = out.get(s, Fraction(0)) + p
        return out

    @cached_property
    def floats(self) -> tuple[tuple[str, float], ...]:
        return tuple((s, float(p)) for s, p in self.support)

    def positive(self) -> frozenset[str]:
        """States reached with non-zero probability."""
        return frozenset(s for s, p in self.support if p > 0)

    def total(self) -> Fraction:
        return sum((p for _, p in self.support), Fraction(0))

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(frozenset(self.as_dict().items()))

    def __repr__(self):
        body = ", ".join(f"{s}: {p}" for s, p in self.support)
        return f"Distribution({{{body}}})"


@dataclass(frozen=True)
class Issue:
    severity: str
    location: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(i.severity == ERROR for i in self.issues)

    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == ERROR]

    def __str__(self):
        if not self.issues:
            return "ok"
        return "\n".join(f"[{i.severity}] {i.location}: {i.message}" for i in self.issues)


@dataclass(frozen=True, eq=False)
class Game:
    """A team concurrent stochastic reachability game.

    ``transitions`` is keyed by ``(state, joint)`` where ``joint`` lists one
    action per player in :attr:`order` (team players in declaration order,
    opponent last). Only available joint actions have entries.
    """

    players: tuple[str, ...]
    opponent: str
    states: tuple[str, ...]
    actions: Mapping[str, tuple[str, ...]]
    available: Mapping[tuple[str, str], tuple[str, ...]]
    transitions: Mapping[tuple[str, tuple[str, ...]], Distribution]
    targets: frozenset[str]
    initial: str
    labels: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "players", tuple(self.players))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "targets", frozenset(self.targets))
        object.__setattr__(
            self, "actions", {p: tuple(a) for p, a in self.actions.items()}
        )
        object.__setattr__(
            self, "available", {k: tuple(v) for k, v in self.available.items()}
        )
        object.__setattr__(
            self, "labels", {s: frozenset(v) for s, v in self.labels.items()}
        )

    @cached_property
    def team(self) -> tuple[str, ...]:
        return tuple(p for p in self.players if p != self.opponent)

    @cached_property
    def order(self) -> tuple[str, ...]:
        return self.team + (self.opponent,)

    @cached_property
    def state_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def report(self) -> "ValidationReport":
        return validate(self)

    def team_actions(self, state: str) -> list[tuple[str, ...]]:
        """Per team player, the available actions at ``state``."""
        return [self.available[(p, state)] for p in self.team]

    def opponent_actions(self, state: str) -> tuple[str, ...]:
        return self.available[(self.opponent, state)]

    def team_joint_actions(self, state: str) -> list[tuple[str, ...]]:
        return list(itertools.product(*self.team_actions(state)))

    def delta(self, state: str, team_joint: Sequence[str], opp: str) -> Distribution:
        key = (state, tuple(team_joint) + (opp,))
        try:
            return self.transitions[key]
        except KeyError:
            raise KeyError(f"no transition for state {state!r}, joint action {key[1]!r}") from None

    def transition_count(self) -> int:
        """Number of (state, available joint action) pairs."""
        total = 0
        for s in self.states:
            n = 1
            for p in self.order:
                n *= len(self.available[(p, s)])
            total += n
        return total

    def holds(self, prop: str) -> frozenset[str]:
        return frozenset(s for s in self.states if prop in self.labels.get(s, ()))

    def replace(self, **changes) -> "Game":
        fields = dict(
            players=self.players, opponent=self.opponent, states=self.states,
            actions=self.actions, available=self.available,
            transitions=self.transitions, targets=self.targets,
            initial=self.initial, labels=self.labels,
        )
        fields.update(changes)
        return Game(**fields)

    def __eq__(self, other):
        if not isinstance(other, Game):
            return NotImplemented
        return (
            self.players == other.players and self.opponent == other.opponent
            and self.states == other.states and dict(self.actions) == dict(other.actions)
            and dict(self.available) == dict(other.available)
            and dict(self.transitions) == dict(other.transitions)
            and self.targets == other.targets and self.initial == other.initial
            and {s: v for s, v in self.labels.items() if v}
            == {s: v for s, v in other.labels.items() if v}
        )

    __hash__ = object.__hash__


def ensure_valid(game: Game) -> Game:
    if not game.report.ok:
        raise InvalidGameError(game.report)
    return game


def validate(game: Game) -> ValidationReport:
    """Check every well-formedness condition of ``game``.

    Never raises on malformed input: each violation becomes an issue in the
    returned report.
    """
    issues: list[Issue] = []

    def err(loc, msg):
        issues.append(Issue(ERROR, loc, msg))

    try:
        players = list(game.players)
        states = list(game.states)
    except TypeError:
        return ValidationReport((Issue(ERROR, "game", "players/states are not sequences"),))

    if len(set(players)) != len(players):
        err("players", "duplicate player identifiers")
    if game.opponent not in players:
        err("players", f"opponent {game.opponent!r} is not a declared player")
    if not states:
        err("states", "no states declared")
    if len(set(states)) != len(states):
        err("states", "duplicate state identifiers")
    state_set = set(states)
    if game.initial not in state_set:
        err("initial", f"unknown initial state {game.initial!r}")
    for t in sorted(set(game.targets) - state_set):
        err("targets", f"unknown target state {t!r}")
    for s in sorted(set(game.labels) - state_set):
        err(f"labels.{s}", "label attached to unknown state")

    for p in players:
        acts = game.actions.get(p)
        if not acts:
            err(f"actions.{p}", "player has no actions")
        elif len(set(acts)) != len(acts):
            err(f"actions.{p}", "duplicate action names")
    if any(i.severity == ERROR for i in issues):
        return ValidationReport(tuple(issues))

    order = [p for p in players if p != game.opponent] + [game.opponent]
    avail_ok = True
    for s in states:
        for p in order:
            av = game.available.get((p, s))
            loc = f"available[{s}][{p}]"
            if av is None or len(av) == 0:
                err(loc, "empty availability set")
                avail_ok = False
            elif not set(av) <= set(game.actions[p]):
                err(loc, f"actions {sorted(set(av) - set(game.actions[p]))} not in alphabet")
                avail_ok = False
            elif len(set(av)) != len(av):
                err(loc, "duplicate available actions")
                avail_ok = False
    for key in game.available:
        if key[1] not in state_set or key[0] not in players:
            err(f"available[{key[1]}][{key[0]}]", "unknown player or state")
    if not avail_ok:
        return ValidationReport(tuple(issues))

    expected = set()
    for s in states:
        for joint in itertools.product(*(game.available[(p, s)] for p in order)):
            expected.add((s, joint))
    for key in sorted(set(game.transitions) - expected, key=repr):
        err(f"transitions[{key[0]}][{','.join(map(str, key[1]))}]",
            "transition for an unavailable or malformed joint action")
    for key in sorted(expected - set(game.transitions), key=repr):
        err(f"transitions[{key[0]}][{','.join(key[1])}]", "missing transition for available joint action")

    targets = set(game.targets)
    for key in sorted(expected & set(game.transitions), key=repr):
        s, joint = key
        loc = f"transitions[{s}][{','.join(joint)}]"
        dist = game.transitions[key]
        seen = set()
        for succ, prob in dist.support:
            if succ not in state_set:
                err(loc, f"unknown successor state {succ!r}")
            if succ in seen:
                err(loc, f"duplicate successor {succ!r}")
            seen.add(succ)
            if prob < 0:
                err(loc, f"negative probability {prob} for {succ!r}")
        total = dist.total()
        if total != 1:
            err(loc, f"distribution sum != 1 (got {total})")
        if s in targets and dist.as_dict().get(s, 0) != 1:
            err(loc, f"target not absorbing: target {s!r} must self-loop with probability 1")
    return ValidationReport(tuple(issues))


def _rekey(game: Game, new_order: Sequence[str], regroup) -> dict:
    """Re-index transitions from ``game.order`` to a regrouped order.

    ``regroup`` maps an original joint tuple (in ``game.order``) to the new
    joint tuple.
    """
    return {(s, regroup(joint)): d for (s, joint), d in game.transitions.items()}


def _merge_players(game: Game, group: Sequence[str], name: str, opponent: bool) -> Game:
    """Replace the players in ``group`` by one player choosing action profiles."""
    group = [p for p in game.order if p in group]
    idx = [game.order.index(p) for p in group]
    rest = [p for p in game.order if p not in group]
    rest_idx = [game.order.index(p) for p in rest]

    def label(profile):
        return "(" + ",".join(profile) + ")"

    available: dict = {}
    alphabet: list[str] = []
    seen = set()
    for s in game.states:
        profiles = [label(pr) for pr in itertools.product(*(game.available[(p, s)] for p in group))]
        available[(name, s)] = tuple(profiles)
        for a in profiles:
            if a not in seen:
                seen.add(a)
                alphabet.append(a)
        for p in rest:
            available[(p, s)] = game.available[(p, s)]

    if opponent:
        players = tuple(rest) + (name,)
        opp = name

        def regroup(joint):
            return tuple(joint[i] for i in rest_idx) + (label(tuple(joint[i] for i in idx)),)
    else:
        team_rest = [p for p in rest if p != game.opponent]
        players = (name,) + tuple(team_rest) + (game.opponent,)
        opp = game.opponent
        team_rest_idx = [game.order.index(p) for p in team_rest]

        def regroup(joint):
            return ((label(tuple(joint[i] for i in idx)),)
                    + tuple(joint[i] for i in team_rest_idx) + (joint[-1],))

    actions = {p: game.actions[p] for p in rest}
    actions[name] = tuple(alphabet)
    return Game(
        players=players, opponent=opp, states=game.states, actions=actions,
        available=available, transitions=_rekey(game, players, regroup),
        targets=game.targets, initial=game.initial, labels=game.labels,
    )


def merge_team(game: Game) -> Game:
    """Merge all team players into one meta-player (shared randomness).

    The merged player's actions at ``s`` are the team's available action
    profiles, named ``"(a1,...,ak)"``. With at most one team player the game
    is returned unchanged.
    """
    ensure_valid(game)
    if len(game.team) <= 1:
        return game
    name = "+".join(game.team)
    return _merge_players(game, game.team, name, opponent=False)


NATURE = "_nature"


def coalition_game(game: Game, coalition: Iterable[str]) -> Game:
    """Re-team ``game`` so that ``coalition`` plays against everyone else.

    All players outside the coalition are merged into a single opponent;
    against a fixed coalition profile they face an MDP, where joint
    deterministic responses lose nothing. If the coalition contains every
    player, a dummy opponent with one action is added.
    """
    ensure_valid(game)
    coalition = set(coalition)
    unknown = coalition - set(game.players)
    if unknown:
        raise ValueError(f"coalition mentions unknown players {sorted(unknown)}")
    others = [p for p in game.players if p not in coalition]
    if not others:
        transitions = {(s, j + ("-",)): d for (s, j), d in game.transitions.items()}
        available = dict(game.available)
        for s in game.states:
            available[(NATURE, s)] = ("-",)
        actions = dict(game.actions)
        actions[NATURE] = ("-",)
        return Game(
            players=game.order + (NATURE,), opponent=NATURE, states=game.states,
            actions=actions, available=available, transitions=transitions,
            targets=game.targets, initial=game.initial, labels=game.labels,
        )
    if others == [game.opponent]:
        return game
    if len(others) == 1:
        # single non-coalition player takes the opponent seat
        (o,) = others
        return _reorder_opponent(game, o)
    return _merge_players(game, others, "+".join(others), opponent=True)


def _reorder_opponent(game: Game, new_opp: str) -> Game:
    old = list(game.order)
    players = tuple(p for p in game.players)
    new_order = [p for p in players if p != new_opp] + [new_opp]
    perm = [old.index(p) for p in new_order]
    transitions = {(s, tuple(j[i] for i in perm)): d for (s, j), d in game.transitions.items()}
    return Game(
        players=players, opponent=new_opp, states=game.states, actions=game.actions,
        available=game.available, transitions=transitions, targets=game.targets,
        initial=game.initial, labels=game.labels,
    )


def with_targets(game: Game, targets: Iterable[str], initial: str | None = None) -> Game:
    """Same structure with a new target set; targets are made absorbing."""
    targets = frozenset(targets)
    g = game.replace(targets=targets, initial=game.initial if initial is None else initial)
    return _make_absorbing(g, targets)


def _make_absorbing(game: Game, which: Iterable[str]) -> Game:
    which = set(which)
    if not which:
        return game
    transitions = dict(game.transitions)
    for (s, joint) in game.transitions:
        if s in which:
            transitions[(s, joint)] = Distribution.point(s)
    return game.replace(transitions=transitions)


def restrict_absorbing(game: Game, keep: Iterable[str]) -> Game:
    """Make every state outside ``keep`` absorbing under all joint actions."""
    ensure_valid(game)
    keep = set(keep)
    unknown = keep - set(game.states)
    if unknown:
        raise ValueError(f"unknown states in keep set: {sorted(unknown)}")
    return _make_absorbing(game, set(game.states) - keep)


class MemorylessProfile:
    """Per team player and state, a probability vector over available actions.

    Entries may be floats or exact rationals; ``probs[(player, state)]`` maps
    action names to probabilities.
    """

    def __init__(self, probs: Mapping[tuple[str, str], Mapping[str, object]]):
        self.probs = {k: dict(v) for k, v in probs.items()}

    @classmethod
    def uniform(cls, game: Game) -> "MemorylessProfile":
        return cls({
            (p, s): {a: Fraction(1, len(game.available[(p, s)])) for a in game.available[(p, s)]}
            for p in game.team for s in game.states
        })

    def get(self, player: str, state: str) -> dict[str, object]:
        return self.probs[(player, state)]

    def vector(self, game: Game, player: str, state: str) -> np.ndarray:
        dist = self.probs[(player, state)]
        return np.array([float(dist.get(a, 0.0)) for a in game.available[(player, state)]])

    def support(self, player: str, state: str) -> frozenset[str]:
        return frozenset(a for a, p in self.probs[(player, state)].items() if p > 0)

    def is_rational(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for d in self.probs.values() for p in d.values())

    def check(self, game: Game) -> None:
        """Raise ``ValueError`` if the profile is malformed for ``game``."""
        for p in game.team:
            for s in game.states:
                if (p, s) not in self.probs:
                    raise ValueError(f"profile has no distribution for player {p!r} at {s!r}")
                dist = self.probs[(p, s)]
                av = set(game.available[(p, s)])
                bad = [a for a, q in dist.items() if a not in av and q != 0]
                if bad:
                    raise ValueError(f"profile uses unavailable actions {bad} for {p!r} at {s!r}")
                if any(q < 0 for q in dist.values()):
                    raise ValueError(f"negative probability for {p!r} at {s!r}")
                total = sum(dist.values())
                if isinstance(total, Fraction) or isinstance(total, int):
                    if total != 1:
                        raise ValueError(f"probabilities for {p!r} at {s!r} sum to {total}")
                elif abs(total - 1.0) > 1e-9:
                    raise ValueError(f"probabilities for {p!r} at {s!r} sum to {total}")

    def __eq__(self, other):
        return isinstance(other, MemorylessProfile) and self.probs == other.probs

    def __repr__(self):
        return f"MemorylessProfile({len(self.probs)} entries)"


def _exact_vector(dist: Mapping[str, object], actions: Sequence[str]) -> list[Fraction]:
    """Exact probabilities over ``actions``; float inputs are normalised exactly."""
    vals = []
    for a in actions:
        q = dist.get(a, 0)
        if isinstance(q, (Fraction, int)):
            vals.append(Fraction(q))
        else:
            q = max(float(q), 0.0)
            vals.append(Fraction(q).limit_denominator(1 << 40))
    total = sum(vals, Fraction(0))
    if total != 1:
        vals = [v / total for v in vals]
    return vals


def induced_mdp(game: Game, profile: MemorylessProfile) -> Game:
    """Fix the team's memoryless profile; only the opponent is left to choose.

    The result has an empty team. Mixtures are computed in exact rationals;
    float profile entries are rounded to nearby rationals and renormalised so
    every mixture sums to exactly one.
    """
    ensure_valid(game)
    profile.check(game)
    opp = game.opponent
    transitions = {}
    for s in game.states:
        vectors = [
            _exact_vector(profile.get(p, s), game.available[(p, s)]) for p in game.team
        ]
        joints = game.team_joint_actions(s)
        weights = []
        for combo in itertools.product(*(range(len(v)) for v in vectors)):
            w = Fraction(1)
            for v, i in zip(vectors, combo):
                w *= v[i]
            weights.append(w)
        for b in game.opponent_actions(s):
            mix: dict[str, Fraction] = {}
            for joint, w in zip(joints, weights):
                if w == 0:
                    continue
                for t, q in game.delta(s, joint, b).support:
                    if q:
                        mix[t] = mix.get(t, Fraction(0)) + w * q
            order = {t: i for i, t in enumerate(game.states)}
            transitions[(s, (b,))] = Distribution(tuple(sorted(mix.items(), key=lambda kv: order[kv[0]])))
    return Game(
        players=(opp,), opponent=opp, states=game.states,
        actions={opp: game.actions[opp]},
        available={(opp, s): game.available[(opp, s)] for s in game.states},
        transitions=transitions, targets=game.targets, initial=game.initial,
        labels=game.labels,
    )


def can_reach(game: Game, targets: Iterable[str] | None = None) -> frozenset[str]:
    """States with some positive-probability path into ``targets``.

    Every other state has value 0 regardless of strategies.
    """
    targets = set(game.targets if targets is None else targets)
    preds: dict[str, set[str]] = {s: set() for s in game.states}
    for (s, _), d in game.transitions.items():
        for t in d.positive():
            preds[t].add(s)
    reached = set(targets)
    frontier = list(targets)
    while frontier:
        t = frontier.pop()
        for s in preds[t]:
            if s not in reached:
                reached.add(s)
                frontier.append(s)
    return frozenset(reached)
