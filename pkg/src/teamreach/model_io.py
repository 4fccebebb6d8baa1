"""JSON documents for games, profiles, valuations and certificates."""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Mapping

from .game import Distribution, Game, InvalidGameError, MemorylessProfile, validate
from .rational import format_fraction, to_fraction

GAME_VERSION = "teamreach-game/1"
PROFILE_VERSION = "teamreach-profile/1"
CERTIFICATE_VERSION = "teamreach-certificate/1"


class GameFormatError(ValueError):
    """Malformed document. ``location`` is a line number or a JSON path."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


def _load(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None


def _need(obj: Mapping, key: str, path: str, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise GameFormatError(path, f"missing field {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise GameFormatError(f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _ident(value, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise GameFormatError(path, "expected a non-empty identifier string")
    return value


def game_from_document(doc: Mapping) -> Game:
    """Decode a parsed JSON document into a validated :class:`Game`."""
    if not isinstance(doc, dict):
        raise GameFormatError("$", "document must be a JSON object")
    version = doc.get("version")
    if version != GAME_VERSION:
        raise GameFormatError("$.version", f"unsupported version {version!r}")

    players, opponent = [], None
    for i, entry in enumerate(_need(doc, "players", "$", list)):
        path = f"$.players[{i}]"
        pid = _ident(_need(entry, "id", path), f"{path}.id")
        players.append(pid)
        if entry.get("opponent", False):
            if opponent is not None:
                raise GameFormatError(path, "more than one opponent")
            opponent = pid
    if opponent is None:
        raise GameFormatError("$.players", "no player is flagged as opponent")
    if len(set(players)) != len(players):
        raise GameFormatError("$.players", "duplicate player id")

    team = [_ident(p, f"$.team[{i}]") for i, p in enumerate(_need(doc, "team", "$", list))]
    if team != [p for p in players if p != opponent]:
        raise GameFormatError("$.team", "team must list every non-opponent player in declaration order")

    states = [_ident(s, f"$.states[{i}]") for i, s in enumerate(_need(doc, "states", "$", list))]
    state_set = set(states)
    if len(state_set) != len(states):
        raise GameFormatError("$.states", "duplicate state id")

    raw_actions = _need(doc, "actions", "$", dict)
    actions = {}
    for p in players:
        acts = _need(raw_actions, p, "$.actions", list)
        actions[p] = tuple(_ident(a, f"$.actions.{p}[{i}]") for i, a in enumerate(acts))
    for p in raw_actions:
        if p not in players:
            raise GameFormatError(f"$.actions.{p}", "unknown player")

    available = {(p, s): actions[p] for p in players for s in states}
    for s, per_player in doc.get("available", {}).items():
        if s not in state_set:
            raise GameFormatError(f"$.available.{s}", "unknown state")
        for p, acts in per_player.items():
            if p not in actions:
                raise GameFormatError(f"$.available.{s}.{p}", "unknown player")
            for a in acts:
                if a not in actions[p]:
                    raise GameFormatError(f"$.available.{s}.{p}", f"unknown action {a!r}")
            available[(p, s)] = tuple(acts)

    order = team + [opponent]
    transitions = {}
    for i, entry in enumerate(_need(doc, "transitions", "$", list)):
        path = f"$.transitions[{i}]"
        s = _need(entry, "state", path)
        if s not in state_set:
            raise GameFormatError(f"{path}.state", f"unknown state {s!r}")
        chosen = _need(entry, "actions", path, dict)
        joint = []
        for p in order:
            a = _need(chosen, p, f"{path}.actions")
            if a not in actions[p]:
                raise GameFormatError(f"{path}.actions.{p}", f"unknown action {a!r}")
            joint.append(a)
        extra = set(chosen) - set(order)
        if extra:
            raise GameFormatError(f"{path}.actions", f"unknown players {sorted(extra)}")
        support = []
        for j, pair in enumerate(_need(entry, "to", path, list)):
            ppath = f"{path}.to[{j}]"
            if not (isinstance(pair, list) and len(pair) == 2):
                raise GameFormatError(ppath, "expected [state, probability]")
            t, prob = pair
            if t not in state_set:
                raise GameFormatError(ppath, f"unknown state {t!r}")
            if not isinstance(prob, (str, int)) or isinstance(prob, bool):
                raise GameFormatError(ppath, "probability must be a string ('p/q' or decimal) or integer")
            try:
                support.append((t, to_fraction(prob)))
            except ValueError as exc:
                raise GameFormatError(ppath, str(exc)) from None
        key = (s, tuple(joint))
        if key in transitions:
            raise GameFormatError(path, f"duplicate transition for state {s!r}, joint action {tuple(joint)}")
        transitions[key] = Distribution(tuple(support))

    targets = frozenset(_need(doc, "targets", "$", list))
    for t in targets:
        if t not in state_set:
            raise GameFormatError("$.targets", f"unknown state {t!r}")
    initial = _need(doc, "initial", "$")
    if initial not in state_set:
        raise GameFormatError("$.initial", f"unknown state {initial!r}")
    labels = {}
    for s, props in doc.get("labels", {}).items():
        if s not in state_set:
            raise GameFormatError(f"$.labels.{s}", "unknown state")
        labels[s] = frozenset(props)

    game = Game(
        players=tuple(players), opponent=opponent, states=tuple(states), actions=actions,
        available=available, transitions=transitions, targets=targets, initial=initial,
        labels=labels,
    )
    report = validate(game)
    if not report.ok:
        raise InvalidGameError(report)
    return game


def parse_game(text: str) -> Game:
    return game_from_document(_load(text))


def game_to_document(game: Game) -> dict:
    order = game.order
    doc: dict[str, Any] = {
        "version": GAME_VERSION,
        "players": [
            {"id": p, "opponent": True} if p == game.opponent else {"id": p}
            for p in game.players
        ],
        "team": list(game.team),
        "states": list(game.states),
        "actions": {p: list(game.actions[p]) for p in game.players},
        "targets": sorted(game.targets, key=game.state_index.get),
        "initial": game.initial,
    }
    restricted = {}
    for s in game.states:
        per = {p: list(game.available[(p, s)]) for p in game.players
               if game.available[(p, s)] != game.actions[p]}
        if per:
            restricted[s] = per
    if restricted:
        doc["available"] = restricted
    rows = []
    for s in game.states:
        for joint in game.team_joint_actions(s):
            for b in game.opponent_actions(s):
                dist = game.delta(s, joint, b)
                rows.append({
                    "state": s,
                    "actions": dict(zip(order, joint + (b,))),
                    "to": [[t, format_fraction(p)] for t, p in dist.support],
                })
    doc["transitions"] = rows
    labels = {s: sorted(v) for s, v in game.labels.items() if v}
    if labels:
        doc["labels"] = labels
    return doc


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def serialize_game(game: Game) -> str:
    """Canonical text form; ``parse_game(serialize_game(g)) == g``."""
    return _dump(game_to_document(game))


def format_valuation(game: Game, values: Mapping[str, float]) -> str:
    return "".join(f"{s} {float(values[s]):.6f}\n" for s in game.states)


def parse_valuation(text: str) -> dict[str, float]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GameFormatError(f"line {lineno}", "expected 'state value'")
        out[parts[0]] = float(parts[1])
    return out


def _prob_out(p) -> str | float:
    if isinstance(p, (Fraction, int)):
        return format_fraction(Fraction(p))
    return float(p)


def serialize_profile(game: Game, profile: MemorylessProfile) -> str:
    body: dict = {}
    for (p, s), dist in profile.probs.items():
        body.setdefault(p, {})[s] = {a: _prob_out(q) for a, q in dist.items()}
    return _dump({"version": PROFILE_VERSION, "profile": body})


def parse_profile(text: str) -> MemorylessProfile:
    doc = _load(text)
    if not isinstance(doc, dict) or doc.get("version") != PROFILE_VERSION:
        raise GameFormatError("$.version", "not a profile document")
    probs = {}
    for p, per_state in _need(doc, "profile", "$", dict).items():
        for s, dist in per_state.items():
            probs[(p, s)] = {
                a: (to_fraction(q) if isinstance(q, str) else float(q)) for a, q in dist.items()
            }
    return MemorylessProfile(probs)


def certificate_to_document(cert) -> dict:
    supports: dict = {}
    for (p, s), acts in sorted(cert.supports.items()):
        supports.setdefault(s, {})[p] = sorted(acts)
    return {
        "version": CERTIFICATE_VERSION,
        "winning": sorted(cert.winning),
        "rank": {s: int(r) for s, r in sorted(cert.rank.items())},
        "supports": supports,
    }


def serialize_certificate(cert) -> str:
    return _dump(certificate_to_document(cert))


def parse_certificate(text: str):
    from .almost_sure import RankCertificate

    doc = _load(text)
    if not isinstance(doc, dict) or doc.get("version") != CERTIFICATE_VERSION:
        raise GameFormatError("$.version", "not a certificate document")
    supports = {}
    for s, per in _need(doc, "supports", "$", dict).items():
        for p, acts in per.items():
            supports[(p, s)] = frozenset(acts)
    return RankCertificate(
        winning=frozenset(_need(doc, "winning", "$", list)),
        rank={s: int(r) for s, r in _need(doc, "rank", "$", dict).items()},
        supports=supports,
    )
