"""Enumerate game locations with the command prefixes that reach them."""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

from .candidates import extract_candidates
from .engine import EngineError, LocationKey, Session

MOVEMENT_COMMANDS = (
    "north", "south", "east", "west",
    "northeast", "northwest", "southeast", "southwest",
    "up", "down", "in", "out",
)
INTERACTION_VERBS = ("take", "open", "push", "pull", "examine")


class DiscoveredBy(str, enum.Enum):
    WALKTHROUGH = "walkthrough"
    RANDOM_WALK = "random_walk"


@dataclass(frozen=True)
class Walkthrough:
    game_id: str
    commands: tuple[str, ...]
    source: str = ""

    def __post_init__(self):
        if not self.commands:
            raise ValueError(f"walkthrough for {self.game_id} has no commands")
        if any("\n" in c or "\r" in c for c in self.commands):
            raise ValueError("walkthrough commands must be single lines")

    @classmethod
    def parse(cls, text: str, game_id: str, source: str = "") -> Walkthrough:
        commands = []
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                commands.append(line)
        return cls(game_id, tuple(commands), source)

    @classmethod
    def from_file(cls, path: str | Path, game_id: str | None = None) -> Walkthrough:
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), game_id or path.stem, str(path))


@dataclass(frozen=True)
class LocationRecord:
    game_id: str
    location: LocationKey
    description: str
    prefix: tuple[str, ...]
    discovered_by: DiscoveredBy

    def __post_init__(self):
        if not self.description:
            raise ValueError("description must be non-empty")

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "location": self.location.to_dict(),
            "description": self.description,
            "prefix": list(self.prefix),
            "discovered_by": self.discovered_by.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LocationRecord:
        return cls(
            d["game_id"],
            LocationKey.from_dict(d["location"]),
            d["description"],
            tuple(d["prefix"]),
            DiscoveredBy(d["discovered_by"]),
        )


@dataclass(frozen=True)
class WalkConfig:
    steps: int = 2500
    rng_seed: int = 0
    action_vocabulary: tuple[str, ...] = INTERACTION_VERBS
    direction_bias: float = 0.8
    movement_commands: tuple[str, ...] = field(default=MOVEMENT_COMMANDS)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 <= self.direction_bias <= 1.0:
            raise ValueError("direction_bias must lie in [0, 1]")


def _first_visit(seen: dict, records: list, session: Session, game_id: str, prefix, how) -> str:
    key, text = session.describe()
    if key not in seen:
        seen[key] = True
        records.append(LocationRecord(game_id, key, text, tuple(prefix), how))
    return text


def execute_walkthrough(session: Session, wt: Walkthrough) -> list[LocationRecord]:
    """Replay a solution, recording each location the first time it is reached.

    A halt mid-walkthrough ends enumeration normally. Other session errors
    propagate with ``command_index`` set on the exception.
    """
    if session.move_index != 0:
        raise ValueError("execute_walkthrough needs a fresh session")
    how = DiscoveredBy.WALKTHROUGH
    seen: dict[LocationKey, bool] = {}
    records: list[LocationRecord] = []
    _first_visit(seen, records, session, wt.game_id, (), how)
    for i, cmd in enumerate(wt.commands):
        try:
            response = session.send_command(cmd)
            if response.halted:
                break
            _first_visit(seen, records, session, wt.game_id, wt.commands[: i + 1], how)
        except EngineError as exc:
            exc.command_index = i
            raise
    return records


def random_walk(
    session: Session,
    cfg: WalkConfig,
    stopwords: frozenset[str] | None = None,
) -> list[LocationRecord]:
    """Seeded random exploration; output depends only on the story and ``cfg``."""
    if session.move_index != 0:
        raise ValueError("random_walk needs a fresh session")
    rng = random.Random(cfg.rng_seed)
    how = DiscoveredBy.RANDOM_WALK
    game_id = session.story.game_id
    seen: dict[LocationKey, bool] = {}
    records: list[LocationRecord] = []
    nouns_by_text: dict[str, list[str]] = {}
    prefix: list[str] = []
    text = _first_visit(seen, records, session, game_id, prefix, how)
    for _ in range(cfg.steps):
        nouns = nouns_by_text.get(text)
        if nouns is None:
            nouns = nouns_by_text[text] = [c.normalized for c in extract_candidates(text, stopwords)]
        if rng.random() < cfg.direction_bias or not nouns or not cfg.action_vocabulary:
            cmd = rng.choice(cfg.movement_commands)
        else:
            cmd = f"{rng.choice(cfg.action_vocabulary)} {rng.choice(nouns)}"
        prefix.append(cmd)
        if session.send_command(cmd).halted:
            break
        text = _first_visit(seen, records, session, game_id, prefix, how)
    return records


def merge_location_sets(*lists: Iterable[LocationRecord]) -> list[LocationRecord]:
    """Union keyed by (game_id, location); the shorter prefix wins a collision.

    Games appear in order of first appearance, records within a game in
    first-seen order.
    """
    slots: dict[tuple[str, LocationKey], LocationRecord] = {}
    for records in lists:
        for rec in records:
            key = (rec.game_id, rec.location)
            current = slots.get(key)
            if current is None:
                slots[key] = rec
            elif len(rec.prefix) < len(current.prefix):
                slots[key] = rec
    game_order: dict[str, int] = {}
    for game_id, _ in slots:
        game_order.setdefault(game_id, len(game_order))
    # dicts keep first-insertion order, so a stable sort on game rank suffices
    return sorted(slots.values(), key=lambda r: game_order[r.game_id])


def write_locations(records: Sequence[LocationRecord], fp: IO[str]) -> None:
    for rec in records:
        fp.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_locations(fp: Iterable[str]) -> list[LocationRecord]:
    out = []
    for lineno, line in enumerate(fp, 1):
        if not line.strip():
            continue
        try:
            out.append(LocationRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"line {lineno}: malformed location record: {exc}") from exc
    return out
