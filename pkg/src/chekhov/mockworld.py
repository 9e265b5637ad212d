"""A tiny scripted interactive-fiction engine.

World files are plain text, one directive per line::

    TITLE  <banner text>                          (optional, before any ROOM)
    ROOM   <name>
    DESC   <text...>                              (repeatable; joined by spaces)
    EXIT   <direction> <room name>
    OBJECT <name> TRIVIAL
    OBJECT <name> RESPONSE <text...>
    HALT   <text...>                              (entering the room ends the story)
    RANDOM <text with {n}>                        (unseeded noise appended to `look`)
    SEEDED <text with {n}>                        (noise drawn from the session seed)

Lines starting with ``#`` are comments. The first ROOM is the start room.

The engine can run in-process (:class:`MockEngine`) or as a subprocess speaking
the usual prompt protocol (``python -m chekhov.mockworld world.world``), which is
how the subprocess adapter is exercised without a real interpreter.
"""

from __future__ import annotations

import argparse
import random
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TITLE = "A MOCK WORLD\nAn interactive fixture."
PROMPT = "> "

DIRECTIONS = {
    "n": "north", "s": "south", "e": "east", "w": "west",
    "ne": "northeast", "nw": "northwest", "se": "southeast", "sw": "southwest",
    "u": "up", "d": "down",
}
DIRECTION_NAMES = frozenset(DIRECTIONS.values()) | {"in", "out"}

REFUSAL = "You can't see any such thing."
NO_EXIT = "You can't go that way."
UNKNOWN_VERB = "That's not a verb I recognise."

_OBJECT = re.compile(r"^(?P<name>.+?)\s+(?P<kind>TRIVIAL|RESPONSE)\b\s*(?P<text>.*)$")
_ARTICLES = ("the ", "a ", "an ")
_MANIPULATE = {"open", "close", "push", "pull", "move", "turn", "rub", "read", "shake", "touch"}


class WorldFormatError(ValueError):
    pass


@dataclass
class MockObject:
    name: str
    response: str | None  # None marks scenery with a stock reply

    @property
    def trivial(self) -> bool:
        return self.response is None


@dataclass
class Room:
    name: str
    desc: str = ""
    exits: dict[str, str] = field(default_factory=dict)
    objects: dict[str, MockObject] = field(default_factory=dict)
    halt: str | None = None
    random_noise: str | None = None
    seeded_noise: str | None = None


@dataclass
class World:
    title: str
    rooms: dict[str, Room]
    start: str

    def nontrivial_objects(self) -> set[str]:
        return {key for room in self.rooms.values() for key, obj in room.objects.items() if not obj.trivial}


def _norm(text: str) -> str:
    return " ".join(text.lower().split())


def canonical_direction(word: str) -> str | None:
    word = word.lower()
    if word in DIRECTION_NAMES:
        return word
    return DIRECTIONS.get(word)


def parse_world(text: str) -> World:
    title = None
    rooms: dict[str, Room] = {}
    order: list[str] = []
    room: Room | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        directive, _, rest = line.partition(" ")
        rest = rest.strip()
        if directive == "TITLE":
            title = rest.replace("\\n", "\n")
            continue
        if directive == "ROOM":
            if not rest:
                raise WorldFormatError(f"line {lineno}: ROOM needs a name")
            if rest in rooms:
                raise WorldFormatError(f"line {lineno}: duplicate room {rest!r}")
            room = rooms[rest] = Room(rest)
            order.append(rest)
            continue
        if room is None:
            raise WorldFormatError(f"line {lineno}: {directive} before any ROOM")
        if directive == "DESC":
            room.desc = f"{room.desc} {rest}".strip()
        elif directive == "EXIT":
            direction, _, target = rest.partition(" ")
            canon = canonical_direction(direction)
            if canon is None or not target.strip():
                raise WorldFormatError(f"line {lineno}: bad EXIT {rest!r}")
            room.exits[canon] = target.strip()
        elif directive == "OBJECT":
            m = _OBJECT.match(rest)
            if not m:
                raise WorldFormatError(f"line {lineno}: bad OBJECT {rest!r}")
            if m["kind"] == "RESPONSE" and not m["text"]:
                raise WorldFormatError(f"line {lineno}: RESPONSE needs text")
            name = m["name"].strip()
            room.objects[_norm(name)] = MockObject(name, m["text"] if m["kind"] == "RESPONSE" else None)
        elif directive == "HALT":
            room.halt = rest or "*** The story has ended ***"
        elif directive == "RANDOM":
            room.random_noise = rest
        elif directive == "SEEDED":
            room.seeded_noise = rest
        else:
            raise WorldFormatError(f"line {lineno}: unknown directive {directive!r}")
    if not order:
        raise WorldFormatError("world has no rooms")
    for r in rooms.values():
        for direction, target in r.exits.items():
            if target not in rooms:
                raise WorldFormatError(f"room {r.name!r}: exit {direction} to unknown room {target!r}")
    return World(title or DEFAULT_TITLE, rooms, order[0])


def load_world(path: str | Path) -> World:
    return parse_world(Path(path).read_text(encoding="utf-8"))


class MockEngine:
    """Deterministic (modulo RANDOM rooms) interpreter for a :class:`World`."""

    def __init__(self, world: World, seed: int = 0):
        self.world = world
        self.rng = random.Random(seed)
        self.location = world.start
        self.inventory: list[str] = []
        self.halted = False

    @property
    def room(self) -> Room:
        return self.world.rooms[self.location]

    def start(self) -> str:
        return f"{self.world.title}\n\n{self.look()}"

    def look(self) -> str:
        room = self.room
        text = f"{room.name}\n{room.desc}".rstrip()
        if room.seeded_noise:
            text += "\n" + room.seeded_noise.replace("{n}", str(self.rng.randrange(10**9)))
        if room.random_noise:
            noise = random.SystemRandom().randrange(10**18)
            text += "\n" + room.random_noise.replace("{n}", str(noise))
        return text

    def _find(self, words: str) -> MockObject | None:
        target = _norm(words)
        for article in _ARTICLES:
            if target.startswith(article):
                target = target[len(article):]
                break
        return self.room.objects.get(target)

    def _go(self, direction: str) -> str:
        target = self.room.exits.get(direction)
        if target is None:
            return NO_EXIT
        self.location = target
        text = self.look()
        if self.room.halt:
            self.halted = True
            text += "\n\n" + self.room.halt
        return text

    def send(self, command: str) -> str:
        if self.halted:
            raise RuntimeError("story has ended")
        words = command.strip().split()
        if not words:
            return "I beg your pardon?"
        verb, rest = words[0].lower(), " ".join(words[1:])
        if verb == "go" and rest:
            direction = canonical_direction(rest.split()[0])
            return self._go(direction) if direction else NO_EXIT
        direction = canonical_direction(verb)
        if direction and not rest:
            return self._go(direction)
        if verb in ("look", "l") and not rest:
            return self.look()
        if verb in ("examine", "x") or (verb == "look" and rest.startswith("at ")):
            if verb == "look":
                rest = rest[3:]
            if not rest:
                return "What do you want to examine?"
            obj = self._find(rest)
            if obj is None:
                return REFUSAL
            if obj.trivial:
                return f"You see nothing special about the {obj.name}."
            return obj.response
        if verb in ("take", "get"):
            obj = self._find(rest) if rest else None
            if obj is None:
                return REFUSAL
            if obj.name in self.inventory:
                return "You already have that."
            self.inventory.append(obj.name)
            return "Taken."
        if verb in _MANIPULATE:
            obj = self._find(rest) if rest else None
            return REFUSAL if obj is None else "Nothing obvious happens."
        if verb in ("wait", "z"):
            return "Time passes."
        if verb in ("inventory", "i"):
            if not self.inventory:
                return "You are empty-handed."
            return "You are carrying:\n" + "\n".join(f"  {name}" for name in self.inventory)
        if verb == "quit":
            self.halted = True
            return "Game over."
        return UNKNOWN_VERB


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description="Run a mock world over stdin/stdout.")
    ap.add_argument("world")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    engine = MockEngine(load_world(args.world), seed=args.seed)
    out = sys.stdout
    out.write(engine.start() + "\n\n" + PROMPT)
    out.flush()
    for line in sys.stdin:
        reply = engine.send(line.rstrip("\n"))
        if engine.halted:
            out.write(reply + "\n")
            out.flush()
            return 0
        out.write(reply + "\n\n" + PROMPT)
        out.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
