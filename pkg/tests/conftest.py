from __future__ import annotations

import random
import sys
from collections import deque
from pathlib import Path

import pytest

from chekhov.engine import SessionConfig, StoryRef, open_session

FIXTURES = Path(__file__).parent / "fixtures"
MOCK_DIR = FIXTURES / "mock"
WALKTHROUGH_DIR = FIXTURES / "walkthroughs"

SUBPROCESS_MOCK = (sys.executable, "-m", "chekhov.mockworld", "{story}", "--seed", "{seed}")

ROOM_ADJ = ["Amber", "Birch", "Cedar", "Dusky", "Ebon", "Fallow", "Gilded", "Hollow"]
ROOM_NOUN = ["Court", "Gallery", "Landing", "Passage", "Vault", "Cloister", "Annex", "Rotunda"]
OBJECT_NOUNS = [
    "lamp", "key", "sword", "mirror", "chest", "scroll", "bottle", "candle", "rope", "ladder",
    "statue", "bell", "coin", "cloak", "helmet", "shovel", "compass", "flute", "goblet", "hammer",
    "journal", "locket", "mask", "needle", "orb", "pendant", "quill", "ring", "satchel", "trowel",
]
FILLER_NOUNS = ["moss", "cobwebs", "puddle", "tapestry", "rubble", "ashes", "banner", "pillar"]


def room_names(n: int) -> list[str]:
    return [f"{a} {b}" for a in ROOM_ADJ for b in ROOM_NOUN][:n]


def write_world(path: Path, text: str) -> StoryRef:
    path.write_text(text, encoding="utf-8")
    return StoryRef.from_path(path)


def grid_maze_text(width: int = 5, height: int = 4) -> str:
    names = room_names(width * height)
    lines = ["TITLE THE GRID"]
    for y in range(height):
        for x in range(width):
            lines += [f"ROOM {names[y * width + x]}", "DESC A plain chamber of cold stone."]
            if y > 0:
                lines.append(f"EXIT north {names[(y - 1) * width + x]}")
            if y < height - 1:
                lines.append(f"EXIT south {names[(y + 1) * width + x]}")
            if x > 0:
                lines.append(f"EXIT west {names[y * width + x - 1]}")
            if x < width - 1:
                lines.append(f"EXIT east {names[y * width + x + 1]}")
    return "\n".join(lines) + "\n"


def random_world(rng: random.Random, rooms: tuple[int, int] = (5, 15), objects: tuple[int, int] = (3, 10)):
    """A random connected world.

    Returns ``(text, per_room)`` where ``per_room`` maps room name to
    ``{object: is_nontrivial}`` for the objects declared in that room.
    """
    n_rooms = rng.randint(*rooms)
    names = room_names(n_rooms)
    exits: dict[str, dict[str, str]] = {n: {} for n in names}
    opposite = {"north": "south", "south": "north", "east": "west", "west": "east", "up": "down", "down": "up"}
    # random spanning tree, then a few extra links
    for i in range(1, n_rooms):
        for _ in range(20):
            j = rng.randrange(i)
            free = [d for d in opposite if d not in exits[names[j]] and opposite[d] not in exits[names[i]]]
            if free:
                d = rng.choice(free)
                exits[names[j]][d] = names[i]
                exits[names[i]][opposite[d]] = names[j]
                break
        else:
            raise RuntimeError("could not connect room")
    nouns = rng.sample(OBJECT_NOUNS, rng.randint(*objects))
    per_room: dict[str, dict[str, bool]] = {n: {} for n in names}
    for noun in nouns:
        per_room[rng.choice(names)][noun] = rng.random() < 0.6
    lines = ["TITLE A RANDOM WORLD"]
    for name in names:
        mentioned = [o for o in per_room[name] if rng.random() < 0.85]
        # undeclared nouns from the object pool or filler show up as distractors
        distractors = rng.sample(FILLER_NOUNS, rng.randint(0, 2))
        stray = [o for o in nouns if o not in per_room[name] and rng.random() < 0.1]
        words = mentioned + distractors + stray
        rng.shuffle(words)
        desc = " ".join(f"A {w} is here." for w in words) or "Nothing at all."
        lines += [f"ROOM {name}", f"DESC You stand in the {name.split()[1].lower()}. {desc}"]
        for d, target in exits[name].items():
            lines.append(f"EXIT {d} {target}")
        for obj, nontrivial in per_room[name].items():
            lines.append(f"OBJECT {obj} RESPONSE You study the {obj} closely; it hums." if nontrivial else f"OBJECT {obj} TRIVIAL")
    return "\n".join(lines) + "\n", per_room


def bfs_prefixes(text: str) -> dict[str, list[str]]:
    """Shortest command prefix to each room, straight from the world file."""
    from chekhov.mockworld import parse_world

    world = parse_world(text)
    prefixes = {world.start: []}
    queue = deque([world.start])
    while queue:
        room = queue.popleft()
        for d, target in sorted(world.rooms[room].exits.items()):
            if target not in prefixes and not world.rooms[target].halt:
                prefixes[target] = prefixes[room] + [d]
                queue.append(target)
    return prefixes


@pytest.fixture
def tiny() -> StoryRef:
    return StoryRef.from_path(MOCK_DIR / "tiny.world")


@pytest.fixture(params=["inprocess", "subprocess"])
def backend_cfg(request) -> SessionConfig:
    if request.param == "inprocess":
        return SessionConfig(rng_seed=7, max_moves=50)
    return SessionConfig(rng_seed=7, max_moves=50, command_timeout=10.0, engine_command=SUBPROCESS_MOCK)


@pytest.fixture
def session(tiny):
    s = open_session(tiny, SessionConfig(rng_seed=7))
    yield s
    s.close()


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
