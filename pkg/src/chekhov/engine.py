"""Session protocol over an interactive-fiction engine.

Two backends sit behind :class:`Session`:

* the in-process :class:`~chekhov.mockworld.MockEngine`, used for ``.world`` files
  when no engine command is configured;
* an external interpreter driven as a subprocess: one command line in, all
  output up to the next prompt marker out.

Resetting always restarts the backend; in-game ``restart`` verbs are never used.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import select
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .mockworld import MockEngine, WorldFormatError, load_world

log = logging.getLogger(__name__)

MOCK_SUFFIX = ".world"


class EngineError(Exception):
    """Base class for session failures. ``prefix_index`` is set when the error
    happened while replaying a prefix."""

    def __init__(self, message: str, game_id: str | None = None):
        self.game_id = game_id
        self.prefix_index: int | None = None
        super().__init__(f"[{game_id}] {message}" if game_id else message)


class StoryFileMissing(EngineError):
    pass


class ChecksumMismatch(EngineError):
    pass


class EngineStartFailure(EngineError):
    pass


class CommandTimeout(EngineError):
    pass


class SessionHalted(EngineError):
    pass


class MoveBudgetExhausted(EngineError):
    pass


class UnparseableLook(EngineError):
    pass


def file_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class StoryRef:
    game_id: str
    path: Path
    checksum: str

    def __post_init__(self):
        if not self.game_id:
            raise ValueError("game_id must be non-empty")

    @classmethod
    def from_path(cls, path: str | Path, game_id: str | None = None) -> StoryRef:
        path = Path(path)
        if not path.is_file():
            raise StoryFileMissing(f"story file not found: {path}", game_id or path.stem)
        return cls(game_id or path.stem, path, file_checksum(path))

    @property
    def is_mock(self) -> bool:
        return self.path.suffix == MOCK_SUFFIX


@dataclass(frozen=True)
class SessionConfig:
    rng_seed: int = 0
    max_moves: int = 20_000
    prompt_marker: bytes = b">"
    command_timeout: float = 10.0
    # argv for an external interpreter; "{story}" and "{seed}" are substituted,
    # and the story path is appended when "{story}" is absent.
    engine_command: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")
        if self.max_moves < 1:
            raise ValueError("max_moves must be >= 1")
        if not self.prompt_marker:
            raise ValueError("prompt_marker must be non-empty")


@dataclass(frozen=True)
class EngineResponse:
    raw_text: str
    move_index: int
    halted: bool


@dataclass(frozen=True, order=True)
class LocationKey:
    room_name: str
    body_digest: str

    def __post_init__(self):
        if not self.room_name:
            raise ValueError("room_name must be non-empty")
        if not re.fullmatch(r"[0-9a-f]{8}", self.body_digest):
            raise ValueError(f"body_digest must be 8 lowercase hex chars, got {self.body_digest!r}")

    def to_dict(self) -> dict:
        return {"room_name": self.room_name, "body_digest": self.body_digest}

    @classmethod
    def from_dict(cls, d: dict) -> LocationKey:
        return cls(d["room_name"], d["body_digest"])


def parse_look(text: str, game_id: str | None = None) -> LocationKey:
    """Room name is the first non-empty line; the digest covers the rest."""
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.strip():
            body = " ".join(" ".join(lines[i + 1 :]).split())
            digest = hashlib.sha256(body.encode("utf-8")).hexdigest()[:8]
            return LocationKey(line.strip(), digest)
    raise UnparseableLook("empty `look` output", game_id)


class _MockBackend:
    def __init__(self, story: StoryRef, cfg: SessionConfig):
        try:
            world = load_world(story.path)
        except (OSError, WorldFormatError) as exc:
            raise EngineStartFailure(f"cannot load mock world: {exc}", story.game_id) from exc
        self.engine = MockEngine(world, seed=cfg.rng_seed)

    def start(self) -> tuple[str, bool]:
        return self.engine.start(), self.engine.halted

    def send(self, command: str) -> tuple[str, bool]:
        return self.engine.send(command), self.engine.halted

    def close(self) -> None:
        pass


class _SubprocessBackend:
    def __init__(self, story: StoryRef, cfg: SessionConfig):
        self.game_id = story.game_id
        self.timeout = cfg.command_timeout
        marker = re.escape(cfg.prompt_marker)
        self._prompt = re.compile(rb"(?:\A|\n)" + marker + rb"[ \t]*\Z")
        argv = []
        substituted = False
        for arg in cfg.engine_command:
            if "{story}" in arg:
                substituted = True
            argv.append(arg.replace("{story}", str(story.path)).replace("{seed}", str(cfg.rng_seed)))
        if not substituted:
            argv.append(str(story.path))
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                bufsize=0,
            )
        except OSError as exc:
            raise EngineStartFailure(f"cannot start {argv[0]!r}: {exc}", story.game_id) from exc

    def _read_until_prompt(self) -> tuple[str, bool]:
        fd = self.proc.stdout.fileno()
        buf = bytearray()
        deadline = time.monotonic() + self.timeout
        halted = False
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise CommandTimeout(f"no prompt within {self.timeout}s", self.game_id)
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                halted = True
                break
            buf.extend(chunk)
            m = self._prompt.search(buf)
            if m:
                # a prompt followed immediately by more bytes is not a prompt
                more, _, _ = select.select([fd], [], [], 0)
                if more:
                    continue
                del buf[m.start():]
                break
        text = buf.decode("utf-8", errors="replace").replace("\r\n", "\n")
        return text.strip(), halted

    def start(self) -> tuple[str, bool]:
        try:
            text, halted = self._read_until_prompt()
        except CommandTimeout as exc:
            self.close()
            raise EngineStartFailure(f"engine did not reach its first prompt: {exc}", self.game_id) from exc
        if halted and self.proc.wait(timeout=self.timeout) != 0:
            raise EngineStartFailure(f"engine exited with status {self.proc.returncode}", self.game_id)
        return text, halted

    def send(self, command: str) -> tuple[str, bool]:
        try:
            self.proc.stdin.write(command.encode("utf-8") + b"\n")
            self.proc.stdin.flush()
        except BrokenPipeError:
            return "", True
        return self._read_until_prompt()

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.kill()
        self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream:
                stream.close()


@dataclass
class Session:
    """A single-owner connection to one running game.

    Not thread-safe; give each worker its own session.
    """

    story: StoryRef
    cfg: SessionConfig
    move_index: int = 0
    halted: bool = False
    initial: EngineResponse | None = None
    _backend: object = field(default=None, repr=False)

    def _start(self) -> EngineResponse:
        if self._backend is not None:
            self._backend.close()
        if self.cfg.engine_command is not None and not self.story.is_mock:
            self._backend = _SubprocessBackend(self.story, self.cfg)
        elif self.story.is_mock and self.cfg.engine_command is None:
            self._backend = _MockBackend(self.story, self.cfg)
        elif self.story.is_mock:
            self._backend = _SubprocessBackend(self.story, self.cfg)
        else:
            raise EngineStartFailure("no engine configured for a non-mock story", self.story.game_id)
        text, halted = self._backend.start()
        self.move_index = 0
        self.halted = halted
        self.initial = EngineResponse(text, 0, halted)
        return self.initial

    def send_command(self, cmd: str) -> EngineResponse:
        if "\n" in cmd or "\r" in cmd:
            raise ValueError("commands must be a single line")
        if self.halted:
            raise SessionHalted("the story has ended", self.story.game_id)
        if self.move_index >= self.cfg.max_moves:
            raise MoveBudgetExhausted(f"move budget of {self.cfg.max_moves} spent", self.story.game_id)
        text, halted = self._backend.send(cmd)
        self.move_index += 1
        self.halted = halted
        return EngineResponse(text, self.move_index, halted)

    def reset_and_replay(self, prefix: Sequence[str]) -> EngineResponse:
        """Restart the engine and send ``prefix``; return the final response."""
        if len(prefix) >= self.cfg.max_moves:
            raise MoveBudgetExhausted(
                f"prefix of {len(prefix)} commands does not fit max_moves={self.cfg.max_moves}",
                self.story.game_id,
            )
        response = self._start()
        for i, cmd in enumerate(prefix):
            try:
                response = self.send_command(cmd)
            except EngineError as exc:
                exc.prefix_index = i
                if hasattr(exc, "add_note"):  # 3.11+
                    exc.add_note(f"while replaying prefix command {i}: {cmd!r}")
                raise
        return response

    def describe(self) -> tuple[LocationKey, str]:
        """Issue `look` and return the parsed key with the full text."""
        response = self.send_command("look")
        return parse_look(response.raw_text, self.story.game_id), response.raw_text

    def fingerprint_location(self) -> LocationKey:
        return self.describe()[0]

    def close(self) -> None:
        if self._backend is not None:
            self._backend.close()
            self._backend = None

    def __enter__(self) -> Session:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_session(story: StoryRef, cfg: SessionConfig) -> Session:
    if not story.path.is_file():
        raise StoryFileMissing(f"story file not found: {story.path}", story.game_id)
    actual = file_checksum(story.path)
    if actual != story.checksum:
        raise ChecksumMismatch(f"expected {story.checksum[:12]}..., file has {actual[:12]}...", story.game_id)
    session = Session(story, cfg)
    session._start()
    return session


def detect_nondeterminism(story: StoryRef, cfg: SessionConfig, probe_prefix: Sequence[str] = ()) -> bool:
    """Replay ``probe_prefix`` twice from reset; True iff the final outputs differ."""
    with open_session(story, cfg) as session:
        first = session.reset_and_replay(probe_prefix).raw_text
        second = session.reset_and_replay(probe_prefix).raw_text
    if first != second:
        log.info("%s: nondeterministic under prefix of length %d", story.game_id, len(probe_prefix))
    return first != second
