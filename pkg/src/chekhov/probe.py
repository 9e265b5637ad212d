"""Label interactable entities in location descriptions by probing the engine.

Each candidate mention gets its own ``examine`` probe after a fresh reset and
prefix replay. A response that is empty or matches a refusal pattern is trivial;
anything else makes the mention a CG span.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

from .candidates import CandidateSpan, data_lines, deoverlap, extract_candidates, iter_ngrams
from .engine import EngineError, Session
from .explorer import LocationRecord
from .textutil import byte_slice, fold, normalize

log = logging.getLogger(__name__)


class Verdict(str, enum.Enum):
    TRIVIAL = "trivial"
    NONTRIVIAL = "nontrivial"
    ERROR = "error"


@dataclass(frozen=True)
class TrivialityPatternSet:
    patterns: tuple[str, ...]
    source: str = "builtin"

    def __post_init__(self):
        if not self.patterns:
            raise ValueError("a pattern set needs at least one pattern")

    @classmethod
    def from_lines(cls, lines: Iterable[str], source: str) -> TrivialityPatternSet:
        patterns = []
        for line in lines:
            line = line.strip()
            if line and not line.startswith("#"):
                patterns.append(fold(line))
        return cls(tuple(patterns), source)

    @classmethod
    def from_file(cls, path: str | Path) -> TrivialityPatternSet:
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines(), str(path))

    @classmethod
    def builtin(cls) -> TrivialityPatternSet:
        return _builtin_patterns()


@lru_cache(maxsize=None)
def _builtin_patterns() -> TrivialityPatternSet:
    return TrivialityPatternSet.from_lines(data_lines("trivial_patterns.txt"), "builtin")


def classify_triviality(response: str, patterns: TrivialityPatternSet) -> Verdict:
    if not response.strip():
        return Verdict.TRIVIAL
    folded = fold(response)
    if any(p in folded for p in patterns.patterns):
        return Verdict.TRIVIAL
    return Verdict.NONTRIVIAL


@dataclass
class ProbeResult:
    candidate: CandidateSpan
    command: str
    response: str
    verdict: Verdict
    error: str | None = None

    def to_dict(self) -> dict:
        d = {
            "candidate": self.candidate.to_dict(),
            "command": self.command,
            "response": self.response,
            "verdict": self.verdict.value,
        }
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class AnnotatedLocation:
    record: LocationRecord
    spans: list[tuple[int, int]]
    evidence: list[ProbeResult] = field(default_factory=list)
    dropped: list[tuple[int, int]] = field(default_factory=list)

    @property
    def errors(self) -> int:
        return sum(r.verdict is Verdict.ERROR for r in self.evidence)

    def surfaces(self) -> set[str]:
        text = self.record.description
        return {normalize(byte_slice(text, s, e)) for s, e in self.spans}


def probe_candidate(
    session: Session,
    record: LocationRecord,
    candidate: CandidateSpan,
    patterns: TrivialityPatternSet,
) -> ProbeResult:
    """Reset, replay the record's prefix, then ``examine`` the candidate.

    The session is left in the post-probe state.
    """
    command = f"examine {candidate.normalized}"
    try:
        session.reset_and_replay(record.prefix)
        response = session.send_command(command)
    except EngineError as exc:
        return ProbeResult(candidate, command, "", Verdict.ERROR, error=f"{type(exc).__name__}: {exc}")
    return ProbeResult(candidate, command, response.raw_text, classify_triviality(response.raw_text, patterns))


def label_location(
    session: Session,
    record: LocationRecord,
    patterns: TrivialityPatternSet,
    stopwords: frozenset[str] | None = None,
) -> AnnotatedLocation:
    occurrences = iter_ngrams(record.description, stopwords)
    evidence = [
        probe_candidate(session, record, cand, patterns)
        for cand in extract_candidates(record.description, stopwords)
    ]
    winners = {r.candidate.normalized for r in evidence if r.verdict is Verdict.NONTRIVIAL}
    spans, dropped = deoverlap((c.start, c.end) for c in occurrences if c.normalized in winners)
    for start, end in dropped:
        log.debug(
            "%s/%s: dropped overlapping span %r",
            record.game_id, record.location.room_name, byte_slice(record.description, start, end),
        )
    return AnnotatedLocation(record, spans, evidence, dropped)
