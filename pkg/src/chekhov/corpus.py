"""CGIF-style corpus records and the file formats around them.

Spans are ``(start, end)`` UTF-8 byte offsets, end exclusive.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

from .engine import LocationKey
from .explorer import DiscoveredBy
from .textutil import Token, byte_len, collapse_ws, normalize, tokenize

PIPELINE_VERSION = "chekhov-0.1"
Span = tuple[int, int]


class CorpusFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


def check_spans(spans: Sequence[Span], limit: int) -> None:
    prev_end = 0
    for i, (start, end) in enumerate(spans):
        if not 0 <= start < end <= limit:
            raise ValueError(f"span {i} ({start}, {end}) outside text of {limit} bytes")
        if start < prev_end:
            raise ValueError(f"span {i} ({start}, {end}) is unsorted or overlaps its predecessor")
        prev_end = end


@dataclass(frozen=True)
class CgifRecord:
    game_id: str
    location_key: LocationKey
    text: str
    spans: tuple[Span, ...]
    discovered_by: DiscoveredBy
    pipeline_version: str = PIPELINE_VERSION

    def __post_init__(self):
        check_spans(self.spans, byte_len(self.text))

    @property
    def key(self) -> tuple[str, LocationKey]:
        return self.game_id, self.location_key

    @property
    def doc_id(self) -> str:
        """Identifier used by the NER interchange format."""
        return doc_id(self.game_id, self.location_key)

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "location_key": self.location_key.to_dict(),
            "text": self.text,
            "spans": [[s, e] for s, e in self.spans],
            "discovered_by": self.discovered_by.value,
            "pipeline_version": self.pipeline_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CgifRecord:
        return cls(
            d["game_id"],
            LocationKey.from_dict(d["location_key"]),
            d["text"],
            tuple((int(s), int(e)) for s, e in d["spans"]),
            DiscoveredBy(d["discovered_by"]),
            d["pipeline_version"],
        )


def doc_id(game_id: str, key: LocationKey) -> str:
    return f"{game_id}::{key.room_name}::{key.body_digest}"


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_cgif(records: Iterable[CgifRecord], fp: IO[str]) -> None:
    for rec in records:
        check_spans(rec.spans, byte_len(rec.text))
        fp.write(_dump(rec.to_dict()) + "\n")


def _read_jsonl(fp: Iterable[str], parse) -> Iterator:
    for lineno, line in enumerate(fp, 1):
        if not line.strip():
            continue
        try:
            yield parse(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorpusFormatError(str(exc), lineno) from exc


def read_cgif(fp: Iterable[str]) -> list[CgifRecord]:
    return list(_read_jsonl(fp, CgifRecord.from_dict))


def dumps_cgif(records: Iterable[CgifRecord]) -> str:
    return "".join(_dump(r.to_dict()) + "\n" for r in records)


def loads_cgif(text: str) -> list[CgifRecord]:
    return read_cgif(text.splitlines())


# -- BIO ---------------------------------------------------------------------


@dataclass
class BioDocument:
    tokens: list[Token]
    tags: list[str]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError("tokens and tags differ in length")


def to_bio(record_or_text, spans: Sequence[Span] | None = None) -> BioDocument:
    """Tag tokens lying fully inside a span; sub-token span edges snap inward."""
    if spans is None:
        text, spans = record_or_text.text, record_or_text.spans
    else:
        text = record_or_text
    tokens = tokenize(text)
    tags = ["O"] * len(tokens)
    owner = [None] * len(tokens)
    for k, (start, end) in enumerate(sorted(spans)):
        for i, tok in enumerate(tokens):
            if tok.start >= start and tok.end <= end and owner[i] is None:
                owner[i] = k
    for i, k in enumerate(owner):
        if k is not None:
            tags[i] = "I" if i > 0 and owner[i - 1] == k else "B"
    return BioDocument(tokens, tags)


def from_bio(doc: BioDocument) -> list[Span]:
    spans: list[Span] = []
    for tok, tag in zip(doc.tokens, doc.tags):
        if tag == "B" or (tag == "I" and not spans):
            spans.append((tok.start, tok.end))
        elif tag == "I":
            spans[-1] = (spans[-1][0], tok.end)
        elif tag != "O":
            raise ValueError(f"unknown BIO tag {tag!r}")
    return spans


def write_conll(docs: Iterable[BioDocument], fp: IO[str]) -> None:
    first = True
    for doc in docs:
        if not first:
            fp.write("\n")
        first = False
        for tok, tag in zip(doc.tokens, doc.tags):
            fp.write(f"{tok.surface} {tag}\n")


# -- splits ------------------------------------------------------------------

SPLIT_NAMES = ("train", "dev", "test")


def _allocate(n_games: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder allocation with at least one game per bucket."""
    raw = [r * n_games for r in ratios]
    counts = [math.floor(x + 1e-9) for x in raw]
    by_remainder = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in by_remainder[: n_games - sum(counts)]:
        counts[i] += 1
    for i in range(len(counts)):
        while counts[i] == 0:
            donor = max(range(len(counts)), key=lambda j: counts[j])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def split_corpus(records: Sequence[CgifRecord], ratios=(0.8, 0.1, 0.1), seed: int = 0) -> dict[str, list[CgifRecord]]:
    """Deterministic split at game granularity."""
    if len(ratios) != len(SPLIT_NAMES) or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-6:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    games = sorted({r.game_id for r in records})
    if len(games) < len(SPLIT_NAMES):
        raise ValueError(f"need at least {len(SPLIT_NAMES)} games to split, got {len(games)}")
    random.Random(seed).shuffle(games)
    bucket_of: dict[str, str] = {}
    pos = 0
    for name, count in zip(SPLIT_NAMES, _allocate(len(games), ratios)):
        for game in games[pos : pos + count]:
            bucket_of[game] = name
        pos += count
    out: dict[str, list[CgifRecord]] = {name: [] for name in SPLIT_NAMES}
    for rec in records:
        out[bucket_of[rec.game_id]].append(rec)
    return out


# -- ClubFloyd ---------------------------------------------------------------


@dataclass(frozen=True)
class ClubFloydPair:
    observation: str
    action: str
    next_observation: str
    next_action: str


def _parse_group(body: str) -> ClubFloydPair | None:
    parts = body.split("[SEP]")
    if len(parts) != 5 or parts[4].strip():
        return None
    fields = [collapse_ws(p) for p in parts[:4]]
    if not fields[0] or not fields[1]:
        return None
    return ClubFloydPair(*fields)


def parse_clubfloyd(stream: Iterable[str] | str) -> tuple[list[ClubFloydPair], int]:
    """Parse ``[CLS] obs [SEP] act [SEP] next_obs [SEP] next_act [SEP]`` groups.

    Returns ``(pairs, skipped)``; malformed groups are counted, not raised.
    """
    if isinstance(stream, str):
        stream = stream.splitlines(keepends=True)
    pairs: list[ClubFloydPair] = []
    skipped = 0
    buf = ""
    started = False

    def flush(body: str) -> None:
        nonlocal skipped
        pair = _parse_group(body)
        if pair is None:
            skipped += 1
        else:
            pairs.append(pair)

    for chunk in stream:
        buf += chunk
        pieces = buf.split("[CLS]")
        for body in pieces[:-1]:
            if started:
                flush(body)
            elif body.strip():
                skipped += 1  # text before the first [CLS]
            started = True
        buf = pieces[-1]
    if started:
        flush(buf)
    elif buf.strip():
        skipped += 1
    return pairs, skipped


@dataclass(frozen=True)
class ActionTarget:
    surface: str
    normalized: str
    count: int


def extract_action_targets(pairs: Iterable[ClubFloydPair]) -> list[ActionTarget]:
    """Strip the first token (the verb) of every action; the rest is the target.

    Directions count too: "go north" yields "north".
    """
    counts: Counter[str] = Counter()
    surfaces: dict[str, str] = {}
    for pair in pairs:
        parts = pair.action.split(None, 1)
        if len(parts) < 2:
            continue
        rest = collapse_ws(parts[1])
        norm = normalize(rest)
        counts[norm] += 1
        surfaces.setdefault(norm, rest)
    return [ActionTarget(surfaces[n], n, c) for n, c in counts.items()]


# -- TRIPOD ------------------------------------------------------------------


@dataclass(frozen=True)
class TripodSynopsis:
    story_id: str
    sentences: tuple[str, ...]
    turning_points: tuple[int, ...]

    def __post_init__(self):
        tps = self.turning_points
        if len(tps) != 5:
            raise ValueError(f"{self.story_id}: expected 5 turning points, got {len(tps)}")
        if any(b <= a for a, b in zip(tps, tps[1:])):
            raise ValueError(f"{self.story_id}: turning points must be strictly increasing: {tps}")
        if tps[0] < 0 or tps[-1] >= len(self.sentences):
            raise ValueError(f"{self.story_id}: turning point outside {len(self.sentences)} sentences")


def parse_tripod(stream: Iterable[str]) -> tuple[list[TripodSynopsis], list[tuple[str, str]]]:
    """Read JSON Lines ``{story_id, sentences, turning_points}``.

    Invalid stories are returned as ``(story_id, reason)`` in the second slot.
    """
    good: list[TripodSynopsis] = []
    rejected: list[tuple[str, str]] = []
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        story_id = f"line-{lineno}"
        try:
            d = json.loads(line)
            story_id = str(d.get("story_id", story_id))
            good.append(TripodSynopsis(story_id, tuple(d["sentences"]), tuple(int(i) for i in d["turning_points"])))
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            rejected.append((story_id, str(exc)))
    return good, rejected


# -- stats -------------------------------------------------------------------


def corpus_stats(records: Sequence[CgifRecord]) -> dict:
    """Counts over a corpus; ``bytes`` is the size of its JSONL serialization."""
    n = len(records)
    spans = sum(len(r.spans) for r in records)
    return {
        "locations": n,
        "games": len({r.game_id for r in records}),
        "bytes": len(dumps_cgif(records).encode("utf-8")),
        "spans": spans,
        "spans_per_location": spans / n if n else 0.0,
    }


# -- prediction interchange --------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    start: int
    end: int
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad prediction offsets ({self.start}, {self.end})")

    @property
    def span(self) -> Span:
        return self.start, self.end


@dataclass
class PredictionRecord:
    game_id: str
    location_key: LocationKey
    spans: list[Prediction] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, LocationKey]:
        return self.game_id, self.location_key

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "location_key": self.location_key.to_dict(),
            "spans": [{"start": s.start, "end": s.end, "p": s.p} for s in self.spans],
        }

    @classmethod
    def from_dict(cls, d: dict) -> PredictionRecord:
        spans = []
        for s in d["spans"]:
            if isinstance(s, dict):
                spans.append(Prediction(int(s["start"]), int(s["end"]), float(s["p"])))
            else:  # CGIF-style [start, end] pair: a certain prediction
                spans.append(Prediction(int(s[0]), int(s[1]), 1.0))
        return cls(d["game_id"], LocationKey.from_dict(d["location_key"]), spans)


def write_predictions(records: Iterable[PredictionRecord], fp: IO[str]) -> None:
    for rec in records:
        fp.write(_dump(rec.to_dict()) + "\n")


def read_predictions(fp: Iterable[str]) -> list[PredictionRecord]:
    """Read the interchange format; CGIF files are accepted as p=1 predictions."""
    return list(_read_jsonl(fp, PredictionRecord.from_dict))


@dataclass(frozen=True)
class NerSpan:
    start: int
    end: int
    category: str


def read_ner(fp: Iterable[str]) -> dict[str, list[NerSpan]]:
    """Read ``{doc_id, spans: [{start, end, category}]}`` lines."""
    out: dict[str, list[NerSpan]] = {}

    def parse(d: dict):
        spans = [NerSpan(int(s["start"]), int(s["end"]), str(s["category"])) for s in d["spans"]]
        out.setdefault(str(d["doc_id"]), []).extend(spans)

    for _ in _read_jsonl(fp, parse):
        pass
    return out

