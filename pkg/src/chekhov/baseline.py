"""Lexicon baseline: how often each candidate surface was gold in training."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Sequence

from .candidates import deoverlap, iter_ngrams
from .corpus import CgifRecord, Prediction, PredictionRecord
from .textutil import byte_slice, normalize


@dataclass(frozen=True)
class Lexicon:
    table: dict[str, tuple[int, int]] = field(default_factory=dict)
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        for surface, (cg, total) in self.table.items():
            if not 0 <= cg <= total or total == 0:
                raise ValueError(f"bad counts for {surface!r}: ({cg}, {total})")

    def probability(self, normalized: str) -> float:
        cg, total = self.table.get(normalized, (0, 0))
        return (cg + self.alpha) / (total + 2 * self.alpha)

    def to_json(self) -> str:
        table = {k: list(v) for k, v in sorted(self.table.items())}
        return json.dumps({"alpha": self.alpha, "table": table}, ensure_ascii=False, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Lexicon:
        d = json.loads(text)
        return cls({k: (int(v[0]), int(v[1])) for k, v in d["table"].items()}, float(d["alpha"]))

    def save(self, fp: IO[str]) -> None:
        fp.write(self.to_json())

    @classmethod
    def load(cls, fp: IO[str]) -> Lexicon:
        return cls.from_json(fp.read())


def train_lexicon(records: Sequence[CgifRecord], alpha: float = 1.0, stopwords=None) -> Lexicon:
    """Count every candidate occurrence, and those lying inside a gold span."""
    if not records:
        raise ValueError("cannot train a lexicon on an empty corpus")
    counts: dict[str, list[int]] = {}
    for rec in records:
        for cand in iter_ngrams(rec.text, stopwords):
            entry = counts.setdefault(cand.normalized, [0, 0])
            entry[1] += 1
            if any(s <= cand.start and cand.end <= e for s, e in rec.spans):
                entry[0] += 1
    return Lexicon({k: (cg, total) for k, (cg, total) in counts.items()}, alpha)


def predict(lexicon: Lexicon, text: str, stopwords=None) -> list[Prediction]:
    """Score every candidate occurrence, then keep a longest-first non-overlapping set."""
    if not text:
        return []
    scored = {(c.start, c.end): lexicon.probability(c.normalized) for c in iter_ngrams(text, stopwords)}
    kept, _ = deoverlap(scored)
    return [Prediction(s, e, scored[(s, e)]) for s, e in kept]


def predict_records(lexicon: Lexicon, records: Iterable[CgifRecord], stopwords=None) -> list[PredictionRecord]:
    return [PredictionRecord(r.game_id, r.location_key, predict(lexicon, r.text, stopwords)) for r in records]


def apply_threshold(predictions: Iterable[Prediction], p_min: float) -> list[Prediction]:
    """Predictions with ``p > p_min`` (strict), order preserved."""
    if not 0.0 <= p_min <= 1.0:
        raise ValueError("p_min must lie in [0, 1]")
    return [pr for pr in predictions if pr.p > p_min]


def lexicon_tagger(lexicon: Lexicon, p_min: float = 0.5, stopwords=None) -> Callable[[str], list[str]]:
    """A sentence -> CG-surfaces function for the narrative analyses."""
    def tag(text: str) -> list[str]:
        return [normalize(byte_slice(text, p.start, p.end)) for p in apply_threshold(predict(lexicon, text, stopwords), p_min)]

    return tag
