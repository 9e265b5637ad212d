"""Candidate object mentions: stopword-bounded word n-grams with byte offsets."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from .textutil import byte_offset_map, fold, normalize, overlaps

MAX_NGRAM = 3
_WORD = re.compile(r"[^\W\d_]+(?:['’][^\W\d_]+)*")
_JOINER = re.compile(r"[ \t]+")


@dataclass(frozen=True)
class CandidateSpan:
    start: int
    end: int
    surface: str
    normalized: str

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "surface": self.surface, "normalized": self.normalized}


def data_lines(name: str) -> list[str]:
    return resources.files("chekhov.data").joinpath(name).read_text(encoding="utf-8").splitlines()


def load_stopwords_lines(lines: Iterable[str]) -> frozenset[str]:
    return frozenset(fold(l.strip()) for l in lines if l.strip() and not l.strip().startswith("#"))


@lru_cache(maxsize=None)
def builtin_stopwords() -> frozenset[str]:
    return load_stopwords_lines(data_lines("stopwords.txt"))


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        return builtin_stopwords()
    return load_stopwords_lines(Path(path).read_text(encoding="utf-8").splitlines())


def iter_ngrams(description: str, stopwords: frozenset[str] | None = None) -> list[CandidateSpan]:
    """Every 1..3-token window inside runs of non-stopword words, all occurrences.

    Words in a run must be separated by spaces or tabs only; punctuation,
    digits, newlines and stopwords end the run.
    """
    stop = builtin_stopwords() if stopwords is None else stopwords
    offsets = byte_offset_map(description)
    runs: list[list[re.Match]] = []
    run: list[re.Match] = []
    for m in _WORD.finditer(description):
        if fold(m.group()) in stop:
            if run:
                runs.append(run)
            run = []
            continue
        if run and not _JOINER.fullmatch(description[run[-1].end() : m.start()]):
            runs.append(run)
            run = []
        run.append(m)
    if run:
        runs.append(run)

    out = []
    for run in runs:
        for i in range(len(run)):
            for n in range(1, min(MAX_NGRAM, len(run) - i) + 1):
                a, b = run[i].start(), run[i + n - 1].end()
                surface = description[a:b]
                out.append(CandidateSpan(offsets[a], offsets[b], surface, normalize(surface)))
    out.sort(key=lambda c: (c.start, -c.end))
    return out


def extract_candidates(description: str, stopwords: frozenset[str] | None = None) -> list[CandidateSpan]:
    """Candidate mentions deduplicated by normalized form, earliest occurrence kept."""
    if not description:
        raise ValueError("description must be non-empty")
    seen: set[str] = set()
    out = []
    for cand in iter_ngrams(description, stopwords):
        if cand.normalized not in seen:
            seen.add(cand.normalized)
            out.append(cand)
    return out


def deoverlap(spans: Iterable[tuple[int, int]]) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Greedy longest-first, then earliest-start selection of non-overlapping spans.

    Returns ``(kept, dropped)``, ``kept`` sorted by start.
    """
    kept: list[tuple[int, int]] = []
    dropped: list[tuple[int, int]] = []
    for span in sorted(set(spans), key=lambda s: (s[0] - s[1], s[0])):
        if any(overlaps(span, k) for k in kept):
            dropped.append(span)
        else:
            kept.append(span)
    kept.sort()
    return kept, dropped
