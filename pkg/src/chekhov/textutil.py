"""Small text helpers shared by the labeler, corpus and evaluation code.

All span offsets in this package are UTF-8 byte offsets into the text they
annotate. Regexes run over ``str``, so results are converted with
:func:`byte_offset_map`.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from typing import Iterator, NamedTuple

_WS = re.compile(r"\s+")
# Whitespace- and punctuation-delimited tokens: word runs or single symbols.
_TOKEN = re.compile(r"\w+|[^\w\s]")
_ABBREVIATIONS = frozenset(
    "mr mrs ms dr st jr sr prof gen col capt lt sgt rev vs etc no fig mt ft inc ltd co".split()
)


class Token(NamedTuple):
    surface: str
    start: int
    end: int


def normalize(text: str) -> str:
    """Lowercase and collapse internal whitespace."""
    return _WS.sub(" ", text).strip().lower()


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def byte_offset_map(text: str) -> list[int]:
    """Return ``m`` with ``m[i]`` the byte offset of character ``i`` (len+1 entries)."""
    offsets = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        offsets[i] = pos
        pos += len(ch.encode("utf-8"))
    offsets[len(text)] = pos
    return offsets


def byte_len(text: str) -> int:
    return len(text.encode("utf-8"))


def byte_slice(text: str, start: int, end: int) -> str:
    return text.encode("utf-8")[start:end].decode("utf-8")


def tokenize(text: str) -> list[Token]:
    """Split on whitespace and punctuation boundaries, with byte offsets."""
    offsets = byte_offset_map(text)
    return [Token(m.group(), offsets[m.start()], offsets[m.end()]) for m in _TOKEN.finditer(text)]


def overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def tokens_covered(tokens: list[Token], spans) -> set[int]:
    """Indices of tokens lying fully inside at least one span."""
    covered: set[int] = set()
    starts = [t.start for t in tokens]
    for start, end in spans:
        i = bisect_left(starts, start)
        while i < len(tokens) and tokens[i].end <= end:
            covered.add(i)
            i += 1
    return covered


def split_sentences(text: str) -> list[str]:
    """Split on ``.``, ``!`` and ``?`` unless the period follows a known abbreviation
    or a single initial."""
    sentences: list[str] = []
    start = 0
    for m in re.finditer(r"[.!?]+(?=\s|$)", text):
        if m.group() == ".":
            words = text[start : m.start()].split()
            last = words[-1].lower().strip("\"'(") if words else ""
            if last in _ABBREVIATIONS or (len(last) == 1 and last.isalpha()):
                continue
        chunk = text[start : m.end()].strip()
        if chunk:
            sentences.append(chunk)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def iter_lines(path_or_lines) -> Iterator[str]:
    """Yield non-comment, non-blank stripped lines from a path or iterable of lines."""
    if isinstance(path_or_lines, (str, bytes)) or hasattr(path_or_lines, "__fspath__"):
        with open(path_or_lines, encoding="utf-8") as fh:
            yield from iter_lines(list(fh))
        return
    for line in path_or_lines:
        line = line.strip()
        if line and not line.startswith("#"):
            yield line


def fold(text: str) -> str:
    """Case-fold and straighten curly apostrophes for pattern matching."""
    return text.replace("’", "'").casefold()
