"""Span metrics, NER-category ratios, action-target overlap and turning-point analytics."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from statistics import fmean
from typing import Callable, Iterable, Mapping, Sequence, Sized

from .corpus import ActionTarget, CgifRecord, NerSpan, Span, to_bio
from .textutil import normalize, overlaps

N_TURNING_POINTS = 5
TURNING_POINT_NAMES = ("Opportunity", "Change of Plans", "Point of No Return", "Major Setback", "Climax")


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass
class EvalReport:
    token_accuracy: float
    span_precision: float
    span_recall: float
    span_f1: float
    counts: dict[str, int]
    unmatched: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def span_metrics(
    gold: Sequence[CgifRecord],
    predicted: Mapping[tuple, Iterable[Span]],
) -> EvalReport:
    """Exact-match span P/R/F1 plus BIO token accuracy, micro-averaged.

    ``predicted`` maps ``(game_id, location_key)`` to spans; missing keys count
    as empty predictions and keys without a gold record are reported.
    """
    tp = fp = fn = correct = total = 0
    gold_keys = set()
    for rec in gold:
        gold_keys.add(rec.key)
        pred = set(predicted.get(rec.key, ()))
        gold_set = set(rec.spans)
        hits = len(gold_set & pred)
        tp += hits
        fp += len(pred) - hits
        fn += len(gold_set) - hits
        g_tags = to_bio(rec.text, rec.spans).tags
        p_tags = to_bio(rec.text, sorted(pred)).tags
        correct += sum(a == b for a, b in zip(g_tags, p_tags))
        total += len(g_tags)
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    unmatched = sorted(f"{g}::{k.room_name}::{k.body_digest}" for g, k in set(predicted) - gold_keys)
    return EvalReport(
        token_accuracy=_ratio(correct, total),
        span_precision=precision,
        span_recall=recall,
        span_f1=f1,
        counts={"tp": tp, "fp": fp, "fn": fn, "tokens_correct": correct, "tokens_total": total},
        unmatched=unmatched,
    )


@dataclass(frozen=True)
class CategoryRatioRow:
    category: str
    nu_cgr: int
    nu_ner: int

    @property
    def ratio(self) -> float:
        return self.nu_cgr / self.nu_ner

    def to_dict(self) -> dict:
        return {"category": self.category, "nu_cgr": self.nu_cgr, "nu_ner": self.nu_ner, "ratio": self.ratio}


def category_ratios(
    cg_spans: Mapping[str, Sequence[Span]],
    ner: Mapping[str, Sequence[NerSpan]],
    top_k: int | None = 5,
) -> list[CategoryRatioRow]:
    """Per NER category: entities touching any CG span vs entities that do not.

    Categories whose non-CG count is zero have no defined ratio and are left out.
    """
    cgr: Counter[str] = Counter()
    non: Counter[str] = Counter()
    for doc, entities in ner.items():
        cgs = cg_spans.get(doc, ())
        for ent in entities:
            if any(overlaps((ent.start, ent.end), cg) for cg in cgs):
                cgr[ent.category] += 1
            else:
                non[ent.category] += 1
    rows = [CategoryRatioRow(c, cgr[c], non[c]) for c in sorted(set(cgr) | set(non)) if non[c] > 0]
    rows.sort(key=lambda r: (-r.ratio, r.category))
    return rows if top_k is None else rows[:top_k]


@dataclass(frozen=True)
class OverlapReport:
    threshold: float
    share_cgs_in_at: float | None  # None when nothing clears the threshold
    share_ats_labeled: float | None  # None when there are no action targets
    mode: str
    labeled: int

    def to_dict(self) -> dict:
        return asdict(self)


MODES = ("all_ats", "unique_ats")


def at_overlap(
    predictions: Iterable[tuple[str, float]],
    action_targets: Sequence[ActionTarget],
    thresholds: Sequence[float],
    mode: str = "all_ats",
) -> list[OverlapReport]:
    """Overlap between thresholded CG predictions and human action targets.

    ``predictions`` are ``(surface, p)`` pairs. In ``all_ats`` mode both shares
    count occurrences (prediction instances, AT counts); in ``unique_ats`` mode
    they count distinct normalized surfaces.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    preds = [(normalize(s), p) for s, p in predictions]
    at_counts = {at.normalized: at.count for at in action_targets}
    at_total = sum(at_counts.values())
    reports = []
    for t in thresholds:
        labeled = [s for s, p in preds if p > t]
        surfaces = set(labeled)
        if mode == "all_ats":
            cg_num, cg_den = sum(s in at_counts for s in labeled), len(labeled)
            at_num = sum(c for s, c in at_counts.items() if s in surfaces)
            at_den = at_total
        else:
            cg_num, cg_den = len(surfaces & at_counts.keys()), len(surfaces)
            at_num, at_den = len(at_counts.keys() & surfaces), len(at_counts)
        reports.append(
            OverlapReport(
                threshold=t,
                share_cgs_in_at=cg_num / cg_den if cg_den else None,
                share_ats_labeled=at_num / at_den if at_den else None,
                mode=mode,
                labeled=cg_den,
            )
        )
    return reports


# -- turning points ----------------------------------------------------------


def _count(value) -> int:
    return value if isinstance(value, int) else len(value)


def turning_point_regions(synopsis, region: str = "sentence") -> list[list[str]]:
    """Sentences belonging to each turning point.

    ``sentence``: just the annotated sentence. ``segment``: from the annotated
    sentence up to the next turning point (the last runs to the end).
    """
    tps = list(synopsis.turning_points)
    sentences = list(synopsis.sentences)
    if len(tps) != N_TURNING_POINTS or any(b <= a for a, b in zip(tps, tps[1:])):
        raise ValueError(f"{synopsis.story_id}: malformed turning points {tps}")
    if tps[0] < 0 or tps[-1] >= len(sentences):
        raise ValueError(f"{synopsis.story_id}: turning point out of range")
    if region == "sentence":
        return [[sentences[i]] for i in tps]
    if region == "segment":
        bounds = tps + [len(sentences)]
        return [sentences[bounds[i] : bounds[i + 1]] for i in range(N_TURNING_POINTS)]
    raise ValueError(f"unknown region kind {region!r}")


@dataclass
class TurningPointProfile:
    delta_cg_per_sentence: tuple[float, ...]
    delta_words_per_sentence: tuple[float, ...]
    stories: int
    skipped: int

    def to_dict(self) -> dict:
        return asdict(self)


def turning_point_profile(
    synopses: Iterable,
    cg_counter: Callable[[str], int | Sized],
    region: str = "sentence",
) -> TurningPointProfile:
    """Per-turning-point deviation of CGs/sentence and words/sentence.

    Each story's five region means are centred on their own average; the
    centred values are then averaged over stories.
    """
    per_story_cg: list[list[float]] = []
    per_story_words: list[list[float]] = []
    skipped = 0
    for syn in synopses:
        try:
            regions = turning_point_regions(syn, region)
        except ValueError:
            skipped += 1
            continue
        cg = [fmean(_count(cg_counter(s)) for s in sents) for sents in regions]
        words = [fmean(len(s.split()) for s in sents) for sents in regions]
        cg_base, word_base = fmean(cg), fmean(words)
        per_story_cg.append([c - cg_base for c in cg])
        per_story_words.append([w - word_base for w in words])

    def average(rows: list[list[float]]) -> tuple[float, ...]:
        if not rows:
            return (0.0,) * N_TURNING_POINTS
        return tuple(fmean(col) for col in zip(*rows))

    return TurningPointProfile(average(per_story_cg), average(per_story_words), len(per_story_cg), skipped)


@dataclass
class OccurrenceMatrix:
    values: list[list[float]]
    first_occurrences: int
    stories: int

    def diagonal(self) -> list[float]:
        return [self.values[i][i] for i in range(N_TURNING_POINTS)]

    def to_dict(self) -> dict:
        return asdict(self)


def occurrence_matrix(
    synopses: Iterable,
    cg_tagger: Callable[[str], Iterable[str]],
    region: str = "sentence",
) -> OccurrenceMatrix:
    """Where CGs first appear (diagonal) and where they reappear (right of it).

    A CG is identified by its normalized surface within one story. Counts are
    pooled over stories and scaled so the diagonal sums to 100.
    """
    counts = [[0] * N_TURNING_POINTS for _ in range(N_TURNING_POINTS)]
    stories = 0
    for syn in synopses:
        try:
            regions = turning_point_regions(syn, region)
        except ValueError:
            continue
        stories += 1
        present = [{normalize(s) for sent in sents for s in cg_tagger(sent)} for sents in regions]
        first: dict[str, int] = {}
        for i, surfaces in enumerate(present):
            for s in sorted(surfaces):
                first.setdefault(s, i)
        for s, i in first.items():
            counts[i][i] += 1
            for j in range(i + 1, N_TURNING_POINTS):
                if s in present[j]:
                    counts[i][j] += 1
    total = sum(counts[i][i] for i in range(N_TURNING_POINTS))
    scale = 100.0 / total if total else 0.0
    return OccurrenceMatrix([[c * scale for c in row] for row in counts], total, stories)


# -- text rendering ----------------------------------------------------------


def _fmt(x: float | None, digits: int = 3) -> str:
    return "n/a" if x is None else f"{x:.{digits}f}"


def format_eval_report(r: EvalReport) -> str:
    c = r.counts
    lines = [
        f"{'token accuracy':<16}{_fmt(r.token_accuracy)}",
        f"{'span precision':<16}{_fmt(r.span_precision)}",
        f"{'span recall':<16}{_fmt(r.span_recall)}",
        f"{'span F1':<16}{_fmt(r.span_f1)}",
        f"tp={c['tp']} fp={c['fp']} fn={c['fn']} tokens={c['tokens_correct']}/{c['tokens_total']}",
    ]
    if r.unmatched:
        lines.append(f"{len(r.unmatched)} prediction keys without a gold record")
    return "\n".join(lines)


def format_ratio_table(rows: Sequence[CategoryRatioRow]) -> str:
    lines = [f"{'category':<20}{'nu_cgr':>8}{'nu_ner':>8}{'ratio':>8}"]
    lines += [f"{r.category:<20}{r.nu_cgr:>8}{r.nu_ner:>8}{r.ratio:>8.1f}" for r in rows]
    return "\n".join(lines)


def format_overlap(reports: Sequence[OverlapReport]) -> str:
    lines = [f"{'p >':<8}{'CGs in AT':>12}{'ATs labeled':>13}{'labeled':>9}  mode"]
    for r in reports:
        lines.append(
            f"{r.threshold:<8.2f}{_fmt(r.share_cgs_in_at, 2):>12}{_fmt(r.share_ats_labeled, 2):>13}{r.labeled:>9}  {r.mode}"
        )
    return "\n".join(lines)


def format_profile(p: TurningPointProfile) -> str:
    lines = [f"{'TP':<4}{'name':<20}{'dCG/sent':>10}{'dWords/sent':>13}"]
    for i in range(N_TURNING_POINTS):
        lines.append(
            f"{i + 1:<4}{TURNING_POINT_NAMES[i]:<20}{p.delta_cg_per_sentence[i]:>+10.3f}{p.delta_words_per_sentence[i]:>+13.3f}"
        )
    lines.append(f"stories={p.stories} skipped={p.skipped}")
    return "\n".join(lines)


def format_matrix(m: OccurrenceMatrix) -> str:
    header = "TP # |" + "".join(f"{j + 1:>7}" for j in range(N_TURNING_POINTS))
    lines = [header, "-" * len(header)]
    for i, row in enumerate(m.values):
        lines.append(f"{i + 1:>4} |" + "".join(f"{v:>7.1f}" for v in row))
    return "\n".join(lines)


def profile_csv(p: TurningPointProfile) -> str:
    rows = ["turning_point,delta_cg_per_sentence,delta_words_per_sentence"]
    rows += [
        f"{i + 1},{p.delta_cg_per_sentence[i]!r},{p.delta_words_per_sentence[i]!r}" for i in range(N_TURNING_POINTS)
    ]
    return "\n".join(rows) + "\n"


def group_spans_by_doc(records: Iterable[CgifRecord]) -> dict[str, list[Span]]:
    out: dict[str, list[Span]] = defaultdict(list)
    for rec in records:
        out[rec.doc_id].extend(rec.spans)
    return dict(out)
