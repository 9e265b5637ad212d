from __future__ import annotations

import random

import pytest

from chekhov.corpus import ActionTarget, CgifRecord, NerSpan, TripodSynopsis
from chekhov.engine import LocationKey
from chekhov.evaluation import (
    at_overlap,
    category_ratios,
    format_eval_report,
    format_matrix,
    format_overlap,
    format_profile,
    format_ratio_table,
    occurrence_matrix,
    profile_csv,
    span_metrics,
    turning_point_profile,
    turning_point_regions,
)
from chekhov.explorer import DiscoveredBy

from oracles import brute_force, random_instance


def rec(text, spans, room="R", game="g"):
    return CgifRecord(game, LocationKey(room, "00000000"), text, tuple(spans), DiscoveredBy.WALKTHROUGH)


def test_identity_and_empty():
    gold = [rec("brass lamp here", [(0, 10)]), rec("a door", [(2, 6)], room="S")]
    r = span_metrics(gold, {g.key: list(g.spans) for g in gold})
    assert (r.span_f1, r.token_accuracy, r.span_precision, r.span_recall) == (1.0, 1.0, 1.0, 1.0)
    r = span_metrics(gold, {})
    assert (r.span_precision, r.span_recall, r.span_f1) == (0.0, 0.0, 0.0)
    assert r.counts["fn"] == 2


def test_unmatched_keys_reported():
    gold = [rec("a door", [(2, 6)])]
    stray = ("other", LocationKey("Nowhere", "11111111"))
    r = span_metrics(gold, {stray: [(0, 1)]})
    assert r.unmatched == ["other::Nowhere::11111111"]
    assert "without a gold record" in format_eval_report(r)


def test_metrics_match_brute_force():
    rng = random.Random(42)
    for _ in range(200):
        gold, predicted = random_instance(rng)
        r = span_metrics(gold, predicted)
        tp, fp, fn, correct, total = brute_force(gold, predicted)
        assert (r.counts["tp"], r.counts["fp"], r.counts["fn"]) == (tp, fp, fn)
        assert (r.counts["tokens_correct"], r.counts["tokens_total"]) == (correct, total)
        p = tp / (tp + fp) if tp + fp else 0.0
        rc = tp / (tp + fn) if tp + fn else 0.0
        assert r.span_precision == p and r.span_recall == rc
        assert r.span_f1 == (2 * p * rc / (p + rc) if p + rc else 0.0)


def test_category_ratio_eighteen():
    cg = {"d1": [(0, 100)]}
    ner = {"d1": [NerSpan(i, i + 2, "product") for i in range(0, 90, 5)] + [NerSpan(200, 205, "product")]}
    rows = category_ratios(cg, ner)
    assert [(r.category, r.nu_cgr, r.nu_ner, r.ratio) for r in rows] == [("product", 18, 1, 18.0)]
    assert "18.0" in format_ratio_table(rows)


def test_category_ratio_guard_and_order():
    cg = {"d1": [(0, 10)], "d2": [(0, 4)]}
    ner = {
        "d1": [NerSpan(2, 5, "person"), NerSpan(20, 25, "person"), NerSpan(8, 12, "place"), NerSpan(0, 3, "date")],
        "d2": [NerSpan(3, 6, "place"), NerSpan(10, 12, "place"), NerSpan(10, 12, "work")],
    }
    rows = category_ratios(cg, ner)
    assert [r.category for r in rows] == ["place", "person", "work"]
    assert all(r.nu_ner > 0 for r in rows)  # "date" only touches CGs
    assert category_ratios(cg, {}) == []
    assert len(category_ratios(cg, ner, top_k=1)) == 1


def _fixture():
    rng = random.Random(3)
    vocab = [f"thing{i}" for i in range(15)]
    preds = [(rng.choice(vocab).upper() if rng.random() < 0.2 else rng.choice(vocab), round(rng.random(), 2)) for _ in range(20)]
    ats = [ActionTarget(v, v, rng.randint(1, 4)) for v in rng.sample(vocab, 8)]
    ats += [ActionTarget("north", "north", 3), ActionTarget("xyzzy", "xyzzy", 1)]
    return preds, ats


def _hand_oracle(preds, ats, t, mode):
    labeled = [s.lower() for s, p in preds if p > t]
    at_names = [a.normalized for a in ats]
    if mode == "all_ats":
        num = len([s for s in labeled if s in at_names])
        den = len(labeled)
        at_num = sum(a.count for a in ats if a.normalized in labeled)
        at_den = sum(a.count for a in ats)
    else:
        uniq = set(labeled)
        num, den = len([s for s in uniq if s in at_names]), len(uniq)
        at_num, at_den = len([a for a in ats if a.normalized in uniq]), len(ats)
    return (num / den if den else None), at_num / at_den


@pytest.mark.parametrize("mode", ["all_ats", "unique_ats"])
def test_at_overlap_matches_hand_oracle(mode):
    preds, ats = _fixture()
    thresholds = [0.0, 0.5, 0.65, 0.8, 0.95, 1.0]
    reports = at_overlap(preds, ats, thresholds, mode)
    assert len(reports) == len(thresholds)
    for r, t in zip(reports, thresholds):
        assert (r.share_cgs_in_at, r.share_ats_labeled) == _hand_oracle(preds, ats, t, mode)
    assert reports[-1].share_cgs_in_at is None  # nothing clears p > 1
    assert "n/a" in format_overlap(reports)


def test_at_overlap_edges():
    ats = [ActionTarget("lamp", "lamp", 2), ActionTarget("door", "door", 1)]
    r = at_overlap([("lamp", 1.0), ("Door", 1.0), ("rug", 1.0)], ats, [0.5])[0]
    assert r.share_ats_labeled == 1.0 and r.share_cgs_in_at == pytest.approx(2 / 3)
    assert at_overlap([("lamp", 1.0)], [], [0.5])[0].share_ats_labeled is None
    with pytest.raises(ValueError):
        at_overlap([], ats, [0.8, 0.5])
    with pytest.raises(ValueError):
        at_overlap([], ats, [0.5], mode="bogus")


def test_at_overlap_monotone_random():
    rng = random.Random(9)
    for _ in range(100):
        vocab = [f"w{i}" for i in range(rng.randint(1, 12))]
        preds = [(rng.choice(vocab), rng.random()) for _ in range(rng.randint(0, 30))]
        ats = [ActionTarget(v, v, rng.randint(1, 5)) for v in rng.sample(vocab, rng.randint(1, len(vocab)))]
        for mode in ("all_ats", "unique_ats"):
            shares = [r.share_ats_labeled for r in at_overlap(preds, ats, [0.5, 0.65, 0.8, 0.95], mode)]
            assert all(a >= b for a, b in zip(shares, shares[1:]))


def syn(sentences, tps=(0, 1, 2, 3, 4), story_id="s"):
    return TripodSynopsis(story_id, tuple(sentences), tuple(tps))


def test_profile_word_deltas():
    s = syn([" ".join(["w"] * 10)] + [" ".join(["w"] * 6)] * 4)
    p = turning_point_profile([s], lambda _: 0)
    assert p.delta_words_per_sentence == pytest.approx((3.2, -0.8, -0.8, -0.8, -0.8))
    assert p.delta_cg_per_sentence == (0.0,) * 5
    assert "+3.200" in format_profile(p)
    assert profile_csv(p).splitlines()[0] == "turning_point,delta_cg_per_sentence,delta_words_per_sentence"


def test_profile_counter_may_return_lists_and_skips_bad():
    good = syn(["lamp", "lamp key", "x", "x", "x"])

    class Broken:
        story_id = "bad"
        sentences = ("a", "b")
        turning_points = (0, 1)

    p = turning_point_profile([good, Broken()], lambda s: [w for w in s.split() if w != "x"])
    assert p.stories == 1 and p.skipped == 1
    assert p.delta_cg_per_sentence == pytest.approx((0.4, 1.4, -0.6, -0.6, -0.6))


def test_profile_deltas_sum_to_zero():
    rng = random.Random(1)
    for _ in range(50):
        n = rng.randint(5, 30)
        sents = [" ".join("w" for _ in range(rng.randint(1, 20))) for _ in range(n)]
        s = syn(sents, sorted(rng.sample(range(n), 5)))
        for region in ("sentence", "segment"):
            p = turning_point_profile([s], lambda t: rng.randint(0, 3), region)
            assert abs(sum(p.delta_cg_per_sentence)) < 1e-9
            assert abs(sum(p.delta_words_per_sentence)) < 1e-9


def test_regions():
    s = syn([f"s{i}" for i in range(8)], (0, 2, 3, 5, 6))
    assert turning_point_regions(s) == [["s0"], ["s2"], ["s3"], ["s5"], ["s6"]]
    assert turning_point_regions(s, "segment") == [["s0", "s1"], ["s2"], ["s3", "s4"], ["s5"], ["s6", "s7"]]
    with pytest.raises(ValueError):
        turning_point_regions(s, "chapter")


def words(text):
    return [w for w in text.lower().split() if w.startswith("cg")]


def test_matrix_single_occurrences():
    s = syn(["cga", "cgb cgc", "cgd", "cge", "plain"])
    m = occurrence_matrix([s], words)
    assert m.diagonal() == pytest.approx([20.0, 40.0, 20.0, 20.0, 0.0])
    assert all(m.values[i][j] == 0 for i in range(5) for j in range(5) if i != j)


def test_matrix_reoccurrence():
    m = occurrence_matrix([syn(["cga", "x", "CGA again", "x", "x"])], words)
    assert m.values[0][0] == 100.0 and m.values[0][2] == 100.0
    assert sum(m.diagonal()) == pytest.approx(100.0)
    assert all(m.values[i][j] == 0 for i in range(5) for j in range(i))
    assert format_matrix(m).startswith("TP # |")


def test_matrix_empty_and_random_structure():
    m = occurrence_matrix([syn(["x"] * 5)], words)
    assert m.first_occurrences == 0 and all(v == 0 for row in m.values for v in row)
    rng = random.Random(4)
    for _ in range(50):
        stories = []
        for k in range(rng.randint(1, 5)):
            n = rng.randint(5, 15)
            sents = [" ".join(f"cg{rng.randint(0, 6)}" for _ in range(rng.randint(0, 3))) for _ in range(n)]
            stories.append(syn(sents, sorted(rng.sample(range(n), 5)), f"s{k}"))
        m = occurrence_matrix(stories, words, rng.choice(["sentence", "segment"]))
        assert all(m.values[i][j] == 0 for i in range(5) for j in range(i))
        assert all(0 <= v <= 100 for row in m.values for v in row)
        if m.first_occurrences:
            assert abs(sum(m.diagonal()) - 100) <= 0.1
