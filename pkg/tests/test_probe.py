from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chekhov.candidates import deoverlap, extract_candidates, iter_ngrams, load_stopwords
from chekhov.engine import SessionConfig, open_session
from chekhov.explorer import DiscoveredBy, LocationRecord, Walkthrough, execute_walkthrough
from chekhov.probe import (
    TrivialityPatternSet,
    Verdict,
    classify_triviality,
    label_location,
    probe_candidate,
)
from chekhov.textutil import byte_slice

from conftest import FIXTURES, bfs_prefixes, random_world, write_world

PATTERNS = TrivialityPatternSet.builtin()


def test_extract_candidates_hand_offsets():
    text = "You see a brass lamp here."
    cands = {c.normalized: (c.start, c.end) for c in extract_candidates(text)}
    assert cands["brass lamp"] == (10, 20)
    assert cands["brass"] == (10, 15)
    assert cands["lamp"] == (16, 20)
    for stop in ("you", "a", "here"):
        assert stop not in cands
    for c in extract_candidates(text):
        assert text[c.start : c.end] == c.surface


def test_extract_candidates_all_stopwords_and_empty():
    assert extract_candidates("a the of") == []
    with pytest.raises(ValueError):
        extract_candidates("")


def test_extract_candidates_dedup_earliest():
    text = "A lamp. Another lamp."
    lamps = [c for c in extract_candidates(text) if c.normalized == "lamp"]
    assert len(lamps) == 1 and lamps[0].start == 2
    assert [c.start for c in iter_ngrams(text) if c.normalized == "lamp"] == [2, 16]


def test_extract_candidates_run_boundaries():
    # punctuation, digits and newlines break runs; a long run yields windows of up to 3
    norms = {c.normalized for c in extract_candidates("Hall\nold oak chest lid, 3 keys")}
    assert "hall old" not in norms
    assert {"old oak chest", "oak chest lid", "old oak", "chest lid", "keys"} <= norms
    assert "old oak chest lid" not in norms
    assert "lid keys" not in norms


def test_extract_candidates_byte_offsets_non_ascii():
    text = "Un café crème est là."
    for c in extract_candidates(text):
        assert byte_slice(text, c.start, c.end) == c.surface
    cafe = next(c for c in extract_candidates(text) if c.normalized == "café")
    assert (cafe.start, cafe.end) == (3, 8)


def test_custom_stopwords(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("# mine\nlamp\n")
    stop = load_stopwords(path)
    assert {c.normalized for c in extract_candidates("brass lamp", stop)} == {"brass"}


@given(st.text(alphabet=st.sampled_from(list("ab cé.\n\tZ'")), min_size=1, max_size=60))
@settings(max_examples=200, deadline=None)
def test_candidate_offsets_property(text):
    cands = extract_candidates(text)
    assert len({c.normalized for c in cands}) == len(cands)
    for c in cands:
        assert 0 <= c.start < c.end
        assert byte_slice(text, c.start, c.end) == c.surface
    assert cands == extract_candidates(text)


def test_pattern_file_fixture_drives_verdicts(tmp_path):
    path = tmp_path / "patterns.txt"
    path.write_text("# engine refusals\ncan't see any such thing\n")
    patterns = TrivialityPatternSet.from_file(path)
    assert classify_triviality("You can't see any such thing.", patterns) is Verdict.TRIVIAL
    assert classify_triviality("YOU CAN’T SEE ANY SUCH THING.", patterns) is Verdict.TRIVIAL
    assert classify_triviality("", patterns) is Verdict.TRIVIAL
    assert classify_triviality("   \n", patterns) is Verdict.TRIVIAL
    assert classify_triviality("The lamp glows with a faint inner light.", patterns) is Verdict.NONTRIVIAL
    assert classify_triviality("The lamp glows with a faint inner light.", PATTERNS) is Verdict.NONTRIVIAL


def test_builtin_patterns():
    assert PATTERNS.source == "builtin"
    assert len(PATTERNS.patterns) == 7
    assert classify_triviality("That's not a verb I recognise.", PATTERNS) is Verdict.TRIVIAL
    assert classify_triviality("You see nothing special about the dust.", PATTERNS) is Verdict.TRIVIAL
    with pytest.raises(ValueError):
        TrivialityPatternSet(())


def test_deoverlap_longest_first():
    kept, dropped = deoverlap([(16, 20), (10, 20), (30, 34), (10, 15)])
    assert kept == [(10, 20), (30, 34)]
    assert sorted(dropped) == [(10, 15), (16, 20)]
    kept, _ = deoverlap([(0, 4), (2, 6)])  # equal length: earliest start wins
    assert kept == [(0, 4)]


def _record(session, prefix):
    session.reset_and_replay(prefix)
    key, text = session.describe()
    return LocationRecord(session.story.game_id, key, text, tuple(prefix), DiscoveredBy.WALKTHROUGH)


def test_probe_candidate_verdicts(session):
    rec = _record(session, ["north", "west"])  # Cellar
    cands = {c.normalized: c for c in extract_candidates(rec.description)}
    assert probe_candidate(session, rec, cands["lamp"], PATTERNS).verdict is Verdict.NONTRIVIAL
    assert probe_candidate(session, rec, cands["dust"], PATTERNS).verdict is Verdict.TRIVIAL
    assert probe_candidate(session, rec, cands["crate"], PATTERNS).verdict is Verdict.TRIVIAL
    r = probe_candidate(session, rec, cands["rope"], PATTERNS)
    assert r.command == "examine rope" and r.response == "You can't see any such thing."


def test_probe_candidate_error_verdict(tiny):
    with open_session(tiny, SessionConfig()) as s:
        rec = _record(s, ["north", "west"])
        cand = extract_candidates(rec.description)[0]
        bad = LocationRecord(rec.game_id, rec.location, rec.description, ("north", "west", "down"), rec.discovered_by)
        result = probe_candidate(s, bad, cand, PATTERNS)
    assert result.verdict is Verdict.ERROR and "SessionHalted" in result.error
    with open_session(tiny, SessionConfig(max_moves=2)) as s:
        result = probe_candidate(s, rec, cand, PATTERNS)
    assert result.verdict is Verdict.ERROR and "MoveBudgetExhausted" in result.error


def test_label_cellar_exact_spans(session):
    rec = _record(session, ["north", "west"])
    assert len(extract_candidates(rec.description)) == 6
    ann = label_location(session, rec, PATTERNS)
    text = rec.description
    assert [byte_slice(text, s, e) for s, e in ann.spans] == ["lamp", "door"]
    assert len(ann.evidence) == 6


def test_label_foyer_longest_match(session):
    rec = _record(session, [])
    ann = label_location(session, rec, PATTERNS)
    surfaces = [byte_slice(rec.description, s, e) for s, e in ann.spans]
    assert surfaces == ["brass lamp", "door"]
    assert len(ann.dropped) == 1  # the inner "lamp"


def test_label_zero_candidates(tmp_path):
    story = write_world(tmp_path / "bare.world", "ROOM The\nDESC A the of.\n")
    with open_session(story, SessionConfig()) as s:
        ann = label_location(s, _record(s, []), PATTERNS)
    assert ann.spans == [] and ann.evidence == []


def test_label_projects_to_all_occurrences(tmp_path):
    story = write_world(
        tmp_path / "twice.world",
        "ROOM Den\nDESC A lamp here. A lamp there.\nOBJECT lamp RESPONSE It flickers.\n",
    )
    with open_session(story, SessionConfig()) as s:
        rec = _record(s, [])
        ann = label_location(s, rec, PATTERNS)
    assert [byte_slice(rec.description, a, b) for a, b in ann.spans] == ["lamp", "lamp"]


def test_annotation_invariants_on_fixture_walkthrough(session):
    wt = Walkthrough.from_file(FIXTURES / "walkthroughs" / "tiny.txt")
    for rec in execute_walkthrough(session, wt):
        ann = label_location(session, rec, PATTERNS)
        assert ann.spans == sorted(ann.spans)
        assert all(a[1] <= b[0] for a, b in zip(ann.spans, ann.spans[1:]))
        winners = {r.candidate.normalized for r in ann.evidence if r.verdict is Verdict.NONTRIVIAL}
        assert ann.surfaces() <= winners


@pytest.mark.parametrize("seed", range(5))
def test_mock_oracle_equivalence(tmp_path, seed):
    text, per_room = random_world(random.Random(seed))
    story = write_world(tmp_path / f"w{seed}.world", text)
    with open_session(story, SessionConfig()) as s:
        for room, prefix in bfs_prefixes(text).items():
            rec = _record(s, prefix)
            assert rec.location.room_name == room
            ann = label_location(s, rec, PATTERNS)
            cands = {c.normalized for c in extract_candidates(rec.description)}
            expected = {o for o, nontrivial in per_room[room].items() if nontrivial} & cands
            assert ann.surfaces() == expected
