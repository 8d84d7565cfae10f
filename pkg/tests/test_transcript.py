import random

import pytest
from hypothesis import given, strategies as st

from vortex.archive import SessionArchive
from vortex.core import Role, SessionClock, SessionRoster
from vortex.errors import ArchiveIOError, ValidationFailure
from vortex.transcript import (REDACTED, ActionRecord, ClippedWithWarning,
                               UnknownActor, Utterance, filter_by_confidence, load_transcript,
                               merge_entries, merge_streams, render_transcript_text,
                               write_transcript)

CLOCK = SessionClock(1_700_000_000_000_000, 600.0)
ROSTER = SessionRoster.full()


def merged(*streams, clock=CLOCK):
    return merge_entries(clock, ROSTER, streams)


def test_merge_cardinality_and_order():
    a = [Utterance(t, "Surgeon", f"s{t}") for t in (5, 50, 500)]
    b = [ActionRecord(t, "Nurse", f"n{t}") for t in (1, 49, 51, 599)]
    tr = merged(a, b)
    assert len(tr.entries) == 7
    assert tr.times == sorted(tr.times)


def test_roster_order_tie_break():
    tr = merged([Utterance(10, "Nurse", "n")], [Utterance(10, "Anesthesiologist", "a")],
                [Utterance(10, "Surgeon", "s")])
    assert [e.speaker for e in tr.entries] == ["Surgeon", "Anesthesiologist", "Nurse"]


def test_tie_break_keeps_stream_order_within_speaker():
    tr = merged([Utterance(10, "Surgeon", "first"), Utterance(10, "Surgeon", "second")])
    assert [e.text for e in tr.entries] == ["first", "second"]


def test_clamp_past_end_warns():
    with pytest.warns(ClippedWithWarning):
        tr = merged([Utterance(605, "Surgeon", "late")])
    assert tr.entries[0].t == 600.0
    assert tr.warnings


def test_clamp_before_start_warns():
    with pytest.warns(ClippedWithWarning):
        tr = merged([ActionRecord(-0.5, "Nurse", "early")])
    assert tr.entries[0].t == 0.0


def test_unknown_actor():
    with pytest.raises(UnknownActor):
        merged([Utterance(1, "Dr. Smith", "hello")])
    partial = SessionRoster.of([(1, "Surgeon")])
    with pytest.raises(UnknownActor):
        merge_entries(CLOCK, partial, [[Utterance(1, "Nurse", "hi")]])


def test_empty_utterance_rejected():
    with pytest.raises(ValidationFailure):
        Utterance(1, "Surgeon", "   ")
    with pytest.raises(ValidationFailure):
        Utterance(1, "Surgeon", "x", asr_confidence=1.5)


def test_render_empty():
    assert render_transcript_text(merged()) == ""


def test_render_single_utterance_golden():
    tr = merge_entries(SessionClock(0, 6000), ROSTER, [[Utterance(5653, "Surgeon", "Starting timeout")]])
    assert render_transcript_text(tr) == "[1:34:13] Surgeon: Starting timeout"


def test_render_action_and_whitespace():
    tr = merged([ActionRecord(61.9, "Anesthesiologist", "administered\nphenylephrine")])
    assert render_transcript_text(tr) == "[0:01:01] Anesthesiologist *administered phenylephrine*"


def test_fixture_renders_to_checked_in_text(fixture_transcript, data_dir):
    expected = (data_dir / "fixture_transcript" / "transcript.txt").read_text(encoding="utf-8")
    assert render_transcript_text(fixture_transcript) == expected
    assert expected.splitlines()[0] == ("[1:34:13] Surgeon: Starting timeout. "
                                        "Nurse, call for help and get blood in the room.")


def random_entries(rng, n):
    out = []
    for _ in range(n):
        who = rng.choice(ROSTER.aliases)
        t = rng.randint(0, 600)
        if rng.random() < 0.7:
            out.append(Utterance(t, who, rng.choice(["ok", "go", "blood", "pressure", "help"])))
        else:
            out.append(ActionRecord(t, who, rng.choice(["initiated timeout", "gave drug"])))
    return out


def test_render_injective_on_corpus():
    rng = random.Random(11)
    seen = {}
    for _ in range(500):
        tr = merged(random_entries(rng, rng.randint(0, 6)))
        key = tuple(tr.entries)
        text = render_transcript_text(tr)
        assert seen.setdefault(text, key) == key


entry_st = st.builds(
    Utterance, st.integers(0, 600), st.sampled_from(["Surgeon", "Anesthesiologist", "Nurse"]),
    st.sampled_from(["a", "b", "c"]))


@given(st.lists(entry_st, max_size=15), st.integers(0, 15))
def test_merge_associative_over_partitions(entries, cut):
    whole = merged(entries)
    split = merged(entries[:cut], entries[cut:])
    assert whole.entries == split.entries
    assert len(whole.entries) == len(entries)


def archive_with(streams):
    return SessionArchive(9, ROSTER, CLOCK, streams=streams)


def test_merge_streams_from_archive_records():
    arc = archive_with({
        Role.SURGEON: [{"type": "utterance", "t": 3.0, "text": "Starting timeout"},
                       {"type": "gaze", "t": 3.1, "dir": [0, 0, 1]}],
        Role.NURSE: [{"type": "action", "t": 2.0, "description": "initiated timeout"}],
    })
    tr = merge_streams(arc)
    assert render_transcript_text(tr) == ("[0:00:02] Nurse *initiated timeout*\n"
                                          "[0:00:03] Surgeon: Starting timeout")


def test_deny_list_redacts_planted_names():
    names = ["Dr. Alice Chen", "Bob", "Okafor"]
    arc = archive_with({
        Role.SURGEON: [{"type": "utterance", "t": 1.0, "text": "Bob, get Dr. Alice Chen please"}],
        Role.NURSE: [{"type": "utterance", "t": 2.0, "text": "Calling okafor now; Bobby is here"},
                     {"type": "action", "t": 3.0, "description": "paged Okafor"}],
    })
    text = render_transcript_text(merge_streams(arc, names))
    for name in names:
        assert name.lower() not in text.lower().replace("bobby", "")
    assert text.count(REDACTED) == 4
    assert "Bobby" in text  # whole tokens only


def test_write_and_load_round_trip(tmp_path):
    tr = merged([Utterance(1.5, "Surgeon", "go", 0.9)], [ActionRecord(2, "Nurse", "initiated timeout")])
    write_transcript(tr, tmp_path / "t")
    back = load_transcript(tmp_path / "t")
    assert back == tr
    assert (tmp_path / "t" / "transcript.txt").read_text() == render_transcript_text(tr)


def test_load_missing(tmp_path):
    with pytest.raises(ArchiveIOError):
        load_transcript(tmp_path)


def test_filter_by_confidence_keeps_actions_and_unscored():
    tr = merged([Utterance(1, "Surgeon", "low", 0.4), Utterance(2, "Surgeon", "hi", 0.95),
                 Utterance(3, "Surgeon", "unscored")], [ActionRecord(4, "Nurse", "act")])
    kept = filter_by_confidence(tr, 0.5)
    assert [getattr(e, "text", None) for e in kept.entries] == ["hi", "unscored", None]


def test_archive_write_load_round_trip(tmp_path):
    arc = SessionArchive(9, ROSTER, CLOCK, event_log=[{"kind": "Timeout", "t": 1.0, "actor": "Nurse"}],
                         streams={r: [{"type": "utterance", "t": 1.0, "text": r.value}] for r in Role},
                         rtt_stats={"Nurse": {"mean_ms": 40.0}}, incomplete=["Surgeon"],
                         scenario={"name": "Bleeding"})
    arc.write(tmp_path / "a")
    assert SessionArchive.load(tmp_path / "a") == arc
    assert sorted(p.name for p in (tmp_path / "a" / "streams").iterdir()) == [
        "Anesthesiologist.jsonl", "Nurse.jsonl", "Surgeon.jsonl"]


def test_archive_missing_dir(tmp_path):
    with pytest.raises(ArchiveIOError):
        SessionArchive.load(tmp_path / "none")
