import pytest
from hypothesis import given, strategies as st

from conftest import NEAR_T_SERVE_IN
from rallyseq.events import (
    DIRECTION_PHRASES,
    SUBCLASSES,
    Event,
    EventVocabulary,
    all_valid_events,
    render_answer,
    render_sequence_answer,
)
from rallyseq.parsing import (
    BASE_LABELS,
    Matcher,
    SubclassMatch,
    match_subclass,
    parse_count_answer,
    parse_prediction,
    parse_single,
    split_sentences,
)
from strategies import event_lists, events

ALL = EventVocabulary.explicit(all_valid_events())


@pytest.mark.parametrize(
    "text, expected",
    [
        ("A. B.", ["A", "B"]),
        ("", []),
        ("  one!two?  three  ", ["one", "two", "three"]),
        ("...", []),
    ],
)
def test_split_sentences(text, expected):
    assert split_sentences(text) == expected


def test_split_concatenated_answer():
    text = "The near player hit a T serve in. The far player hit a forehand return last."
    assert len(split_sentences(text)) == 2


def test_match_actor():
    m = match_subclass("The near player hit a T serve in", "e1", ["near", "far"])
    assert m == SubclassMatch("e1", "matched", "near", ("near",))


def test_match_ambiguous_hand():
    m = match_subclass("The near player hit a forehand backhand stroke down the line in", "e2", ["forehand", "backhand"])
    assert m.status == "ambiguous"
    assert set(m.candidates_found) == {"forehand", "backhand"}


def test_match_missing():
    m = match_subclass("The player hit it somewhere", "e3", ["serve", "return", "stroke"])
    assert m.status == "missing"
    assert m.candidates_found == ()


def test_match_accepts_abbreviations_and_long_forms():
    labels = ["CC", "cross-court", "DL", "down the line"]
    assert match_subclass("hit it CC", "e4", labels).label == "CC"
    assert match_subclass("hit it cross-court", "e4", labels).label == "CC"
    assert match_subclass("hit it CC, cross-court", "e4", labels).status == "matched"
    assert match_subclass("cross-court then down the line", "e4", labels).status == "ambiguous"


def test_match_restricted_to_given_labels():
    # "wide" is a legal e4 label in general but not among the offered ones
    m = match_subclass("a wide serve down the line", "e4", ["DL"])
    assert m.label == "DL"


@pytest.mark.parametrize(
    "sentence",
    [
        "the ball went inside",
        "it clipped the line",
        "that was a winner",
        "inside out forehand",
        "into the net",
    ],
)
def test_in_does_not_match_inside_words(sentence):
    assert match_subclass(sentence, "e5", ["in", "last"]).status == "missing"


def test_inside_in_claims_the_word_in():
    s = "The near player hit a forehand inside in stroke last"
    assert match_subclass(s, "e5", ["in", "last"]).label == "last"
    assert match_subclass(s, "e4", list(DIRECTION_PHRASES)).label == "II"


@pytest.mark.parametrize("sentence", ["The serve was good", "That", "Tee shot", "a t serve"])
def test_T_only_standalone_uppercase(sentence):
    assert match_subclass(sentence, "e4", ["T"]).status == "missing"


def test_T_standalone():
    assert match_subclass("a T serve", "e4", ["T"]).label == "T"


def test_aliases():
    assert match_subclass("a forehand crosscourt stroke", "e4", ["CC"]).label == "CC"
    m = Matcher({"xc": ("e4", "CC")})
    assert match_subclass("a forehand xc stroke", "e4", ["CC"], matcher=m).label == "CC"
    assert match_subclass("a forehand crosscourt stroke", "e4", ["CC"], matcher=m).status == "missing"


def test_bad_alias_rejected():
    with pytest.raises(ValueError):
        Matcher({"zz": ("e4", "XX")})


def test_parse_single_serve():
    p = parse_prediction("The near player hit a T serve in.", ALL)
    assert p.events == (NEAR_T_SERVE_IN,)


def test_parse_garbage_gives_empty_slot():
    p = parse_prediction("The weather is nice.", ALL)
    assert p.events == (None,)
    assert len(p.sentences) == 1
    assert all(p.sentences[0][s].status == "missing" for s in SUBCLASSES)


def test_parse_empty_text():
    p = parse_prediction("", ALL)
    assert p.events == ()


def test_parse_stray_hand_ignored_for_serves():
    p = parse_prediction("The far player hit a forehand wide serve last.", ALL)
    assert p.events == (Event("far", None, "serve", "W", "last"),)


def test_parse_missing_hand_on_stroke_is_empty():
    p = parse_prediction("The far player hit a cross-court stroke last.", ALL)
    assert p.events == (None,)


def test_parse_inconsistent_combo_is_empty():
    # serve with a rally direction violates the taxonomy
    p = parse_prediction("The far player hit a cross-court serve last.", ALL)
    assert p.events == (None,)


def test_parse_frame_number_clause():
    text = "The near player hit a T serve in in frame 120. The far player hit a backhand wide return last in frame 160."
    p = parse_prediction(text, ALL)
    assert p.events == (NEAR_T_SERVE_IN, None)  # wide is not a rally direction
    text = "The near player hit a T serve in in frame 120. The far player hit a backhand inside in return last in frame 160."
    assert parse_prediction(text, ALL).events[1] == Event("far", "backhand", "return", "II", "last")


def test_parse_respects_vocabulary_labels():
    vocab = EventVocabulary.explicit([NEAR_T_SERVE_IN])
    # "far" is not a label in this vocabulary, so it is invisible to matching
    p = parse_prediction("The near far player hit a T serve in.", vocab)
    assert p.events == (NEAR_T_SERVE_IN,)


def test_parse_empty_vocabulary_rejected():
    with pytest.raises(ValueError):
        parse_prediction("x", EventVocabulary())


def test_parse_single_uses_whole_text():
    p = parse_single("Near player. T serve in.", ALL)
    assert p.events == (NEAR_T_SERVE_IN,)


@given(events)
def test_roundtrip_every_event(e):
    p = parse_prediction(render_answer(e), ALL)
    assert p.events == (e,)


@given(event_lists)
def test_roundtrip_sequences(evs):
    assert list(parse_prediction(render_sequence_answer(evs), ALL).events) == evs


def test_roundtrip_exhaustive():
    for e in all_valid_events():
        assert parse_prediction(render_answer(e), ALL).events == (e,)


LABELS_BY_SUB = {s: sorted({surface for surface, sub, _, _ in BASE_LABELS if sub == s}) for s in SUBCLASSES}


@given(events, st.sampled_from(SUBCLASSES), st.data())
def test_ambiguity_monotone(e, sub, data):
    base = render_answer(e)[:-1]
    extra = data.draw(st.lists(st.sampled_from(LABELS_BY_SUB[sub]), min_size=1, max_size=4))
    sentence = base
    status = match_subclass(sentence, sub, LABELS_BY_SUB[sub]).status
    for label in extra:
        sentence = f"{sentence} {label}"
        new = match_subclass(sentence, sub, LABELS_BY_SUB[sub]).status
        if status == "ambiguous":
            assert new == "ambiguous"
        status = new


@given(event_lists, st.randoms())
def test_vocabulary_order_irrelevant(evs, rnd):
    text = render_sequence_answer(evs)
    entries = all_valid_events()
    rnd.shuffle(entries)
    assert parse_prediction(text, EventVocabulary.explicit(entries)) == parse_prediction(text, ALL)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("7", 7),
        ("There are 12 actions", 12),
        ("3 or 4", None),
        ("", None),
        ("none", None),
        ("  05 ", 5),
    ],
)
def test_parse_count_answer(text, expected):
    assert parse_count_answer(text) == expected


def test_subclass_match_invariants():
    with pytest.raises(ValueError):
        SubclassMatch("e1", "matched", "near", ("near", "far"))
    with pytest.raises(ValueError):
        SubclassMatch("e1", "ambiguous", None, ("near",))
