import csv

import pytest
from hypothesis import given, strategies as st

from conftest import FAR_FH_CC_RETURN_LAST, NEAR_T_SERVE_IN, golden
from rallyseq.dataset import (
    DEFAULT_PROMPT,
    PromptVariant,
    build_dataset,
    build_prompt,
    build_samples,
    cut_single_event_clips,
    estimate_prompt_tokens,
    max_stride_fitting,
    read_dataset,
    write_cutlist,
    write_dataset,
)
from rallyseq.errors import BudgetTooSmall, EmptyCoordinateList, TrackRequired
from rallyseq.events import Event, EventVocabulary, RallyAnnotation, all_valid_events, build_vocabulary
from rallyseq.fusion import DetectionTrack, FrameDetections, subsample_track
from rallyseq.parsing import parse_count_answer, parse_prediction
from strategies import annotations

ALL = EventVocabulary.explicit(all_valid_events())


def _rally(frames, start, end):
    evs = []
    actor = "near"
    for i, f in enumerate(frames):
        outcome = "last" if i == len(frames) - 1 else "in"
        e = Event(actor, None, "serve", "T", outcome) if i == 0 else Event(actor, "forehand", "stroke", "CC", outcome)
        evs.append((f, e))
        actor = "far" if actor == "near" else "near"
    return RallyAnnotation("X", "x.mp4", 25.0, start, end, tuple(evs))


def test_cut_windows_three_events():
    r = _rally([100, 160, 230], 80, 300)
    assert [w for _, w in cut_single_event_clips(r)] == [(90, 159), (150, 229), (220, 300)]


def test_cut_window_clamped_single_event():
    assert [w for _, w in cut_single_event_clips(_rally([5], 0, 50))] == [(0, 50)]


def test_cut_window_close_events():
    assert cut_single_event_clips(_rally([10, 12], 0, 40))[0][1] == (0, 11)


@given(annotations())
def test_cut_windows_tile_rally(r):
    wins = [w for _, w in cut_single_event_clips(r)]
    assert wins[-1][1] == r.end_frame
    for (f, _), (s, e) in zip(r.events, wins):
        assert s == max(r.start_frame, f - 10)
        assert r.start_frame <= s <= f <= e <= r.end_frame
    for (_, e1), (s2, _), f2 in zip(wins, wins[1:], r.frames[1:]):
        assert e1 == f2 - 1


def test_default_sequence_worked_example():
    r = RallyAnnotation("P", "p.mp4", 25.0, 0, 100, ((10, NEAR_T_SERVE_IN), (40, FAR_FH_CC_RETURN_LAST)))
    s = build_prompt(r, PromptVariant("default_sequence"))
    assert s.prompt == "What is happening in the tennis video?"
    assert s.answer == "The near player hit a T serve in. The far player hit a forehand cross-court return last."
    assert s.frame_window == (0, 100)


def test_event_count_given_prefix():
    r = _rally([10, 20, 30, 40], 0, 60)
    s = build_prompt(r, PromptVariant("event_count_given"))
    assert s.prompt.startswith("Given that there are 4 tennis actions in this video,")


def test_frame_numbers_clause():
    r = RallyAnnotation("F", "f.mp4", 25.0, 100, 200, ((120, NEAR_T_SERVE_IN),))
    s = build_prompt(r, PromptVariant("frame_numbers"))
    assert s.answer == "The near player hit a T serve in in frame 120."


def test_event_count_query():
    r = _rally([10, 20, 30], 0, 60)
    s = build_prompt(r, PromptVariant("event_count_query"))
    assert s.prompt == "How many tennis actions are there in this video?"
    assert s.answer == "3"
    assert build_prompt(r, PromptVariant("event_count_query"), count_query_prompt="Count?").prompt == "Count?"


def test_single_event_samples():
    r = _rally([100, 160, 230], 80, 300)
    samples = build_samples(r, PromptVariant("single_event"))
    assert [s.sample_id for s in samples] == ["X#00", "X#01", "X#02"]
    assert samples[1].frame_window == (150, 229)
    assert samples[1].prompt == DEFAULT_PROMPT
    assert samples[1].answer == "The far player hit a forehand cross-court stroke in."
    with pytest.raises(ValueError):
        build_prompt(r, PromptVariant("single_event"))


def test_variant_defaults_and_invariants():
    assert PromptVariant("bbox_prompt").stride == 1
    assert PromptVariant("bbox_ball_court_prompt").stride == 2
    assert PromptVariant("keypoint_prompt").keypoint_set == "all17"
    assert PromptVariant("keypoint_prompt").stride == 20
    assert PromptVariant("keypoint_prompt", keypoint_set="hands_feet4").stride == 5
    with pytest.raises(ValueError):
        PromptVariant("bbox_prompt", keypoint_set="all17")
    with pytest.raises(ValueError):
        PromptVariant("bbox_prompt", stride=0)
    with pytest.raises(ValueError):
        PromptVariant("nope")


@pytest.mark.parametrize(
    "variant, name",
    [
        (PromptVariant("bbox_prompt", 1), "bbox_prompt_s1.txt"),
        (PromptVariant("bbox_ball_court_prompt", 2), "bbox_ball_court_prompt_s2.txt"),
        (PromptVariant("bbox_ball_court_prompt", 1), "bbox_ball_court_prompt_s1.txt"),
        (PromptVariant("keypoint_prompt", 2, "hands_feet4"), "keypoint_prompt_hands4_s2.txt"),
    ],
)
def test_coordinate_prompts_golden(two_event_rally, golden_track, variant, name):
    s = build_prompt(two_event_rally, variant, golden_track)
    assert s.prompt == golden(name)
    assert s.answer == render_default(two_event_rally)


def render_default(r):
    return build_prompt(r, PromptVariant("default_sequence")).answer


def test_keypoint_all17_lists_every_joint(two_event_rally, golden_track):
    s = build_prompt(two_event_rally, PromptVariant("keypoint_prompt", 3, "all17"), golden_track)
    far = s.prompt.split("far player's keypoints: ")[1].split("], and")[0] + "]"
    assert far.count("(") == 17
    assert far.startswith("[(300, 150), (301, 151)")


def test_coordinate_prompt_bit_stable(two_event_rally, golden_track):
    v = PromptVariant("bbox_ball_court_prompt", 1)
    assert build_prompt(two_event_rally, v, golden_track).prompt == build_prompt(two_event_rally, v, golden_track).prompt


def test_track_required(two_event_rally):
    with pytest.raises(TrackRequired):
        build_prompt(two_event_rally, PromptVariant("bbox_prompt"))


def test_empty_coordinate_list(two_event_rally):
    track = DetectionTrack((FrameDetections(500),))
    with pytest.raises(EmptyCoordinateList):
        build_prompt(two_event_rally, PromptVariant("bbox_prompt"), track)


def test_subsample_track():
    track = DetectionTrack(tuple(FrameDetections(i) for i in range(11)))
    assert subsample_track(track, 2).frame_indices() == [0, 2, 4, 6, 8, 10]
    assert subsample_track(track, 1) == track
    big = DetectionTrack(tuple(FrameDetections(i) for i in range(100)))
    assert len(subsample_track(big, 20)) == 5


def test_token_estimate_base_template():
    assert estimate_prompt_tokens(DEFAULT_PROMPT) == 10  # ceil(7 words * 1.3)
    assert estimate_prompt_tokens(DEFAULT_PROMPT, factor=1.0) == 7


def _long_track(n, start=0):
    return DetectionTrack(tuple(
        FrameDetections(start + i, far_bbox=(1, 2, 3, 4), near_bbox=(5, 6, 7, 8), ball=(9, 9), court=(1,) * 8)
        for i in range(n)
    ))


def test_token_estimate_monotone_in_stride():
    r = _rally([5, 50], 0, 99)
    track = _long_track(100)
    prev = None
    for stride in (1, 2, 4, 8, 16, 32, 64):
        t = estimate_prompt_tokens(build_prompt(r, PromptVariant("bbox_ball_court_prompt", stride), track))
        if prev is not None:
            assert t <= prev
        prev = t


def test_max_stride_fitting():
    r = _rally([5, 50], 0, 99)
    track = _long_track(100)
    v = PromptVariant("bbox_ball_court_prompt")
    s = max_stride_fitting(400, track, v, r)
    fits = lambda k: estimate_prompt_tokens(build_prompt(r, PromptVariant(v.kind, k), track)) <= 400
    assert fits(s)
    assert s == 1 or not fits(s - 1)
    with pytest.raises(BudgetTooSmall):
        max_stride_fitting(20, track, v, r)


def test_dataset_roundtrip_and_cutlist(tmp_path, two_event_rally):
    other = _rally([5, 30, 60], 0, 90)
    samples = build_dataset([other, two_event_rally], PromptVariant("default_sequence"))
    assert [s.sample_id for s in samples] == ["R1", "X"]
    write_dataset(samples, tmp_path / "d.json")
    back = read_dataset(tmp_path / "d.json")
    assert [(s.sample_id, s.prompt, s.answer, s.clip_ref, s.frame_window) for s in back] == [
        (s.sample_id, s.prompt, s.answer, s.clip_ref, s.frame_window) for s in samples
    ]
    write_cutlist(samples, tmp_path / "cut.csv")
    rows = list(csv.reader(open(tmp_path / "cut.csv")))
    assert rows == [
        ["rally_id", "clip_ref", "start_frame", "end_frame"],
        ["R1", "clips/R1.mp4", "10", "12"],
        ["X", "x.mp4", "0", "90"],
    ]


def test_conversation_record_shape(two_event_rally):
    rec = build_prompt(two_event_rally, PromptVariant("default_sequence")).to_record()
    assert rec["video"] == "clips/R1.mp4"
    assert rec["conversations"][0] == {"from": "human", "value": "What is happening in the tennis video?"}
    assert rec["conversations"][1]["from"] == "gpt"


@given(st.lists(annotations(), min_size=1, max_size=4))
def test_default_answers_parse_back(rallies):
    vocab = build_vocabulary(rallies)
    for r in rallies:
        ans = build_prompt(r, PromptVariant("default_sequence")).answer
        assert list(parse_prediction(ans, vocab).events) == r.event_list
        fr = build_prompt(r, PromptVariant("frame_numbers")).answer
        assert list(parse_prediction(fr, vocab).events) == r.event_list


@given(annotations())
def test_count_variants_consistent(r):
    given_prompt = build_prompt(r, PromptVariant("event_count_given")).prompt
    assert given_prompt.startswith(f"Given that there are {len(r)} tennis actions")
    assert parse_count_answer(build_prompt(r, PromptVariant("event_count_query")).answer) == len(r)
