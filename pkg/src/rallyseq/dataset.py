"""Prompt/answer sample construction for each experimental variant."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import BudgetTooSmall, EmptyCoordinateList, TrackRequired
from .events import RallyAnnotation, render_answer, render_sequence_answer
from .fusion import DetectionTrack, reduce_keypoints, subsample_track

KINDS = (
    "single_event",
    "default_sequence",
    "frame_numbers",
    "event_count_given",
    "event_count_query",
    "bbox_prompt",
    "bbox_ball_court_prompt",
    "keypoint_prompt",
)
COORDINATE_KINDS = ("bbox_prompt", "bbox_ball_court_prompt", "keypoint_prompt")
KEYPOINT_SETS = ("all17", "hands_feet4")

# frame interval used for each coordinate prompt in the reported experiments
DEFAULT_STRIDES = {
    "bbox_prompt": 1,
    "bbox_ball_court_prompt": 2,
    ("keypoint_prompt", "all17"): 20,
    ("keypoint_prompt", "hands_feet4"): 5,
}

DEFAULT_PROMPT = "What is happening in the tennis video?"
COUNT_GIVEN_PROMPT = "Given that there are {x} tennis actions in this video, what is happening in the tennis video?"
# invented wording; the experiments only describe it as asking for the number of actions
COUNT_QUERY_PROMPT = "How many tennis actions are there in this video?"

BBOX_PROMPT = (
    "Given this list of the far player's bounding box in each frame in format (x1, y1, x2, y2): {far_bbox}, "
    "and this list of the near player's bounding boxes in each frame in format (x1, y1, x2, y2): {near_bbox}, "
    "describe all the tennis actions in the video."
)
_BALL_COURT_CLAUSE = (
    "and this list of the tennis ball's coordinates in format (x, y): {ball}, "
    "and given the following court dimensions in the form of (x1, y1, x2, y2, x3, y3, x4, y4): {court}, "
    "describe the tennis actions in the video."
)
BBOX_BALL_COURT_PROMPT = (
    "Given this list of the far player's bounding box in format (x1, y1, x2, y2): {far_bbox}, "
    "and this list of the near player's bounding boxes in format (x1, y1, x2, y2): {near_bbox}, "
    + _BALL_COURT_CLAUSE
)
KEYPOINT_PROMPT = (
    "Given this list of the far player's keypoints: {far_keypoints}, "
    "and this list of the near player's keypoints: {near_keypoints}, "
    + _BALL_COURT_CLAUSE
)

CLIP_LEAD_FRAMES = 10


@dataclass(frozen=True)
class PromptVariant:
    kind: str = "default_sequence"
    stride: Optional[int] = None
    keypoint_set: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown variant kind {self.kind!r}")
        if self.kind == "keypoint_prompt":
            if self.keypoint_set is None:
                object.__setattr__(self, "keypoint_set", "all17")
            if self.keypoint_set not in KEYPOINT_SETS:
                raise ValueError(f"keypoint_set must be one of {KEYPOINT_SETS}")
        elif self.keypoint_set is not None:
            raise ValueError("keypoint_set only applies to keypoint_prompt")
        if self.stride is None:
            key = (self.kind, self.keypoint_set) if self.kind == "keypoint_prompt" else self.kind
            object.__setattr__(self, "stride", DEFAULT_STRIDES.get(key, 1))
        if int(self.stride) < 1:
            raise ValueError("stride must be >= 1")

    @property
    def needs_track(self) -> bool:
        return self.kind in COORDINATE_KINDS

    def tag(self) -> str:
        parts = [self.kind]
        if self.needs_track:
            parts.append(f"s{self.stride}")
        if self.keypoint_set:
            parts.append(self.keypoint_set)
        return "-".join(parts)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "stride": self.stride, "keypoint_set": self.keypoint_set}


@dataclass(frozen=True)
class PromptSample:
    sample_id: str
    rally_id: str
    clip_ref: str
    prompt: str
    answer: str
    variant: PromptVariant
    frame_window: tuple

    def __post_init__(self):
        if not self.prompt or not self.answer:
            raise ValueError(f"{self.sample_id}: prompt and answer must be non-empty")

    def to_record(self) -> dict:
        return {
            "id": self.sample_id,
            "rally_id": self.rally_id,
            "video": self.clip_ref,
            "frame_window": list(self.frame_window),
            "variant": self.variant.tag(),
            "conversations": [
                {"from": "human", "value": self.prompt},
                {"from": "gpt", "value": self.answer},
            ],
        }

    @classmethod
    def from_record(cls, rec: dict, variant: Optional[PromptVariant] = None) -> "PromptSample":
        conv = {c["from"]: c["value"] for c in rec["conversations"]}
        return cls(
            sample_id=rec["id"],
            rally_id=rec.get("rally_id", rec["id"]),
            clip_ref=rec["video"],
            prompt=conv["human"],
            answer=conv["gpt"],
            variant=variant or PromptVariant(),
            frame_window=tuple(rec.get("frame_window", ())),
        )


def cut_single_event_clips(r: RallyAnnotation) -> list[tuple]:
    """(event, (start, end)) per shot: from 10 frames before it up to the next shot."""
    out = []
    frames = r.frames
    for i, (f, e) in enumerate(r.events):
        start = max(r.start_frame, f - CLIP_LEAD_FRAMES)
        end = frames[i + 1] - 1 if i + 1 < len(frames) else r.end_frame
        out.append((e, (start, end)))
    return out


def _fmt(values) -> str:
    return "(" + ", ".join(str(int(v)) for v in values) + ")"


def format_tuples(rows: Iterable[Sequence]) -> str:
    return ", ".join(_fmt(r) for r in rows)


def format_keypoints(poses: Iterable[Sequence]) -> str:
    return ", ".join("[" + format_tuples(p) + "]" for p in poses)


def _window_track(track: DetectionTrack, r: RallyAnnotation, stride: int) -> DetectionTrack:
    inside = DetectionTrack(tuple(f for f in track.frames if r.start_frame <= f.frame <= r.end_frame))
    sub = subsample_track(inside, stride)
    if not len(sub):
        raise EmptyCoordinateList(f"rally {r.rally_id}: no track frames inside [{r.start_frame}, {r.end_frame}]")
    return sub


def coordinate_prompt(r: RallyAnnotation, v: PromptVariant, track: DetectionTrack) -> str:
    sub = _window_track(track, r, v.stride)
    far_bbox = format_tuples(f.far_bbox for f in sub)
    near_bbox = format_tuples(f.near_bbox for f in sub)
    ball = format_tuples(f.ball for f in sub)
    court = format_tuples(f.court for f in sub)
    if v.kind == "bbox_prompt":
        return BBOX_PROMPT.format(far_bbox=far_bbox, near_bbox=near_bbox)
    if v.kind == "bbox_ball_court_prompt":
        return BBOX_BALL_COURT_PROMPT.format(far_bbox=far_bbox, near_bbox=near_bbox, ball=ball, court=court)
    far_kp = format_keypoints(reduce_keypoints(f.far_pose, v.keypoint_set) for f in sub)
    near_kp = format_keypoints(reduce_keypoints(f.near_pose, v.keypoint_set) for f in sub)
    return KEYPOINT_PROMPT.format(far_keypoints=far_kp, near_keypoints=near_kp, ball=ball, court=court)


def build_prompt(
    r: RallyAnnotation,
    v: PromptVariant,
    track: Optional[DetectionTrack] = None,
    event_index: Optional[int] = None,
    count_query_prompt: str = COUNT_QUERY_PROMPT,
) -> PromptSample:
    """Build the sample for one rally (or one shot of it for ``single_event``)."""
    if v.needs_track and track is None:
        raise TrackRequired(f"variant {v.kind} needs a detection track for rally {r.rally_id}")
    window = (r.start_frame, r.end_frame)
    sample_id = r.rally_id
    events = r.event_list

    if v.kind == "single_event":
        if event_index is None:
            raise ValueError("single_event samples need an event_index")
        event, window = cut_single_event_clips(r)[event_index]
        sample_id = f"{r.rally_id}#{event_index:02d}"
        prompt, answer = DEFAULT_PROMPT, render_answer(event)
    elif v.kind == "default_sequence":
        prompt, answer = DEFAULT_PROMPT, render_sequence_answer(events)
    elif v.kind == "frame_numbers":
        prompt, answer = DEFAULT_PROMPT, render_sequence_answer(events, r.frames)
    elif v.kind == "event_count_given":
        prompt, answer = COUNT_GIVEN_PROMPT.format(x=len(events)), render_sequence_answer(events)
    elif v.kind == "event_count_query":
        prompt, answer = count_query_prompt, str(len(events))
    else:
        prompt, answer = coordinate_prompt(r, v, track), render_sequence_answer(events)

    return PromptSample(sample_id, r.rally_id, r.clip_ref, prompt, answer, v, window)


def build_samples(
    r: RallyAnnotation,
    v: PromptVariant,
    track: Optional[DetectionTrack] = None,
    count_query_prompt: str = COUNT_QUERY_PROMPT,
) -> list[PromptSample]:
    if v.kind == "single_event":
        return [build_prompt(r, v, track, i) for i in range(len(r))]
    return [build_prompt(r, v, track, count_query_prompt=count_query_prompt)]


def build_dataset(
    annotations: Sequence[RallyAnnotation],
    v: PromptVariant,
    tracks: Optional[dict] = None,
    count_query_prompt: str = COUNT_QUERY_PROMPT,
) -> list[PromptSample]:
    tracks = tracks or {}
    samples = []
    for r in sorted(annotations, key=lambda a: a.rally_id):
        samples.extend(build_samples(r, v, tracks.get(r.rally_id), count_query_prompt))
    return sorted(samples, key=lambda s: s.sample_id)


def estimate_prompt_tokens(sample, factor: float = 1.3) -> int:
    text = sample.prompt if isinstance(sample, PromptSample) else str(sample)
    return math.ceil(len(text.split()) * factor)


def max_stride_fitting(
    budget: int,
    track: DetectionTrack,
    variant: PromptVariant,
    rally: RallyAnnotation,
    factor: float = 1.3,
) -> int:
    """Smallest stride whose coordinate prompt fits ``budget`` estimated tokens."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    if not variant.needs_track:
        if estimate_prompt_tokens(build_prompt(rally, variant, event_index=0 if variant.kind == "single_event" else None), factor) <= budget:
            return 1
        raise BudgetTooSmall(f"{variant.kind} prompt exceeds {budget} tokens")
    n = sum(1 for f in track.frames if rally.start_frame <= f.frame <= rally.end_frame)
    for stride in range(1, max(n, 1) + 1):
        v = PromptVariant(variant.kind, stride, variant.keypoint_set)
        if estimate_prompt_tokens(coordinate_prompt(rally, v, track), factor) <= budget:
            return stride
    raise BudgetTooSmall(f"rally {rally.rally_id}: no stride fits {budget} tokens")


def write_dataset(samples: Sequence[PromptSample], path) -> None:
    records = [s.to_record() for s in samples]
    Path(path).write_text(json.dumps(records, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def read_dataset(path) -> list[PromptSample]:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return [PromptSample.from_record(rec) for rec in records]


def write_cutlist(samples: Sequence[PromptSample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rally_id", "clip_ref", "start_frame", "end_frame"])
        for s in samples:
            w.writerow([s.sample_id, s.clip_ref, s.frame_window[0], s.frame_window[1]])
