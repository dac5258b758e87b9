"""Shot taxonomy, answer rendering and rally structure checks."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import AnnotationError, EmptySequence, InvalidEvent

ACTORS = ("near", "far")
HANDS = ("forehand", "backhand")
SHOTS = ("serve", "return", "stroke")
SERVE_DIRECTIONS = ("T", "B", "W")
RALLY_DIRECTIONS = ("CC", "DL", "DM", "IO", "II")
DIRECTIONS = SERVE_DIRECTIONS + RALLY_DIRECTIONS
OUTCOMES = ("in", "last")

SUBCLASSES = ("e1", "e2", "e3", "e4", "e5")
SUBCLASS_FIELDS = {
    "e1": "actor",
    "e2": "hand",
    "e3": "shot",
    "e4": "direction",
    "e5": "outcome",
}

# phrase used in answer text for each direction code
DIRECTION_PHRASES = {
    "T": "T",
    "B": "body",
    "W": "wide",
    "CC": "cross-court",
    "DL": "down the line",
    "DM": "down the middle",
    "IO": "inside out",
    "II": "inside in",
}
_PHRASE_TO_CODE = {v.lower(): k for k, v in DIRECTION_PHRASES.items() if k != "T"}


def normalize_direction(value: str) -> str:
    """Map a direction code or its long phrase to the code."""
    if value in DIRECTION_PHRASES:
        return value
    code = _PHRASE_TO_CODE.get(value.strip().lower())
    if code is None and value.strip().upper() in DIRECTION_PHRASES:
        code = value.strip().upper()
    if code is None:
        raise InvalidEvent(f"unknown direction {value!r}")
    return code


@dataclass(frozen=True)
class Event:
    actor: str
    hand: Optional[str]
    shot: str
    direction: str
    outcome: str

    def __post_init__(self):
        if self.actor not in ACTORS:
            raise InvalidEvent(f"actor must be one of {ACTORS}, got {self.actor!r}")
        if self.shot not in SHOTS:
            raise InvalidEvent(f"shot must be one of {SHOTS}, got {self.shot!r}")
        if self.outcome not in OUTCOMES:
            raise InvalidEvent(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")
        if self.shot == "serve":
            if self.hand is not None:
                raise InvalidEvent("serves carry no hand")
            if self.direction not in SERVE_DIRECTIONS:
                raise InvalidEvent(f"serve direction must be one of {SERVE_DIRECTIONS}")
        else:
            if self.hand not in HANDS:
                raise InvalidEvent(f"{self.shot} needs hand in {HANDS}, got {self.hand!r}")
            if self.direction not in RALLY_DIRECTIONS:
                raise InvalidEvent(f"{self.shot} direction must be one of {RALLY_DIRECTIONS}")

    def label(self, subclass: str) -> Optional[str]:
        return getattr(self, SUBCLASS_FIELDS[subclass])

    def replace(self, **changes) -> "Event":
        values = {f: getattr(self, f) for f in SUBCLASS_FIELDS.values()}
        values.update(changes)
        return Event(**values)

    def sort_key(self) -> tuple:
        return (
            ACTORS.index(self.actor),
            SHOTS.index(self.shot),
            -1 if self.hand is None else HANDS.index(self.hand),
            DIRECTIONS.index(self.direction),
            OUTCOMES.index(self.outcome),
        )

    def to_dict(self) -> dict:
        d = {"actor": self.actor, "shot": self.shot, "direction": self.direction, "outcome": self.outcome}
        if self.hand is not None:
            d["hand"] = self.hand
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        try:
            return cls(
                actor=d["actor"],
                hand=d.get("hand"),
                shot=d["shot"],
                direction=normalize_direction(d["direction"]),
                outcome=d["outcome"],
            )
        except KeyError as exc:
            raise InvalidEvent(f"event record missing field {exc}") from None


def all_valid_events() -> list[Event]:
    """Every Event permitted by the field constraints (92 combinations)."""
    out = []
    for actor, outcome in itertools.product(ACTORS, OUTCOMES):
        for d in SERVE_DIRECTIONS:
            out.append(Event(actor, None, "serve", d, outcome))
        for shot, hand, d in itertools.product(("return", "stroke"), HANDS, RALLY_DIRECTIONS):
            out.append(Event(actor, hand, shot, d, outcome))
    return sorted(out, key=Event.sort_key)


def render_answer(e: Event, frame: Optional[int] = None) -> str:
    """One answer sentence for ``e``; ``frame`` appends the frame-number clause."""
    phrase = DIRECTION_PHRASES[e.direction]
    if e.shot == "serve":
        body = f"The {e.actor} player hit a {phrase} {e.shot} {e.outcome}"
    else:
        body = f"The {e.actor} player hit a {e.hand} {phrase} {e.shot} {e.outcome}"
    if frame is not None:
        body += f" in frame {frame}"
    return body + "."


def render_sequence_answer(events: Sequence[Event], frames: Optional[Sequence[int]] = None) -> str:
    if not events:
        raise EmptySequence("cannot render an empty event sequence")
    if frames is None:
        return " ".join(render_answer(e) for e in events)
    if len(frames) != len(events):
        raise ValueError("frames and events differ in length")
    return " ".join(render_answer(e, f) for e, f in zip(events, frames))


@dataclass(frozen=True)
class EventVocabulary:
    entries: frozenset = field(default_factory=frozenset)
    source: str = "derived-from-annotations"

    def __post_init__(self):
        if self.source not in ("derived-from-annotations", "explicit-list"):
            raise ValueError(f"unknown vocabulary source {self.source!r}")
        object.__setattr__(self, "entries", frozenset(self.entries))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, e):
        return e in self.entries

    def __iter__(self):
        return iter(self.sorted())

    def sorted(self) -> list[Event]:
        return sorted(self.entries, key=Event.sort_key)

    def labels(self, subclass: str) -> list[str]:
        """Labels of ``subclass`` that occur in the vocabulary, in taxonomy order."""
        order = {"e1": ACTORS, "e2": HANDS, "e3": SHOTS, "e4": DIRECTIONS, "e5": OUTCOMES}[subclass]
        present = {e.label(subclass) for e in self.entries} - {None}
        return [x for x in order if x in present]

    @classmethod
    def explicit(cls, events: Iterable[Event]) -> "EventVocabulary":
        return cls(frozenset(events), "explicit-list")

    def to_list(self) -> list[dict]:
        return [e.to_dict() for e in self.sorted()]


@dataclass(frozen=True)
class RallyAnnotation:
    rally_id: str
    clip_ref: str
    fps: float
    start_frame: int
    end_frame: int
    events: tuple  # of (frame, Event)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple((int(f), e) for f, e in self.events))
        if not self.events:
            raise AnnotationError(f"rally {self.rally_id}: no events")
        if self.start_frame > self.end_frame:
            raise AnnotationError(f"rally {self.rally_id}: start_frame after end_frame")
        frames = self.frames
        if frames[0] < self.start_frame or frames[-1] > self.end_frame:
            raise AnnotationError(f"rally {self.rally_id}: event frame outside rally bounds")
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise AnnotationError(f"rally {self.rally_id}: event frames not strictly increasing")

    @property
    def frames(self) -> list[int]:
        return [f for f, _ in self.events]

    @property
    def event_list(self) -> list[Event]:
        return [e for _, e in self.events]

    def __len__(self):
        return len(self.events)

    def to_dict(self) -> dict:
        return {
            "rally_id": self.rally_id,
            "clip": self.clip_ref,
            "fps": self.fps,
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "events": [{"frame": f, **e.to_dict()} for f, e in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RallyAnnotation":
        try:
            events = [(int(ev["frame"]), Event.from_dict(ev)) for ev in d["events"]]
            return cls(
                rally_id=str(d["rally_id"]),
                clip_ref=d["clip"],
                fps=float(d["fps"]),
                start_frame=int(d["start_frame"]),
                end_frame=int(d["end_frame"]),
                events=tuple(events),
            )
        except KeyError as exc:
            raise AnnotationError(f"rally record missing field {exc}") from None
        except InvalidEvent as exc:
            raise AnnotationError(f"rally {d.get('rally_id')}: {exc}") from None


def load_annotations(path) -> list[RallyAnnotation]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise AnnotationError(f"cannot read annotations {path}: {exc}") from None
    if not isinstance(data, list):
        raise AnnotationError(f"{path}: expected a JSON list of rally records")
    rallies = [RallyAnnotation.from_dict(r) for r in data]
    ids = [r.rally_id for r in rallies]
    if len(set(ids)) != len(ids):
        raise AnnotationError(f"{path}: duplicate rally_id")
    return rallies


def dump_annotations(rallies: Iterable[RallyAnnotation], path) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in rallies], indent=1) + "\n", encoding="utf-8")


def build_vocabulary(annotations: Iterable[RallyAnnotation]) -> EventVocabulary:
    return EventVocabulary(frozenset(e for r in annotations for _, e in r.events))


@dataclass(frozen=True)
class Violation:
    kind: str  # NotServeFirst | NotLastAtEnd | LastBeforeEnd | AlternationBroken
    index: int

    def __str__(self):
        return f"{self.kind}@{self.index}"


def validate_rally(events: Sequence[Event]) -> list[Violation]:
    """Check the structural regularities every real rally obeys.

    A rally opens with a serve, closes with the only ``last`` outcome and
    alternates between the near and far player.
    """
    if not events:
        raise EmptySequence("cannot validate an empty rally")
    out = []
    if events[0].shot != "serve":
        out.append(Violation("NotServeFirst", 0))
    for i, e in enumerate(events[:-1]):
        if e.outcome != "in":
            out.append(Violation("LastBeforeEnd", i))
    if events[-1].outcome != "last":
        out.append(Violation("NotLastAtEnd", len(events) - 1))
    for i in range(1, len(events)):
        if events[i].actor == events[i - 1].actor:
            out.append(Violation("AlternationBroken", i))
    return sorted(out, key=lambda v: (v.index, v.kind))
