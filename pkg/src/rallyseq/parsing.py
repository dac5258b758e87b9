"""Turn free-form model output into per-sentence event predictions.

A sub-class counts as predicted when exactly one of its legal labels is
present in the sentence. Labels are matched on word boundaries with the
longest surface forms claimed first, so "inside in" is a direction and
does not also contribute the outcome "in".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .events import (
    ACTORS,
    DIRECTIONS,
    HANDS,
    OUTCOMES,
    SHOTS,
    SUBCLASSES,
    Event,
    EventVocabulary,
)
from .errors import InvalidEvent

# (surface, subclass, canonical label, case sensitive)
BASE_LABELS = (
    [(a, "e1", a, False) for a in ACTORS]
    + [(h, "e2", h, False) for h in HANDS]
    + [(s, "e3", s, False) for s in SHOTS]
    + [
        ("T", "e4", "T", True),
        ("B", "e4", "B", True),
        ("W", "e4", "W", True),
        ("body", "e4", "B", False),
        ("wide", "e4", "W", False),
        ("cross-court", "e4", "CC", False),
        ("down the line", "e4", "DL", False),
        ("down the middle", "e4", "DM", False),
        ("inside out", "e4", "IO", False),
        ("inside in", "e4", "II", False),
        ("CC", "e4", "CC", True),
        ("DL", "e4", "DL", True),
        ("DM", "e4", "DM", True),
        ("IO", "e4", "IO", True),
        ("II", "e4", "II", True),
    ]
    + [(o, "e5", o, False) for o in OUTCOMES]
)

DEFAULT_ALIASES = {
    "crosscourt": ("e4", "CC"),
    "cross court": ("e4", "CC"),
    "down-the-line": ("e4", "DL"),
    "down-the-middle": ("e4", "DM"),
    "inside-out": ("e4", "IO"),
    "inside-in": ("e4", "II"),
}

_TAXONOMY = {"e1": ACTORS, "e2": HANDS, "e3": SHOTS, "e4": DIRECTIONS, "e5": OUTCOMES}

# "in frame 120" clause emitted by the frame-number answer variant
_FRAME_CLAUSE = re.compile(r"(?<![\w-])in\s+frame\s+\d+", re.IGNORECASE)
_SENTENCE_SPLIT = re.compile(r"[.!?]")
_DIGIT_RUN = re.compile(r"\d+")


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(text or "") if s.strip()]


@dataclass(frozen=True)
class SubclassMatch:
    subclass: str
    status: str  # matched | missing | ambiguous
    label: Optional[str] = None
    candidates_found: tuple = ()

    def __post_init__(self):
        n = len(set(self.candidates_found))
        if self.status == "matched" and (n != 1 or self.label is None):
            raise ValueError("matched status needs exactly one candidate")
        if self.status == "ambiguous" and n < 2:
            raise ValueError("ambiguous status needs at least two candidates")
        if self.status == "missing" and n:
            raise ValueError("missing status cannot carry candidates")

    @property
    def matched(self) -> bool:
        return self.status == "matched"

    @classmethod
    def from_candidates(cls, subclass: str, candidates: Iterable[str]) -> "SubclassMatch":
        order = _TAXONOMY[subclass]
        found = tuple(sorted(set(candidates), key=order.index))
        if not found:
            return cls(subclass, "missing")
        if len(found) == 1:
            return cls(subclass, "matched", found[0], found)
        return cls(subclass, "ambiguous", None, found)


@dataclass(frozen=True)
class ParsedPrediction:
    sentences: tuple  # of {subclass: SubclassMatch}
    events: tuple  # of Optional[Event]

    def __post_init__(self):
        if len(self.sentences) != len(self.events):
            raise ValueError("sentences and events differ in length")

    def __len__(self):
        return len(self.events)


def _compile(surface: str, case_sensitive: bool) -> re.Pattern:
    words = [re.escape(w) for w in surface.split()]
    body = r"\s+".join(words)
    flags = 0 if case_sensitive else re.IGNORECASE
    return re.compile(rf"(?<![\w-]){body}(?![\w-])", flags)


class Matcher:
    """Label finder with a configurable alias table.

    ``aliases`` maps extra surface forms (matched case-insensitively) to
    ``(subclass, canonical label)``.
    """

    def __init__(self, aliases: Optional[Mapping[str, tuple]] = None):
        aliases = DEFAULT_ALIASES if aliases is None else aliases
        table = list(BASE_LABELS)
        for surface, (sub, canon) in sorted(aliases.items()):
            if sub not in _TAXONOMY or canon not in _TAXONOMY[sub]:
                raise ValueError(f"alias {surface!r} targets unknown label {sub}:{canon}")
            table.append((surface, sub, canon, False))
        # longest surface first; ties broken by the surface text for determinism
        table.sort(key=lambda t: (-len(t[0]), t[0]))
        self.table = [(s, sub, canon, _compile(s, cs)) for s, sub, canon, cs in table]
        self.aliases = dict(aliases)

    def canonical(self, subclass: str, label: str) -> str:
        """Canonical label for a surface form or code of ``subclass``."""
        if label in _TAXONOMY[subclass]:
            return label
        for s, sub, canon, pat in self.table:
            if sub == subclass and pat.fullmatch(label):
                return canon
        raise ValueError(f"{label!r} is not a label of {subclass}")

    def find(self, sentence: str) -> dict:
        """All labels present in ``sentence`` as {subclass: [canonical, ...]}."""
        text = _FRAME_CLAUSE.sub(lambda m: " " * len(m.group()), sentence)
        hits = []
        for surface, sub, canon, pat in self.table:
            for m in pat.finditer(text):
                hits.append((m.start(), m.end(), sub, canon))
        hits.sort(key=lambda h: (-(h[1] - h[0]), h[0]))
        taken: list[tuple[int, int]] = []
        found: dict[str, list[str]] = {s: [] for s in SUBCLASSES}
        for start, end, sub, canon in hits:
            if any(start < e and s < end for s, e in taken):
                continue
            taken.append((start, end))
            found[sub].append(canon)
        return found


DEFAULT_MATCHER = Matcher()


def match_subclass(
    sentence: str,
    subclass: str,
    vocabulary_labels: Iterable[str],
    matcher: Optional[Matcher] = None,
) -> SubclassMatch:
    matcher = matcher or DEFAULT_MATCHER
    allowed = {matcher.canonical(subclass, lab) for lab in vocabulary_labels}
    found = matcher.find(sentence)[subclass]
    return SubclassMatch.from_candidates(subclass, [c for c in found if c in allowed])


def _parse_sentence(sentence: str, allowed: dict, matcher: Matcher):
    found = matcher.find(sentence)
    matches = {
        sub: SubclassMatch.from_candidates(sub, [c for c in found[sub] if c in allowed[sub]])
        for sub in SUBCLASSES
    }
    need = ("e1", "e3", "e4", "e5")
    if not all(matches[s].matched for s in need):
        return matches, None
    shot = matches["e3"].label
    if shot == "serve":
        hand = None
    elif matches["e2"].matched:
        hand = matches["e2"].label
    else:
        return matches, None
    try:
        event = Event(
            actor=matches["e1"].label,
            hand=hand,
            shot=shot,
            direction=matches["e4"].label,
            outcome=matches["e5"].label,
        )
    except InvalidEvent:
        event = None
    return matches, event


def _allowed_labels(vocabulary: EventVocabulary) -> dict:
    if not len(vocabulary):
        raise ValueError("vocabulary is empty")
    return {sub: set(vocabulary.labels(sub)) for sub in SUBCLASSES}


def parse_prediction(
    text: str,
    vocabulary: EventVocabulary,
    matcher: Optional[Matcher] = None,
) -> ParsedPrediction:
    """One slot per sentence; a slot is ``None`` unless every applicable sub-class matched."""
    matcher = matcher or DEFAULT_MATCHER
    allowed = _allowed_labels(vocabulary)
    sentences, events = [], []
    for s in split_sentences(text):
        m, e = _parse_sentence(s, allowed, matcher)
        sentences.append(m)
        events.append(e)
    return ParsedPrediction(tuple(sentences), tuple(events))


def parse_single(
    text: str,
    vocabulary: EventVocabulary,
    matcher: Optional[Matcher] = None,
) -> ParsedPrediction:
    """Treat the whole answer as one sentence (single-event evaluation)."""
    matcher = matcher or DEFAULT_MATCHER
    m, e = _parse_sentence(text or "", _allowed_labels(vocabulary), matcher)
    return ParsedPrediction((m,), (e,))


def parse_count_answer(text: str) -> Optional[int]:
    runs = _DIGIT_RUN.findall(text or "")
    if len(runs) != 1:
        return None
    return int(runs[0])
