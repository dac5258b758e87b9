"""Tennis rally event-sequence toolkit: datasets, answer parsing and scoring."""

from .events import (
    Event,
    EventVocabulary,
    RallyAnnotation,
    build_vocabulary,
    load_annotations,
    render_answer,
    render_sequence_answer,
    validate_rally,
)
from .metrics import corpus_stats, count_metrics, edit_score, levenshtein
from .parsing import parse_count_answer, parse_prediction, split_sentences

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EventVocabulary",
    "RallyAnnotation",
    "build_vocabulary",
    "load_annotations",
    "render_answer",
    "render_sequence_answer",
    "validate_rally",
    "corpus_stats",
    "count_metrics",
    "edit_score",
    "levenshtein",
    "parse_count_answer",
    "parse_prediction",
    "split_sentences",
]
