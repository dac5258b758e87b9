"""Edit score, single-event accuracy, counting and corpus statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .errors import InputMisaligned
from .events import SUBCLASSES, Event, RallyAnnotation


def _same(x, y) -> bool:
    # an unparsable slot (None) never matches anything, itself included
    return x is not None and y is not None and x == y


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance with events as atomic tokens."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (0 if _same(x, y) else 1)))
        prev = cur
    return prev[-1]


def edit_score(pred: Sequence, truth: Sequence) -> float:
    longer = max(len(pred), len(truth))
    if longer == 0:
        return 100.0
    return (1.0 - levenshtein(pred, truth) / longer) * 100.0


@dataclass
class CountStats:
    exact_match_accuracy: float
    mean_abs_diff: float
    mean_true_count: float
    sd_true_count: float
    sd_kind: str = "population"


def count_metrics(pred_counts: Sequence[Optional[int]], true_counts: Sequence[int]) -> CountStats:
    if len(pred_counts) != len(true_counts):
        raise InputMisaligned(f"{len(pred_counts)} predictions for {len(true_counts)} truths")
    n = len(true_counts)
    if n == 0:
        return CountStats(0.0, 0.0, 0.0, 0.0)
    hits = sum(1 for p, t in zip(pred_counts, true_counts) if p is not None and p == t)
    diffs = [abs(t) if p is None else abs(p - t) for p, t in zip(pred_counts, true_counts)]
    mean = sum(true_counts) / n
    var = sum((t - mean) ** 2 for t in true_counts) / n
    return CountStats(hits / n, sum(diffs) / n, mean, math.sqrt(var))


def single_event_accuracy(parsed, truths: Sequence[Event]) -> tuple[dict, float]:
    """Per-sub-class and overall accuracy of single-event predictions.

    ``parsed`` holds one single-sentence ParsedPrediction per truth. The hand
    sub-class is vacuously correct when the true shot is a serve.
    """
    if len(parsed) != len(truths):
        raise InputMisaligned(f"{len(parsed)} predictions for {len(truths)} truths")
    correct = {s: 0 for s in SUBCLASSES}
    overall = 0
    for p, truth in zip(parsed, truths):
        if len(p.sentences) != 1:
            raise InputMisaligned("single-event predictions must hold exactly one sentence")
        ok = _subclass_hits(p.sentences[0], truth)
        for s in SUBCLASSES:
            correct[s] += ok[s]
        overall += all(ok.values())
    n = len(truths)
    if n == 0:
        return {s: 0.0 for s in SUBCLASSES}, 0.0
    return {s: correct[s] / n for s in SUBCLASSES}, overall / n


def _subclass_hits(matches: Optional[dict], truth: Event) -> dict:
    out = {}
    for s in SUBCLASSES:
        if s == "e2" and truth.shot == "serve":
            out[s] = True
        elif matches is None:
            out[s] = False
        else:
            m = matches[s]
            out[s] = m.matched and m.label == truth.label(s)
    return out


def positional_accuracy(parsed, truths: Sequence[Sequence[Event]]) -> tuple[dict, float]:
    """Sub-class accuracy of sequence predictions, sentence i against true event i.

    True events with no corresponding sentence count as wrong on every
    applicable sub-class.
    """
    if len(parsed) != len(truths):
        raise InputMisaligned(f"{len(parsed)} predictions for {len(truths)} truths")
    correct = {s: 0 for s in SUBCLASSES}
    overall = total = 0
    for p, seq in zip(parsed, truths):
        for i, truth in enumerate(seq):
            ok = _subclass_hits(p.sentences[i] if i < len(p.sentences) else None, truth)
            for s in SUBCLASSES:
                correct[s] += ok[s]
            overall += all(ok.values())
            total += 1
    if total == 0:
        return {s: 0.0 for s in SUBCLASSES}, 0.0
    return {s: correct[s] / total for s in SUBCLASSES}, overall / total


def nearest_rank(sorted_values: Sequence[float], q: float):
    if not sorted_values:
        raise ValueError("no values")
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def corpus_stats(annotations: Sequence[RallyAnnotation]) -> dict:
    counts = sorted(len(r) for r in annotations)
    if not counts:
        raise ValueError("corpus_stats needs at least one rally")
    return {
        "n_rallies": len(counts),
        "mean": sum(counts) / len(counts),
        "lower_quartile": nearest_rank(counts, 0.25),
        "median": nearest_rank(counts, 0.5),
        "upper_quartile": nearest_rank(counts, 0.75),
        "max": counts[-1],
    }


@dataclass
class EvalReport:
    per_rally_edit: dict
    mean_edit_score: float
    pooled_edit_score: float
    subclass_accuracy: dict
    overall_accuracy: float
    count_stats: CountStats
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        return format_report(self)


def format_report(report: EvalReport) -> str:
    lines = []
    w = 48

    def rule():
        lines.append("+" + "-" * (w + 12) + "+")

    def row(k, v):
        lines.append(f"| {k:<{w}} | {v:>7} |")

    rule()
    row("Sub-class", "Accuracy")
    rule()
    for s in SUBCLASSES:
        row(s, f"{report.subclass_accuracy[s]:.2f}")
    row("Overall", f"{report.overall_accuracy:.2f}")
    rule()
    row("Variation", "Edit")
    rule()
    row(report.notes.get("variant", "run") + f" ({len(report.per_rally_edit)} rallies)", f"{report.mean_edit_score:.1f}")
    row("pooled edits", f"{report.pooled_edit_score:.1f}")
    rule()
    c = report.count_stats
    row("Accuracy", f"{c.exact_match_accuracy:.2f}")
    row("Average difference in number of events", f"{c.mean_abs_diff:.2f}")
    row("Average correct number of event", f"{c.mean_true_count:.2f}")
    row(f"Standard Deviation of correct number ({c.sd_kind})", f"{c.sd_true_count:.2f}")
    rule()
    return "\n".join(lines)
