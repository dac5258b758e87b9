"""Seeded synthetic rallies and detector output for tests and demos."""

from __future__ import annotations

import json
import random
from pathlib import Path

from .events import HANDS, RALLY_DIRECTIONS, SERVE_DIRECTIONS, Event, RallyAnnotation

COURT = (100, 500, 700, 500, 250, 200, 550, 200)  # near-left, near-right, far-left, far-right


def random_rally(rng: random.Random, n_events: int, rally_id: str, start_frame: int = 0) -> RallyAnnotation:
    actor = rng.choice(("near", "far"))
    frame = start_frame + rng.randint(5, 40)
    events = []
    for i in range(n_events):
        outcome = "last" if i == n_events - 1 else "in"
        if i == 0:
            e = Event(actor, None, "serve", rng.choice(SERVE_DIRECTIONS), outcome)
        else:
            shot = "return" if i == 1 else "stroke"
            e = Event(actor, rng.choice(HANDS), shot, rng.choice(RALLY_DIRECTIONS), outcome)
        events.append((frame, e))
        actor = "far" if actor == "near" else "near"
        frame += rng.randint(20, 70)
    end = events[-1][0] + rng.randint(10, 60)
    return RallyAnnotation(rally_id, f"clips/{rally_id}.mp4", 25.0, start_frame, end, tuple(events))


def random_corpus(seed: int, n_rallies: int, max_events: int = 12) -> list[RallyAnnotation]:
    rng = random.Random(seed)
    return [random_rally(rng, rng.randint(1, max_events), f"R{i:04d}", rng.randint(0, 500)) for i in range(n_rallies)]


def _pose_in_box(box) -> list:
    x1, y1, x2, y2 = box
    w, h = x2 - x1, y2 - y1
    return [[round(x1 + w * (0.2 + 0.6 * ((k * 7) % 17) / 16)), round(y1 + h * (k + 1) / 18)] for k in range(17)]


def scene_records(frames, rng: random.Random, ball_missing=(), referee=True) -> list[dict]:
    """Detector records for a broadcast-style scene on ``COURT``.

    The near player stands around the near baseline, the far player around
    the far one; an optional referee sits far off to the side.
    """
    recs = []
    for f in frames:
        nx, fx = 400 + rng.randint(-60, 60), 400 + rng.randint(-40, 40)
        near = [nx - 30, 420 + rng.randint(-5, 5), nx + 30, 520 + rng.randint(-5, 5)]
        far = [fx - 15, 150 + rng.randint(-3, 3), fx + 15, 200 + rng.randint(-3, 3)]
        persons = [{"bbox": near, "conf": 0.9}, {"bbox": far, "conf": 0.8}]
        poses = [_pose_in_box(near), _pose_in_box(far)]
        if referee:
            ref = [1500, 300, 1540, 380]
            persons.append({"bbox": ref, "conf": 0.99})
            poses.append(_pose_in_box(ref))
        rng.shuffle(persons)
        ball = None if f in ball_missing else [rng.randint(100, 700), rng.randint(150, 520)]
        recs.append({"frame": f, "persons": persons, "court": list(COURT), "ball": ball, "poses": poses})
    return recs


def write_detections(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def write_corpus_with_detections(root, seed: int = 0, n_rallies: int = 5, max_events: int = 6):
    """Annotation file plus one raw detection file per rally under ``root``."""
    from .events import dump_annotations

    root = Path(root)
    det = root / "detections"
    det.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    rallies = random_corpus(seed, n_rallies, max_events)
    for r in rallies:
        write_detections(scene_records(range(r.start_frame, r.end_frame + 1), rng), det / f"{r.rally_id}.jsonl")
    dump_annotations(rallies, root / "annotations.json")
    return rallies
