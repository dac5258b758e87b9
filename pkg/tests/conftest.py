import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rallyseq.events import Event, EventVocabulary, RallyAnnotation, all_valid_events  # noqa: E402
from rallyseq.fusion import DetectionTrack, FrameDetections  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"
COURT = (100, 500, 700, 500, 250, 200, 550, 200)

NEAR_T_SERVE_IN = Event("near", None, "serve", "T", "in")
FAR_FH_CC_RETURN_LAST = Event("far", "forehand", "return", "CC", "last")


def golden(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


@pytest.fixture
def full_vocab():
    return EventVocabulary.explicit(all_valid_events())


@pytest.fixture
def two_event_rally():
    return RallyAnnotation(
        "R1", "clips/R1.mp4", 25.0, 10, 12,
        ((10, NEAR_T_SERVE_IN), (12, FAR_FH_CC_RETURN_LAST)),
    )


def _pose(ox, oy):
    return tuple((ox + k, oy + k) for k in range(17))


@pytest.fixture
def golden_track():
    """Three frames (10..12); ball missing on frame 11."""
    frames = []
    for i, f in enumerate((10, 11, 12)):
        frames.append(
            FrameDetections(
                frame=f,
                far_bbox=(300 + 2 * i, 150 + i, 330 + 2 * i, 200 + i),
                near_bbox=(370 + 2 * i, 420 + i, 430 + 2 * i, 520 + i),
                ball=(-1, -1) if f == 11 else (410 + 5 * i, 300 + 5 * i),
                court=COURT,
                far_pose=_pose(300, 150),
                near_pose=_pose(370, 420),
            )
        )
    return DetectionTrack(tuple(frames))


def rally_from_counts(counts, prefix="S"):
    """Well-formed rallies with the given numbers of events."""
    out = []
    for k, n in enumerate(counts):
        evs, actor = [], "near"
        for i in range(n):
            outcome = "last" if i == n - 1 else "in"
            e = (
                Event(actor, None, "serve", "W", outcome)
                if i == 0
                else Event(actor, "backhand", "stroke", "DM", outcome)
            )
            evs.append((100 + 30 * i, e))
            actor = "far" if actor == "near" else "near"
        out.append(RallyAnnotation(f"{prefix}{k:02d}", f"{prefix}{k:02d}.mp4", 25.0, 90, 100 + 30 * n, tuple(evs)))
    return out


ACCEPTANCE_RESULTS: dict = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        doc = report.nodeid.split("::")[-1]
        ACCEPTANCE_RESULTS[doc] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS.items():
        mark = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{mark}] {name}")
