"""Fuse detector outputs into per-frame player, ball, court and pose tracks.

Image coordinates: origin top-left, y grows downward, so the near player
stands at the larger y. Absent detections are all-(-1) tuples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import FrameOutOfRange, InputError

SENTINEL_BOX = (-1, -1, -1, -1)
SENTINEL_POINT = (-1, -1)
SENTINEL_COURT = (-1,) * 8
N_KEYPOINTS = 17
SENTINEL_POSE = (SENTINEL_POINT,) * N_KEYPOINTS
# COCO order: left wrist, right wrist, left ankle, right ankle
HANDS_FEET = (9, 10, 15, 16)

DEFAULT_DISTANCE_FACTOR = 1.5


@dataclass(frozen=True)
class PersonDetection:
    bbox: tuple
    confidence: float = 1.0

    def __post_init__(self):
        box = tuple(float(v) for v in self.bbox)
        if len(box) != 4:
            raise InputError(f"bbox needs 4 values, got {self.bbox!r}")
        if box != SENTINEL_BOX and not (box[0] < box[2] and box[1] < box[3]):
            raise InputError(f"degenerate bbox {self.bbox!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "bbox", box)

    @property
    def foot_point(self) -> tuple:
        x1, y1, x2, y2 = self.bbox
        return ((x1 + x2) / 2.0, max(y1, y2))


@dataclass(frozen=True)
class FrameDetections:
    frame: int
    far_bbox: tuple = SENTINEL_BOX
    near_bbox: tuple = SENTINEL_BOX
    ball: tuple = SENTINEL_POINT
    court: tuple = SENTINEL_COURT
    far_pose: tuple = SENTINEL_POSE
    near_pose: tuple = SENTINEL_POSE

    def to_dict(self) -> dict:
        return {
            "far_bbox": list(self.far_bbox),
            "near_bbox": list(self.near_bbox),
            "ball": list(self.ball),
            "court": list(self.court),
            "far_pose": [list(p) for p in self.far_pose],
            "near_pose": [list(p) for p in self.near_pose],
        }

    @classmethod
    def from_dict(cls, frame: int, d: dict) -> "FrameDetections":
        return cls(
            frame=int(frame),
            far_bbox=tuple(d["far_bbox"]),
            near_bbox=tuple(d["near_bbox"]),
            ball=tuple(d["ball"]),
            court=tuple(d["court"]),
            far_pose=tuple(tuple(p) for p in d["far_pose"]),
            near_pose=tuple(tuple(p) for p in d["near_pose"]),
        )


@dataclass(frozen=True)
class DetectionTrack:
    frames: tuple  # FrameDetections ordered by frame

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(sorted(self.frames, key=lambda f: f.frame)))

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def frame_indices(self) -> list[int]:
        return [f.frame for f in self.frames]

    def at(self, frame: int) -> FrameDetections:
        for f in self.frames:
            if f.frame == frame:
                return f
        raise KeyError(frame)

    def to_dict(self) -> dict:
        return {"frames": {str(f.frame): f.to_dict() for f in self.frames}}

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionTrack":
        return cls(tuple(FrameDetections.from_dict(k, v) for k, v in d["frames"].items()))


def is_sentinel(values: Sequence) -> bool:
    return all(v == -1 for v in values)


def _baselines(court: Sequence[float]):
    """((near midpoint, near length), (far midpoint, far length)) of a court quad."""
    pts = sorted(((court[i], court[i + 1]) for i in range(0, 8, 2)), key=lambda p: (p[1], p[0]))
    far_pair, near_pair = pts[:2], pts[2:]

    def mid_len(pair):
        (ax, ay), (bx, by) = pair
        return ((ax + bx) / 2.0, (ay + by) / 2.0), math.hypot(bx - ax, by - ay)

    return mid_len(near_pair), mid_len(far_pair)


def select_players(
    persons: Iterable[PersonDetection],
    court: Optional[Sequence[float]],
    max_distance_factor: float = DEFAULT_DISTANCE_FACTOR,
    min_confidence: float = 0.0,
) -> tuple[tuple, tuple]:
    """Pick (near_bbox, far_bbox) from person detections.

    Each end of the court takes the detection whose foot point is closest
    to that baseline's midpoint, within ``max_distance_factor`` times the
    baseline length. A detection serves at most one end; the closer pairing
    claims it first.
    """
    if court is None or len(court) != 8 or is_sentinel(court):
        return SENTINEL_BOX, SENTINEL_BOX
    (near_mid, near_len), (far_mid, far_len) = _baselines(court)
    ends = {"near": (near_mid, near_len * max_distance_factor), "far": (far_mid, far_len * max_distance_factor)}

    pairs = []
    for p in persons:
        if p.bbox == SENTINEL_BOX or p.confidence < min_confidence:
            continue
        fx, fy = p.foot_point
        for end, (mid, limit) in ends.items():
            d = math.hypot(fx - mid[0], fy - mid[1])
            if d <= limit:
                pairs.append((d, end, p.bbox, -p.confidence))
    pairs.sort()

    chosen: dict[str, tuple] = {}
    used = set()
    for d, end, bbox, _ in pairs:
        if end in chosen or bbox in used:
            continue
        chosen[end] = bbox
        used.add(bbox)
    return chosen.get("near", SENTINEL_BOX), chosen.get("far", SENTINEL_BOX)


def reduce_keypoints(pose: Sequence, keypoint_set: str = "hands_feet4") -> tuple:
    if keypoint_set == "all17":
        return tuple(tuple(p) for p in pose)
    if keypoint_set != "hands_feet4":
        raise ValueError(f"unknown keypoint set {keypoint_set!r}")
    if len(pose) != N_KEYPOINTS:
        raise InputError(f"pose needs {N_KEYPOINTS} keypoints, got {len(pose)}")
    return tuple(tuple(pose[i]) for i in HANDS_FEET)


def _clean_point(p, size=None) -> tuple:
    x, y = float(p[0]), float(p[1])
    if x < 0 or y < 0:
        return SENTINEL_POINT
    return _clamp((x, y), size)


def _clamp(values, size=None) -> tuple:
    out = []
    for i, v in enumerate(values):
        v = max(0.0, float(v))
        if size is not None:
            v = min(v, size[i % 2] - 1)
        out.append(int(round(v)))
    return tuple(out)


def _clean_box(box, size=None) -> tuple:
    return SENTINEL_BOX if is_sentinel(box) else _clamp(box, size)


def _clean_pose(pose, size=None) -> tuple:
    if pose is None:
        return SENTINEL_POSE
    if len(pose) != N_KEYPOINTS:
        raise InputError(f"pose needs {N_KEYPOINTS} keypoints, got {len(pose)}")
    return tuple(_clean_point(p, size) for p in pose)


def _containment(pose, box) -> tuple[int, float]:
    x1, y1, x2, y2 = box
    pts = [p for p in pose if p != SENTINEL_POINT]
    inside = sum(1 for x, y in pts if x1 <= x <= x2 and y1 <= y <= y2)
    if not pts:
        return 0, math.inf
    cx, cy = (x1 + x2) / 2.0, (y1 + y2) / 2.0
    return inside, sum(math.hypot(x - cx, y - cy) for x, y in pts) / len(pts)


def match_poses(poses: Sequence, near_bbox: tuple, far_bbox: tuple) -> tuple[tuple, tuple]:
    """Attach poses to players by keypoint containment count.

    Ties go to the pose whose keypoints sit closer to the box centre on
    average. Returns cleaned (near_pose, far_pose).
    """
    cands = []
    for role, box in (("near", near_bbox), ("far", far_bbox)):
        if box == SENTINEL_BOX:
            continue
        for k, pose in enumerate(poses):
            inside, dist = _containment(pose, box)
            if inside:
                cands.append((-inside, dist, role, k))
    cands.sort()
    chosen: dict[str, int] = {}
    for _, _, role, k in cands:
        if role in chosen or k in chosen.values():
            continue
        chosen[role] = k
    near = poses[chosen["near"]] if "near" in chosen else SENTINEL_POSE
    far = poses[chosen["far"]] if "far" in chosen else SENTINEL_POSE
    return near, far


def assemble_track(
    frames: Iterable[int],
    persons_by_frame: Mapping[int, Sequence[PersonDetection]],
    court_by_frame: Mapping[int, Optional[Sequence[float]]],
    ball_by_frame: Mapping[int, Optional[Sequence[float]]],
    poses_by_frame: Mapping[int, Sequence],
    max_distance_factor: float = DEFAULT_DISTANCE_FACTOR,
    min_confidence: float = 0.0,
    frame_size: Optional[tuple] = None,
) -> DetectionTrack:
    frames = sorted(set(int(f) for f in frames))
    window = set(frames)
    for name, mapping in (
        ("persons", persons_by_frame),
        ("court", court_by_frame),
        ("ball", ball_by_frame),
        ("poses", poses_by_frame),
    ):
        stray = sorted(set(mapping) - window)
        if stray:
            raise FrameOutOfRange(f"{name} detections for frame {stray[0]} outside the rally window")

    out = []
    for f in frames:
        court = court_by_frame.get(f)
        court_ok = court is not None and len(court) == 8 and not is_sentinel(court)
        near, far = select_players(persons_by_frame.get(f, ()), court if court_ok else None, max_distance_factor, min_confidence)
        poses = [_clean_pose(p, frame_size) for p in poses_by_frame.get(f, ())]
        near_pose, far_pose = match_poses(poses, near, far)
        ball = ball_by_frame.get(f)
        ball_ok = ball is not None and len(ball) == 2 and not is_sentinel(ball)
        out.append(
            FrameDetections(
                frame=f,
                far_bbox=_clean_box(far, frame_size),
                near_bbox=_clean_box(near, frame_size),
                ball=_clean_point(ball, frame_size) if ball_ok else SENTINEL_POINT,
                court=_clamp(court, frame_size) if court_ok else SENTINEL_COURT,
                far_pose=far_pose,
                near_pose=near_pose,
            )
        )
    return DetectionTrack(tuple(out))


def subsample_track(track: DetectionTrack, stride: int) -> DetectionTrack:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return DetectionTrack(track.frames[::stride])


def read_raw_detections(path) -> dict:
    """Parse a detector JSON-lines file into the per-frame maps ``assemble_track`` takes."""
    persons, courts, balls, poses = {}, {}, {}, {}
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read detections {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            f = int(rec["frame"])
            persons[f] = [PersonDetection(tuple(p["bbox"]), float(p.get("conf", 1.0))) for p in rec.get("persons") or []]
            courts[f] = rec.get("court")
            balls[f] = rec.get("ball")
            poses[f] = rec.get("poses") or []
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}:{n}: bad detection record ({exc})") from None
    return {"persons_by_frame": persons, "court_by_frame": courts, "ball_by_frame": balls, "poses_by_frame": poses}


def fuse_file(path, start_frame: int, end_frame: int, **kwargs) -> DetectionTrack:
    maps = read_raw_detections(path)
    return assemble_track(range(start_frame, end_frame + 1), **maps, **kwargs)


def write_track(track: DetectionTrack, path) -> None:
    Path(path).write_text(json.dumps(track.to_dict(), separators=(",", ":")) + "\n", encoding="utf-8")


def read_track(path) -> DetectionTrack:
    try:
        return DetectionTrack.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read track {path}: {exc}") from None
