"""Batch inference against an external endpoint and scoring of the results."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import requests

from .errors import InputError, RunFailed, UnknownRally
from .events import EventVocabulary, RallyAnnotation
from .metrics import (
    EvalReport,
    count_metrics,
    edit_score,
    levenshtein,
    positional_accuracy,
    single_event_accuracy,
)
from .parsing import Matcher, parse_prediction, parse_single

log = logging.getLogger(__name__)

STATUSES = ("ok", "timeout", "transport_error", "empty")


class EndpointTimeout(Exception):
    pass


class TransportError(Exception):
    pass


@dataclass(frozen=True)
class InferenceParams:
    num_frames: int = 32
    include_audio: bool = False
    extra: dict = field(default_factory=dict)  # passed through untouched (temperature etc.)

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")

    def to_dict(self) -> dict:
        return {"num_frames": self.num_frames, "include_audio": self.include_audio, **self.extra}


@dataclass(frozen=True)
class InferenceRequest:
    request_id: str
    prompt: str
    clip_ref: str
    params: InferenceParams

    def to_body(self) -> dict:
        return {"id": self.request_id, "prompt": self.prompt, "video": self.clip_ref, "params": self.params.to_dict()}


class MockEndpoint:
    """Replays canned answers from a JSON-lines file of ``{"id": ..., "text": ...}``."""

    def __init__(self, answers: Mapping[str, str], name: str = "mock"):
        self.answers = dict(answers)
        self.name = name

    @classmethod
    def from_file(cls, path) -> "MockEndpoint":
        answers = {}
        try:
            for line in Path(path).read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    answers[str(rec["id"])] = rec.get("text", "")
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise InputError(f"cannot read mock file {path}: {exc}") from None
        return cls(answers, f"mock:{path}")

    def describe(self) -> str:
        return self.name

    def generate(self, request: InferenceRequest) -> str:
        return self.answers.get(request.request_id, "")


class HttpEndpoint:
    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self._local = threading.local()

    def describe(self) -> str:
        return self.url

    def _session(self) -> requests.Session:
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def generate(self, request: InferenceRequest) -> str:
        url = self.url if self.url.endswith("/generate") else self.url + "/generate"
        try:
            resp = self._session().post(url, json=request.to_body(), timeout=self.timeout)
        except requests.Timeout as exc:
            raise EndpointTimeout(str(exc)) from None
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from None
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
        except ValueError:
            raise TransportError("response is not JSON") from None
        if str(body.get("id")) != request.request_id:
            raise TransportError(f"response id {body.get('id')!r} != request id {request.request_id!r}")
        return body.get("text") or ""


def make_endpoint(descriptor: str, timeout: float = 60.0):
    if descriptor.startswith("mock:"):
        return MockEndpoint.from_file(descriptor[len("mock:"):])
    if descriptor.startswith(("http://", "https://")):
        return HttpEndpoint(descriptor, timeout)
    raise InputError(f"unknown endpoint descriptor {descriptor!r} (use mock:<path> or http(s)://...)")


@dataclass
class SampleStatus:
    sample_id: str
    status: str
    attempts: int
    retries: int
    seconds: float
    error: str = ""


@dataclass
class RunManifest:
    run_id: str
    variant: str
    endpoint: str
    params: dict
    samples: list = field(default_factory=list)  # SampleStatus, ordered by sample id
    total_seconds: float = 0.0

    def status_counts(self) -> dict:
        counts = {s: 0 for s in STATUSES}
        for st in self.samples:
            counts[st.status] += 1
        return counts

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status_counts"] = self.status_counts()
        return d


def _run_id(samples, endpoint_desc: str, params: InferenceParams) -> str:
    h = hashlib.sha1()
    h.update(endpoint_desc.encode())
    h.update(json.dumps(params.to_dict(), sort_keys=True).encode())
    for s in samples:
        h.update(s.sample_id.encode())
        h.update(s.prompt.encode())
    return h.hexdigest()[:12]


def _call_with_retry(endpoint, req: InferenceRequest, retry_limit: int, backoff_base: float, sleep) -> tuple:
    attempt = 0
    t0 = time.perf_counter()
    while True:
        attempt += 1
        try:
            text = endpoint.generate(req)
            status = "ok" if text.strip() else "empty"
            return text, SampleStatus(req.request_id, status, attempt, attempt - 1, time.perf_counter() - t0)
        except (EndpointTimeout, TransportError) as exc:
            status = "timeout" if isinstance(exc, EndpointTimeout) else "transport_error"
            if attempt > retry_limit:
                log.warning("sample %s failed after %d attempts: %s", req.request_id, attempt, exc)
                return "", SampleStatus(req.request_id, status, attempt, attempt - 1, time.perf_counter() - t0, str(exc))
            sleep(backoff_base * (2 ** (attempt - 1)))


def run_batch(
    samples: Sequence,
    endpoint,
    params: Optional[InferenceParams] = None,
    parallelism: int = 1,
    retry_limit: int = 3,
    backoff_base: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[list, RunManifest]:
    """Query ``endpoint`` for every sample.

    Returns prediction records ``{"rally_id", "text"}`` ordered by sample id
    and the run manifest. A sample that still fails after ``retry_limit``
    retries gets empty text.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    params = params or InferenceParams()
    ordered = sorted(samples, key=lambda s: s.sample_id)
    ids = [s.sample_id for s in ordered]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate sample ids in dataset")
    variant = ordered[0].variant.tag() if ordered else ""
    manifest = RunManifest(_run_id(ordered, endpoint.describe(), params), variant, endpoint.describe(), params.to_dict())

    results: dict[str, tuple] = {}
    lock = threading.Lock()

    def work(s):
        req = InferenceRequest(s.sample_id, s.prompt, s.clip_ref, params)
        out = _call_with_retry(endpoint, req, retry_limit, backoff_base, sleep)
        with lock:
            results[s.sample_id] = out

    t0 = time.perf_counter()
    if parallelism == 1:
        for s in ordered:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(work, ordered))
    manifest.total_seconds = time.perf_counter() - t0

    predictions = [{"rally_id": sid, "text": results[sid][0]} for sid in ids]
    manifest.samples = [results[sid][1] for sid in ids]
    failed = sum(1 for st in manifest.samples if st.status in ("timeout", "transport_error"))
    if ordered and failed == len(ordered):
        raise RunFailed(f"endpoint {endpoint.describe()} failed for all {failed} samples", manifest)
    return predictions, manifest


def write_predictions(predictions: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps({"rally_id": p["rally_id"], "text": p["text"]}, ensure_ascii=False) + "\n")


def read_predictions(path) -> list[dict]:
    out = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read predictions {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append({"rally_id": str(rec["rally_id"]), "text": rec.get("text") or ""})
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"{path}:{n}: bad prediction record ({exc})") from None
    return out


def write_manifest(manifest: RunManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=1) + "\n", encoding="utf-8")


def _index(predictions, valid_ids) -> dict:
    texts = {}
    for p in predictions:
        if p["rally_id"] not in valid_ids:
            raise UnknownRally(f"prediction for unknown rally {p['rally_id']!r}")
        texts[p["rally_id"]] = p["text"]
    return texts


def evaluate_run(
    predictions: Sequence[dict],
    annotations: Sequence[RallyAnnotation],
    vocabulary: EventVocabulary,
    mode: str = "sequence",
    matcher: Optional[Matcher] = None,
    variant: str = "",
) -> EvalReport:
    """Score predictions against annotations.

    ``mode="sequence"`` expects one prediction per rally; ``"single_event"``
    expects one per shot, keyed ``<rally_id>#<index>``. Rallies or shots
    without a prediction score as empty answers.
    """
    rallies = sorted(annotations, key=lambda r: r.rally_id)
    if mode == "single_event":
        return _evaluate_single(predictions, rallies, vocabulary, matcher, variant)
    if mode != "sequence":
        raise ValueError(f"unknown mode {mode!r}")

    texts = _index(predictions, {r.rally_id for r in rallies})
    per_rally, parsed_all, truths = {}, [], []
    total_dist = total_len = 0
    pred_counts, true_counts = [], []
    for r in rallies:
        parsed = parse_prediction(texts.get(r.rally_id, ""), vocabulary, matcher)
        truth = r.event_list
        per_rally[r.rally_id] = edit_score(list(parsed.events), truth)
        total_dist += levenshtein(list(parsed.events), truth)
        total_len += max(len(parsed), len(truth))
        parsed_all.append(parsed)
        truths.append(truth)
        pred_counts.append(len(parsed))
        true_counts.append(len(truth))
    acc, overall = positional_accuracy(parsed_all, truths)
    return EvalReport(
        per_rally_edit=per_rally,
        mean_edit_score=sum(per_rally.values()) / len(per_rally) if per_rally else 0.0,
        pooled_edit_score=(1 - total_dist / total_len) * 100 if total_len else 100.0,
        subclass_accuracy=acc,
        overall_accuracy=overall,
        count_stats=count_metrics(pred_counts, true_counts),
        notes={"mode": mode, "variant": variant, "sd": "population", "accuracy": "sentence i vs event i"},
    )


def _evaluate_single(predictions, rallies, vocabulary, matcher, variant) -> EvalReport:
    keys, truths = [], []
    for r in rallies:
        for i, e in enumerate(r.event_list):
            keys.append(f"{r.rally_id}#{i:02d}")
            truths.append(e)
    texts = _index(predictions, set(keys))
    parsed = [parse_single(texts.get(k, ""), vocabulary, matcher) for k in keys]
    acc, overall = single_event_accuracy(parsed, truths)
    per = {k: edit_score(list(p.events), [t]) for k, p, t in zip(keys, parsed, truths)}
    total = sum(levenshtein(list(p.events), [t]) for p, t in zip(parsed, truths))
    return EvalReport(
        per_rally_edit=per,
        mean_edit_score=sum(per.values()) / len(per) if per else 0.0,
        pooled_edit_score=(1 - total / len(keys)) * 100 if keys else 100.0,
        subclass_accuracy=acc,
        overall_accuracy=overall,
        count_stats=count_metrics([1] * len(keys), [1] * len(keys)),
        notes={"mode": "single_event", "variant": variant, "sd": "population"},
    )


def mock_from_samples(samples: Sequence, path, transform: Callable[[str], str] = lambda a: a) -> None:
    """Write a mock-endpoint file that answers every sample with ``transform(answer)``."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in sorted(samples, key=lambda s: s.sample_id):
            fh.write(json.dumps({"id": s.sample_id, "text": transform(s.answer)}, ensure_ascii=False) + "\n")
