"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 runtime or endpoint failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataset as ds
from . import fusion
from .config import KEYPOINT_FLAGS, Config, load_config
from .errors import InputError, RunFailed, RuntimeFailure
from .events import build_vocabulary, load_annotations, validate_rally
from .metrics import count_metrics, corpus_stats
from .parsing import Matcher, parse_count_answer
from .runner import (
    InferenceParams,
    evaluate_run,
    make_endpoint,
    read_predictions,
    run_batch,
    write_manifest,
    write_predictions,
)

log = logging.getLogger("rallyseq")

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(cfg: Config) -> Path:
    if not cfg.out:
        raise InputError("--out is required")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need(cfg: Config, *keys):
    for k in keys:
        if getattr(cfg, k) is None:
            raise InputError(f"--{k.replace('_', '-')} is required")


def _variant(cfg: Config) -> ds.PromptVariant:
    kp = None
    if cfg.variant == "keypoint_prompt":
        kp = KEYPOINT_FLAGS[cfg.keypoints or "all17"]
    return ds.PromptVariant(cfg.variant, cfg.stride, kp)


def _load_corpus(cfg: Config):
    _need(cfg, "annotations")
    rallies = load_annotations(cfg.annotations)
    if not rallies:
        raise InputError(f"{cfg.annotations}: no rallies")
    return rallies


def format_stats(stats: dict) -> str:
    rows = [
        ("Mean number of events", f"{stats['mean']:.2f}"),
        ("Lower quartile", str(stats["lower_quartile"])),
        ("Median number of events", str(stats["median"])),
        ("Upper quartile", str(stats["upper_quartile"])),
        ("Maximum number of events", str(stats["max"])),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def cmd_stats(cfg: Config, args) -> int:
    stats = corpus_stats(_load_corpus(cfg))
    print(format_stats(stats))
    if cfg.out:
        _dump(stats, _out_dir(cfg) / "stats.json")
    return EXIT_OK


def cmd_validate(cfg: Config, args) -> int:
    total = 0
    for r in _load_corpus(cfg):
        for v in validate_rally(r.event_list):
            print(f"{r.rally_id}\t{v.kind}\t{v.index}")
            total += 1
    print(f"{total} violation(s)")
    return EXIT_OK


def _tracks_for(cfg: Config, rallies) -> dict:
    if cfg.detections is None:
        return {}
    root = Path(cfg.detections)
    tracks = {}
    for r in rallies:
        fused, raw = root / f"{r.rally_id}.json", root / f"{r.rally_id}.jsonl"
        if fused.exists():
            tracks[r.rally_id] = fusion.read_track(fused)
        elif raw.exists():
            tracks[r.rally_id] = fusion.fuse_file(
                raw, r.start_frame, r.end_frame,
                max_distance_factor=cfg.player_distance_factor, min_confidence=cfg.min_confidence,
            )
    return tracks


def cmd_fuse(cfg: Config, args) -> int:
    _need(cfg, "detections")
    rallies = _load_corpus(cfg)
    out = _out_dir(cfg)
    root = Path(cfg.detections)
    written = 0
    for r in sorted(rallies, key=lambda r: r.rally_id):
        raw = root / f"{r.rally_id}.jsonl"
        if not raw.exists():
            log.warning("no detections for rally %s", r.rally_id)
            continue
        track = fusion.fuse_file(
            raw, r.start_frame, r.end_frame,
            max_distance_factor=cfg.player_distance_factor, min_confidence=cfg.min_confidence,
        )
        fusion.write_track(track, out / f"{r.rally_id}.json")
        written += 1
    if not written:
        raise InputError(f"no <rally_id>.jsonl detection files found in {root}")
    print(f"fused {written} track(s) into {out}")
    return EXIT_OK


def cmd_build(cfg: Config, args) -> int:
    rallies = _load_corpus(cfg)
    v = _variant(cfg)
    tracks = _tracks_for(cfg, rallies)
    if v.needs_track:
        missing = [r.rally_id for r in rallies if r.rally_id not in tracks]
        if missing:
            raise ds.TrackRequired(f"variant {v.kind} needs detections; none for rally {missing[0]}")
    strides = {}
    samples = []
    for r in sorted(rallies, key=lambda r: r.rally_id):
        rv = v
        if cfg.token_budget and v.needs_track:
            s = max(v.stride, ds.max_stride_fitting(cfg.token_budget, tracks[r.rally_id], v, r, cfg.token_factor))
            rv = ds.PromptVariant(v.kind, s, v.keypoint_set)
            strides[r.rally_id] = s
        samples.extend(ds.build_samples(r, rv, tracks.get(r.rally_id), cfg.count_query_prompt))
    samples.sort(key=lambda s: s.sample_id)
    out = _out_dir(cfg)
    ds.write_dataset(samples, out / "dataset.json")
    ds.write_cutlist(samples, out / "cutlist.csv")
    manifest = {
        "variant": v.to_dict(),
        "variant_tag": v.tag(),
        "num_samples": len(samples),
        "num_rallies": len(rallies),
        "num_frames": cfg.num_frames,
        "include_audio": cfg.include_audio,
        "token_budget": cfg.token_budget,
        "strides": strides,
    }
    _dump(manifest, out / "build_manifest.json")
    print(f"wrote {len(samples)} sample(s) for {len(rallies)} rallies to {out}")
    return EXIT_OK


def cmd_run(cfg: Config, args) -> int:
    _need(cfg, "dataset", "endpoint")
    samples = ds.read_dataset(cfg.dataset)
    endpoint = make_endpoint(cfg.endpoint, cfg.timeout)
    params = InferenceParams(cfg.num_frames, cfg.include_audio)
    out = _out_dir(cfg)
    try:
        preds, manifest = run_batch(
            samples, endpoint, params,
            parallelism=cfg.parallelism, retry_limit=cfg.retry_limit, backoff_base=cfg.backoff_base,
        )
    except RunFailed as exc:
        if exc.manifest is not None:
            write_manifest(exc.manifest, out / "run_manifest.json")
        raise
    write_predictions(preds, out / "predictions.jsonl")
    write_manifest(manifest, out / "run_manifest.json")
    counts = manifest.status_counts()
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_eval(cfg: Config, args) -> int:
    _need(cfg, "predictions")
    rallies = _load_corpus(cfg)
    vocab = build_vocabulary(rallies)
    mode = "single_event" if cfg.variant == "single_event" else "sequence"
    report = evaluate_run(
        read_predictions(cfg.predictions), rallies, vocab,
        mode=mode, matcher=Matcher(cfg.aliases), variant=cfg.variant,
    )
    print(report.table())
    if cfg.out:
        _dump(report.to_dict(), _out_dir(cfg) / "report.json")
    return EXIT_OK


def cmd_count_eval(cfg: Config, args) -> int:
    _need(cfg, "predictions")
    rallies = sorted(_load_corpus(cfg), key=lambda r: r.rally_id)
    texts = {}
    known = {r.rally_id for r in rallies}
    for p in read_predictions(cfg.predictions):
        if p["rally_id"] not in known:
            raise InputError(f"prediction for unknown rally {p['rally_id']!r}")
        texts[p["rally_id"]] = p["text"]
    preds = [parse_count_answer(texts.get(r.rally_id, "")) for r in rallies]
    stats = count_metrics(preds, [len(r) for r in rallies])
    print(f"Accuracy                                        {stats.exact_match_accuracy:.2f}")
    print(f"Average difference in number of events          {stats.mean_abs_diff:.2f}")
    print(f"Average correct number of event                 {stats.mean_true_count:.2f}")
    print(f"Standard Deviation of correct number of events  {stats.sd_true_count:.2f} ({stats.sd_kind})")
    if cfg.out:
        _dump(
            {"count_stats": stats.__dict__, "predicted": {r.rally_id: c for r, c in zip(rallies, preds)}},
            _out_dir(cfg) / "count_report.json",
        )
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "validate": cmd_validate,
    "fuse": cmd_fuse,
    "build": cmd_build,
    "run": cmd_run,
    "eval": cmd_eval,
    "count-eval": cmd_count_eval,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file; flags override it")
    common.add_argument("--annotations", help="rally annotation JSON")
    common.add_argument("--detections", help="directory of <rally_id>.jsonl detector output or fused <rally_id>.json tracks")
    common.add_argument("--dataset", help="dataset.json written by build")
    common.add_argument("--predictions", help="predictions JSON-lines {rally_id, text}")
    common.add_argument("--out", help="output directory")
    common.add_argument("--variant", choices=ds.KINDS)
    common.add_argument("--stride", type=int)
    common.add_argument("--keypoints", choices=("all17", "hands4"))
    common.add_argument("--num-frames", type=int)
    common.add_argument("--include-audio", action="store_true", default=None)
    common.add_argument("--endpoint", help="mock:<path> or http(s)://host:port")
    common.add_argument("--parallelism", type=int)
    common.add_argument("--timeout", type=float)
    common.add_argument("--retry-limit", type=int)
    common.add_argument("--backoff-base", type=float)
    common.add_argument("--player-distance-factor", type=float)
    common.add_argument("--min-confidence", type=float)
    common.add_argument("--token-budget", type=int)
    common.add_argument("--token-factor", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rallyseq", description="Tennis rally sequence datasets and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "stats": "events-per-rally statistics",
        "validate": "list structural violations in annotations",
        "fuse": "fuse raw detector output into per-rally tracks",
        "build": "build prompt/answer dataset and cut-list",
        "run": "query an inference endpoint for every sample",
        "eval": "score predictions (edit score, accuracies, counts)",
        "count-eval": "score event-count answers",
    }
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    return parser


_OVERRIDE_KEYS = (
    "annotations", "detections", "dataset", "predictions", "out", "variant", "stride", "keypoints",
    "num_frames", "include_audio", "endpoint", "parallelism", "timeout", "retry_limit", "backoff_base",
    "player_distance_factor", "min_confidence", "token_budget", "token_factor",
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, {k: getattr(args, k) for k in _OVERRIDE_KEYS})
        return COMMANDS[args.command](cfg, args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RuntimeFailure as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
