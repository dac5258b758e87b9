"""Flat ``key = value`` run configuration; command-line flags take precedence."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .dataset import COUNT_QUERY_PROMPT, KINDS
from .parsing import DEFAULT_ALIASES

KEYPOINT_FLAGS = {"all17": "all17", "hands4": "hands_feet4", "hands_feet4": "hands_feet4"}
_PATH_KEYS = ("annotations", "detections", "dataset", "predictions")


@dataclass
class Config:
    annotations: Optional[str] = None
    detections: Optional[str] = None
    dataset: Optional[str] = None
    predictions: Optional[str] = None
    out: Optional[str] = None
    variant: str = "default_sequence"
    stride: Optional[int] = None
    keypoints: Optional[str] = None
    num_frames: int = 32
    include_audio: bool = False
    endpoint: Optional[str] = None
    parallelism: int = 1
    timeout: float = 60.0
    retry_limit: int = 3
    backoff_base: float = 0.5
    player_distance_factor: float = 1.5
    min_confidence: float = 0.0
    token_budget: Optional[int] = None
    token_factor: float = 1.3
    count_query_prompt: str = COUNT_QUERY_PROMPT
    aliases: dict = field(default_factory=lambda: dict(DEFAULT_ALIASES))

    def validate(self) -> "Config":
        for key in _PATH_KEYS:
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{key} path does not exist: {p}")
        if self.variant not in KINDS:
            raise ConfigError(f"variant must be one of {', '.join(KINDS)}")
        if self.keypoints is not None and self.keypoints not in KEYPOINT_FLAGS:
            raise ConfigError("keypoints must be all17 or hands4")
        checks = [
            ("stride", self.stride is None or self.stride >= 1),
            ("num_frames", self.num_frames >= 1),
            ("parallelism", 1 <= self.parallelism <= 256),
            ("timeout", self.timeout > 0),
            ("retry_limit", 0 <= self.retry_limit <= 20),
            ("backoff_base", self.backoff_base >= 0),
            ("player_distance_factor", self.player_distance_factor > 0),
            ("min_confidence", 0 <= self.min_confidence <= 1),
            ("token_budget", self.token_budget is None or self.token_budget > 0),
            ("token_factor", self.token_factor > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"{name} out of range: {getattr(self, name)!r}")
        return self


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(Config)}
    t = types[name]
    if "bool" in t:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if "int" in t:
            return int(raw)
        if "float" in t:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into Config overrides.

    ``alias.<surface> = <subclass>:<label>`` lines extend the matcher alias
    table; ``#`` starts a comment.
    """
    known = {f.name for f in fields(Config)} - {"aliases"}
    values: dict = {}
    aliases = dict(DEFAULT_ALIASES)
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key.startswith("alias."):
            sub, _, label = raw.partition(":")
            if not label:
                raise ConfigError(f"line {n}: alias value must be <subclass>:<label>")
            aliases[key[len("alias."):].strip().lower()] = (sub.strip(), label.strip())
            continue
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    values["aliases"] = aliases
    return values


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> Config:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values = parse_config_text(text)
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return Config(**values).validate()
