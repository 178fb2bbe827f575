"""Service configuration: JSON file plus APP_-prefixed environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .gaze import DEFAULT_GRID_H, DEFAULT_GRID_W
from .posture import PostureThresholds
from .tracking import TrackingConfig

# Wall-time priors (seconds) used for ETA before any stage of that type has
# completed. These are estimates for the in-process rule-based analyzer;
# live-model deployments will converge to observed durations instead.
DEFAULT_STAGE_PRIORS = {
    "vision": 2.0,
    "micro": 0.05,
    "synthesis": 0.02,
    "final": 0.02,
}

ENV_PREFIX = "APP_"


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: str = "data"
    host: str = "127.0.0.1"
    port: int = 8000
    frontend_dir: str = ""  # serve a built dashboard from here when set
    analyzer_mode: str = "rule-based"  # rule-based | http
    analyzer_base_url: str = ""
    analyzer_timeout_s: float = 120.0
    analyzer_profile: str = "extended-131k"
    grid_w: int = DEFAULT_GRID_W
    grid_h: int = DEFAULT_GRID_H
    min_coverage: float = 0.8
    memory_budget_gb: float = 48.0
    posture: PostureThresholds = field(default_factory=PostureThresholds)
    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    stage_priors: dict = field(default_factory=lambda: dict(DEFAULT_STAGE_PRIORS))

    def __post_init__(self):
        if self.analyzer_mode not in ("rule-based", "http"):
            raise ConfigError(f"unknown analyzer_mode {self.analyzer_mode!r}")
        if self.grid_w <= 0 or self.grid_h <= 0:
            raise ConfigError("heatmap grid dimensions must be positive")


_ENV_FIELDS = {
    "DATA_DIR": ("data_dir", str),
    "FRONTEND_DIR": ("frontend_dir", str),
    "HOST": ("host", str),
    "PORT": ("port", int),
    "ANALYZER_MODE": ("analyzer_mode", str),
    "ANALYZER_BASE_URL": ("analyzer_base_url", str),
    "ANALYZER_TIMEOUT_S": ("analyzer_timeout_s", float),
    "ANALYZER_PROFILE": ("analyzer_profile", str),
    "GRID_W": ("grid_w", int),
    "GRID_H": ("grid_h", int),
    "MIN_COVERAGE": ("min_coverage", float),
    "MEMORY_BUDGET_GB": ("memory_budget_gb", float),
}


def load_config(path: str | None = None,
                env: dict[str, str] | None = None) -> ServiceConfig:
    """Load config from an optional JSON file, then apply APP_ overrides."""
    doc: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)

    kwargs: dict = {}
    for key in ("data_dir", "host", "port", "frontend_dir",
                "analyzer_mode", "analyzer_base_url",
                "analyzer_timeout_s", "analyzer_profile", "grid_w", "grid_h",
                "min_coverage", "memory_budget_gb"):
        if key in doc:
            kwargs[key] = doc[key]
    if "posture" in doc:
        kwargs["posture"] = PostureThresholds(**doc["posture"])
    if "tracking" in doc:
        kwargs["tracking"] = TrackingConfig(**doc["tracking"])
    if "stage_priors" in doc:
        priors = dict(DEFAULT_STAGE_PRIORS)
        priors.update(doc["stage_priors"])
        kwargs["stage_priors"] = priors

    cfg = ServiceConfig(**kwargs)

    env = os.environ if env is None else env
    overrides: dict = {}
    for suffix, (field_name, cast) in _ENV_FIELDS.items():
        raw = env.get(ENV_PREFIX + suffix)
        if raw is None:
            continue
        try:
            overrides[field_name] = cast(raw)
        except ValueError as e:
            raise ConfigError(f"bad {ENV_PREFIX}{suffix}={raw!r}: {e}") from e
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg
