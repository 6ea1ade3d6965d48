"""Experiment configuration: strict JSON schema -> typed config.

Unknown keys are rejected at every level so a typo fails loudly
instead of silently running defaults.  The full schema is documented
in the README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .grid import GridSpec
from .scene import EncoderParams, ScenarioConfig

SCHEMA_VERSION = 1

STRATEGIES = ("no_fusion", "topk", "gtfs", "fast2comm", "fast2comm_test")


@dataclass(frozen=True)
class HeadConfig:
    """Parameters of the fixed evidence-channel classification head."""

    scale: float = 30.0
    bias: float = -1.8


@dataclass(frozen=True)
class DetectorParams:
    # The detection cutoff sits above the sharing threshold so decoded
    # component extents track footprints instead of misalignment smear.
    score_thresh: float = 0.8
    nms_iou: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.score_thresh < 1.0:
            raise ValueError("score threshold must lie in (0, 1)")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValueError("nms IoU must lie in (0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    strategies: tuple[str, ...]
    seeds: tuple[int, ...]
    sigmas: tuple[float, ...] = (0.0,)
    budgets: tuple[int | None, ...] = (None,)
    threshold: float = 0.5
    k: int = 512
    head: HeadConfig = field(default_factory=HeadConfig)
    detector: DetectorParams = field(default_factory=DetectorParams)
    out: str = "results"

    def __post_init__(self) -> None:
        if not self.strategies:
            raise ValueError("need at least one strategy")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(
                    "unknown strategy %r; choose from %s" % (s, ", ".join(STRATEGIES))
                )
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.sigmas:
            raise ValueError("need at least one sigma value")
        if not self.budgets:
            raise ValueError("need at least one budget (null = unlimited)")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("confidence threshold must lie in [0, 1]")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        for b in self.budgets:
            if b is not None and b < 0:
                raise ValueError("budgets must be non-negative or null")
        for s in self.sigmas:
            if s < 0:
                raise ValueError("sigma values must be non-negative")


class ConfigError(ValueError):
    pass


def _require_keys(obj: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(
            "unknown key(s) %s in %s; allowed: %s"
            % (", ".join(sorted(unknown)), where, ", ".join(sorted(allowed)))
        )


def _get(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise ConfigError("missing required key %r in %s" % (key, where))
    return obj[key]


def _as_pair(value: Any, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError("%s must be a two-element list" % where)
    return (float(value[0]), float(value[1]))


def _as_region(value: Any, where: str) -> tuple[float, float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ConfigError("%s must be [x_min, y_min, x_max, y_max]" % where)
    return tuple(float(v) for v in value)  # type: ignore[return-value]


def _parse_grid(obj: Any) -> GridSpec:
    if not isinstance(obj, dict):
        raise ConfigError("grid must be an object")
    allowed = {"rows", "cols", "x_min", "x_max", "y_min", "y_max"}
    _require_keys(obj, allowed, "grid")
    return GridSpec(
        rows=int(_get(obj, "rows", "grid")),
        cols=int(_get(obj, "cols", "grid")),
        x_min=float(_get(obj, "x_min", "grid")),
        x_max=float(_get(obj, "x_max", "grid")),
        y_min=float(_get(obj, "y_min", "grid")),
        y_max=float(_get(obj, "y_max", "grid")),
    )


def _parse_encoder(obj: Any) -> EncoderParams:
    if not isinstance(obj, dict):
        raise ConfigError("scenario.encoder must be an object")
    allowed = {"amplitude", "noise_floor", "attenuation"}
    _require_keys(obj, allowed, "scenario.encoder")
    kwargs = {k: float(v) for k, v in obj.items()}
    return EncoderParams(**kwargs)


def _parse_scenario(obj: Any, spec: GridSpec) -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ConfigError("scenario must be an object")
    allowed = {
        "n_agents",
        "n_objects",
        "channels",
        "encoder",
        "agent_region",
        "object_region",
        "yaw_scale",
        "length_range",
        "width_range",
        "height_range",
        "min_gap",
        "agent_clearance",
    }
    _require_keys(obj, allowed, "scenario")
    kwargs: dict[str, Any] = {
        "spec": spec,
        "channels": int(_get(obj, "channels", "scenario")),
        "n_agents": int(_get(obj, "n_agents", "scenario")),
        "n_objects": int(_get(obj, "n_objects", "scenario")),
        # per-run values; the sweep overrides both
        "sigma_e": 0.0,
        "seed": 0,
    }
    if "encoder" in obj:
        kwargs["encoder"] = _parse_encoder(obj["encoder"])
    if "agent_region" in obj:
        kwargs["agent_region"] = _as_region(obj["agent_region"], "scenario.agent_region")
    if "object_region" in obj:
        kwargs["object_region"] = _as_region(
            obj["object_region"], "scenario.object_region"
        )
    if "yaw_scale" in obj:
        kwargs["yaw_scale"] = float(obj["yaw_scale"])
    for key in ("length_range", "width_range", "height_range"):
        if key in obj:
            kwargs[key] = _as_pair(obj[key], "scenario." + key)
    if "min_gap" in obj:
        kwargs["min_gap"] = float(obj["min_gap"])
    if "agent_clearance" in obj:
        kwargs["agent_clearance"] = float(obj["agent_clearance"])
    return ScenarioConfig(**kwargs)


def parse_config(data: Any) -> ExperimentConfig:
    """Validate a parsed JSON object into an ExperimentConfig."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    allowed = {
        "schema_version",
        "grid",
        "scenario",
        "strategies",
        "seeds",
        "sigmas",
        "budgets",
        "threshold",
        "k",
        "head",
        "detector",
        "out",
    }
    _require_keys(data, allowed, "config root")
    version = _get(data, "schema_version", "config root")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            "unsupported schema_version %r (expected %d)" % (version, SCHEMA_VERSION)
        )
    spec = _parse_grid(_get(data, "grid", "config root"))
    scenario = _parse_scenario(_get(data, "scenario", "config root"), spec)

    strategies = _get(data, "strategies", "config root")
    if not isinstance(strategies, list):
        raise ConfigError("strategies must be a list")
    seeds = _get(data, "seeds", "config root")
    if not isinstance(seeds, list):
        raise ConfigError("seeds must be a list")

    kwargs: dict[str, Any] = {
        "scenario": scenario,
        "strategies": tuple(str(s) for s in strategies),
        "seeds": tuple(int(s) for s in seeds),
    }
    if "sigmas" in data:
        if not isinstance(data["sigmas"], list):
            raise ConfigError("sigmas must be a list")
        kwargs["sigmas"] = tuple(float(s) for s in data["sigmas"])
    if "budgets" in data:
        if not isinstance(data["budgets"], list):
            raise ConfigError("budgets must be a list")
        kwargs["budgets"] = tuple(
            None if b is None else int(b) for b in data["budgets"]
        )
    if "threshold" in data:
        kwargs["threshold"] = float(data["threshold"])
    if "k" in data:
        kwargs["k"] = int(data["k"])
    if "head" in data:
        head = data["head"]
        if not isinstance(head, dict):
            raise ConfigError("head must be an object")
        _require_keys(head, {"scale", "bias"}, "head")
        kwargs["head"] = HeadConfig(**{k: float(v) for k, v in head.items()})
    if "detector" in data:
        det = data["detector"]
        if not isinstance(det, dict):
            raise ConfigError("detector must be an object")
        _require_keys(det, {"score_thresh", "nms_iou"}, "detector")
        kwargs["detector"] = DetectorParams(**{k: float(v) for k, v in det.items()})
    if "out" in data:
        kwargs["out"] = str(data["out"])

    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON experiment config file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config is not valid JSON: %s" % exc) from exc
    return parse_config(data)
