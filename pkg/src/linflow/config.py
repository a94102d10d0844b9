"""JSON experiment configuration with field-level validation."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

from linflow.errors import ConfigError

MODELS = ("decay", "vdp")
METHODS = ("carleman_truncation", "edmd_projection", "kvn", "cme_exponential",
           "cme_euler", "invariant_exact", "reference")
GRID_METHODS = ("kvn", "cme_exponential", "cme_euler")
OUTPUT_ROOT_ENV = "LINFLOW_OUTPUT_ROOT"


@dataclass
class GridSpec:
    bounds: List[List[float]]
    points: List[int]


@dataclass
class InitialSpec:
    kind: str = "delta"
    points: Optional[int] = None
    width: Optional[float] = None


@dataclass
class WarmupSpec:
    start: List[float] = field(default_factory=lambda: [2.0, 0.0])
    time: float = 100.0


@dataclass
class EdmdSpec:
    dictionary_degree: int = 2
    train_time: float = 3.0
    regularization: float = 0.0


@dataclass
class ExperimentConfig:
    name: str
    model: str
    method: str
    delta: float
    steps: int
    output_dir: str
    x0: Optional[List[float]] = None
    mu: Optional[float] = None
    warmup: Optional[WarmupSpec] = None
    grid: Optional[GridSpec] = None
    initial: InitialSpec = field(default_factory=InitialSpec)
    truncation_order: Optional[int] = None
    edmd: Optional[EdmdSpec] = None
    epsilons: List[float] = field(default_factory=list)
    propagator: str = "auto"
    tolerance: float = 1e-10
    heatmap_every: int = 1

    @property
    def horizon(self) -> float:
        return self.delta * self.steps

    @property
    def dim(self) -> int:
        return 1 if self.model == "decay" else 2

    def resolved_output_dir(self, base: Optional[Path] = None) -> Path:
        out = Path(self.output_dir)
        if out.is_absolute():
            return out
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            return Path(root) / out
        return (base or Path.cwd()) / out

    def to_dict(self) -> dict:
        return asdict(self)


def _sub(cls, raw, name):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be an object")
    known = set(cls.__dataclass_fields__)
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown field")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from None


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON document and build an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    extra = set(raw) - known
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    for key in ("name", "model", "method", "delta", "steps", "output_dir"):
        if key not in raw:
            raise ConfigError(key, "required field missing")
    data = dict(raw)
    data["grid"] = _sub(GridSpec, raw.get("grid"), "grid")
    data["initial"] = _sub(InitialSpec, raw.get("initial", {}), "initial")
    data["edmd"] = _sub(EdmdSpec, raw.get("edmd"), "edmd")
    warm = raw.get("warmup")
    if warm is True:
        warm = {}
    data["warmup"] = _sub(WarmupSpec, warm, "warmup") if warm not in (None, False) else None
    if "x0" in data and data["x0"] is not None and not isinstance(data["x0"], list):
        data["x0"] = [data["x0"]]
    cfg = ExperimentConfig(**data)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.model not in MODELS:
        raise ConfigError("model", f"must be one of {MODELS}")
    if cfg.method not in METHODS:
        raise ConfigError("method", f"must be one of {METHODS}")
    if not (isinstance(cfg.delta, (int, float)) and cfg.delta > 0):
        raise ConfigError("delta", "must be a positive number")
    if not (isinstance(cfg.steps, int) and cfg.steps >= 1):
        raise ConfigError("steps", "must be a positive integer")
    if not (isinstance(cfg.heatmap_every, int) and cfg.heatmap_every >= 1):
        raise ConfigError("heatmap_every", "must be a positive integer")
    if not 0 < cfg.tolerance < 1:
        raise ConfigError("tolerance", "must lie in (0, 1)")
    if cfg.propagator not in ("auto", "dense", "krylov"):
        raise ConfigError("propagator", "must be auto, dense or krylov")
    if any(e <= 0 for e in cfg.epsilons):
        raise ConfigError("epsilons", "entries must be positive")

    if cfg.model == "decay":
        if cfg.x0 is None or len(cfg.x0) != 1:
            raise ConfigError("x0", "decay model needs a single initial value")
        if cfg.x0[0] <= 0:
            raise ConfigError("x0", "decay model needs x0 > 0")
    else:
        if cfg.mu is None:
            raise ConfigError("mu", "vdp model needs mu")
        if cfg.x0 is None and cfg.warmup is None:
            raise ConfigError("x0", "vdp model needs x0 or a warmup block")
        if cfg.x0 is not None and len(cfg.x0) != 2:
            raise ConfigError("x0", "vdp model needs a 2-vector")

    if cfg.method in GRID_METHODS:
        if cfg.grid is None:
            raise ConfigError("grid", f"method {cfg.method} needs a grid")
        if len(cfg.grid.bounds) != cfg.dim or len(cfg.grid.points) != cfg.dim:
            raise ConfigError("grid", f"expected {cfg.dim} axes")
        for lo_hi in cfg.grid.bounds:
            if len(lo_hi) != 2 or not lo_hi[0] < lo_hi[1]:
                raise ConfigError("grid.bounds", "each axis needs low < high")
        if any((not isinstance(p, int)) or p < 2 for p in cfg.grid.points):
            raise ConfigError("grid.points", "point counts must be integers >= 2")
        if cfg.initial.kind not in ("delta", "gaussian"):
            raise ConfigError("initial.kind", "must be delta or gaussian")
        if cfg.initial.kind == "gaussian" and (cfg.initial.points is None
                                               or cfg.initial.points < 1):
            raise ConfigError("initial.points", "gaussian initial needs a support size")
    if cfg.method == "carleman_truncation":
        if cfg.truncation_order is None or cfg.truncation_order < 1:
            raise ConfigError("truncation_order", "carleman_truncation needs an order >= 1")
        if cfg.model == "vdp" and cfg.truncation_order < 3:
            raise ConfigError("truncation_order", "vdp lifting needs degree >= 3")
    if cfg.method == "edmd_projection":
        if cfg.edmd is None:
            raise ConfigError("edmd", "edmd_projection needs an edmd block")
        if cfg.edmd.dictionary_degree < 1:
            raise ConfigError("edmd.dictionary_degree", "must be >= 1")
        if cfg.edmd.train_time < cfg.delta:
            raise ConfigError("edmd.train_time", "must cover at least one step")
    if cfg.method == "invariant_exact" and cfg.model != "decay":
        raise ConfigError("method", "invariant_exact is only available for the decay model")


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return parse_config(raw)
