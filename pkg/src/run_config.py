"""
Run and sweep documents for the PCRPO harness.

A run document binds the trainer settings, the slack variant, the
environment builder, the output directory and the seed list. Documents are
JSON; ``key=value`` overrides from the command line are parsed against the
field's declared type and re-validated against the whole document before
they take effect.
"""

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union, get_args, get_origin

import structlog
from pydantic import BaseModel, Field, ValidationError, field_validator
from pydantic.fields import FieldInfo

from .cmdp import CmdpSpec, build_gridworld, build_pointmass_velocity, build_random, load_spec
from .config import settings
from .trainer import SLACK_PRESETS, SlackConfig, TrainerConfig

logger = structlog.get_logger(__name__)


class ConfigError(ValueError):
    """A run or sweep document is missing, malformed, or invalid."""


# =============================================================================
# ENVIRONMENTS
# =============================================================================


class GridworldEnv(BaseModel):
    builder: Literal["gridworld"] = "gridworld"
    width: int = 3
    height: int = 3
    hazards: list[tuple[int, int]] = [(1, 1)]
    goal: tuple[int, int] = (2, 1)
    start: tuple[int, int] = (0, 1)
    slip: float = 0.0
    gamma: float = 0.9
    cost_limit: float = 0.45

    def build(self) -> CmdpSpec:
        return build_gridworld(
            self.width,
            self.height,
            self.hazards,
            self.goal,
            slip=self.slip,
            gamma=self.gamma,
            cost_limit=self.cost_limit,
            start=self.start,
        )


class PointmassEnv(BaseModel):
    builder: Literal["pointmass"] = "pointmass"
    n_positions: int = 4
    n_velocities: int = 4
    action_levels: int = 3
    alpha_r: float = 1.0
    alpha_c: float = 1.0
    gamma: float = 0.9
    cost_limit: float = 2.0
    friction: float = 0.5

    def build(self) -> CmdpSpec:
        return build_pointmass_velocity(
            self.n_positions,
            self.n_velocities,
            self.action_levels,
            alpha_r=self.alpha_r,
            alpha_c=self.alpha_c,
            gamma=self.gamma,
            cost_limit=self.cost_limit,
            friction=self.friction,
        )


class RandomEnv(BaseModel):
    builder: Literal["random"] = "random"
    n_states: int = 5
    n_actions: int = 3
    n_costs: int = 1
    gamma: float = 0.8
    seed: int = 0
    cost_limits: Optional[list[float]] = None

    def build(self) -> CmdpSpec:
        return build_random(
            self.n_states,
            self.n_actions,
            n_costs=self.n_costs,
            gamma=self.gamma,
            seed=self.seed,
            cost_limits=self.cost_limits,
        )


class FileEnv(BaseModel):
    builder: Literal["file"] = "file"
    path: str

    def build(self) -> CmdpSpec:
        path = Path(self.path)
        if not path.is_file():
            raise ConfigError(f"CMDP document not found: {path}")
        return load_spec(path)


EnvironmentConfig = Annotated[
    Union[GridworldEnv, PointmassEnv, RandomEnv, FileEnv],
    Field(discriminator="builder"),
]


# =============================================================================
# DOCUMENTS
# =============================================================================


class RunConfig(BaseModel):
    name: str = "run"
    environment: EnvironmentConfig = Field(default_factory=GridworldEnv)
    trainer: TrainerConfig = Field(default_factory=TrainerConfig)
    slack_preset: Optional[str] = "default"
    slack: Optional[SlackConfig] = None
    output_dir: Optional[str] = None
    seeds: list[int] = Field(default_factory=lambda: list(settings.default_seeds))

    @field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, seeds: list[int]) -> list[int]:
        if not seeds:
            raise ValueError("at least one seed is required")
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"seeds must be distinct, got {seeds}")
        return seeds

    @field_validator("slack_preset")
    @classmethod
    def _known_preset(cls, preset: Optional[str]) -> Optional[str]:
        if preset is not None and preset not in SLACK_PRESETS:
            raise ValueError(f"unknown slack preset {preset!r}; expected one of {', '.join(SLACK_PRESETS)}")
        return preset

    def resolve_slack(self, spec: CmdpSpec) -> SlackConfig:
        """Explicit slack wins; otherwise the preset scaled to the first cost limit."""
        if self.slack is not None:
            return self.slack
        if self.slack_preset is None:
            raise ConfigError("run document names neither slack nor slack_preset")
        return SlackConfig.preset(self.slack_preset, float(spec.limits[0]))

    def resolve_output_dir(self) -> Path:
        return Path(self.output_dir) if self.output_dir else Path(settings.output_root) / self.name

    def to_document(self) -> dict[str, Any]:
        data = self.model_dump(mode="json")
        if self.slack is not None:
            data["slack"] = self.slack.to_document()
        return data


class SweepSpec(BaseModel):
    name: str = "sweep"
    base: RunConfig = Field(default_factory=RunConfig)
    axis: str
    values: list[Any]

    @field_validator("values")
    @classmethod
    def _nonempty(cls, values: list[Any]) -> list[Any]:
        if not values:
            raise ValueError("sweep needs at least one axis value")
        return values

    def runs(self) -> list[tuple[str, RunConfig]]:
        """One (label, RunConfig) per axis value, each in its own output directory."""
        field_for(RunConfig, self.axis)
        root = Path(self.base.output_dir) if self.base.output_dir else Path(settings.output_root) / self.name
        out = []
        for value in self.values:
            label = f"{self.axis}={value}"
            cfg = apply_override(self.base, self.axis, value)
            cfg = cfg.model_copy(update={"name": label, "output_dir": str(root / _slug(label))})
            out.append((label, cfg))
        return out


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in text)


# =============================================================================
# OVERRIDES
# =============================================================================


def field_for(model: type[BaseModel], dotted: str) -> FieldInfo:
    """FieldInfo for a dotted path such as ``trainer.eta`` or ``environment.gamma``."""
    current: Any = model
    info: Optional[FieldInfo] = None
    for part in dotted.split("."):
        for candidate in _members(current):
            fields = getattr(candidate, "model_fields", None)
            if fields is not None and part in fields:
                info = fields[part]
                current = info.annotation
                break
        else:
            raise ConfigError(f"Unknown configuration key: {dotted}")
    assert info is not None
    return info


def _members(annotation: Any) -> list[Any]:
    """Union members (None excluded), or the annotation itself."""
    if get_origin(annotation) is Union:
        return [a for a in get_args(annotation) if a is not type(None)]
    return [annotation]


def _field_type(info: FieldInfo) -> Any:
    annotation = _members(info.annotation)[0]
    origin = get_origin(annotation)
    if origin in (list, dict, tuple, set):
        return origin
    return annotation


def parse_value(info: FieldInfo, raw: str) -> Any:
    """Convert a command-line string to the field's Python type."""
    field_type = _field_type(info)
    if field_type is bool:
        return raw.lower() in ("true", "1", "yes")
    if field_type is int:
        return int(raw)
    if field_type is float:
        return float(raw)
    if field_type in (list, dict, tuple, set):
        return json.loads(raw)
    if raw.lower() in ("null", "none") and get_origin(info.annotation) is Union:
        return None
    return raw


def apply_override(config: RunConfig, key: str, value: Any) -> RunConfig:
    """Return a copy of ``config`` with ``key`` set, validated as a whole document."""
    info = field_for(RunConfig, key)
    if isinstance(value, str):
        try:
            value = parse_value(info, value)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"Validation failed for {key}={value!r}: {exc}") from exc

    data = config.to_document()
    node = data
    parts = key.split(".")
    for part in parts[:-1]:
        if node.get(part) is None:
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    try:
        updated = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Validation failed for {key}={value!r}: {exc}") from exc
    logger.debug("run_config.override", key=key, value=value)
    return updated


def apply_overrides(config: RunConfig, assignments: list[str]) -> RunConfig:
    for assignment in assignments:
        key, sep, raw = assignment.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {assignment!r}")
        config = apply_override(config, key.strip(), raw.strip())
    return config


# =============================================================================
# LOADING
# =============================================================================


def _read_json(path: Path) -> Any:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def load_run_config(path: Path) -> RunConfig:
    try:
        return RunConfig.model_validate(_read_json(path))
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_sweep_spec(path: Path) -> SweepSpec:
    try:
        spec = SweepSpec.model_validate(_read_json(path))
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    field_for(RunConfig, spec.axis)
    return spec
