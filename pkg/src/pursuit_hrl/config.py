"""Configuration objects, scenario presets, and the experiment JSON schema."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import jsonschema

ABILITY_CLASSES = 5
CAPTURE_RADII = [0.6, 0.7, 0.8, 0.9, 1.0]
EVADER_VMAX = [0.6, 0.7, 0.8, 0.9, 1.0]
PURSUER_VMAX = 0.5


class ConfigError(ValueError):
    """Raised when a configuration file or object fails validation."""


@dataclass
class ArenaConfig:
    """Static parameters of one confrontation arena."""

    d1: float = 40.0
    d2: float = 20.0
    d3: float = 30.0
    n_pursuers: int = 3
    n_evaders: int = 3
    n_obstacles: int = 2
    dt: float = 0.2
    episode_len: int = 300
    capture_radii: list = field(default_factory=lambda: list(CAPTURE_RADII))
    pursuer_vmax: float = PURSUER_VMAX
    evader_vmax: list = field(default_factory=lambda: list(EVADER_VMAX))
    agent_radius: float = 0.2
    obstacle_radius: float = 0.5
    obstacle_speed_range: tuple = (0.2, 0.5)
    obstacle_redirect_interval: int = 20
    target_point: tuple = (18.0, 0.0)
    target_reach_radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.capture_radii = list(self.capture_radii)
        self.evader_vmax = list(self.evader_vmax)
        self.obstacle_speed_range = tuple(self.obstacle_speed_range)
        self.target_point = tuple(self.target_point)
        self.validate()

    def validate(self):
        if min(self.d1, self.d2, self.dt) <= 0 or self.episode_len <= 0:
            raise ConfigError("arena dimensions, dt and episode_len must be positive")
        if self.n_pursuers < 1 or self.n_evaders < 1:
            raise ConfigError("need at least one pursuer and one evader")
        if min(self.capture_radii) <= 0 or self.agent_radius <= 0 or self.obstacle_radius <= 0:
            raise ConfigError("all radii must be positive")
        if self.target_reach_radius <= 0:
            raise ConfigError("target_reach_radius must be positive")
        if any(v <= self.pursuer_vmax for v in self.evader_vmax):
            raise ConfigError("every evader speed class must exceed the pursuer speed")
        tx, ty = self.target_point
        if abs(tx) > self.d1 / 2 or abs(ty) > self.d2 / 2:
            raise ConfigError("target point must lie inside the arena")

    def pursuer_class(self, i: int) -> int:
        return i % ABILITY_CLASSES

    def evader_class(self, j: int) -> int:
        return j % ABILITY_CLASSES

    def pursuer_capture_radius(self, i: int) -> float:
        return self.capture_radii[self.pursuer_class(i) % len(self.capture_radii)]

    def evader_speed(self, j: int) -> float:
        return self.evader_vmax[self.evader_class(j) % len(self.evader_vmax)]


@dataclass
class InteractionParams:
    """Weights and clamps for the uncertainty-driven layer interaction."""

    omega3: float = 10.0
    omega4: float = 10.0
    omega5: float = 2.0
    h_base: int = 19
    h_min: int = 10
    h_max: int = 20
    n_base: int = 3
    n_max: int = 5
    weight_base: float = 1.0
    weight_min: float = 0.2

    def __post_init__(self):
        if not (self.h_min <= self.h_base <= self.h_max):
            raise ConfigError("require h_min <= h_base <= h_max")
        if not (1 <= self.n_base <= self.n_max):
            raise ConfigError("require 1 <= n_base <= n_max")
        if not (0.0 < self.weight_min <= 1.0):
            raise ConfigError("weight_min must be in (0, 1]")


@dataclass
class TrainConfig:
    """Episode counts, hyperparameters and ablation switches for training."""

    episodes_upper: int = 100
    episodes_lower: int = 20
    episodes_cross: int = 30
    instance_pool: int = 100
    seed: int = 0

    # upper layer (allocation)
    upper_lr: float = 1e-4
    upper_gamma: float = 0.95
    upper_batch: int = 120
    upper_buffer: int = 50_000
    upper_warmup_updates: int = 100_000   # teacher-imitation updates before
    # the allocator switches from the spreading teacher to Q-learning
    upper_updates: int = 20   # gradient steps per allocation decision
    model_updates: int = 60   # ensemble NLL steps per interaction window

    # lower layer (planning)
    lower_lr: float = 1e-3
    lower_gamma: float = 0.99
    lower_batch: int = 1256
    lower_buffer: int = 500_000
    lower_updates: int = 4   # gradient steps per environment step
    lower_n_step: int = 25   # critic target window (multi-step returns)
    lower_policy_delay: int = 8   # critic updates per actor update
    lower_warmup_updates: int = 200_000   # teacher-imitation updates before
    # actors switch from the guidance teacher to the critic gradient

    refresh_factor: float = 1e-2
    omega1: float = 0.5
    omega2: float = 0.7
    reward_capture_bonus: float = 5.0   # added inside the capture radius
    reward_obstacle_penalty: float = 1.0
    reward_neighbor_penalty: float = 1.0
    threat_margin: float = 0.3

    noise_start: float = 0.3
    noise_end: float = 0.05
    eps_start: float = 1.0
    eps_end: float = 0.05

    # ablation switches
    fixed_h: int | None = None
    disable_multistep: bool = False
    skip_upper_pretrain: bool = False
    skip_lower_pretrain: bool = False

    def __post_init__(self):
        for name in ("episodes_upper", "episodes_lower", "episodes_cross"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.instance_pool < 1:
            raise ConfigError("instance_pool must be >= 1")
        if not (0.0 <= self.omega1 <= 1.0 and 0.0 <= self.omega2 <= 1.0):
            raise ConfigError("omega1 and omega2 must lie in [0, 1]")


def scenario_preset(name: str, n_obstacles: int = 4, seed: int = 0) -> ArenaConfig:
    """Build an ArenaConfig for a named scenario like ``V10`` (10 vs 10)."""
    name = name.upper()
    if not name.startswith("V") or not name[1:].isdigit():
        raise ConfigError(f"unknown scenario name {name!r}; expected 'V<count>'")
    n = int(name[1:])
    if n < 1:
        raise ConfigError("scenario size must be positive")
    return ArenaConfig(n_pursuers=n, n_evaders=n, n_obstacles=n_obstacles, seed=seed)


EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version"],
    "properties": {
        "version": {"const": 1},
        "scenario": {"type": "string", "pattern": "^[Vv][0-9]+$"},
        "arena": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d1": {"type": "number", "exclusiveMinimum": 0},
                "d2": {"type": "number", "exclusiveMinimum": 0},
                "d3": {"type": "number", "exclusiveMinimum": 0},
                "n_pursuers": {"type": "integer", "minimum": 1},
                "n_evaders": {"type": "integer", "minimum": 1},
                "n_obstacles": {"type": "integer", "minimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "episode_len": {"type": "integer", "minimum": 1},
                "capture_radii": {"type": "array", "items": {"type": "number"}},
                "pursuer_vmax": {"type": "number", "exclusiveMinimum": 0},
                "evader_vmax": {"type": "array", "items": {"type": "number"}},
                "agent_radius": {"type": "number", "exclusiveMinimum": 0},
                "obstacle_radius": {"type": "number", "exclusiveMinimum": 0},
                "obstacle_speed_range": {
                    "type": "array", "items": {"type": "number"},
                    "minItems": 2, "maxItems": 2,
                },
                "obstacle_redirect_interval": {"type": "integer", "minimum": 1},
                "target_point": {
                    "type": "array", "items": {"type": "number"},
                    "minItems": 2, "maxItems": 2,
                },
                "target_reach_radius": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "episodes_upper": {"type": "integer", "minimum": 0},
                "episodes_lower": {"type": "integer", "minimum": 0},
                "episodes_cross": {"type": "integer", "minimum": 0},
                "instance_pool": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "upper_lr": {"type": "number"},
                "upper_gamma": {"type": "number"},
                "upper_batch": {"type": "integer", "minimum": 1},
                "upper_buffer": {"type": "integer", "minimum": 1},
                "upper_warmup_updates": {"type": "integer", "minimum": 0},
                "upper_updates": {"type": "integer", "minimum": 1},
                "model_updates": {"type": "integer", "minimum": 1},
                "lower_lr": {"type": "number"},
                "lower_gamma": {"type": "number"},
                "lower_batch": {"type": "integer", "minimum": 1},
                "lower_buffer": {"type": "integer", "minimum": 1},
                "lower_updates": {"type": "integer", "minimum": 1},
                "lower_n_step": {"type": "integer", "minimum": 1},
                "lower_policy_delay": {"type": "integer", "minimum": 1},
                "lower_warmup_updates": {"type": "integer", "minimum": 0},
                "refresh_factor": {"type": "number"},
                "omega1": {"type": "number"},
                "omega2": {"type": "number"},
                "reward_capture_bonus": {"type": "number"},
                "reward_obstacle_penalty": {"type": "number"},
                "reward_neighbor_penalty": {"type": "number"},
                "threat_margin": {"type": "number"},
                "noise_start": {"type": "number"},
                "noise_end": {"type": "number"},
                "eps_start": {"type": "number"},
                "eps_end": {"type": "number"},
                "fixed_h": {"type": ["integer", "null"]},
                "disable_multistep": {"type": "boolean"},
                "skip_upper_pretrain": {"type": "boolean"},
                "skip_lower_pretrain": {"type": "boolean"},
            },
        },
        "interaction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega3": {"type": "number"},
                "omega4": {"type": "number"},
                "omega5": {"type": "number"},
                "h_base": {"type": "integer"},
                "h_min": {"type": "integer"},
                "h_max": {"type": "integer"},
                "n_base": {"type": "integer"},
                "n_max": {"type": "integer"},
                "weight_base": {"type": "number"},
                "weight_min": {"type": "number"},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "instances": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
    },
}


@dataclass
class ExperimentConfig:
    arena: ArenaConfig
    train: TrainConfig
    interaction: InteractionParams
    eval_instances: int = 50
    eval_seed: int = 1000

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, EXPERIMENT_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid experiment config: {exc.message}") from exc
        arena_kwargs = dict(raw.get("arena", {}))
        if "scenario" in raw:
            base = scenario_preset(raw["scenario"],
                                   arena_kwargs.pop("n_obstacles", 4),
                                   arena_kwargs.pop("seed", 0))
            merged = asdict(base)
            merged.update(arena_kwargs)
            arena = ArenaConfig(**merged)
        else:
            arena = ArenaConfig(**arena_kwargs)
        train = TrainConfig(**raw.get("train", {}))
        interaction = InteractionParams(**raw.get("interaction", {}))
        ev = raw.get("eval", {})
        return ExperimentConfig(arena=arena, train=train, interaction=interaction,
                                eval_instances=ev.get("instances", 50),
                                eval_seed=ev.get("seed", 1000))

    @staticmethod
    def load(path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read experiment config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(raw)
