"""Shared enums and configuration models for the causal rescue lab"""
from dataclasses import dataclass, field, asdict
from enum import Enum, IntEnum
from typing import Dict, List, Optional, Tuple

from config.settings import Settings
from core.errors import ConfigError


class Texture(IntEnum):
    """Fixed dataset encoding: rough=0, smooth=1"""
    ROUGH = 0
    SMOOTH = 1


class Shape(IntEnum):
    """Fixed dataset encoding: column=0, debris=1"""
    COLUMN = 0
    DEBRIS = 1


class LawId(str, Enum):
    TEXTURE_ONLY = "texture_only"
    TEXTURE_ONLY_WITH_SHAPE_PRESENT = "texture_only_with_shape_present"
    TEXTURE_AND_SHAPE = "texture_and_shape"


class AgentKind(str, Enum):
    CAUSAL_ORACLE = "causal_oracle"
    CAUSAL_DISCOVERED = "causal_discovered"
    NON_CAUSAL = "non_causal"

    @property
    def is_causal(self) -> bool:
        return self is not AgentKind.NON_CAUSAL


class Action(IntEnum):
    """Absolute grid translations; the agent faces its last action"""
    FORWARD = 0   # north, row - 1
    BACKWARD = 1  # south, row + 1
    LEFT = 2      # west, col - 1
    RIGHT = 3     # east, col + 1

    @property
    def delta(self) -> Tuple[int, int]:
        return ACTION_DELTAS[self]


ACTION_DELTAS: Dict[Action, Tuple[int, int]] = {
    Action.FORWARD: (-1, 0),
    Action.BACKWARD: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


class CellCode(IntEnum):
    WALL = 0
    FREE = 1
    ROUGH_DEBRIS = 2
    ROUGH_COLUMN = 3
    SMOOTH_DEBRIS = 4
    SMOOTH_COLUMN = 5
    AGENT_START = 6
    GOAL = 7
    AGENT = 8


NUM_CELL_CODES = len(CellCode)

# Order of the four causal observation slots and of the digital-mind probability table
OBJECT_TYPES: List[Tuple[Texture, Shape]] = [
    (Texture.ROUGH, Shape.DEBRIS),
    (Texture.ROUGH, Shape.COLUMN),
    (Texture.SMOOTH, Shape.DEBRIS),
    (Texture.SMOOTH, Shape.COLUMN),
]


def object_code(texture: Texture, shape: Shape) -> CellCode:
    """Cell code of an object: 2..5 in the order rough debris, rough column, smooth debris, smooth column"""
    return CellCode(2 + 2 * int(texture) + (0 if shape == Shape.DEBRIS else 1))


def object_type_from_code(code: int) -> Tuple[Texture, Shape]:
    if not 2 <= int(code) <= 5:
        raise ValueError(f"Cell code {code} is not an object")
    offset = int(code) - 2
    texture = Texture(offset // 2)
    shape = Shape.DEBRIS if offset % 2 == 0 else Shape.COLUMN
    return texture, shape


@dataclass(frozen=True)
class NotearsConfig:
    """Solver settings for continuous structure learning"""
    lambda1: float = Settings.NOTEARS_LAMBDA1
    w_threshold: float = Settings.NOTEARS_W_THRESHOLD
    max_dual_iter: int = 100
    h_tol: float = 1e-8
    rho_max: float = 1e16
    inner_max_iter: int = 500
    inner_gtol: float = 1e-9
    # raw keeps 0/1 columns as-is; signed maps them to -1/+1; centered subtracts column means
    encoding: str = "raw"
    # extra L1 weight on edges from a later column to an earlier one; 0 disables it
    order_tiebreak: float = 0.0
    tabu_edges: Tuple[Tuple[str, str], ...] = ()
    tabu_parent_nodes: Tuple[str, ...] = ()
    tabu_child_nodes: Tuple[str, ...] = ()

    ENCODINGS = ("signed", "raw", "centered")

    def validate(self) -> "NotearsConfig":
        if self.lambda1 < 0:
            raise ConfigError(f"lambda1 must be >= 0, got {self.lambda1}")
        if self.w_threshold < 0:
            raise ConfigError(f"w_threshold must be >= 0, got {self.w_threshold}")
        if self.h_tol <= 0:
            raise ConfigError(f"h_tol must be > 0, got {self.h_tol}")
        if self.rho_max <= 1:
            raise ConfigError(f"rho_max must be > 1, got {self.rho_max}")
        if self.max_dual_iter < 1 or self.inner_max_iter < 1:
            raise ConfigError("iteration caps must be positive")
        if self.encoding not in self.ENCODINGS:
            raise ConfigError(f"encoding must be one of {self.ENCODINGS}, got {self.encoding!r}")
        if self.order_tiebreak < 0:
            raise ConfigError("order_tiebreak must be >= 0")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["tabu_edges"] = [list(edge) for edge in self.tabu_edges]
        data["tabu_parent_nodes"] = list(self.tabu_parent_nodes)
        data["tabu_child_nodes"] = list(self.tabu_child_nodes)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "NotearsConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if "tabu_edges" in known:
            known["tabu_edges"] = tuple(tuple(edge) for edge in known["tabu_edges"])
        for key in ("tabu_parent_nodes", "tabu_child_nodes"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known).validate()


@dataclass(frozen=True)
class EnvConfig:
    """Search-and-rescue grid layout settings"""
    grid_size: int = 20
    room_size: int = 7
    room_randomized: bool = False
    n_objects: int = 18
    max_steps: int = 800
    law: LawId = LawId.TEXTURE_ONLY
    n_door_objects: int = 2
    seed: int = 0
    immovable_penalty: float = 0.0
    max_layout_retries: int = 100

    def validate(self) -> "EnvConfig":
        if self.room_size < 3:
            raise ConfigError(f"room_size must be >= 3 to hold a goal, got {self.room_size}")
        if self.room_size + 2 > self.grid_size:
            raise ConfigError(
                f"room_size + 2 must fit in grid_size ({self.room_size} + 2 > {self.grid_size})"
            )
        if self.n_door_objects < 1:
            raise ConfigError("n_door_objects must be >= 1 so the room can be entered")
        if self.n_door_objects > 4 * (self.room_size - 2):
            raise ConfigError("more door objects than non-corner wall cells")
        if self.n_objects < self.n_door_objects:
            raise ConfigError(
                f"n_objects ({self.n_objects}) must be >= n_door_objects ({self.n_door_objects})"
            )
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        if self.immovable_penalty < 0:
            raise ConfigError("immovable_penalty is a magnitude and must be >= 0")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["law"] = self.law.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EnvConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if "law" in known:
            known["law"] = LawId(known["law"])
        return cls(**known).validate()


@dataclass(frozen=True)
class A2CConfig:
    gamma: float = 0.995
    n_steps: int = 100
    ent_coef: float = 0.002
    vf_coef: float = 0.5
    max_grad_norm: float = 1.0
    learning_rate: float = 0.0003
    adam_eps: float = 1e-7
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    hidden_sizes: Tuple[int, ...] = (64, 64)
    normalize_advantages: bool = False

    def validate(self) -> "A2CConfig":
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be positive")
        if self.max_grad_norm <= 0 or self.learning_rate <= 0:
            raise ConfigError("max_grad_norm and learning_rate must be positive")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ConfigError("hidden_sizes must list positive layer widths")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["adam_betas"] = list(self.adam_betas)
        data["hidden_sizes"] = list(self.hidden_sizes)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "A2CConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        for key in ("adam_betas", "hidden_sizes"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known).validate()


@dataclass(frozen=True)
class ExperimentConfig:
    """One training run: environment, agent kind, budgets and evaluation cadence"""
    env: EnvConfig = field(default_factory=EnvConfig)
    agent_kind: AgentKind = AgentKind.CAUSAL_ORACLE
    n_envs: int = 8
    total_timesteps: int = 8_000_000
    eval_interval: int = 10_000
    log_interval: int = 5_000
    eval_episodes: int = 20
    early_stop_mgr: float = 1.0
    seed: int = 0
    greedy_eval: bool = True
    mind_min_interactions: int = Settings.MIND_MIN_INTERACTIONS
    a2c: A2CConfig = field(default_factory=A2CConfig)
    notears: NotearsConfig = field(default_factory=NotearsConfig)

    @property
    def batch_timesteps(self) -> int:
        return self.n_envs * self.a2c.n_steps

    def validate(self) -> "ExperimentConfig":
        self.env.validate()
        self.a2c.validate()
        self.notears.validate()
        if self.n_envs < 1:
            raise ConfigError("n_envs must be positive")
        if self.total_timesteps < 0:
            raise ConfigError("total_timesteps must be >= 0")
        if self.eval_interval < 1 or self.log_interval < 1 or self.eval_episodes < 1:
            raise ConfigError("eval_interval, log_interval and eval_episodes must be positive")
        if not 0.0 <= self.early_stop_mgr <= 1.0:
            raise ConfigError("early_stop_mgr must lie in [0, 1]")
        return self

    @classmethod
    def desk_scale(cls, agent_kind: AgentKind = AgentKind.CAUSAL_ORACLE, seed: int = 0,
                   law: LawId = LawId.TEXTURE_ONLY) -> "ExperimentConfig":
        """10x10 grid, 4x4 room, 6 objects, 200 steps, 500k timesteps"""
        env = EnvConfig(grid_size=10, room_size=4, n_objects=6, max_steps=200, law=law, seed=seed)
        return cls(env=env, agent_kind=agent_kind, total_timesteps=500_000, seed=seed).validate()

    def to_dict(self) -> dict:
        return {
            "env": self.env.to_dict(),
            "agent_kind": self.agent_kind.value,
            "n_envs": self.n_envs,
            "total_timesteps": self.total_timesteps,
            "eval_interval": self.eval_interval,
            "log_interval": self.log_interval,
            "eval_episodes": self.eval_episodes,
            "early_stop_mgr": self.early_stop_mgr,
            "seed": self.seed,
            "greedy_eval": self.greedy_eval,
            "mind_min_interactions": self.mind_min_interactions,
            "a2c": self.a2c.to_dict(),
            "notears": self.notears.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if "env" in known:
            known["env"] = EnvConfig.from_dict(known["env"])
        if "agent_kind" in known:
            known["agent_kind"] = AgentKind(known["agent_kind"])
        if "a2c" in known:
            known["a2c"] = A2CConfig.from_dict(known["a2c"])
        if "notears" in known:
            known["notears"] = NotearsConfig.from_dict(known["notears"])
        return cls(**known).validate()


@dataclass(frozen=True)
class MetricsRow:
    """Aggregated evaluation metrics at one training timestep"""
    timestep: int
    mgr: float
    mtt: float
    mmi: float
    mii: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsRow":
        return cls(
            timestep=int(data["timestep"]),
            mgr=float(data["mgr"]),
            mtt=float(data["mtt"]),
            mmi=float(data["mmi"]),
            mii=float(data["mii"]),
        )
