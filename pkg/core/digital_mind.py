"""
Digital mind: the agent's memory of object interactions and its movability beliefs.

The interaction log persists across episodes; per-episode fields (movement status, last
action) reset at every episode start. Beliefs come from structure learning on the log
followed by a Bayesian fit on the learned graph.
"""
import csv
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import Settings
from core import bayes, notears
from core.errors import LabError
from core.models import OBJECT_TYPES, Action, NotearsConfig, Shape, Texture

logger = logging.getLogger(__name__)

PRIOR_PROBABILITY = 0.5
DEFAULT_MIN_INTERACTIONS = Settings.MIND_MIN_INTERACTIONS
MOVABILITY = "movability"
MIND_ENCODING = Settings.MIND_NOTEARS_ENCODING

ObjectType = Tuple[Texture, Shape]


class MovementStatus(str, Enum):
    UNKNOWN = "unknown"
    MOVED = "moved"
    NEVER_MOVED = "never_moved"


@dataclass(frozen=True)
class ObjectTypeRecord:
    texture: Texture
    shape: Shape
    interaction_count: int = 0
    moved_count: int = 0
    last_action: Optional[Action] = None
    movement_status: MovementStatus = MovementStatus.UNKNOWN
    causal_probability: float = PRIOR_PROBABILITY


@dataclass(frozen=True)
class InteractionRow:
    texture: Texture
    shape: Shape
    moved: bool


class DigitalMind:
    """One mind per environment instance; never shared between concurrently stepped envs"""

    def __init__(self, min_interactions: int = DEFAULT_MIN_INTERACTIONS):
        self.min_interactions = min_interactions
        self.entries: Dict[ObjectType, ObjectTypeRecord] = {}
        self.log: List[InteractionRow] = []
        self.graph = None
        self._probabilities: Dict[ObjectType, float] = {t: PRIOR_PROBABILITY for t in OBJECT_TYPES}

    def record_interaction(self, texture: Texture, shape: Shape, action: Optional[Action], moved: bool) -> "DigitalMind":
        key = (Texture(texture), Shape(shape))
        entry = self.entries.get(key) or ObjectTypeRecord(*key, causal_probability=self._probabilities[key])
        if moved or entry.movement_status is MovementStatus.MOVED:
            status = MovementStatus.MOVED
        else:
            status = MovementStatus.NEVER_MOVED
        self.entries[key] = replace(
            entry,
            interaction_count=entry.interaction_count + 1,
            moved_count=entry.moved_count + int(bool(moved)),
            last_action=None if action is None else Action(action),
            movement_status=status,
        )
        self.log.append(InteractionRow(key[0], key[1], bool(moved)))
        return self

    def reset_episode(self) -> "DigitalMind":
        """Clear per-episode status; counts, log and beliefs persist"""
        for key, entry in self.entries.items():
            self.entries[key] = replace(entry, movement_status=MovementStatus.UNKNOWN, last_action=None)
        return self

    @staticmethod
    def column_labels(include_shape: bool) -> Tuple[str, ...]:
        return ("texture", "shape", MOVABILITY) if include_shape else ("texture", MOVABILITY)

    def to_dataset(self, include_shape: bool) -> np.ndarray:
        """Rows (texture[, shape], moved) with rough=0/smooth=1, column=0/debris=1, immovable=0/moved=1"""
        width = len(self.column_labels(include_shape))
        if not self.log:
            return np.zeros((0, width))
        rows = [
            (int(r.texture), int(r.shape), int(r.moved)) if include_shape else (int(r.texture), int(r.moved))
            for r in self.log
        ]
        return np.array(rows, dtype=np.float64)

    @staticmethod
    def decode_dataset(data: np.ndarray, include_shape: bool,
                       default_shape: Shape = Shape.DEBRIS) -> List[InteractionRow]:
        if include_shape:
            return [InteractionRow(Texture(int(t)), Shape(int(s)), bool(m)) for t, s, m in data]
        return [InteractionRow(Texture(int(t)), default_shape, bool(m)) for t, m in data]

    def probability(self, texture: Texture, shape: Shape) -> float:
        return self._probabilities[(Texture(texture), Shape(shape))]

    def probability_vector(self) -> np.ndarray:
        """Beliefs in OBJECT_TYPES order"""
        return np.array([self._probabilities[t] for t in OBJECT_TYPES])

    def _set_probabilities(self, table: Dict[ObjectType, float]) -> None:
        self._probabilities = dict(table)
        for key, entry in self.entries.items():
            self.entries[key] = replace(entry, causal_probability=table[key])

    def refresh_causal_model(self, cfg: Optional[NotearsConfig] = None, include_shape: bool = False,
                             alpha: float = 1.0) -> "DigitalMind":
        """Re-learn graph and beliefs from the whole log; below min_interactions beliefs stay at the prior"""
        if len(self.log) < self.min_interactions:
            self.graph = None
            self._set_probabilities({t: PRIOR_PROBABILITY for t in OBJECT_TYPES})
            return self

        cfg = cfg or NotearsConfig()
        # movability is the effect under study; it never causes texture or shape
        if MOVABILITY not in cfg.tabu_parent_nodes:
            cfg = replace(cfg, tabu_parent_nodes=cfg.tabu_parent_nodes + (MOVABILITY,))
        cfg = replace(cfg, encoding=MIND_ENCODING)
        labels = self.column_labels(include_shape)
        data = self.to_dataset(include_shape)
        try:
            result = notears.fit(data, cfg, labels=labels)
            net = bayes.fit_cpds(result.graph, data, alpha=alpha)
            table = {}
            for texture, shape in OBJECT_TYPES:
                evidence = {"texture": int(texture)}
                if include_shape:
                    evidence["shape"] = int(shape)
                table[(texture, shape)] = bayes.query_movability(net, evidence)
        except LabError as e:
            logger.warning(f"[DigitalMind] Refresh failed on {len(self.log)} rows, keeping beliefs: {e}")
            return self

        self.graph = result.graph
        self._set_probabilities(table)
        logger.debug(
            f"[DigitalMind] {len(self.log)} rows, edges={result.graph.edges()}, "
            f"P(movable)={[round(table[t], 3) for t in OBJECT_TYPES]}"
        )
        return self

    def dump(self, log_path: str, table_path: str) -> None:
        with open(log_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["texture", "shape", "moved"])
            for row in self.log:
                writer.writerow([int(row.texture), int(row.shape), int(row.moved)])
        with open(table_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["texture", "shape", "interaction_count", "moved_count",
                             "movement_status", "causal_probability"])
            for texture, shape in OBJECT_TYPES:
                entry = self.entries.get((texture, shape)) or ObjectTypeRecord(texture, shape)
                writer.writerow([
                    texture.name.lower(), shape.name.lower(), entry.interaction_count, entry.moved_count,
                    entry.movement_status.value, repr(self._probabilities[(texture, shape)]),
                ])

    @classmethod
    def load_log_csv(cls, path: str, min_interactions: int = DEFAULT_MIN_INTERACTIONS) -> "DigitalMind":
        """Rebuild a mind from a dumped interaction log; beliefs need a refresh afterwards"""
        mind = cls(min_interactions)
        with open(path, "r", encoding="utf-8", newline="") as f:
            for row in csv.DictReader(f):
                mind.record_interaction(Texture(int(row["texture"])), Shape(int(row["shape"])), None,
                                        row["moved"] == "1")
        return mind.reset_episode()

    def copy(self) -> "DigitalMind":
        clone = DigitalMind(self.min_interactions)
        clone.entries = dict(self.entries)
        clone.log = list(self.log)
        clone.graph = self.graph
        clone._probabilities = dict(self._probabilities)
        return clone
