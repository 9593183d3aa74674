"""
Search-and-rescue grid world.

A walled room holds the goal; movable objects sit in the room boundary as blocked doors;
textured/shaped objects are scattered outside. The agent translates one cell per action and
pushes movable objects Sokoban style. Transitions are pure: step() returns a new EnvState.
"""
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from core.errors import DataError, EpisodeFinishedError, LayoutGenerationError
from core.models import (
    Action, CellCode, EnvConfig, Shape, Texture, object_code, object_type_from_code,
)
from core.scenarios import CausalLaw, causal_law, law_movability

logger = logging.getLogger(__name__)

Position = Tuple[int, int]
Room = Tuple[int, int, int]  # top row, left col, side length (walls included)

GOAL_BASE_REWARD = 10.0
GOAL_TIME_BONUS = 10.0
GOAL_REWARD_CAP = 20.0

TERRAIN_CODES = (CellCode.WALL, CellCode.FREE, CellCode.AGENT_START, CellCode.GOAL)
PASSABLE_TERRAIN = (CellCode.FREE, CellCode.AGENT_START)

CELL_CHARS: Dict[CellCode, str] = {
    CellCode.WALL: "#",
    CellCode.FREE: ".",
    CellCode.ROUGH_DEBRIS: "d",
    CellCode.ROUGH_COLUMN: "c",
    CellCode.SMOOTH_DEBRIS: "D",
    CellCode.SMOOTH_COLUMN: "C",
    CellCode.AGENT_START: "s",
    CellCode.GOAL: "G",
    CellCode.AGENT: "A",
}
CHAR_CODES: Dict[str, CellCode] = {char: code for code, char in CELL_CHARS.items()}


def goal_reward(step_count: int, max_steps: int) -> float:
    """min(10 + ((max_steps - step_count) / max_steps) * 10, 20)"""
    return min(GOAL_BASE_REWARD + ((max_steps - step_count) / max_steps) * GOAL_TIME_BONUS, GOAL_REWARD_CAP)


@dataclass(frozen=True)
class ObjectInstance:
    position: Position
    texture: Texture
    shape: Shape
    movable: bool
    moved_ever: bool = False

    @property
    def code(self) -> CellCode:
        return object_code(self.texture, self.shape)


@dataclass(frozen=True)
class EpisodeCounters:
    movable_interactions: int = 0
    immovable_interactions: int = 0
    reached_goal: bool = False
    steps_to_goal: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "movable_interactions": self.movable_interactions,
            "immovable_interactions": self.immovable_interactions,
            "reached_goal": self.reached_goal,
            "steps_to_goal": self.steps_to_goal,
        }


@dataclass(frozen=True)
class LayoutRef:
    """A layout is never stored: seed + config regenerate it exactly"""
    seed: int
    config: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {"seed": self.seed, "config": dict(self.config)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LayoutRef":
        return cls(seed=int(data["seed"]), config=dict(data["config"]))


@dataclass(frozen=True, eq=False)
class EnvState:
    """
    terrain holds only wall / free / agent-start / goal codes and never changes within an
    episode; objects and the agent are overlaid by the `grid` property.
    """
    terrain: np.ndarray
    objects: Tuple[ObjectInstance, ...]
    agent_pos: Position
    goal_pos: Position
    start_pos: Position
    max_steps: int
    agent_facing: Action = Action.FORWARD
    step_count: int = 0
    done: bool = False
    counters: EpisodeCounters = field(default_factory=EpisodeCounters)
    last_collision: bool = False
    room: Optional[Room] = None
    layout_ref: Optional[LayoutRef] = None
    _occupancy: Dict[Position, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terrain = self.terrain
        if not (isinstance(terrain, np.ndarray) and terrain.dtype == np.int8 and not terrain.flags.writeable):
            terrain = np.array(terrain, dtype=np.int8)
            terrain.setflags(write=False)
            object.__setattr__(self, "terrain", terrain)
        object.__setattr__(self, "objects", tuple(self.objects))
        occupancy = {}
        for i, obj in enumerate(self.objects):
            if obj.position in occupancy:
                raise DataError(f"Two objects share cell {obj.position}")
            occupancy[obj.position] = i
        object.__setattr__(self, "_occupancy", occupancy)

    @property
    def grid_size(self) -> int:
        return self.terrain.shape[0]

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos[0] < self.terrain.shape[0] and 0 <= pos[1] < self.terrain.shape[1]

    def object_index_at(self, pos: Position) -> Optional[int]:
        return self._occupancy.get(pos)

    def cell_code(self, pos: Position) -> CellCode:
        """Code seen at pos; out-of-bounds reads as wall"""
        if not self.in_bounds(pos):
            return CellCode.WALL
        if pos == self.agent_pos:
            return CellCode.AGENT
        index = self._occupancy.get(pos)
        if index is not None:
            return self.objects[index].code
        return CellCode(int(self.terrain[pos]))

    @property
    def grid(self) -> np.ndarray:
        grid = np.array(self.terrain, dtype=np.int8)
        for obj in self.objects:
            grid[obj.position] = obj.code
        grid[self.agent_pos] = CellCode.AGENT
        return grid


def _neighbor(pos: Position, action: Action) -> Position:
    dr, dc = action.delta
    return pos[0] + dr, pos[1] + dc


def local_view(s: EnvState) -> CellCode:
    """Code of the cell directly ahead along agent_facing"""
    return s.cell_code(_neighbor(s.agent_pos, s.agent_facing))


def step(s: EnvState, a: Action, immovable_penalty: float = 0.0) -> Tuple[EnvState, float, bool, Dict[str, Any]]:
    if s.done:
        raise EpisodeFinishedError("step() called on a finished episode; reset first")
    a = Action(a)
    step_count = s.step_count + 1
    target = _neighbor(s.agent_pos, a)
    code = s.cell_code(target)

    agent_pos = s.agent_pos
    objects = s.objects
    counters = s.counters
    reward = 0.0
    collision = False
    interaction: Optional[Dict[str, Any]] = None

    if code == CellCode.WALL:
        event, collision = "wall", True
    elif code == CellCode.GOAL:
        event = "goal"
        agent_pos = target
        reward = goal_reward(step_count, s.max_steps)
        counters = replace(counters, reached_goal=True, steps_to_goal=step_count)
    elif code in PASSABLE_TERRAIN:
        event = "move"
        agent_pos = target
    else:
        index = s.object_index_at(target)
        obj = s.objects[index]
        if not obj.movable:
            event, collision = "immovable", True
            counters = replace(counters, immovable_interactions=counters.immovable_interactions + 1)
            reward -= immovable_penalty
            moved = False
        else:
            counters = replace(counters, movable_interactions=counters.movable_interactions + 1)
            beyond = _neighbor(target, a)
            moved = s.cell_code(beyond) in PASSABLE_TERRAIN
            if moved:
                event = "push"
                agent_pos = target
                pushed = replace(obj, position=beyond, moved_ever=True)
                objects = s.objects[:index] + (pushed,) + s.objects[index + 1:]
            else:
                event, collision = "push_blocked", True
        interaction = {"texture": obj.texture, "shape": obj.shape, "movable": obj.movable, "moved": moved}

    truncated = not counters.reached_goal and step_count >= s.max_steps
    done = counters.reached_goal or truncated
    successor = replace(
        s,
        objects=objects,
        agent_pos=agent_pos,
        agent_facing=a,
        step_count=step_count,
        done=done,
        counters=counters,
        last_collision=collision,
    )
    info = {
        "event": event,
        "collision": collision,
        "interaction": interaction,
        "truncated": truncated,
        "reached_goal": counters.reached_goal,
    }
    return successor, reward, done, info


def _room_cells(room: Room) -> Tuple[List[Position], List[Position], List[Position]]:
    """(perimeter, non-corner perimeter, interior) cells of a square room"""
    top, left, size = room
    perimeter, doors, interior = [], [], []
    for r in range(top, top + size):
        for c in range(left, left + size):
            edge_r = r in (top, top + size - 1)
            edge_c = c in (left, left + size - 1)
            if edge_r or edge_c:
                perimeter.append((r, c))
                if not (edge_r and edge_c):
                    doors.append((r, c))
            else:
                interior.append((r, c))
    return perimeter, doors, interior


def _inward(door: Position, room: Room) -> Position:
    top, left, size = room
    r, c = door
    if r == top:
        return r + 1, c
    if r == top + size - 1:
        return r - 1, c
    if c == left:
        return r, c + 1
    return r, c - 1


def _random_type(rng: np.random.Generator) -> Tuple[Texture, Shape]:
    return Texture(int(rng.integers(2))), Shape(int(rng.integers(2)))


def is_goal_reachable(s: EnvState) -> bool:
    """Flood fill from the agent with movable objects treated as passable"""
    queue = deque([s.agent_pos])
    visited = {s.agent_pos}
    while queue:
        pos = queue.popleft()
        if pos == s.goal_pos:
            return True
        for action in Action:
            nxt = _neighbor(pos, action)
            if nxt in visited or not s.in_bounds(nxt):
                continue
            if s.terrain[nxt] == CellCode.WALL:
                continue
            index = s.object_index_at(nxt)
            if index is not None and not s.objects[index].movable:
                continue
            visited.add(nxt)
            queue.append(nxt)
    return False


def _try_layout(cfg: EnvConfig, law: CausalLaw, rng: np.random.Generator) -> Optional[EnvState]:
    g, size = cfg.grid_size, cfg.room_size
    if cfg.room_randomized:
        top = int(rng.integers(1, g - size))
        left = int(rng.integers(1, g - size))
    else:
        top = left = (g - size) // 2
    room = (top, left, size)
    perimeter, door_slots, interior = _room_cells(room)

    terrain = np.full((g, g), CellCode.FREE, dtype=np.int8)
    for pos in perimeter:
        terrain[pos] = CellCode.WALL

    objects: List[ObjectInstance] = []
    movable_types = [(t, s) for t in Texture for s in Shape if law_movability(law, t, s)]
    door_idx = rng.choice(len(door_slots), size=cfg.n_door_objects, replace=False)
    doors = [door_slots[int(i)] for i in sorted(door_idx)]
    for pos in doors:
        terrain[pos] = CellCode.FREE
        texture, shape = movable_types[int(rng.integers(len(movable_types)))]
        objects.append(ObjectInstance(pos, texture, shape, movable=True))

    blocked = {_inward(d, room) for d in doors}
    goal_slots = [pos for pos in interior if pos not in blocked]
    if not goal_slots:
        return None
    goal = goal_slots[int(rng.integers(len(goal_slots)))]
    terrain[goal] = CellCode.GOAL

    room_area = set(perimeter) | set(interior)
    outside = [(r, c) for r in range(g) for c in range(g) if (r, c) not in room_area]
    n_scattered = cfg.n_objects - cfg.n_door_objects
    if len(outside) < n_scattered + 1:
        raise LayoutGenerationError(
            f"{len(outside)} free cells outside the room cannot hold {n_scattered} objects and the agent"
        )
    picks = rng.choice(len(outside), size=n_scattered + 1, replace=False)
    start = outside[int(picks[0])]
    terrain[start] = CellCode.AGENT_START
    for i in picks[1:]:
        texture, shape = _random_type(rng)
        objects.append(ObjectInstance(outside[int(i)], texture, shape, law_movability(law, texture, shape)))

    return EnvState(
        terrain=terrain,
        objects=tuple(objects),
        agent_pos=start,
        goal_pos=goal,
        start_pos=start,
        max_steps=cfg.max_steps,
        room=room,
    )


def generate_layout(cfg: EnvConfig, rng: np.random.Generator) -> EnvState:
    """Rejection-sample layouts until the goal is reachable with movables passable"""
    cfg = cfg.validate()
    law = causal_law(cfg.law)
    for attempt in range(1, cfg.max_layout_retries + 1):
        state = _try_layout(cfg, law, rng)
        if state is not None and is_goal_reachable(state):
            if attempt > 1:
                logger.debug(f"[GridWorld] Layout accepted after {attempt} attempts")
            return state
    raise LayoutGenerationError(
        f"No solvable layout after {cfg.max_layout_retries} attempts "
        f"(grid {cfg.grid_size}, room {cfg.room_size}, {cfg.n_objects} objects)",
        attempts=cfg.max_layout_retries,
    )


def layout_from_seed(cfg: EnvConfig, seed: int) -> EnvState:
    state = generate_layout(cfg, np.random.default_rng(seed))
    return replace(state, layout_ref=LayoutRef(seed=int(seed), config=cfg.to_dict()))


def regenerate_layout(ref: LayoutRef) -> EnvState:
    return layout_from_seed(EnvConfig.from_dict(ref.config), ref.seed)


def reset_state(s: EnvState) -> EnvState:
    """Same layout, objects back to their start cells, fresh counters"""
    if s.layout_ref is None:
        raise DataError("Only layouts generated from a seed can be reset")
    return regenerate_layout(s.layout_ref)


def render_text(s: EnvState) -> str:
    grid = s.grid
    return "\n".join("".join(CELL_CHARS[CellCode(int(code))] for code in row) for row in grid)


def parse_ascii_layout(text: str, law: Optional[CausalLaw] = None, max_steps: int = 800) -> EnvState:
    """
    Build a state from a character map (same alphabet as render_text). 'A' marks the agent;
    without an 'A' the agent stands on 's'. Object movability follows the law.
    """
    law = law or causal_law(EnvConfig().law)
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not rows or any(len(row) != len(rows[0]) for row in rows):
        raise DataError("Layout must be a non-empty rectangle of characters")
    terrain = np.full((len(rows), len(rows[0])), CellCode.FREE, dtype=np.int8)
    objects: List[ObjectInstance] = []
    agent: List[Position] = []
    start: List[Position] = []
    goal: List[Position] = []
    for r, row in enumerate(rows):
        for c, char in enumerate(row):
            if char not in CHAR_CODES:
                raise DataError(f"Unknown layout character {char!r} at ({r}, {c})")
            code = CHAR_CODES[char]
            if code == CellCode.AGENT:
                agent.append((r, c))
            elif code in TERRAIN_CODES:
                terrain[r, c] = code
                if code == CellCode.AGENT_START:
                    start.append((r, c))
                elif code == CellCode.GOAL:
                    goal.append((r, c))
            else:
                texture, shape = object_type_from_code(code)
                objects.append(ObjectInstance((r, c), texture, shape, law_movability(law, texture, shape)))
    if len(goal) != 1:
        raise DataError(f"Layout needs exactly one goal, found {len(goal)}")
    if len(agent) > 1 or len(start) > 1 or not (agent or start):
        raise DataError("Layout needs one agent ('A') and at most one start ('s')")
    agent_pos = agent[0] if agent else start[0]
    start_pos = start[0] if start else agent_pos
    if not start:
        terrain[start_pos] = CellCode.AGENT_START
    return EnvState(
        terrain=terrain,
        objects=tuple(objects),
        agent_pos=agent_pos,
        goal_pos=goal[0],
        start_pos=start_pos,
        max_steps=max_steps,
    )
