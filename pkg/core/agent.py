"""
A2C agent plumbing: observation vectors, action history, rollout storage, n-step returns
and the update step.

Observation layout (fixed, causal and non-causal agents differ only in the last block):
    [0:2]   agent position, each coordinate scaled to [-1, 1]
    [2:4]   goal offset (goal - agent) / (grid_size - 1)
    [4:13]  one-hot of the cell code straight ahead
    [13]    collision on the previous step
    [14:30] one-hot of the last 4 actions, most recent first, zeros for empty slots
    [30:34] causal agent only: movability per object type in OBJECT_TYPES order
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.digital_mind import PRIOR_PROBABILITY, DigitalMind
from core.errors import DimensionError
from core.gridworld import EnvState, local_view
from core.models import NUM_CELL_CODES, OBJECT_TYPES, A2CConfig, Action
from core.policy import (
    N_ACTIONS, AdamState, LossReport, PolicyParams, a2c_loss_and_grads, apply_gradients,
    policy_value_forward,
)
from core.scenarios import CausalLaw, law_movability

logger = logging.getLogger(__name__)

HISTORY_LENGTH = 4
BASE_OBS_DIM = 2 + 2 + NUM_CELL_CODES + 1 + HISTORY_LENGTH * N_ACTIONS
CAUSAL_SLOTS = len(OBJECT_TYPES)


def observation_dim(causal: bool) -> int:
    return BASE_OBS_DIM + (CAUSAL_SLOTS if causal else 0)


class ActionHistory:
    """The last few actions, most recent first"""

    def __init__(self, length: int = HISTORY_LENGTH):
        self.length = length
        self._actions: deque = deque(maxlen=length)

    def push(self, action: Action) -> None:
        self._actions.appendleft(Action(action))

    def clear(self) -> None:
        self._actions.clear()

    def __len__(self) -> int:
        return len(self._actions)

    def actions(self) -> Tuple[Action, ...]:
        return tuple(self._actions)

    def one_hot(self) -> np.ndarray:
        encoded = np.zeros((self.length, N_ACTIONS))
        for slot, action in enumerate(self._actions):
            encoded[slot, int(action)] = 1.0
        return encoded.ravel()


def causal_slots(mind: Optional[DigitalMind], oracle_law: Optional[CausalLaw] = None) -> np.ndarray:
    """Exact 0/1 movability from the law in oracle mode, else the mind's beliefs"""
    if oracle_law is not None:
        return np.array([float(law_movability(oracle_law, t, s)) for t, s in OBJECT_TYPES])
    if mind is None:
        return np.full(CAUSAL_SLOTS, PRIOR_PROBABILITY)
    return mind.probability_vector()


def build_observation(s: EnvState, mind: Optional[DigitalMind], causal: bool, history: ActionHistory,
                      oracle_law: Optional[CausalLaw] = None) -> np.ndarray:
    scale = max(s.grid_size - 1, 1)
    agent = np.array(s.agent_pos, dtype=np.float64)
    goal = np.array(s.goal_pos, dtype=np.float64)
    position = 2.0 * agent / scale - 1.0 if s.grid_size > 1 else np.zeros(2)
    offset = (goal - agent) / scale
    view = np.zeros(NUM_CELL_CODES)
    view[int(local_view(s))] = 1.0
    parts = [position, offset, view, [1.0 if s.last_collision else 0.0], history.one_hot()]
    if causal:
        parts.append(causal_slots(mind, oracle_law))
    return np.concatenate(parts)


class RolloutBuffer:
    """(n_steps, n_envs) arrays; dones[t, e] marks that the episode ended on step t"""

    def __init__(self, n_steps: int, n_envs: int, obs_dim: int):
        self.n_steps = n_steps
        self.n_envs = n_envs
        self.obs_dim = obs_dim
        self.observations = np.zeros((n_steps, n_envs, obs_dim))
        self.actions = np.zeros((n_steps, n_envs), dtype=np.int64)
        self.rewards = np.zeros((n_steps, n_envs))
        self.dones = np.zeros((n_steps, n_envs))
        self.values = np.zeros((n_steps, n_envs))
        self.bootstrap_values = np.zeros(n_envs)
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos == self.n_steps

    def add(self, observations: np.ndarray, actions: np.ndarray, rewards: np.ndarray,
            dones: np.ndarray, values: np.ndarray) -> None:
        if self.full:
            raise IndexError("RolloutBuffer is full; call a2c_update or clear first")
        if np.shape(observations) != (self.n_envs, self.obs_dim):
            raise DimensionError(f"Expected observations of shape {(self.n_envs, self.obs_dim)}")
        self.observations[self.pos] = observations
        self.actions[self.pos] = actions
        self.rewards[self.pos] = rewards
        self.dones[self.pos] = dones
        self.values[self.pos] = values
        self.pos += 1

    def set_bootstrap(self, values: np.ndarray) -> None:
        """Critic values of the observations after the last stored step"""
        self.bootstrap_values = np.asarray(values, dtype=np.float64).reshape(self.n_envs)

    def clear(self) -> None:
        self.pos = 0
        self.bootstrap_values = np.zeros(self.n_envs)


def compute_returns_advantages(b: RolloutBuffer, bootstrap_values: Optional[np.ndarray] = None,
                               gamma: float = 0.995) -> Tuple[np.ndarray, np.ndarray]:
    """R_t = r_t + gamma * R_{t+1} * (1 - done_t), seeded with the critic at the buffer end"""
    if not b.full:
        raise ValueError(f"Buffer holds {b.pos} of {b.n_steps} steps")
    running = b.bootstrap_values.copy() if bootstrap_values is None else np.asarray(bootstrap_values, dtype=np.float64)
    returns = np.zeros_like(b.rewards)
    for t in reversed(range(b.n_steps)):
        running = b.rewards[t] + gamma * running * (1.0 - b.dones[t])
        returns[t] = running
    return returns, returns - b.values


def a2c_update(p: PolicyParams, opt: AdamState, b: RolloutBuffer, cfg: A2CConfig
               ) -> Tuple[PolicyParams, AdamState, LossReport]:
    """One clipped Adam step on the whole buffer; the buffer is cleared afterwards"""
    returns, advantages = compute_returns_advantages(b, gamma=cfg.gamma)
    obs = b.observations.reshape(-1, b.obs_dim)
    actions = b.actions.reshape(-1)
    returns = returns.reshape(-1)
    advantages = advantages.reshape(-1)
    if cfg.normalize_advantages and advantages.size > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    report, grads = a2c_loss_and_grads(p, obs, actions, returns, advantages, cfg.ent_coef, cfg.vf_coef)
    new_params, new_opt, _ = apply_gradients(p, opt, grads, cfg, report)
    b.clear()
    return new_params, new_opt, report


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One uniform draw per row, inverted through the row CDF"""
    u = rng.random(probs.shape[0])
    actions = (np.cumsum(probs, axis=1) < u[:, None]).sum(axis=1)
    return np.minimum(actions, probs.shape[1] - 1)


def greedy_actions(probs: np.ndarray) -> np.ndarray:
    return np.argmax(probs, axis=1)


def act(p: PolicyParams, obs: np.ndarray, rng: Optional[np.random.Generator] = None
        ) -> Tuple[np.ndarray, np.ndarray]:
    """Actions and values for a batch; greedy when rng is None"""
    probs, values = policy_value_forward(p, obs)
    actions = greedy_actions(probs) if rng is None else sample_actions(probs, rng)
    return actions, values
