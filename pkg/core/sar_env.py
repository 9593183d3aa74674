"""Gymnasium wrapper around the grid world, one digital mind and action history per instance"""
import logging
from typing import Any, Dict, Optional, Tuple

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from core import gridworld
from core.agent import ActionHistory, build_observation, observation_dim
from core.digital_mind import DigitalMind
from core.gridworld import EnvState
from core.models import Action, AgentKind, ExperimentConfig
from core.scenarios import causal_law

logger = logging.getLogger(__name__)


def episode_seed(base_seed: int, env_index: int, episode: int) -> int:
    """Layout seed of one episode; fixed by (base seed, env index, episode number)"""
    return int(np.random.SeedSequence([base_seed, env_index, episode]).generate_state(1)[0])


class SarGridEnv(gym.Env):
    """
    Discrete(4) absolute moves; observations are the agent observation vector.
    terminated = goal reached, truncated = step budget spent. The final step's info carries
    info["episode"] with the episode counters.
    """
    metadata = {"render_modes": ["ansi"]}

    def __init__(self, cfg: ExperimentConfig, env_index: int = 0, base_seed: Optional[int] = None,
                 mind: Optional[DigitalMind] = None, fixed_layout: Optional[str] = None,
                 learn_online: Optional[bool] = None, render_mode: Optional[str] = None):
        super().__init__()
        self.cfg = cfg
        self.env_index = env_index
        self.base_seed = cfg.seed if base_seed is None else base_seed
        self.kind = cfg.agent_kind
        self.law = causal_law(cfg.env.law)
        self.causal = self.kind.is_causal
        self.oracle_law = self.law if self.kind is AgentKind.CAUSAL_ORACLE else None
        self.mind = mind if mind is not None else DigitalMind(cfg.mind_min_interactions)
        # Training envs log interactions and refresh beliefs; evaluation envs only read them
        self.learn_online = (self.kind is AgentKind.CAUSAL_DISCOVERED) if learn_online is None else learn_online
        self.include_shape = self.law.shape_observed
        self.fixed_layout = fixed_layout
        self.render_mode = render_mode
        self.history = ActionHistory()
        self.state: Optional[EnvState] = None
        self.episode = 0

        self.action_space = spaces.Discrete(4)
        self.observation_space = spaces.Box(low=-1.0, high=1.0, shape=(observation_dim(self.causal),),
                                            dtype=np.float64)

    def _observation(self) -> np.ndarray:
        return build_observation(self.state, self.mind, self.causal, self.history, self.oracle_law)

    def reset(self, *, seed: Optional[int] = None, options: Optional[Dict[str, Any]] = None
              ) -> Tuple[np.ndarray, Dict[str, Any]]:
        super().reset(seed=seed)
        if seed is not None:
            self.base_seed = seed
            self.episode = 0
        options = options or {}
        if "state" in options:
            self.state = options["state"]
        elif self.fixed_layout is not None:
            self.state = gridworld.parse_ascii_layout(self.fixed_layout, self.law, self.cfg.env.max_steps)
        else:
            layout_seed = episode_seed(self.base_seed, self.env_index, self.episode)
            self.state = gridworld.layout_from_seed(self.cfg.env, layout_seed)
        self.episode += 1
        self.history.clear()
        if self.learn_online:
            self.mind.reset_episode()
            self.mind.refresh_causal_model(self.cfg.notears, include_shape=self.include_shape)
        info = {"layout_ref": self.state.layout_ref.to_dict() if self.state.layout_ref else None}
        return self._observation(), info

    def step(self, action) -> Tuple[np.ndarray, float, bool, bool, Dict[str, Any]]:
        if self.state is None:
            raise gym.error.ResetNeeded("Call reset() before step()")
        action = Action(int(action))
        self.state, reward, done, info = gridworld.step(self.state, action, self.cfg.env.immovable_penalty)
        self.history.push(action)
        interaction = info["interaction"]
        if interaction is not None and self.learn_online:
            self.mind.record_interaction(interaction["texture"], interaction["shape"], action, interaction["moved"])
        terminated = bool(self.state.counters.reached_goal)
        truncated = bool(info["truncated"])
        if done:
            info["episode"] = dict(self.state.counters.to_dict(), max_steps=self.state.max_steps)
        return self._observation(), float(reward), terminated, truncated, info

    def render(self) -> Optional[str]:
        if self.state is None:
            return None
        return gridworld.render_text(self.state)
