"""
Training and evaluation orchestration: rollout collection over n_envs environments,
A2C updates, periodic evaluation with early stopping, metric CSVs and learning curves.
"""
import csv
import json
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from core import plotting
from core.agent import RolloutBuffer, a2c_update, act, observation_dim
from core.checkpoint import save_checkpoint
from core.digital_mind import DigitalMind
from core.errors import DataError, NonFiniteLossError, TrainingAbortedError
from core.models import ExperimentConfig, MetricsRow
from core.policy import AdamState, LossReport, PolicyParams, init_policy
from core.sar_env import SarGridEnv

logger = logging.getLogger(__name__)

METRICS_HEADER = ["timestep", "mgr", "mtt", "mmi", "mii"]
SMOOTHING_FRACTION = 0.1
NO_SUCCESS_MTT = 1.0
DEFAULT_EVAL_EPISODES_CLI = 9

# Independent random streams derived from the master seed
INIT_STREAM, SAMPLE_STREAM, ENV_STREAM, EVAL_STREAM = 0, 1, 2, 3

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "policy.ckpt"
ABORT_CHECKPOINT_FILE = "aborted.ckpt"
CONFIG_FILE = "config.json"

EnvFactory = Callable[..., object]


def derive_seed(master: int, *path: int) -> int:
    return int(np.random.SeedSequence([master, *path]).generate_state(1)[0])


def default_env_factory(cfg: ExperimentConfig, env_index: int, base_seed: int,
                        mind: Optional[DigitalMind] = None, learn_online: Optional[bool] = None) -> SarGridEnv:
    return SarGridEnv(cfg, env_index=env_index, base_seed=base_seed, mind=mind, learn_online=learn_online)


class TrainerCallbacks:
    """Hooks for observing a training run; every method is optional"""
    def on_log(self, timestep: int, stats: Dict[str, float]): pass
    def on_update(self, timestep: int, report: LossReport): pass
    def on_evaluation(self, row: MetricsRow): pass
    def on_early_stop(self, timestep: int, row: MetricsRow): pass


@dataclass
class TrainResult:
    params: PolicyParams
    optimizer: AdamState
    history: List[MetricsRow] = field(default_factory=list)
    stopped_at: int = 0
    early_stopped: bool = False
    minds: List[DigitalMind] = field(default_factory=list)


def evaluate(params: PolicyParams, cfg: ExperimentConfig, seed: int, env_factory: Optional[EnvFactory] = None,
             mind: Optional[DigitalMind] = None, episodes: Optional[int] = None,
             greedy: Optional[bool] = None) -> MetricsRow:
    """
    Run evaluation episodes on fresh layouts, all episodes stepped as one batch.
    MTT is steps_to_goal / max_steps averaged over successes, 1.0 when none succeed.
    """
    factory = env_factory or default_env_factory
    episodes = cfg.eval_episodes if episodes is None else episodes
    greedy = cfg.greedy_eval if greedy is None else greedy
    rng = None if greedy else np.random.default_rng(derive_seed(seed, SAMPLE_STREAM))

    envs = [factory(cfg, i, seed, mind.copy() if mind else None, False) for i in range(episodes)]
    obs = [env.reset()[0] for env in envs]
    summaries: List[Optional[dict]] = [None] * episodes
    active = list(range(episodes))
    while active:
        actions, _ = act(params, np.stack([obs[i] for i in active]), rng)
        still_active = []
        for i, action in zip(active, actions):
            obs[i], _, terminated, truncated, info = envs[i].step(int(action))
            if terminated or truncated:
                summaries[i] = info["episode"]
            else:
                still_active.append(i)
        active = still_active

    reached = [s for s in summaries if s["reached_goal"]]
    mgr = len(reached) / episodes
    mtt = float(np.mean([s["steps_to_goal"] / s["max_steps"] for s in reached])) if reached else NO_SUCCESS_MTT
    mmi = float(np.mean([s["movable_interactions"] for s in summaries]))
    mii = float(np.mean([s["immovable_interactions"] for s in summaries]))
    return MetricsRow(timestep=0, mgr=mgr, mtt=mtt, mmi=mmi, mii=mii)


def _save_run_files(out_dir: Optional[str], cfg: ExperimentConfig, history: Sequence[MetricsRow]) -> None:
    if not out_dir:
        return
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    emit_metrics_csv(history, str(Path(out_dir) / METRICS_FILE))
    with open(Path(out_dir) / CONFIG_FILE, "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)


def train(cfg: ExperimentConfig, callbacks: Optional[TrainerCallbacks] = None, out_dir: Optional[str] = None,
          env_factory: Optional[EnvFactory] = None) -> TrainResult:
    """Alternate n_steps x n_envs rollouts with A2C updates until the budget or early stop"""
    cfg = cfg.validate()
    callbacks = callbacks or TrainerCallbacks()
    factory = env_factory or default_env_factory
    obs_dim = observation_dim(cfg.agent_kind.is_causal)
    params = init_policy(obs_dim, cfg.a2c.hidden_sizes, np.random.default_rng(derive_seed(cfg.seed, INIT_STREAM)))
    optimizer = AdamState.for_params(params)
    history: List[MetricsRow] = []

    batch = cfg.batch_timesteps
    n_updates = cfg.total_timesteps // batch
    if cfg.total_timesteps % batch:
        logger.warning(f"[Trainer] total_timesteps {cfg.total_timesteps} is not a multiple of the "
                       f"{batch}-step batch; training stops at {n_updates * batch}")
    if cfg.eval_interval % batch or cfg.log_interval % batch:
        logger.warning(f"[Trainer] eval/log intervals ({cfg.eval_interval}/{cfg.log_interval}) do not divide "
                       f"the {batch}-step batch; they fire on the first batch that crosses each threshold")
    if n_updates == 0:
        _save_run_files(out_dir, cfg, history)
        return TrainResult(params, optimizer, history, 0, False)

    env_seed = derive_seed(cfg.seed, ENV_STREAM)
    envs = [factory(cfg, i, env_seed, None, None) for i in range(cfg.n_envs)]
    obs = np.stack([env.reset()[0] for env in envs])
    buffer = RolloutBuffer(cfg.a2c.n_steps, cfg.n_envs, obs.shape[1])
    rng = np.random.default_rng(derive_seed(cfg.seed, SAMPLE_STREAM))
    recent_episodes: deque = deque(maxlen=100)
    episodes_finished = 0
    timestep = 0
    next_log, next_eval = cfg.log_interval, cfg.eval_interval
    early_stopped = False
    logger.info(f"[Trainer] {cfg.agent_kind.value}: {n_updates} updates of {batch} timesteps, "
                f"{cfg.n_envs} envs, seed {cfg.seed}")

    for update in range(1, n_updates + 1):
        for _ in range(cfg.a2c.n_steps):
            actions, values = act(params, obs, rng)
            next_obs = np.empty_like(obs)
            rewards = np.zeros(cfg.n_envs)
            dones = np.zeros(cfg.n_envs)
            # env-index order keeps results independent of how many envs run
            for i, env in enumerate(envs):
                o, reward, terminated, truncated, info = env.step(int(actions[i]))
                rewards[i] = reward
                if terminated or truncated:
                    dones[i] = 1.0
                    episodes_finished += 1
                    recent_episodes.append(info["episode"])
                    o, _ = env.reset()
                next_obs[i] = o
            buffer.add(obs, actions, rewards, dones, values)
            obs = next_obs
        _, bootstrap = act(params, obs, None)
        buffer.set_bootstrap(bootstrap)

        try:
            params_next, optimizer_next, report = a2c_update(params, optimizer, buffer, cfg.a2c)
        except NonFiniteLossError as e:
            path = None
            if out_dir:
                path = save_checkpoint(str(Path(out_dir) / ABORT_CHECKPOINT_FILE), params, optimizer,
                                       cfg.to_dict(), {"timestep": timestep, "diagnostics": e.diagnostics})
                _save_run_files(out_dir, cfg, history)
            logger.error(f"[Trainer] Aborting at timestep {timestep}: {e}")
            raise TrainingAbortedError(f"Non-finite loss at timestep {timestep}", path, e) from e
        params, optimizer = params_next, optimizer_next
        timestep = update * batch
        callbacks.on_update(timestep, report)

        if timestep >= next_log:
            stats = dict(report.to_dict(), timestep=timestep, episodes=episodes_finished)
            if recent_episodes:
                stats["recent_goal_rate"] = float(np.mean([ep["reached_goal"] for ep in recent_episodes]))
            logger.info(
                f"[Trainer] t={timestep} pl={report.policy_loss:.4f} vl={report.value_loss:.4f} "
                f"ent={report.entropy:.4f} gn={report.grad_norm:.3f} episodes={episodes_finished}"
            )
            callbacks.on_log(timestep, stats)
            while next_log <= timestep:
                next_log += cfg.log_interval

        if timestep >= next_eval:
            while next_eval <= timestep:
                next_eval += cfg.eval_interval
            eval_seed = derive_seed(cfg.seed, EVAL_STREAM, timestep)
            row = replace(evaluate(params, cfg, eval_seed, factory, getattr(envs[0], "mind", None)),
                          timestep=timestep)
            history.append(row)
            logger.info(f"[Trainer] eval t={timestep} MGR={row.mgr:.2f} MTT={row.mtt:.3f} "
                        f"MMI={row.mmi:.2f} MII={row.mii:.2f}")
            callbacks.on_evaluation(row)
            _save_run_files(out_dir, cfg, history)
            if row.mgr >= cfg.early_stop_mgr:
                early_stopped = True
                logger.info(f"[Trainer] Early stop at timestep {timestep} (MGR {row.mgr:.2f})")
                callbacks.on_early_stop(timestep, row)
                break

    _save_run_files(out_dir, cfg, history)
    if out_dir:
        save_checkpoint(str(Path(out_dir) / CHECKPOINT_FILE), params, optimizer, cfg.to_dict(),
                        {"timestep": timestep, "early_stopped": early_stopped})
        for i, env in enumerate(envs):
            mind = getattr(env, "mind", None)
            if mind is not None and mind.log:
                mind.dump(str(Path(out_dir) / f"mind_{i}_log.csv"), str(Path(out_dir) / f"mind_{i}_table.csv"))
    minds = [env.mind for env in envs if getattr(env, "mind", None) is not None]
    return TrainResult(params, optimizer, history, timestep, early_stopped, minds)


def smooth_series(xs: Sequence[float]) -> List[float]:
    """Trailing running mean over max(1, round(0.1 * n)) points; the first points use what exists"""
    values = np.asarray(xs, dtype=np.float64)
    if values.size == 0:
        raise DataError("Cannot smooth an empty series")
    window = max(1, int(np.floor(SMOOTHING_FRACTION * values.size + 0.5)))
    cumulative = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(values.size)
    start = np.maximum(0, idx - window + 1)
    return list((cumulative[idx + 1] - cumulative[start]) / (idx + 1 - start))


def emit_metrics_csv(history: Sequence[MetricsRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in history:
            writer.writerow([row.timestep, repr(row.mgr), repr(row.mtt), repr(row.mmi), repr(row.mii)])


def parse_metrics_csv(path: str) -> List[MetricsRow]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != METRICS_HEADER:
            raise DataError(f"{path}: unexpected metrics header {reader.fieldnames}")
        return [MetricsRow.from_dict(row) for row in reader]


def build_learning_curve_figure(runs: Dict[str, Sequence[MetricsRow]]):
    """One smoothed MGR line per run"""
    series = {}
    for label, history in runs.items():
        if not history:
            continue
        series[label] = ([row.timestep for row in history], smooth_series([row.mgr for row in history]))
    return plotting.learning_curve_figure(series)


def emit_learning_curve(runs: Dict[str, Sequence[MetricsRow]], path: str) -> str:
    return plotting.save_figure(build_learning_curve_figure(runs), path)
