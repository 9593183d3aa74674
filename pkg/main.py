#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <https://www.gnu.org/licenses/>.

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from config.settings import Settings
from core import runner
from core.checkpoint import load_checkpoint
from core.config_manager import ConfigManager, lookup, parse_value
from core.crash_reporter import CrashReporter
from core.digital_mind import DigitalMind
from core.discovery_bench import (
    DEFAULT_REPEATS, DEFAULT_SAMPLE_SIZES, DEFAULT_SCAN_CEILING, emit_min_samples_csv, emit_sweep_csv,
    min_samples_for_precision, run_sweep,
)
from core.errors import LabError
from core.models import AgentKind, EnvConfig, ExperimentConfig, LawId
from core import plotting
from core.scenarios import causal_law, universe_by_id, with_noise

logger = logging.getLogger("CausalLabCLI")

AGENT_CHOICES = {
    "causal": AgentKind.CAUSAL_ORACLE,
    "causal-discovered": AgentKind.CAUSAL_DISCOVERED,
    "non-causal": AgentKind.NON_CAUSAL,
}
LAW_CHOICES = {
    "texture": LawId.TEXTURE_ONLY,
    "texture-shape-present": LawId.TEXTURE_ONLY_WITH_SHAPE_PRESENT,
    "texture-and-shape": LawId.TEXTURE_AND_SHAPE,
}


def setup_logging():
    log_file = Path(Settings.get_log_file())
    log_file.parent.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, Settings.get_log_level(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(log_file, encoding='utf-8')
        ]
    )


def _config_manager(args) -> ConfigManager:
    return ConfigManager(args.config or Settings.get_config_file() or Settings.DEFAULT_CONFIG_FILE)


def _universe(args, manager: ConfigManager):
    universe = universe_by_id(args.universe, manager.universes())
    if args.flip_prob is not None:
        universe = with_noise(universe, args.flip_prob)
    return universe


def cmd_discover(args):
    """Sample-size sweep for one universe"""
    manager = _config_manager(args)
    universe = _universe(args, manager)
    cfg = manager.experiment_config().notears
    result = run_sweep(universe, args.sizes, args.repeats, cfg, args.seed, args.workers)
    emit_sweep_csv(result, args.out)
    logger.info(f"Sweep of {universe.universe_id} written to {args.out}")
    if args.plot:
        plotting.save_figure(plotting.sweep_figure([result]), args.plot)


def cmd_min_samples(args):
    """Minimum samples for a precision target as independent variables are added"""
    manager = _config_manager(args)
    universe = _universe(args, manager)
    cfg = manager.experiment_config().notears
    rows = min_samples_for_precision(universe, args.max_extra_vars, args.target, args.repeats, args.seed,
                                     cfg, args.ceiling, args.workers)
    emit_min_samples_csv(rows, args.out)
    for var_count, samples in rows:
        print(f"{var_count} variables: {samples if samples is not None else 'not reached'}")
    if args.plot:
        plotting.save_figure(plotting.min_samples_figure(rows, args.target), args.plot)


def build_train_config(args, manager: ConfigManager) -> ExperimentConfig:
    kind = AGENT_CHOICES[args.agent]
    law = LAW_CHOICES[args.law]
    if args.desk_scale:
        base = ExperimentConfig.desk_scale(kind, args.seed, law)
    else:
        base = ExperimentConfig(agent_kind=kind, seed=args.seed, env=EnvConfig(law=law, seed=args.seed))
    cfg = manager.experiment_config(base)
    env_changes = {"law": law, "seed": args.seed}
    if args.objects is not None:
        env_changes["n_objects"] = args.objects
    if args.random_room:
        env_changes["room_randomized"] = True
    changes = {"agent_kind": kind, "seed": args.seed, "env": replace(cfg.env, **env_changes)}
    if args.timesteps is not None:
        changes["total_timesteps"] = args.timesteps
    if args.n_envs is not None:
        changes["n_envs"] = args.n_envs
    return replace(cfg, **changes).validate()


def cmd_train(args):
    """Train one agent"""
    cfg = build_train_config(args, _config_manager(args))
    result = runner.train(cfg, out_dir=args.out)
    status = "early stop" if result.early_stopped else "budget spent"
    logger.info(f"Training finished at timestep {result.stopped_at} ({status}); outputs in {args.out}")


def cmd_eval(args):
    """Evaluate a saved policy on fresh layouts"""
    ckpt = load_checkpoint(args.checkpoint)
    cfg = ExperimentConfig.from_dict(ckpt.config)
    mind = None
    log_path = Path(args.checkpoint).parent / "mind_0_log.csv"
    if cfg.agent_kind is AgentKind.CAUSAL_DISCOVERED and log_path.exists():
        mind = DigitalMind.load_log_csv(str(log_path), cfg.mind_min_interactions)
        mind.refresh_causal_model(cfg.notears, include_shape=causal_law(cfg.env.law).shape_observed)
    row = runner.evaluate(ckpt.params, cfg, args.seed, mind=mind, episodes=args.episodes,
                          greedy=not args.stochastic)
    print(json.dumps(row.to_dict(), indent=2))


def cmd_plot(args):
    """Smoothed MGR curves, one per run directory"""
    runs = {}
    for run_dir in args.inputs:
        metrics = Path(run_dir) / runner.METRICS_FILE
        label = Path(run_dir).name
        config_path = Path(run_dir) / runner.CONFIG_FILE
        if config_path.exists():
            with open(config_path, "r", encoding="utf-8") as f:
                label = f"{label} ({json.load(f).get('agent_kind', '?')})"
        runs[label] = runner.parse_metrics_csv(str(metrics))
    out = args.out if args.out.endswith(".png") else args.out + ".png"
    runner.emit_learning_curve(runs, out)
    print(f"Learning curves written to {out}")


def cmd_config(args):
    """Manage the experiment config file"""
    manager = ConfigManager(args.file or Settings.get_config_file() or Settings.DEFAULT_CONFIG_FILE)

    if args.action == "show":
        print(json.dumps(manager.experiment_config().to_dict(), indent=2, ensure_ascii=False))

    elif args.action == "set":
        if not args.key or args.value is None:
            print("Error: --key and --value required for set action")
            return
        manager.set(args.key, parse_value(args.value), save=False)
        manager.experiment_config()
        manager.save_config()
        print(f"Configuration saved to {manager.config_file}")

    elif args.action == "get":
        if not args.key:
            print("Error: --key required for get action")
            return
        value = manager.get(args.key)
        if value is None:
            value = lookup(manager.experiment_config().to_dict(), args.key)
        if value is None:
            print(f"Key '{args.key}' not found")
        else:
            print(value)


def init_parser():
    parser = argparse.ArgumentParser(description="Causal Rescue Lab CLI")
    parser.add_argument("--config", help="Experiment config file (JSON)")
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Discover Command
    discover_parser = subparsers.add_parser("discover", help="SHD/precision sweep over sample sizes")
    discover_parser.add_argument("--universe", default="u2-linked", help="Universe id, e.g. u3-full or u2-linked+2")
    discover_parser.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SAMPLE_SIZES))
    discover_parser.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    discover_parser.add_argument("--seed", type=int, default=Settings.get_seed())
    discover_parser.add_argument("--flip-prob", type=float, help="Override the universe noise")
    discover_parser.add_argument("--workers", type=int, default=Settings.get_workers())
    discover_parser.add_argument("--out", default="sweep.csv")
    discover_parser.add_argument("--plot", help="Optional PNG chart path")

    # Min-samples Command
    min_parser = subparsers.add_parser("min-samples", help="Minimum samples for a precision target")
    min_parser.add_argument("--universe", default="u2-linked")
    min_parser.add_argument("--target", type=float, default=0.75)
    min_parser.add_argument("--max-extra-vars", type=int, default=5)
    min_parser.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    min_parser.add_argument("--ceiling", type=int, default=DEFAULT_SCAN_CEILING)
    min_parser.add_argument("--seed", type=int, default=Settings.get_seed())
    min_parser.add_argument("--flip-prob", type=float)
    min_parser.add_argument("--workers", type=int, default=Settings.get_workers())
    min_parser.add_argument("--out", default="min_samples.csv")
    min_parser.add_argument("--plot", help="Optional PNG chart path")

    # Train Command
    train_parser = subparsers.add_parser("train", help="Train an A2C agent")
    train_parser.add_argument("--agent", choices=sorted(AGENT_CHOICES), default="causal")
    train_parser.add_argument("--objects", type=int, choices=[6, 12, 18])
    train_parser.add_argument("--law", choices=sorted(LAW_CHOICES), default="texture")
    train_parser.add_argument("--random-room", action="store_true")
    train_parser.add_argument("--timesteps", type=int)
    train_parser.add_argument("--n-envs", type=int)
    train_parser.add_argument("--desk-scale", action="store_true", help="10x10 grid, 4x4 room, 6 objects, 200 steps")
    train_parser.add_argument("--seed", type=int, default=Settings.get_seed())
    train_parser.add_argument("--out", default="runs/latest")

    # Eval Command
    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint")
    eval_parser.add_argument("--checkpoint", required=True)
    eval_parser.add_argument("--episodes", type=int, default=runner.DEFAULT_EVAL_EPISODES_CLI)
    eval_parser.add_argument("--seed", type=int, default=Settings.get_seed())
    eval_parser.add_argument("--stochastic", action="store_true", help="Sample actions instead of argmax")

    # Plot Command
    plot_parser = subparsers.add_parser("plot", help="Plot smoothed learning curves")
    plot_parser.add_argument("--in", dest="inputs", nargs="+", required=True, help="Run directories")
    plot_parser.add_argument("--out", default="curves")

    # Config Command
    config_parser = subparsers.add_parser("config", help="Manage configuration")
    config_parser.add_argument("action", choices=["show", "set", "get"], help="Action to perform")
    config_parser.add_argument("--file", help="Config file (defaults to experiment.json)")
    config_parser.add_argument("--key", help="Config key (e.g. n_envs or env.grid_size)")
    config_parser.add_argument("--value", help="Config value (JSON literal or string)")

    return parser


COMMANDS = {
    "discover": cmd_discover,
    "min-samples": cmd_min_samples,
    "train": cmd_train,
    "eval": cmd_eval,
    "plot": cmd_plot,
    "config": cmd_config,
}


def main(argv=None) -> int:
    parser = init_parser()
    args = parser.parse_args(argv)
    if args.command not in COMMANDS:
        parser.print_help()
        return 1
    setup_logging()
    CrashReporter(os.path.dirname(Settings.get_log_file()) or Settings.DEFAULT_LOG_DIR).install()
    try:
        COMMANDS[args.command](args)
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
