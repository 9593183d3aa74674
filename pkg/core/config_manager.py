"""Configuration manager for experiment files"""
import json
import logging
from pathlib import Path
from typing import Any, List, Optional

from core.errors import ConfigError
from core.models import ExperimentConfig
from core.scenarios import UniverseSpec

logger = logging.getLogger(__name__)


class ConfigManager:
    """
    Human-readable JSON experiment file. Top-level keys mirror ExperimentConfig.to_dict();
    an optional "universes" list holds custom UniverseSpec definitions.
    """

    def __init__(self, config_file: str = "experiment.json"):
        """
        Initialize config manager

        Args:
            config_file: Path to config file
        """
        self.config_file = Path(config_file)
        self.config = self._load_config()

    def _load_config(self) -> dict:
        """Load configuration from file"""
        if self.config_file.exists():
            try:
                with open(self.config_file, "r", encoding="utf-8") as f:
                    data = json.load(f)
                if isinstance(data, dict):
                    return data
                logger.error(f"[Config] {self.config_file} does not hold a JSON object, using defaults")
            except (OSError, json.JSONDecodeError) as e:
                logger.error(f"[Config] Error loading {self.config_file}: {e}")
        return {}

    def save_config(self):
        try:
            self.config_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_file, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=2, ensure_ascii=False, sort_keys=True)
        except OSError as e:
            logger.error(f"[Config] Error saving {self.config_file}: {e}")

    def get(self, key: str, default: Any = None) -> Any:
        """Dotted-key lookup, e.g. 'env.grid_size'"""
        return lookup(self.config, key, default)

    def set(self, key: str, value: Any, save: bool = True):
        parts = key.split(".")
        target = self.config
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"Cannot set {key!r}: {part!r} is not a section")
        target[parts[-1]] = value
        if save:
            self.save_config()

    def experiment_config(self, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
        """Defaults (or base) overlaid with the file's values"""
        merged = (base or ExperimentConfig()).to_dict()
        for key, value in self.config.items():
            if key == "universes":
                continue
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
        return ExperimentConfig.from_dict(merged)

    def universes(self) -> List[UniverseSpec]:
        return [UniverseSpec.from_dict(entry) for entry in self.config.get("universes", [])]

    def reset(self):
        """Reset configuration to defaults"""
        self.config = {}
        try:
            if self.config_file.exists():
                self.config_file.unlink()
        except OSError as e:
            logger.error(f"[Config] Error resetting {self.config_file}: {e}")


def parse_value(text: str) -> Any:
    """CLI values: JSON literals when they parse (numbers, booleans, lists), plain strings otherwise"""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def lookup(data: dict, key: str, default: Any = None) -> Any:
    value: Any = data
    for part in key.split("."):
        if not isinstance(value, dict) or part not in value:
            return default
        value = value[part]
    return value
