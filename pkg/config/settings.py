"""Settings and configuration management"""
import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


class Settings:
    """Application settings"""

    # Default values
    DEFAULT_LOG_FILE = "logs/causal_lab.log"
    DEFAULT_LOG_LEVEL = "INFO"
    DEFAULT_LOG_DIR = "logs"
    DEFAULT_CONFIG_FILE = "experiment.json"
    DEFAULT_SEED = 0
    DEFAULT_WORKERS = 4

    # Structure learning
    NOTEARS_LAMBDA1 = 0.1
    NOTEARS_W_THRESHOLD = 0.3

    # Digital mind refresh gate (interactions logged before beliefs leave 0.5)
    MIND_MIN_INTERACTIONS = 16
    # Encoding of the mind's 0/1 interaction columns during structure learning
    MIND_NOTEARS_ENCODING = "signed"

    @staticmethod
    def get_log_level() -> str:
        """Log level name from CRL_LOG_LEVEL"""
        return os.getenv("CRL_LOG_LEVEL", Settings.DEFAULT_LOG_LEVEL).upper()

    @staticmethod
    def get_log_file() -> str:
        return os.getenv("CRL_LOG_FILE", Settings.DEFAULT_LOG_FILE)

    @staticmethod
    def get_workers() -> int:
        """Thread count for sweep repeats"""
        value = os.getenv("CRL_WORKERS")
        try:
            return max(1, int(value)) if value else Settings.DEFAULT_WORKERS
        except ValueError:
            return Settings.DEFAULT_WORKERS

    @staticmethod
    def get_seed() -> int:
        value = os.getenv("CRL_SEED")
        try:
            return int(value) if value else Settings.DEFAULT_SEED
        except ValueError:
            return Settings.DEFAULT_SEED

    @staticmethod
    def get_config_file() -> Optional[str]:
        return os.getenv("CRL_CONFIG_FILE")
