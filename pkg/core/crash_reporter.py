import logging
import os
import platform
import sys
import traceback
from datetime import datetime

logger = logging.getLogger(__name__)


class CrashReporter:
    """
    Handles unhandled exceptions in CLI runs and writes them to a crash file.
    """
    def __init__(self, log_dir="logs"):
        self.log_dir = log_dir
        self._setup_dir()

    def _setup_dir(self):
        try:
            os.makedirs(self.log_dir, exist_ok=True)
        except OSError as e:
            logger.error(f"[CrashReporter] Failed to create log directory: {e}")

    def install(self):
        """Install the exception hook"""
        sys.excepthook = self._handle_exception
        logger.debug("[CrashReporter] Installed exception hook")

    def write_report(self, exc_type, exc_value, exc_traceback) -> str:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        filepath = os.path.join(self.log_dir, f"crash_{timestamp}.log")
        with open(filepath, "w", encoding="utf-8") as f:
            f.write("Causal Rescue Lab Crash Report\n")
            f.write(f"Time: {datetime.now().isoformat()}\n")
            f.write(f"OS: {platform.platform()}\n")
            f.write(f"Python: {sys.version}\n")
            f.write(f"Command: {' '.join(sys.argv)}\n")
            f.write("-" * 50 + "\n")
            f.write("Exception:\n")
            traceback.print_exception(exc_type, exc_value, exc_traceback, file=f)
            f.write("-" * 50 + "\n")
        return filepath

    def _handle_exception(self, exc_type, exc_value, exc_traceback):
        """Callback for sys.excepthook"""
        # Ctrl+C keeps its normal behaviour
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return

        try:
            filepath = self.write_report(exc_type, exc_value, exc_traceback)
            logger.critical(f"[CrashReporter] Unhandled {exc_type.__name__}: {exc_value}; report saved to {filepath}")
        except OSError as e:
            logger.critical(f"[CrashReporter] Failed to write crash log: {e}")
        traceback.print_exception(exc_type, exc_value, exc_traceback)
        sys.exit(1)
