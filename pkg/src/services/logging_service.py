"""Logging service for toolkit logs."""
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from utils.paths import get_log_dir

LOGGER_NAME = "HabStation"
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


class LoggingService:
    """Service for managing toolkit logs (rotating file + console)."""

    def __init__(self, log_dir: Optional[Path] = None, console_level: int = logging.INFO):
        self.log_dir = Path(log_dir) if log_dir else get_log_dir()
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = self.log_dir / "hab_station.log"
        self.console_level = console_level

        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        self._attach_handlers()

    def _attach_handlers(self):
        """(Re)create the file and console handlers."""
        for handler in self.logger.handlers[:]:
            handler.close()
            self.logger.removeHandler(handler)

        formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

        # File handler with rotation (max 5MB, keep 5 backups)
        self.file_handler = RotatingFileHandler(
            self.log_file,
            maxBytes=5 * 1024 * 1024,
            backupCount=5,
            encoding='utf-8'
        )
        self.file_handler.setLevel(logging.DEBUG)
        self.file_handler.setFormatter(formatter)
        self.logger.addHandler(self.file_handler)

        # stderr keeps stdout free for command results
        self.console_handler = logging.StreamHandler(sys.stderr)
        self.console_handler.setLevel(self.console_level)
        self.console_handler.setFormatter(formatter)
        self.logger.addHandler(self.console_handler)

    def set_console_level(self, level):
        """Set console verbosity (name like 'DEBUG' or a logging level)."""
        if isinstance(level, str):
            level = logging.getLevelName(level.upper())
            if not isinstance(level, int):
                level = logging.INFO
        self.console_level = level
        self.console_handler.setLevel(level)

    def debug(self, message: str):
        """Log debug message."""
        self.logger.debug(message)

    def info(self, message: str):
        """Log info message."""
        self.logger.info(message)

    def warning(self, message: str):
        """Log warning message."""
        self.logger.warning(message)

    def error(self, message: str):
        """Log error message."""
        self.logger.error(message)

    def exception(self, message: str):
        """Log exception with traceback."""
        self.logger.exception(message)


# Global logging service instance
_logging_service = None


def get_logging_service() -> LoggingService:
    """Get global logging service instance."""
    global _logging_service
    if _logging_service is None:
        _logging_service = LoggingService()
    return _logging_service
