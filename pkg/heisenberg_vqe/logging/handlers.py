"""
Logging for Heisenberg VQE.

One package logger, ``heisenberg_vqe``, writes to a rotating file and to the
console. Library modules log through child loggers and share its handlers.
Lines carry the sweep context (experiment, cycle count) set by the runner
through ``Logger.context``.
"""
import logging
import os
import sys
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from typing import Any, Dict, Iterator

LOGGER_NAME = "heisenberg_vqe"
FILE_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(run_context)s%(message)s"
CONSOLE_FORMAT = "%(levelname)s: %(run_context)s%(message)s"


class RunContextFilter(logging.Filter):
    """Stamps every record with the current sweep context as ``run_context``.

    The context is shared by all threads, so optimizer rounds running on a
    pool inherit the cycle count set on the calling thread.
    """

    def __init__(self) -> None:
        super().__init__()
        self.fields: Dict[str, Any] = {}

    def filter(self, record: logging.LogRecord) -> bool:
        if self.fields:
            record.run_context = "[" + " ".join(f"{k}={v}" for k, v in self.fields.items()) + "] "
        else:
            record.run_context = ""
        return True


class Logger:
    """Package logger configured from ``Config``.

    Uses LOG_LEVEL, LOG_FILE, MAX_LOG_SIZE and LOG_BACKUP_COUNT. If the log
    directory cannot be created the file goes to the home directory; if the
    file cannot be opened at all only the console is used.
    """

    def __init__(self, config: Any) -> None:
        self.config = config
        self.run_context = RunContextFilter()
        self.logger = self._setup_logger()

    def _level(self) -> int:
        level = logging.getLevelName(str(self.config.LOG_LEVEL).upper())
        return level if isinstance(level, int) else logging.INFO

    def _log_path(self) -> str:
        log_dir = os.path.dirname(os.path.abspath(self.config.LOG_FILE))
        try:
            os.makedirs(log_dir, exist_ok=True)
        except OSError as e:
            print(f"Error creating log directory: {e}")
            self.config.LOG_FILE = os.path.expanduser("~/heisenberg_vqe.log")
        return self.config.LOG_FILE

    def _handler(self, handler: logging.Handler, fmt: str, level: int) -> logging.Handler:
        handler.setLevel(level)
        handler.setFormatter(logging.Formatter(fmt))
        handler.addFilter(self.run_context)
        return handler

    def _setup_logger(self) -> logging.Logger:
        level = self._level()
        logger = logging.getLogger(LOGGER_NAME)
        logger.setLevel(level)
        # A second Logger (tests, repeated main() calls) replaces the handlers.
        for old in list(logger.handlers):
            logger.removeHandler(old)
            old.close()

        try:
            file_handler = RotatingFileHandler(
                self._log_path(),
                maxBytes=getattr(self.config, "MAX_LOG_SIZE", 5 * 1024 * 1024),
                backupCount=getattr(self.config, "LOG_BACKUP_COUNT", 3),
                encoding="utf-8",
            )
            logger.addHandler(self._handler(file_handler, FILE_FORMAT, level))
        except OSError as e:
            print(f"Failed to open log file, logging to console only: {e}")
            level = min(level, logging.INFO)
        logger.addHandler(self._handler(logging.StreamHandler(sys.stdout), CONSOLE_FORMAT, level))
        return logger

    @contextmanager
    def context(self, **fields: Any) -> Iterator[None]:
        """Add ``fields`` (for example ``p=4``) to every line logged inside the block."""
        saved = dict(self.run_context.fields)
        self.run_context.fields.update(fields)
        try:
            yield
        finally:
            self.run_context.fields = saved

    def debug(self, message: str) -> None:
        self.logger.debug(message)

    def info(self, message: str) -> None:
        self.logger.info(message)

    def warning(self, message: str) -> None:
        self.logger.warning(message)

    def error(self, message: str) -> None:
        self.logger.error(message)

    def critical(self, message: str) -> None:
        self.logger.critical(message)

    def exception(self, message: str) -> None:
        """Log at ERROR with the active traceback; call from an ``except`` block."""
        self.logger.exception(message)


def get_module_logger(name: str) -> logging.Logger:
    """Child of the package logger for a library module.

    Args:
        name: Usually ``__name__`` of the calling module

    Returns:
        logging.Logger: Logger named ``heisenberg_vqe.<leaf>``
    """
    return logging.getLogger(f"{LOGGER_NAME}.{name.rsplit('.', 1)[-1]}")
