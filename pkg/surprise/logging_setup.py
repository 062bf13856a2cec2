from __future__ import annotations

import logging
from pathlib import Path

DEFAULT_LOG_FILENAME = "surprise_sampler.log"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
PACKAGE_LOGGER = "surprise"


def _resolve_log_path(log_path: str | Path | None = None) -> Path:
    if log_path is None:
        return Path.cwd() / DEFAULT_LOG_FILENAME
    return Path(log_path).expanduser().resolve()


def _handler_uses_path(handler: logging.Handler, path: Path) -> bool:
    file_name = getattr(handler, "baseFilename", None)
    if not file_name:
        return False
    try:
        return Path(file_name).resolve() == path
    except OSError:
        return False


def _open_handler(path: Path) -> logging.Handler | None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(path, encoding="utf-8")
    except OSError:
        return None
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    return handler


def configure_logging(debug_enabled: bool, log_path: str | Path | None = None) -> Path | None:
    """Send debug records of the ``surprise`` package to one UTF-8 log file.

    Only the package logger is lowered to DEBUG, so chatty third-party
    loggers keep their own levels. ``warnings.warn`` output from numpy and
    scipy (overflow, ill-conditioning) is routed into the same file.
    Returns the log path, or ``None`` when logging stays off or the file
    cannot be opened. Calling it twice with the same path adds no handler.
    """
    if not debug_enabled:
        return None

    path = _resolve_log_path(log_path)
    package = logging.getLogger(PACKAGE_LOGGER)
    package.setLevel(logging.DEBUG)
    if any(_handler_uses_path(existing, path) for existing in package.handlers):
        return path

    handler = _open_handler(path)
    if handler is None:
        return None
    package.addHandler(handler)
    logging.captureWarnings(True)
    logging.getLogger("py.warnings").addHandler(handler)

    package.debug("Debug logging enabled. Writing to %s", path)
    return path
