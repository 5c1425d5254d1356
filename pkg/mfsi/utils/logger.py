import logging
import logging.config
from typing import Any, Dict, List, Optional, Union

import structlog

from mfsi.config.settings import AppSettings, get_settings

_ROTATE_BYTES = 10 * 1024 * 1024
_ROTATE_BACKUPS = 5


def _handlers(formatter: str, log_file: Optional[str]) -> Dict[str, Dict[str, Any]]:
    handlers: Dict[str, Dict[str, Any]] = {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": formatter,
        }
    }
    if log_file:
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "formatter": formatter,
            "filename": log_file,
            "maxBytes": _ROTATE_BYTES,
            "backupCount": _ROTATE_BACKUPS,
        }
    return handlers


def build_logging_config(settings: AppSettings) -> Dict[str, Any]:
    """Return the dictConfig payload for the given settings."""
    handler_names: List[str] = ["console"]
    if settings.log_file:
        handler_names.append("file")

    if settings.log_format == "json":
        formatters = {
            "json": {
                "()": structlog.stdlib.ProcessorFormatter,
                "processor": structlog.processors.JSONRenderer(),
                "foreign_pre_chain": [
                    structlog.stdlib.add_logger_name,
                    structlog.stdlib.add_log_level,
                    structlog.processors.TimeStamper(fmt="iso"),
                ],
            },
        }
        formatter = "json"
    else:
        formatters = {"default": {"format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"}}
        formatter = "default"

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": formatters,
        "handlers": _handlers(formatter, settings.log_file),
        "root": {"level": settings.log_level, "handlers": handler_names},
    }


class AppLogger:
    """Process-wide logger configuration for the solver and CLI"""

    _configured = False
    _format = "plain"

    @classmethod
    def configure(cls, settings: Optional[AppSettings] = None):
        if cls._configured:
            return

        settings = settings or AppSettings.from_env()

        if settings.log_format == "json":
            # structlog renders key/value context from solver call sites
            structlog.configure(
                processors=[
                    structlog.stdlib.filter_by_level,
                    structlog.stdlib.add_logger_name,
                    structlog.stdlib.add_log_level,
                    structlog.stdlib.PositionalArgumentsFormatter(),
                    structlog.processors.TimeStamper(fmt="iso"),
                    structlog.processors.StackInfoRenderer(),
                    structlog.processors.format_exc_info,
                    structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
                ],
                context_class=dict,
                logger_factory=structlog.stdlib.LoggerFactory(),
                wrapper_class=structlog.stdlib.BoundLogger,
                cache_logger_on_first_use=True,
            )

        logging.config.dictConfig(build_logging_config(settings))
        cls._format = settings.log_format
        cls._configured = True
        logging.getLogger(__name__).debug("Logger configured (format=%s)", settings.log_format)

    @classmethod
    def reset(cls):
        cls._configured = False
        get_settings.cache_clear()

    @classmethod
    def get_logger(cls, name: str = None) -> Union[logging.Logger, structlog.stdlib.BoundLogger]:
        if not cls._configured:
            cls.configure()

        if cls._format == "json":
            return structlog.get_logger(name)
        return logging.getLogger(name)
