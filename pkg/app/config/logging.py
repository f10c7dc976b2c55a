import sys
import logging
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

import structlog
from structlog.stdlib import LoggerFactory

from .settings import get_settings


def configure_logging() -> None:
    """structlog on stderr; stdout is reserved for command results."""

    settings = get_settings()

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            # JSON lines for batch runs, console for development
            structlog.processors.JSONRenderer()
            if settings.environment == "production"
            else structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty()),
        ],
        context_class=dict,
        logger_factory=LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, settings.observability.log_level),
        force=True,
    )


def get_logger(name: str) -> structlog.stdlib.BoundLogger:

    return structlog.get_logger(name)


@contextmanager
def run_context(**context: Any) -> Iterator[None]:
    """Attach run identifiers (method, seed, stage) to every event logged inside the block."""
    with structlog.contextvars.bound_contextvars(**context):
        yield


class LoggerMixin:

    @property
    def logger(self) -> structlog.stdlib.BoundLogger:

        return get_logger(self.__class__.__name__)

    def log_event(self, event: str, **kwargs: Any) -> None:

        self.logger.info(event, **kwargs)

    def log_warning(self, event: str, **kwargs: Any) -> None:

        self.logger.warning(event, **kwargs)

    def log_error(self, error: Exception, context: Optional[Dict[str, Any]] = None) -> None:
        details = getattr(error, "details", None) or {}
        self.logger.error(
            "Error occurred",
            error=str(error),
            error_type=type(error).__name__,
            **{**details, **(context or {})}
        )
