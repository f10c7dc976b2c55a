from .settings import get_settings, reset_settings
from .logging import configure_logging, get_logger, run_context, LoggerMixin
from .loader import build_experiment_config, load_experiment_config, parse_config_text

__all__ = [
    "get_settings",
    "reset_settings",
    "configure_logging",
    "get_logger",
    "LoggerMixin",
    "run_context",
    "build_experiment_config",
    "load_experiment_config",
    "parse_config_text",
]
