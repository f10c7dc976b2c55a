"""Console entry point for the ``transda`` command."""

import os
import sys
from typing import List, Optional

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _cap_threads() -> None:
    # BLAS reads these once, at numpy import time
    threads = os.environ.get("THREADS", "1")
    for var in _THREAD_VARS:
        os.environ.setdefault(var, threads)


_cap_threads()

from app.cli import build_parser  # noqa: E402
from app.config import LoggerMixin, configure_logging, get_settings  # noqa: E402
from app.core.tensor import set_precision  # noqa: E402
from app.utils.exceptions import TransDAError  # noqa: E402


class CommandRunner(LoggerMixin):
    """Parses argv, dispatches to the subcommand and maps failures to exit codes."""

    def run(self, argv: Optional[List[str]] = None) -> int:
        configure_logging()
        try:
            settings = get_settings()
            set_precision(settings.runtime.precision.value)
            args = build_parser().parse_args(argv)
            self.logger.debug("Running command", command=args.command, environment=settings.environment,
                              threads=settings.runtime.effective_threads)
            return int(args.handler(args))
        except TransDAError as exc:
            self.log_error(exc, {"stage": "command"})
            return exc.exit_code
        except ValueError as exc:
            # pydantic validation of settings read from the environment
            self.log_error(exc, {"stage": "settings"})
            return 1


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns 0 on success, 1 on config errors, 2 on data/format errors."""
    return CommandRunner().run(argv)


if __name__ == "__main__":
    sys.exit(main())
