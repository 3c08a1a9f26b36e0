"""
Logger singleton.

Usage:
    from nmclt.util.logger import get_logger

    logger = get_logger()
    logger.info("Block %s accepted", block_hash)

Log lines go to stderr, so stdout stays clean for command output.
While a simulation runs, every line is stamped with its virtual time:

    DEBUG    netsim.hosts   [t=137ms] Tunnel 4f2a... established
"""

# Std
import sys
import inspect
import logging
from typing import Callable

# nmclt
from nmclt.spf import spf

PACKAGE_PREFIX = "nmclt."

# Returns the current virtual time in ms, or None outside a simulation
_clock: Callable[[], int] | None = None


class ColoredFormatter(logging.Formatter):
    """
    Colored level names, dimmed module names, spf tags rendered.
    """

    # fmt: off
    LEVEL_COLORS = {
        logging.DEBUG: "\x1b[90m",      # gray
        logging.INFO: "\x1b[32m",       # green
        logging.WARNING: "\x1b[33m",    # yellow
        logging.ERROR: "\x1b[31m",      # red
        logging.CRITICAL: "\x1b[41m",   # red background
    }
    # fmt: on
    RESET = "\x1b[0m"

    def format(self, record):
        color = self.LEVEL_COLORS.get(record.levelno, self.RESET)
        record.module_name = record.name.removeprefix(PACKAGE_PREFIX)
        record.sim_time = "" if _clock is None else f"[t={_clock()}ms] "

        message = spf.produce(record.getMessage())
        if record.levelno >= logging.ERROR:
            message = f"{color}{message}{self.RESET}"

        # Pad before coloring, ANSI codes would break the -8s width
        level = f"{color}{record.levelname:<8}{self.RESET}"
        line = f"{level} \x1b[90m{record.module_name}{self.RESET} {record.sim_time}{message}"
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


# Configure
# ------------------------------------

root = logging.getLogger()

# Avoid duplicate logs
if root.handlers:
    root.handlers.clear()

handler = logging.StreamHandler(sys.stderr)
handler.setFormatter(ColoredFormatter())
root.setLevel(logging.INFO)
root.addHandler(handler)


def get_logger():
    """
    Returns a logger named after the calling module.
    """
    frame = inspect.stack()[1]
    module = inspect.getmodule(frame[0])
    name = module.__name__ if module else "__main__"
    return logging.getLogger(name)


def set_log_level(level: str | int):
    """
    Set the global logging level.
    """
    if isinstance(level, str):
        level = level.upper()
    root.setLevel(level)


def set_clock(clock: Callable[[], int] | None) -> None:
    """
    Stamp log lines with virtual time from `clock`, or stop when None.
    """
    global _clock
    _clock = clock
