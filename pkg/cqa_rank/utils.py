import datetime
import json
import logging
import os
import pwd
import re
import socket
import sys
from typing import Any, Dict, Optional, Tuple

from . import __version__

ThreadsEnvVar: str = "CQA_RANK_THREADS"
"""Environment variable capping internal parallelism."""

GridEntry = Tuple[int, int, int, int]
"""Embedding sweep tuple (size, window, min_count, skip)."""

LogFormat: str = "%(levelname)s: %(message)s"


def positive_int_t(value: str) -> int:
    """Custom argparse type for integers >= 1.
    >>> parser.add_argument('--dim', type=positive_int_t)
    """
    number = int(value)
    if number < 1:
        raise ValueError(f"not a positive integer: {value!r}")
    return number


def non_negative_int_t(value: str) -> int:
    """Custom argparse type for integers >= 0."""
    number = int(value)
    if number < 0:
        raise ValueError(f"not a non-negative integer: {value!r}")
    return number


def positive_float_t(value: str) -> float:
    """Custom argparse type for reals > 0."""
    number = float(value)
    if not number > 0:
        raise ValueError(f"not a positive number: {value!r}")
    return number


def subtask_t(value: str) -> str:
    """Validates subtask name (A or C)."""
    if not re.match(r'^[AaCc]$', value):
        raise ValueError(f"not a supported subtask: {value!r}")
    return value.upper()


def grid_t(value: str) -> GridEntry:
    """Validates an embedding sweep entry of format size:window:min_count:skip.
    >>> grid_t("200:5:1:3")
    (200, 5, 1, 3)
    """
    if not re.match(r'^\d+:\d+:\d+:\d+$', value):
        raise ValueError(f"not a valid grid entry (size:window:freq:skip): {value!r}")
    size, window, min_count, skip = (int(part) for part in value.split(":"))
    if size < 1 or window < 1 or min_count < 1 or skip < 1:
        raise ValueError(f"grid entry values must be positive: {value!r}")
    return size, window, min_count, skip


def grid_stamp(entry: GridEntry) -> str:
    """Returns config stamp used in model file names.
    >>> grid_stamp((200, 5, 1, 3))
    's200_w5_f1_k3'
    """
    return "s{0}_w{1}_f{2}_k{3}".format(*entry)


def thread_count() -> int:
    """Returns number of worker threads permitted by CQA_RANK_THREADS (default 1)."""
    value = os.getenv(ThreadsEnvVar, "")
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        raise ValueError(f"invalid value for {ThreadsEnvVar}: {value!r}")


def timestamp() -> str:
    """Returns ISO timestamp of current time and date."""
    return datetime.datetime.now().strftime("%Y-%m-%d-T%H-%M-%S")


def hostname() -> str:
    """Returns UNIX machine hostname."""
    return socket.gethostname()


def username() -> str:
    """Returns UNIX login name."""
    login = 0
    return pwd.getpwuid(os.getuid())[login]


def write_run_stamp(filename: str, stage: str, config: Dict[str, Any]) -> None:
    """Write JSON run stamp describing how outputs of a stage were produced."""
    stamp = {
        "environment": {
            "timestamp": timestamp(),
            "hostname": hostname(),
            "username": username(),
            "version": __version__,
        },
        "stage": stage,
        "config": config,
    }
    with open(filename, "wt") as fp:
        json.dump(stamp, fp, indent=2, sort_keys=True)
        fp.write("\n")
    logging.getLogger(__name__).info("created run stamp: %r", filename)


COLORS: Dict[str, int] = {name: 30 + index for index, name in enumerate(
    ["grey", "red", "green", "yellow", "blue", "magenta", "cyan", "white"])}

LEVEL_COLORS: Dict[int, str] = {
    logging.DEBUG: "blue",
    logging.INFO: "green",
    logging.WARNING: "yellow",
    logging.ERROR: "red",
    logging.CRITICAL: "magenta",
}


def colored(text: str, color: Optional[str] = None, bold: bool = False) -> str:
    """Wrap text in ANSI color codes, unchanged without color and bold."""
    codes = ([str(COLORS[color])] if color else []) + (["1"] if bold else [])
    if not codes:
        return text
    return "\033[{}m{}\033[0m".format(";".join(codes), text)


class ColoredFormatter(logging.Formatter):
    """Colors whole log lines by level."""

    def format(self, record: logging.LogRecord) -> str:
        return colored(super().format(record), LEVEL_COLORS.get(record.levelno))


def setup_logging(level: int = logging.INFO) -> logging.Logger:
    """Configure root logger, colored when writing to a terminal.

    Calling it again only updates the level of the installed handlers.
    """
    logger = logging.getLogger()
    logger.setLevel(level)
    if logger.handlers:
        for handler in logger.handlers:
            handler.setLevel(level)
        return logger
    handler = logging.StreamHandler()
    handler.setLevel(level)
    formatter_class = ColoredFormatter if sys.stderr.isatty() else logging.Formatter
    handler.setFormatter(formatter_class(LogFormat))
    logger.addHandler(handler)
    return logger


def hr(pattern: str = "=", width: int = 75) -> str:
    """Returns horizontal line used as section banner in logs."""
    return pattern * width
