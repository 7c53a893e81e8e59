"""
Small helper that configures *all* logging so each import only has to do::

    from adgan.utils.log import get_logger
    log = get_logger(__name__)

It also hosts :class:`MetricsLog`, the plain-text per-iteration loss log
(``iter<TAB>name<TAB>value``) written by the training engine.
"""
from __future__ import annotations

import datetime as dt
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union
from zoneinfo import ZoneInfo

_FMT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
# Default date-format & time-zone (overridable by caller)
_DATE_FMT = "%Y-%m-%d %H:%M:%S"
_TZ = "UTC"


def configure_logging(
    log_file: Union[str, Path, None],
    level: int = logging.INFO,
    datefmt: str = _DATE_FMT,
    tz: str = _TZ,
) -> None:
    """
    Replace the root logger's handlers so every module writes to the console
    and, when *log_file* is given, to that file as well.
    """
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)

    # All records flow through root; filtering happens per handler.
    root.setLevel(logging.DEBUG)

    tzinfo = ZoneInfo(tz)

    class _TZFormatter(logging.Formatter):
        def converter(self, timestamp):  # type: ignore[override]
            return dt.datetime.fromtimestamp(timestamp, tzinfo).timetuple()

    fmt = _TZFormatter(_FMT, datefmt=datefmt)

    # Console
    ch = logging.StreamHandler()
    ch.setLevel(level)
    ch.setFormatter(fmt)
    root.addHandler(ch)

    # File
    if log_file is not None:
        log_file = Path(log_file).expanduser()
        log_file.parent.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(log_file)
        fh.setLevel(logging.DEBUG)  # file always captures DEBUG+
        fh.setFormatter(fmt)
        root.addHandler(fh)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


# ───────────────────────────────────────────────────────────────────────────
#  Metrics log
# ───────────────────────────────────────────────────────────────────────────
class MetricsLog:
    """
    Collects ``(iteration, name, value)`` records in memory and, optionally,
    appends them to a tab-separated text file.

    Values are written with ``repr`` so two runs that compute the same floats
    produce byte-identical files.
    """

    def __init__(self, path: Union[str, Path, None] = None, append: bool = False):
        self.records: List[Tuple[int, str, float]] = []
        self.path: Optional[Path] = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if not append:
                self.path.write_text("")

    def record(self, iteration: int, name: str, value: float) -> None:
        value = float(value)
        self.records.append((iteration, name, value))
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(f"{iteration}\t{name}\t{value!r}\n")

    def lines(self) -> List[str]:
        return [f"{i}\t{n}\t{v!r}" for i, n, v in self.records]

    @staticmethod
    def read(path: Union[str, Path]) -> List[Tuple[int, str, float]]:
        out = []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            it, name, value = line.split("\t")
            out.append((int(it), name, float(value)))
        return out
