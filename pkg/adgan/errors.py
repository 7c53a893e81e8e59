"""
adgan.errors
------------
One exception hierarchy for the whole package.  Library code raises these;
only the CLI driver (``main.py``) turns them into process exit codes.
"""
from __future__ import annotations

from typing import Iterable, Optional


class AdganError(Exception):
    """Base class; ``exit_code`` is what ``main.py`` returns for it."""

    exit_code: int = 1


# ───────────────────────────────────────────────────────────────────────────
#  Configuration / data / numerics
# ───────────────────────────────────────────────────────────────────────────
class ConfigError(AdganError):
    exit_code = 2

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class DataError(AdganError):
    exit_code = 3


class ManifestError(DataError):
    def __init__(self, path: str, message: str, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


class MissingClassesError(DataError):
    def __init__(self, missing: Iterable[str]):
        self.missing = list(missing)
        super().__init__(
            f"{len(self.missing)} label class(es) have no records: {', '.join(self.missing)}"
        )


class NumericError(AdganError):
    exit_code = 4


class FrozenParameterError(AdganError):
    """A gradient reached a parameter that the active stage keeps fixed."""

    exit_code = 4


class ShapeError(AdganError, ValueError):
    exit_code = 4


class LabelError(AdganError, ValueError):
    exit_code = 3


# ───────────────────────────────────────────────────────────────────────────
#  Checkpoints – each failure mode has its own code
# ───────────────────────────────────────────────────────────────────────────
class CheckpointError(AdganError):
    exit_code = 3
    code: int = 0


class CheckpointFormatError(CheckpointError):
    code = 13


class CheckpointVersionError(CheckpointError):
    code = 10


class CheckpointTruncatedError(CheckpointError):
    code = 11


class CheckpointChecksumError(CheckpointError):
    code = 12
