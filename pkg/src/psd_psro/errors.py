from __future__ import annotations

from pathlib import Path
from typing import Optional


class PsdPsroError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(PsdPsroError):
    pass


class GameError(PsdPsroError):
    pass


class MatrixFormatError(GameError):
    def __init__(self, message: str, path: Optional[Path] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class PolicyError(PsdPsroError):
    def __init__(self, message: str, path: Optional[Path] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path is not None else message)


class InfiniteDistanceError(PsdPsroError):
    """KL(pi || pi') is infinite: pi' is zero on an action pi plays at a reachable state."""

    def __init__(self, state_id: str, action: str):
        self.state_id = state_id
        self.action = action
        super().__init__(f"infinite KL at state {state_id!r}, action {action!r}")


class OracleDivergenceError(PsdPsroError):
    pass


class RunDirectoryError(PsdPsroError):
    pass


class MetaGameError(PsdPsroError):
    pass
