"""
Output file helpers.

Every file is written to a temporary sibling first and renamed into place, so
a crashed run never leaves a half-written report behind. Numbers use '.' as
decimal separator: dollars with 2 decimals, per-unit values with 6.
"""

import os
import tempfile
from pathlib import Path
from typing import Iterable, Tuple, Union

import pandas as pd

from app.utils.errors import CaseFormatError

PathLike = Union[str, Path]


def money(value: float) -> str:
    return f"{value:.2f}"


def pu(value: float) -> str:
    return f"{value:.6f}"


def write_atomic(path: PathLike, text: str) -> Path:
    """Write text to ``path`` via temp-then-rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temp, path)
    except BaseException:
        if os.path.exists(temp):
            os.unlink(temp)
        raise
    return path


def write_frame(path: PathLike, frame: pd.DataFrame, float_format: str = "%.6f") -> Path:
    """Write a DataFrame as CSV without the index."""
    return write_atomic(path, frame.to_csv(index=False, float_format=float_format, lineterminator="\n"))


def write_key_values(path: PathLike, rows: Iterable[Tuple[str, str]]) -> Path:
    """Two-column ``key,value`` CSV."""
    frame = pd.DataFrame(list(rows), columns=["key", "value"])
    return write_frame(path, frame)


def read_table(path: PathLike, section: str, **options) -> pd.DataFrame:
    """
    Read a CSV input file.

    Raises:
        CaseFormatError: The file is missing, unreadable or not CSV
    """
    try:
        return pd.read_csv(path, **options)
    except FileNotFoundError:
        raise CaseFormatError(0, section, f"file {path} not found")
    except OSError as exc:
        raise CaseFormatError(0, section, f"cannot read {path}: {exc.strerror}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as exc:
        raise CaseFormatError(0, section, f"{path}: {exc}")


def read_key_values(path: PathLike, section: str = "attack") -> dict:
    frame = read_table(path, section, dtype=str, keep_default_na=False)
    if list(frame.columns) != ["key", "value"]:
        raise CaseFormatError(1, section, "expected header 'key,value'")
    return dict(zip(frame["key"], frame["value"]))
