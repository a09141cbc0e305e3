"""Atomic file output, CSV tables and key = value text files."""

from __future__ import annotations

import configparser
import os
import tempfile
from pathlib import Path

import numpy as np

_SECTION = "peergrid"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if np.isnan(x):
        return ""
    return f"{x:.12g}"


def render_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows) -> None:
    atomic_write(path, render_csv(columns, rows))


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Read a CSV written by :func:`write_csv`; blank cells become None."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        rows.append({k: (float(v) if v != "" else None) for k, v in zip(header, cells)})
    return header, rows


def parse_key_values(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines with ``#`` comments."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    parser.optionxform = str
    parser.read_string(f"[{_SECTION}]\n{text}")
    return dict(parser[_SECTION])


def render_key_values(pairs: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())
