"""Line-delimited record serialization for runs and campaign outputs.

One JSON object per line, keys sorted: identical runs serialize to
byte-identical files, which the determinism checks rely on.
"""

from __future__ import annotations

import json
import os
from typing import Iterable

__all__ = ["write_records", "read_records", "records_to_lines"]


def records_to_lines(rows: Iterable[dict]) -> list:
    return [json.dumps(row, sort_keys=True) for row in rows]


def write_records(path: str, rows: Iterable[dict]) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        for line in records_to_lines(rows):
            fh.write(line + "\n")


def read_records(path: str) -> list:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
