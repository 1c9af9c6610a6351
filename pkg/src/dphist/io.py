"""Line-oriented file formats.

* histogram CSV: ``count`` or ``index,count`` per line (1-based index), with
  an optional header; missing indices read as 0.
* released vector: ``index,value`` CSV (strategies L and S).
* released tree: ``node_id,level,offset,value`` CSV (strategy H); ``level``
  is the depth below the root, ``node_id`` the 0-based BFS position.
* every released file has a JSON sidecar at ``<path>.json``.
* budget ledger: ``{"entries": [{"label", "epsilon"}], "total"}``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .histogram import Histogram, TreeLayout
from .mechanism import BudgetLedger


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _parse_int(token: str, what: str, line: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what} {token!r} is not a number", line) from None
    if not math.isfinite(value) or value != int(value):
        raise ParseError(f"{what} {token!r} is not an integer", line)
    return int(value)


def parse_histogram_lines(lines) -> Histogram:
    counts: dict[int, int] = {}
    next_index = 1
    seen_data = False
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        fields = [f.strip() for f in text.split(",")]
        if not seen_data and not _is_number(fields[0]):
            seen_data = True  # header line
            continue
        seen_data = True
        if len(fields) == 1:
            index, count = next_index, _parse_int(fields[0], "count", lineno)
        elif len(fields) == 2:
            index = _parse_int(fields[0], "index", lineno)
            count = _parse_int(fields[1], "count", lineno)
        else:
            raise ParseError(f"expected 1 or 2 fields, got {len(fields)}", lineno)
        if index < 1:
            raise ParseError(f"bucket index must be >= 1, got {index}", lineno)
        if index in counts:
            raise ParseError(f"duplicate bucket index {index}", lineno)
        if count < 0:
            raise ParseError(f"count must be non-negative, got {count}", lineno)
        counts[index] = count
        next_index = index + 1
    if not counts:
        raise ParseError("no histogram records found")
    dense = np.zeros(max(counts), dtype=np.int64)
    for index, count in counts.items():
        dense[index - 1] = count
    return Histogram(dense)


def read_histogram_csv(path) -> Histogram:
    with open(path, newline="") as fh:
        return parse_histogram_lines(fh)


def write_histogram_csv(path, h: Histogram) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("index,count\n")
        for i, c in enumerate(h.counts.tolist(), start=1):
            fh.write(f"{i},{c}\n")


def format_value(value) -> str:
    """Integral values print without a decimal point; others round-trip exactly."""
    value = float(value)
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


@dataclass
class Release:
    """A released or inferred vector plus its sidecar metadata."""

    values: np.ndarray
    meta: dict

    @property
    def strategy(self) -> str:
        return self.meta["strategy"]

    @property
    def layout(self) -> TreeLayout | None:
        if self.meta.get("k") is None:
            return None
        return TreeLayout(int(self.meta["k"]), int(self.meta["height"]))


def sidecar_path(path) -> Path:
    return Path(f"{path}.json")


def write_release(path, release: Release) -> None:
    layout = release.layout
    with open(path, "w", newline="") as fh:
        if layout is None:
            fh.write("index,value\n")
            for i, v in enumerate(release.values, start=1):
                fh.write(f"{i},{format_value(v)}\n")
        else:
            fh.write("node_id,level,offset,value\n")
            for depth in range(layout.height):
                start = layout.level_start(depth)
                for offset in range(layout.k**depth):
                    node = start + offset
                    fh.write(f"{node},{depth},{offset},{format_value(release.values[node])}\n")
    with open(sidecar_path(path), "w") as fh:
        json.dump(release.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_sidecar(path) -> dict:
    side = sidecar_path(path)
    try:
        with open(side) as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"missing sidecar {side}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"sidecar {side} is not valid JSON: {exc.msg}", exc.lineno) from None
    for key in ("strategy", "epsilon", "stage"):
        if key not in meta:
            raise ParseError(f"sidecar {side} lacks {key!r}")
    return meta


def read_release(path) -> Release:
    meta = _read_sidecar(path)
    tree = meta.get("k") is not None
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    expected = ["node_id", "level", "offset", "value"] if tree else ["index", "value"]
    if not rows or [c.strip() for c in rows[0]] != expected:
        raise ParseError(f"expected header {','.join(expected)}", 1)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise ParseError(f"expected {len(expected)} fields, got {len(row)}", lineno)
        position = _parse_int(row[0], expected[0], lineno)
        if position != len(values) + (0 if tree else 1):
            raise ParseError(f"out-of-order {expected[0]} {position}", lineno)
        try:
            values.append(float(row[-1]))
        except ValueError:
            raise ParseError(f"value {row[-1]!r} is not a number", lineno) from None
    release = Release(np.array(values), meta)
    layout = release.layout
    if layout is not None and len(values) != layout.total_nodes:
        raise ParseError(f"tree file has {len(values)} nodes, layout needs {layout.total_nodes}")
    return release


def read_ledger(path) -> BudgetLedger:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        return BudgetLedger()
    except json.JSONDecodeError as exc:
        raise ParseError(f"ledger {path} is not valid JSON: {exc.msg}", exc.lineno) from None
    try:
        return BudgetLedger.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed ledger {path}: {exc}") from None


def write_ledger(path, ledger: BudgetLedger) -> None:
    with open(path, "w") as fh:
        json.dump(ledger.to_dict(), fh, indent=2)
        fh.write("\n")
