"""Atomic CSV/JSON writers and small readers for the command-line tools."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ctn import ContactGraph
from .errors import InvalidInputError


def fmt(value) -> str:
    """Shortest round-trip text for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_atomic(files: dict) -> None:
    """Write ``{path: text}`` so that each target appears complete or not at all.

    All contents are rendered by the caller before this is called, so a
    validation failure never leaves partial output behind.
    """
    for path, text in files.items():
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def read_locations(path) -> tuple[list[str], np.ndarray]:
    """Read an ``id,x,y`` CSV."""
    ids, coords = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("id", "x", "y") if c not in (reader.fieldnames or [])]
        if missing:
            raise InvalidInputError(f"{path}: line 1: missing columns {missing}")
        for row in reader:
            try:
                x, y = float(row["x"]), float(row["y"])
            except (TypeError, ValueError):
                raise InvalidInputError(f"{path}: line {reader.line_num}: non-numeric coordinate") from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise InvalidInputError(f"{path}: line {reader.line_num}: non-finite coordinate")
            ids.append(row["id"])
            coords.append((x, y))
    if not coords:
        raise InvalidInputError(f"{path}: no locations")
    return ids, np.array(coords, dtype=float)


def read_points(path) -> np.ndarray:
    """Read the ``x``, ``y`` columns of any CSV (locations or doppelganger output)."""
    pts = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"x", "y"} <= set(reader.fieldnames or []):
            raise InvalidInputError(f"{path}: line 1: need columns x and y")
        for row in reader:
            try:
                pts.append((float(row["x"]), float(row["y"])))
            except (TypeError, ValueError):
                raise InvalidInputError(f"{path}: line {reader.line_num}: non-numeric coordinate") from None
    if not pts:
        raise InvalidInputError(f"{path}: no points")
    return np.array(pts, dtype=float)


def read_edges(path, n: int) -> ContactGraph:
    """Read a 0-indexed ``i,j`` edge list for a graph on ``n`` nodes."""
    edges = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"i", "j"} <= set(reader.fieldnames or []):
            raise InvalidInputError(f"{path}: line 1: need columns i and j")
        for row in reader:
            try:
                i, j = int(row["i"]), int(row["j"])
            except (TypeError, ValueError):
                raise InvalidInputError(f"{path}: line {reader.line_num}: non-integer node id") from None
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise InvalidInputError(f"{path}: line {reader.line_num}: invalid edge ({i}, {j}) for {n} nodes")
            edges.add((min(i, j), max(i, j)))
    return ContactGraph(n, frozenset(edges))


def edges_csv(g: ContactGraph) -> str:
    return csv_text(["i", "j"], g.sorted_edges())
