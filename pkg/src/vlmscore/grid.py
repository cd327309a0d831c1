"""Spatial 3x3 grid cells, temporal labels, and Jaccard scoring."""

from __future__ import annotations

from typing import AbstractSet, Iterable

GRID_CELLS = (
    "top-left", "top-center", "top-right",
    "middle-left", "center", "middle-right",
    "bottom-left", "bottom-center", "bottom-right",
)
TEMPORAL_LABELS = ("start", "mid", "end", "inter")

# Accepted alternative spellings, keyed after case folding and after
# underscores/spaces were turned into hyphens.
GRID_SYNONYMS = {
    "middle-center": "center",
    "center-center": "center",
    "centre": "center",
    "middle": "center",
    "top": "top-center",
    "top-middle": "top-center",
    "bottom": "bottom-center",
    "bottom-middle": "bottom-center",
    "left": "middle-left",
    "center-left": "middle-left",
    "right": "middle-right",
    "center-right": "middle-right",
}

GridSet = frozenset
TemporalSet = frozenset


class GridError(ValueError):
    pass


def _canon_cell(raw: str) -> str:
    if not isinstance(raw, str):
        raise GridError(f"position must be a string, got {raw!r}")
    key = "-".join(raw.strip().casefold().replace("_", " ").split())
    key = GRID_SYNONYMS.get(key, key)
    if key not in GRID_CELLS:
        raise GridError(f"unknown grid cell {raw!r}")
    return key


def parse_cells(strings: Iterable[str]) -> frozenset[str]:
    """Like :func:`parse_grid` but an empty list yields an empty set."""
    return frozenset(_canon_cell(s) for s in strings)


def parse_grid(strings: Iterable[str]) -> frozenset[str]:
    """Map raw position strings onto canonical grid cells.

    >>> sorted(parse_grid(["CENTER", "center", "top left"]))
    ['center', 'top-left']
    """
    strings = list(strings)
    if not strings:
        raise GridError("empty position")
    return parse_cells(strings)


def render_grid(cells: AbstractSet[str]) -> list[str]:
    """Canonical names in row-major grid order."""
    return [c for c in GRID_CELLS if c in cells]


def parse_temporal(labels: Iterable[str], fold_case: bool = True) -> frozenset[str]:
    out = set()
    for raw in labels:
        if not isinstance(raw, str):
            raise GridError(f"temporal label must be a string, got {raw!r}")
        key = raw.strip().casefold() if fold_case else raw
        if key not in TEMPORAL_LABELS:
            raise GridError(f"unknown temporal label {raw!r}")
        out.add(key)
    return frozenset(out)


def render_temporal(labels: AbstractSet[str]) -> list[str]:
    return [t for t in TEMPORAL_LABELS if t in labels]


def jaccard(a: AbstractSet, b: AbstractSet) -> float:
    """|a & b| / |a | b|; two empty sets agree vacuously and score 1.0."""
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union
