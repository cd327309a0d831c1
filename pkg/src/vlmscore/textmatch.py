"""Text normalization and substring-level similarity used by the block weaver."""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import _kernels

_WS = re.compile(r"\s+")

NO_MATCH = math.inf
"""Position returned by :func:`weighted_match_position` when nothing matches."""


@dataclass(frozen=True)
class MatchConfig:
    """Knobs shared by coverage scoring and the weaver.

    Args:
        tau: coverage threshold; an assignment needs a score strictly above it.
        min_block_len: shortest common substring that counts as a match.
        case_sensitive: when False, text is case-folded during normalization.
    """

    tau: float = 0.30
    min_block_len: int = 2
    case_sensitive: bool = True

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie strictly between 0 and 1, got {self.tau}")
        if self.min_block_len < 1:
            raise ValueError(f"min_block_len must be >= 1, got {self.min_block_len}")


@dataclass(frozen=True)
class NormText:
    text: str
    original_length: int = field(default=-1, compare=False)

    def __post_init__(self):
        if self.original_length < 0:
            object.__setattr__(self, "original_length", len(self.text))

    @cached_property
    def codes(self) -> np.ndarray:
        return _kernels.encode(self.text)

    def __len__(self) -> int:
        return len(self.text)

    def __str__(self) -> str:
        return self.text


TextLike = Union[NormText, str]


class MatchBlock(NamedTuple):
    pos_a: int
    pos_b: int
    length: int


def normalize_text(raw: str, config: MatchConfig = MatchConfig()) -> NormText:
    """NFC-normalize, collapse whitespace runs to one space and trim."""
    text = unicodedata.normalize("NFC", raw)
    text = _WS.sub(" ", text).strip()
    if not config.case_sensitive:
        text = text.casefold()
    return NormText(text, len(raw))


def _as_norm(value: TextLike) -> NormText:
    return value if isinstance(value, NormText) else NormText(value)


def matching_blocks(a: TextLike, b: TextLike, config: MatchConfig = MatchConfig()) -> list[MatchBlock]:
    """Non-crossing common substrings of ``a`` and ``b``, ordered by position.

    The longest common substring is taken first (leftmost in ``a``, then
    leftmost in ``b`` on ties) and the procedure recurses on the text to its
    left and to its right. Blocks shorter than ``config.min_block_len`` are
    dropped.
    """
    a, b = _as_norm(a), _as_norm(b)
    if not a.text or not b.text:
        return []
    rows = _kernels.lcs_blocks(a.codes, b.codes, config.min_block_len)
    return [MatchBlock(int(i), int(j), int(k)) for i, j, k in rows]


def _canonical(a: NormText, b: NormText) -> tuple[NormText, NormText]:
    # decomposition tie-breaks depend on argument order; fixing the order
    # makes the score symmetric
    if (len(a.text), a.text) <= (len(b.text), b.text):
        return a, b
    return b, a


def matched_length(a: TextLike, b: TextLike, config: MatchConfig = MatchConfig()) -> int:
    """Total length of the matching blocks, independent of argument order."""
    a, b = _canonical(_as_norm(a), _as_norm(b))
    if not a.text or not b.text:
        return 0
    return int(_kernels.matched_total(a.codes, b.codes, config.min_block_len))


def coverage_score(a: TextLike, b: TextLike, config: MatchConfig = MatchConfig()) -> float:
    """Share of the shorter text covered by common substrings of the pair.

    Both empty scores 1.0; exactly one empty scores 0.0.
    """
    a, b = _as_norm(a), _as_norm(b)
    shorter = min(len(a.text), len(b.text))
    if shorter == 0:
        return 1.0 if len(a.text) == len(b.text) else 0.0
    return matched_length(a, b, config) / shorter


class TextPool:
    """Texts packed into one code array for batched coverage scoring.

    ``pool.coverage(probe)[t]`` equals ``coverage_score(probe, texts[t])``.
    """

    def __init__(self, texts: Sequence[TextLike]):
        norms = [_as_norm(t) for t in texts]
        self.offsets = np.cumsum([0] + [len(t.text) for t in norms], dtype=np.int64)
        self.codes = np.concatenate([t.codes for t in norms]) if norms else np.zeros(0, np.int64)
        self._shingle_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def coverage(self, probe: TextLike, config: MatchConfig = MatchConfig()) -> np.ndarray:
        return _kernels.coverage_many(_as_norm(probe).codes, self.codes, self.offsets, config.min_block_len)

    def best_above(self, probe: TextLike, floor: float, config: MatchConfig = MatchConfig()) -> tuple[int, float]:
        """Position of the first text whose coverage with ``probe`` is highest and above ``floor``.

        Gives the same answer as taking the first argmax of :meth:`coverage`
        and comparing it with ``floor``, but prunes hopeless texts with a
        shingle-count bound. Returns ``(-1, floor)`` when nothing qualifies.
        """
        sh, sh_offsets = self._shingles(config.min_block_len)
        codes = _as_norm(probe).codes
        t, score = _kernels.best_coverage(
            codes, _kernels.shingles(codes, config.min_block_len),
            self.codes, self.offsets, sh, sh_offsets, config.min_block_len, floor,
        )
        return int(t), float(score)

    def _shingles(self, min_len: int) -> tuple[np.ndarray, np.ndarray]:
        key = min(min_len, 2)
        if key not in self._shingle_cache:
            parts = [_kernels.shingles(self.codes[lo:hi], min_len) for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]
            offsets = np.cumsum([0] + [len(x) for x in parts], dtype=np.int64)
            packed = np.concatenate(parts) if parts else np.zeros(0, np.int64)
            self._shingle_cache[key] = (packed, offsets)
        return self._shingle_cache[key]


def weighted_match_position(piece: TextLike, host: TextLike, config: MatchConfig = MatchConfig()) -> float:
    """Length-weighted mean centre of ``piece``'s matches inside ``host``.

    Returns :data:`NO_MATCH` (``+inf``) when no block matches, so unplaced
    pieces sort last.
    """
    blocks = matching_blocks(piece, host, config)
    total = sum(blk.length for blk in blocks)
    if total == 0:
        return NO_MATCH
    return sum(blk.length * (blk.pos_b + blk.length / 2) for blk in blocks) / total
