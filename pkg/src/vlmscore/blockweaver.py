"""Greedy weaving of unordered OCR blocks into matched super-block pairs.

Predicted and ground-truth OCR output rarely agree on how text is split into
blocks. The weaver resolves this in four passes:

1. assign every prediction to its best-covering ground-truth block;
2. join the predictions assigned to one ground-truth block, in the order
   they occur inside it, into a super-prediction;
3. attach each still-unassigned ground-truth block to the super-prediction
   that covers it best (a bucket);
4. join each bucket, in the order its members occur inside the
   super-prediction, into a super-ground-truth block.

All greedy choices compare coverage scores strictly against ``tau`` and break
ties towards the lowest index, so the output is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .textmatch import (
    MatchConfig,
    NormText,
    TextPool,
    normalize_text,
    weighted_match_position,
)


@dataclass(frozen=True)
class TextBlock:
    index: int
    text: NormText


@dataclass(frozen=True)
class Assignment:
    pred_to_gt: dict[int, int]
    unmatched_pred: tuple[int, ...]


@dataclass(frozen=True)
class SuperBlock:
    text: NormText
    members: tuple[int, ...]


@dataclass(frozen=True)
class WeaveResult:
    pairs: tuple[tuple[SuperBlock, SuperBlock], ...]
    unmatched_pred: tuple[TextBlock, ...]
    unmatched_gt: tuple[TextBlock, ...]


def make_blocks(texts: Iterable[str], config: MatchConfig = MatchConfig()) -> list[TextBlock]:
    """Normalize raw strings into indexed blocks."""
    return [TextBlock(i, normalize_text(t, config)) for i, t in enumerate(texts)]


def _join(blocks: Sequence[TextBlock]) -> SuperBlock:
    text = " ".join(b.text.text for b in blocks)
    return SuperBlock(NormText(text), tuple(b.index for b in blocks))


def _best(pool: TextPool, keys: Sequence[int], probe: NormText, config: MatchConfig) -> tuple[int, float]:
    """Highest-coverage key above ``tau``, or ``(-1, tau)``; ``keys`` ascend so ties keep the lowest."""
    t, score = pool.best_above(probe, config.tau, config)
    return (keys[t] if t >= 0 else -1), score


def step1_assign(P: Sequence[TextBlock], G: Sequence[TextBlock], config: MatchConfig = MatchConfig()) -> Assignment:
    gts = sorted(G, key=lambda g: g.index)
    pool = TextPool([g.text for g in gts])
    keys = [g.index for g in gts]
    mapping: dict[int, int] = {}
    unmatched = []
    for p in P:
        gi, score = _best(pool, keys, p.text, config)
        if score > config.tau:
            mapping[p.index] = gi
        else:
            unmatched.append(p.index)
    return Assignment(mapping, tuple(sorted(unmatched)))


def step2_super_predictions(
    assignment: Assignment,
    P: Sequence[TextBlock],
    G: Sequence[TextBlock],
    config: MatchConfig = MatchConfig(),
) -> dict[int, SuperBlock]:
    """Build one super-prediction per ground-truth block that received predictions.

    Members are ordered by their weighted match position inside the
    ground-truth text, unplaced members last, then by prediction index.
    """
    preds = {p.index: p for p in P}
    gts = {g.index: g for g in G}
    grouped: dict[int, list[TextBlock]] = {}
    for pi, gi in assignment.pred_to_gt.items():
        grouped.setdefault(gi, []).append(preds[pi])
    supers = {}
    for gi in sorted(grouped):
        host = gts[gi].text
        members = sorted(
            grouped[gi],
            key=lambda p: (weighted_match_position(p.text, host, config), p.index),
        )
        supers[gi] = _join(members)
    return supers


def step3_bucketize(
    supers: dict[int, SuperBlock],
    G_unmatched: Sequence[TextBlock],
    config: MatchConfig = MatchConfig(),
) -> tuple[dict[int, list[int]], list[TextBlock]]:
    """Attach unassigned ground-truth blocks to the best-covering super-prediction.

    Returns the buckets (seed index -> member indices, seed first) and the
    ground-truth blocks that stayed unmatched. Each block is placed once, in
    index order; placing one never re-scores another.
    """
    buckets = {seed: [seed] for seed in sorted(supers)}
    keys = list(buckets)
    pool = TextPool([supers[s].text for s in keys])
    still_unmatched = []
    for g in sorted(G_unmatched, key=lambda b: b.index):
        seed, score = _best(pool, keys, g.text, config)
        if score > config.tau:
            buckets[seed].append(g.index)
        else:
            still_unmatched.append(g)
    return buckets, still_unmatched


def step4_super_gt(
    buckets: dict[int, list[int]],
    supers: dict[int, SuperBlock],
    G: Sequence[TextBlock],
    unmatched_pred: Sequence[TextBlock] = (),
    unmatched_gt: Sequence[TextBlock] = (),
    config: MatchConfig = MatchConfig(),
) -> WeaveResult:
    gts = {g.index: g for g in G}
    pairs = []
    for seed in sorted(buckets):
        sp = supers[seed]
        members = sorted(
            (gts[i] for i in buckets[seed]),
            key=lambda g: (weighted_match_position(g.text, sp.text, config), g.index),
        )
        pairs.append((sp, _join(members)))
    return WeaveResult(
        tuple(pairs),
        tuple(sorted(unmatched_pred, key=lambda b: b.index)),
        tuple(sorted(unmatched_gt, key=lambda b: b.index)),
    )


def weave(
    P: Sequence[TextBlock | str],
    G: Sequence[TextBlock | str],
    config: MatchConfig = MatchConfig(),
) -> WeaveResult:
    """Run the four weaving steps on prediction blocks ``P`` and ground truth ``G``.

    Raw strings are accepted and normalized with ``config``.

    Every input block ends up exactly once in the result, either inside a
    pair or in one of the unmatched lists.
    """
    P = _coerce(P, config)
    G = _coerce(G, config)
    for side, blocks in (("prediction", P), ("ground truth", G)):
        if len({b.index for b in blocks}) != len(blocks):
            raise ValueError(f"duplicate {side} block index")
    assignment = step1_assign(P, G, config)
    supers = step2_super_predictions(assignment, P, G, config)
    assigned_gt = set(assignment.pred_to_gt.values())
    g_unmatched = [g for g in G if g.index not in assigned_gt]
    buckets, g_left = step3_bucketize(supers, g_unmatched, config)
    p_left = [p for p in P if p.index not in assignment.pred_to_gt]
    return step4_super_gt(buckets, supers, G, p_left, g_left, config)


def _coerce(blocks: Sequence[TextBlock | str], config: MatchConfig) -> list[TextBlock]:
    out = []
    for i, b in enumerate(blocks):
        out.append(b if isinstance(b, TextBlock) else TextBlock(i, normalize_text(b, config)))
    return out
