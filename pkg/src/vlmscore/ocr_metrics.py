"""Character and word metrics over woven OCR output.

Metrics are computed on two complete texts: the super-predictions followed by
the unmatched predictions, and the super-ground-truth blocks followed by the
unmatched ground truth, each in weave order. Segments are separated by a
joiner that behaves as a space for matching but is free to insert or delete
and is never counted as a character. This keeps scores exact when the two
sides were woven into differently shaped pairs that still spell the same
text.

Matched characters and words are only sought between the paired parts of
the two texts; unmatched blocks add to the totals and to the edit distance
but can never be credited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .blockweaver import WeaveResult
from .textmatch import MatchConfig, NormText, TextLike


@dataclass(frozen=True)
class OcrSampleMetrics:
    cer: Optional[float]
    wer: Optional[float]
    char_precision: float
    char_recall: float
    char_f1: float
    word_precision: float
    word_recall: float
    word_f1: float
    matched_pred_chars: int
    matched_gt_chars: int
    pred_chars: int
    gt_chars: int
    char_edits: int
    matched_words: int
    pred_words: int
    gt_words: int
    word_edits: int
    vacuous: bool = False

    @property
    def cer_undefined(self) -> bool:
        return self.cer is None and not self.vacuous


@dataclass(frozen=True)
class OcrCorpusMetrics:
    per_sample_average: OcrSampleMetrics
    corpus_level: OcrSampleMetrics
    scored_samples: int
    vacuous_samples: int


def levenshtein(a: TextLike | Sequence, b: TextLike | Sequence) -> int:
    """Unit-cost insert/delete/substitute distance between two sequences.

    Strings are compared by character; any other sequences element-wise.
    """
    a_codes, b_codes = _codes_pair(a, b)
    return int(_kernels.edit_distance(a_codes, b_codes, -1))


def _codes_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, NormText):
        a = a.text
    if isinstance(b, NormText):
        b = b.text
    if isinstance(a, str) and isinstance(b, str):
        return _kernels.encode(a), _kernels.encode(b)
    vocab: dict = {}
    ca = np.array([vocab.setdefault(x, len(vocab)) for x in a], dtype=np.int64)
    cb = np.array([vocab.setdefault(x, len(vocab)) for x in b], dtype=np.int64)
    return ca, cb


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def _complete_text(segments: Sequence[str]) -> tuple[np.ndarray, np.ndarray, int]:
    """Join segments with joiners.

    Returns the joined codes, the same codes with joiners rendered as spaces,
    and the count of real characters.
    """
    parts = []
    for seg in segments:
        if not seg:
            continue
        if parts:
            parts.append(np.array([_kernels.JOINER], dtype=np.int64))
        parts.append(_kernels.encode(seg))
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, 0
    codes = np.concatenate(parts)
    rendered = np.where(codes == _kernels.JOINER, _kernels.SPACE, codes)
    return codes, rendered, int(np.count_nonzero(codes != _kernels.JOINER))


def _matched_real_chars(blocks: np.ndarray, codes_a: np.ndarray, codes_b: np.ndarray) -> tuple[int, int]:
    # a block may span a joiner on one side and a real space on the other;
    # each side only counts its own real characters
    real_a = np.concatenate(([0], np.cumsum(codes_a != _kernels.JOINER)))
    real_b = np.concatenate(([0], np.cumsum(codes_b != _kernels.JOINER)))
    ma = mb = 0
    for i, j, k in blocks:
        ma += int(real_a[i + k] - real_a[i])
        mb += int(real_b[j + k] - real_b[j])
    return ma, mb


def _segments(weave: WeaveResult) -> tuple[list[str], list[str], list[str], list[str]]:
    """Paired and unmatched segments of each side, in weave order."""
    return (
        [sp.text.text for sp, _ in weave.pairs],
        [sg.text.text for _, sg in weave.pairs],
        [b.text.text for b in weave.unmatched_pred],
        [b.text.text for b in weave.unmatched_gt],
    )


def sample_metrics(weave: WeaveResult, config: MatchConfig = MatchConfig()) -> OcrSampleMetrics:
    """Score one sample's weave.

    Character precision and recall come from the substring matches between
    the paired parts of the complete texts; CER is their joiner-aware edit distance over the
    ground-truth character count. Word metrics use whitespace tokens, with
    the longest common subsequence of paired tokens as the matched-word
    count.
    """
    sp_segs, sg_segs, up_segs, ug_segs = _segments(weave)
    p_codes, _, pred_chars = _complete_text(sp_segs + up_segs)
    g_codes, _, gt_chars = _complete_text(sg_segs + ug_segs)
    char_edits = int(_kernels.edit_distance(p_codes, g_codes, _kernels.JOINER))

    sp_codes, sp_render, _ = _complete_text(sp_segs)
    sg_codes, sg_render, _ = _complete_text(sg_segs)
    if len(sp_codes) and len(sg_codes):
        blocks = _kernels.lcs_blocks(sp_render, sg_render, config.min_block_len)
        matched_p, matched_g = _matched_real_chars(blocks, sp_codes, sg_codes)
    else:
        matched_p = matched_g = 0

    def tokens(segs):
        return [t for seg in segs for t in seg.split()]

    p_tokens, g_tokens = tokens(sp_segs + up_segs), tokens(sg_segs + ug_segs)
    pt, gt_ = _codes_pair(p_tokens, g_tokens)
    word_edits = int(_kernels.edit_distance(pt, gt_, -1))
    spt, sgt = _codes_pair(tokens(sp_segs), tokens(sg_segs))
    matched_words = int(_kernels.lcs_subsequence(spt, sgt))

    if pred_chars == 0 and gt_chars == 0:
        return OcrSampleMetrics(
            cer=0.0, wer=0.0,
            char_precision=1.0, char_recall=1.0, char_f1=1.0,
            word_precision=1.0, word_recall=1.0, word_f1=1.0,
            matched_pred_chars=0, matched_gt_chars=0, pred_chars=0, gt_chars=0, char_edits=0,
            matched_words=0, pred_words=0, gt_words=0, word_edits=0,
            vacuous=True,
        )
    return _from_counts(
        matched_p, matched_g, pred_chars, gt_chars, char_edits,
        matched_words, len(p_tokens), len(g_tokens), word_edits,
    )


def _from_counts(
    matched_p: int, matched_g: int, pred_chars: int, gt_chars: int, char_edits: int,
    matched_words: int, pred_words: int, gt_words: int, word_edits: int,
) -> OcrSampleMetrics:
    cp = _ratio(matched_p, pred_chars)
    cr = _ratio(matched_g, gt_chars)
    wp = _ratio(matched_words, pred_words)
    wr = _ratio(matched_words, gt_words)
    # no reference text: error rates are undefined and F1 is forced to zero
    cer = char_edits / gt_chars if gt_chars else None
    wer = word_edits / gt_words if gt_words else None
    return OcrSampleMetrics(
        cer=cer, wer=wer,
        char_precision=cp, char_recall=cr, char_f1=_f1(cp, cr),
        word_precision=wp, word_recall=wr, word_f1=_f1(wp, wr),
        matched_pred_chars=matched_p, matched_gt_chars=matched_g,
        pred_chars=pred_chars, gt_chars=gt_chars, char_edits=char_edits,
        matched_words=matched_words, pred_words=pred_words, gt_words=gt_words,
        word_edits=word_edits,
    )


_COUNT_FIELDS = (
    "matched_pred_chars", "matched_gt_chars", "pred_chars", "gt_chars", "char_edits",
    "matched_words", "pred_words", "gt_words", "word_edits",
)
_RATE_FIELDS = tuple(
    f.name for f in fields(OcrSampleMetrics) if f.name not in _COUNT_FIELDS and f.name != "vacuous"
)


def corpus_aggregate(samples: Sequence[OcrSampleMetrics]) -> OcrCorpusMetrics:
    """Per-sample average and pooled corpus-level metrics.

    The average skips vacuous samples (and undefined error rates); the pooled
    figures are recomputed from summed counts. Count fields of the average
    carry the pooled totals.
    """
    if not samples:
        raise ValueError("no samples")
    scored = [s for s in samples if not s.vacuous]
    if not scored:
        raise ValueError("no scorable samples")
    totals = {name: sum(getattr(s, name) for s in samples) for name in _COUNT_FIELDS}
    pooled = _from_counts(**{
        "matched_p": totals["matched_pred_chars"], "matched_g": totals["matched_gt_chars"],
        "pred_chars": totals["pred_chars"], "gt_chars": totals["gt_chars"],
        "char_edits": totals["char_edits"], "matched_words": totals["matched_words"],
        "pred_words": totals["pred_words"], "gt_words": totals["gt_words"],
        "word_edits": totals["word_edits"],
    })
    means = {}
    for name in _RATE_FIELDS:
        values = [getattr(s, name) for s in scored if getattr(s, name) is not None]
        means[name] = math.fsum(values) / len(values) if values else None
    average = replace(pooled, **means)
    return OcrCorpusMetrics(average, pooled, len(scored), len(samples) - len(scored))
