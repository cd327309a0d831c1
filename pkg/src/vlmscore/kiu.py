"""Key-information-unit scoring of free-text media descriptions.

Descriptions are decomposed (by the judge, or by a pre-extracted sidecar)
into atomic statements. Completeness is the share of ground-truth units that
some predicted unit matches, faithfulness the share of predicted units that
some ground-truth unit matches. Matching is many-to-many.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .entities import JudgeMatcher, Matcher
from .grid import jaccard
from .judge import ConfigError, JudgeClient, normalize_phrase
from .schema import MediaDescription


@dataclass(frozen=True)
class KIU:
    text: str
    source: str  # "prediction" | "ground_truth"
    matched: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("KIU text must be non-empty")
        if self.source not in ("prediction", "ground_truth"):
            raise ValueError(f"unknown KIU source {self.source!r}")


@dataclass(frozen=True)
class KiuScores:
    completeness: float
    faithfulness: float
    gt_total: int
    gt_matched: int
    pred_total: int
    pred_matched: int

    @property
    def completeness_vacuous(self) -> bool:
        return self.gt_total == 0

    @property
    def faithfulness_vacuous(self) -> bool:
        return self.pred_total == 0

    @property
    def f1(self) -> float:
        """Harmonic mean of completeness and faithfulness."""
        c, f = self.completeness, self.faithfulness
        return 2 * c * f / (c + f) if c + f else 0.0


def _texts(units: Sequence[KIU | str]) -> list[str]:
    return [u.text if isinstance(u, KIU) else u for u in units]


def match_kius(
    pred_units: Sequence[KIU | str],
    gt_units: Sequence[KIU | str],
    matcher: Matcher,
) -> tuple[list[bool], list[bool]]:
    """Flag every unit that at least one unit on the other side matches."""
    if isinstance(matcher, JudgeMatcher):
        matcher = matcher.for_task("kiu_match")
    preds, gts = _texts(pred_units), _texts(gt_units)
    if not preds or not gts:
        return [False] * len(preds), [False] * len(gts)
    matrix = matcher.score_matrix(preds, gts)
    hits = [[s >= matcher.threshold for s in row] for row in matrix]
    pred_flags = [any(row) for row in hits]
    gt_flags = [any(hits[i][j] for i in range(len(preds))) for j in range(len(gts))]
    return pred_flags, gt_flags


def kiu_scores(pred_flags: Sequence[bool], gt_flags: Sequence[bool]) -> KiuScores:
    """Completeness/faithfulness; an empty side scores 1.0 (see the ``*_vacuous`` flags)."""
    gt_total, pred_total = len(gt_flags), len(pred_flags)
    gt_matched, pred_matched = sum(map(bool, gt_flags)), sum(map(bool, pred_flags))
    return KiuScores(
        completeness=gt_matched / gt_total if gt_total else 1.0,
        faithfulness=pred_matched / pred_total if pred_total else 1.0,
        gt_total=gt_total,
        gt_matched=gt_matched,
        pred_total=pred_total,
        pred_matched=pred_matched,
    )


def load_kiu_sidecar(path: str | Path) -> dict[str, tuple[list[str], list[str]]]:
    """Read pre-extracted units.

    One JSON object per line: ``{"sample_id": ..., "pred_units": [...],
    "gt_units": [...]}``.
    """
    out = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    sid = row["sample_id"]
                    pred, gt = list(row["pred_units"]), list(row["gt_units"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad KIU sidecar line: {exc}") from exc
                if sid in out:
                    raise ConfigError(f"{path}:{lineno}: duplicate sample_id {sid!r}")
                out[sid] = (pred, gt)
    except OSError as exc:
        raise ConfigError(f"cannot read KIU sidecar {path}: {exc}") from exc
    return out


@dataclass(frozen=True)
class MediaScores:
    quality_match: float
    colors_jaccard: float
    scene_score: Optional[float] = None
    perspective_score: Optional[float] = None
    description: Optional[KiuScores] = None
    nsfw_match: Optional[float] = None

    @property
    def description_f1(self) -> Optional[float]:
        return self.description.f1 if self.description else None


def eval_media(
    pred: MediaDescription,
    gt: MediaDescription,
    matcher: Matcher,
    judge: Optional[JudgeClient] = None,
    units: Optional[tuple[Sequence[str], Sequence[str]]] = None,
) -> MediaScores:
    """Score the media-description block of a record.

    Scene and camera perspective need a judge (1-5 scale). The description
    is scored through units from ``units`` when given, otherwise extracted
    by the judge; with neither it is left out.
    """
    quality = float(normalize_phrase(pred.quality) == normalize_phrase(gt.quality))
    colors = jaccard(set(pred.dominant_colors), set(gt.dominant_colors))
    scene = perspective = None
    if judge is not None:
        scene, perspective = judge.scores_15([(pred.scene, gt.scene), (pred.camera_perspective, gt.camera_perspective)])
    if units is None and judge is not None:
        pred_texts = [pred.description] if pred.description.strip() else []
        gt_texts = [gt.description] if gt.description.strip() else []
        extracted = judge.extract_units(pred_texts + gt_texts)
        pred_u = extracted[0] if pred_texts else []
        gt_u = extracted[-1] if gt_texts else []
        units = (pred_u, gt_u)
    description = None
    if units is not None:
        description = kiu_scores(*match_kius(units[0], units[1], matcher))
    nsfw = None
    if pred.nsfw is not None and gt.nsfw is not None:
        nsfw = float(pred.nsfw == gt.nsfw)
    return MediaScores(quality, colors, scene, perspective, description, nsfw)
