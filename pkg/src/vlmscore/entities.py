"""Semantic entity matching and detection metrics for objects, humans and logos."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .grid import jaccard
from .judge import (
    MENTION_CONTEXT,
    ConfigError,
    JudgeClient,
    contains_phrase,
    normalize_phrase,
    token_jaccard,
)
from .schema import AnnotationRecord

MATCHER_KINDS = ("exact_normalized", "token_jaccard", "alias_table", "judge")


class Matcher:
    """Scores (prediction, ground truth) text pairs in [0, 1].

    Subclasses implement :meth:`score`; :meth:`score_matrix` and
    :meth:`mentions` can be overridden to batch remote calls.
    """

    kind = "base"

    def __init__(self, threshold: float = 0.5):
        if not 0.0 <= threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {threshold}")
        self.threshold = threshold

    def score(self, pred: str, gt: str) -> float:
        raise NotImplementedError

    def score_matrix(self, preds: Sequence[str], gts: Sequence[str]) -> list[list[float]]:
        return [[self.score(p, g) for g in gts] for p in preds]

    def mentions(self, entity: str, texts: Sequence[str]) -> bool:
        """Whether ``entity`` is named inside any of ``texts``."""
        return any(contains_phrase(t, entity) for t in texts)


class ExactMatcher(Matcher):
    kind = "exact_normalized"

    def score(self, pred, gt):
        a, b = normalize_phrase(pred), normalize_phrase(gt)
        return 1.0 if a and a == b else 0.0


class TokenJaccardMatcher(Matcher):
    kind = "token_jaccard"

    def score(self, pred, gt):
        if not normalize_phrase(pred) or not normalize_phrase(gt):
            return 0.0
        return token_jaccard(pred, gt)


class AliasMatcher(Matcher):
    """Exact matching after mapping every known variant to its canonical name.

    The alias file holds one brand per line as comma-separated,
    case-insensitive variants; the first is canonical. Blank lines and lines
    starting with ``#`` are skipped.
    """

    kind = "alias_table"

    def __init__(self, aliases: dict[str, str], threshold: float = 0.5):
        super().__init__(threshold)
        self.aliases = aliases
        self._groups: dict[str, set[str]] = {}
        for variant, canon in aliases.items():
            self._groups.setdefault(canon, set()).add(variant)

    @classmethod
    def from_file(cls, path: str | Path, threshold: float = 0.5) -> "AliasMatcher":
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read alias table {path}: {exc}") from exc
        aliases: dict[str, str] = {}
        for lineno, line in enumerate(lines, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            variants = [normalize_phrase(v) for v in line.split(",")]
            if any(not v for v in variants):
                raise ConfigError(f"{path}:{lineno}: empty alias entry")
            canon = variants[0]
            for v in variants:
                if aliases.get(v, canon) != canon:
                    raise ConfigError(f"{path}:{lineno}: {v!r} already belongs to {aliases[v]!r}")
                aliases[v] = canon
        return cls(aliases, threshold)

    def canonical(self, text: str) -> str:
        norm = normalize_phrase(text)
        return self.aliases.get(norm, norm)

    def score(self, pred, gt):
        a, b = self.canonical(pred), self.canonical(gt)
        return 1.0 if a and a == b else 0.0

    def mentions(self, entity, texts):
        canon = self.canonical(entity)
        variants = self._groups.get(canon, set()) | {normalize_phrase(entity)}
        return any(contains_phrase(t, v) for t in texts for v in variants)


class JudgeMatcher(Matcher):
    """Delegates equivalence verdicts to the judge; a verdict scores 1.0 or 0.0."""

    kind = "judge"

    def __init__(self, judge: JudgeClient, task: str = "entity_match", threshold: float = 0.5):
        super().__init__(threshold)
        self.judge = judge
        self.task = task

    def for_task(self, task: str) -> "JudgeMatcher":
        return JudgeMatcher(self.judge, task, self.threshold)

    def score(self, pred, gt):
        return self.score_matrix([pred], [gt])[0][0]

    def score_matrix(self, preds, gts):
        pairs = [(p, g) for p in preds for g in gts]
        verdicts = self.judge.verdicts(self.task, pairs) if pairs else []
        width = len(gts)
        return [[1.0 if verdicts[i * width + j] else 0.0 for j in range(width)] for i in range(len(preds))]

    def mentions(self, entity, texts):
        if not texts:
            return False
        return any(self.judge.verdicts(self.task, [(entity, t) for t in texts], context=MENTION_CONTEXT))


def make_matcher(
    kind: str,
    threshold: float = 0.5,
    alias_path: Optional[str | Path] = None,
    judge: Optional[JudgeClient] = None,
) -> Matcher:
    if kind == "exact_normalized":
        return ExactMatcher(threshold)
    if kind == "token_jaccard":
        return TokenJaccardMatcher(threshold)
    if kind == "alias_table":
        if alias_path is None:
            raise ConfigError("alias_table matcher needs an alias file")
        return AliasMatcher.from_file(alias_path, threshold)
    if kind == "judge":
        if judge is None:
            raise ConfigError("judge matcher needs a judge endpoint or the stub")
        return JudgeMatcher(judge, threshold=threshold)
    raise ConfigError(f"unknown matcher kind {kind!r}; expected one of {MATCHER_KINDS}")


# -- matching & scores -------------------------------------------------------

@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]
    unmatched_pred: tuple[int, ...]
    unmatched_gt: tuple[int, ...]


@dataclass(frozen=True)
class DetectionScores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tp_recall: int
    vacuous: bool = False

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tp_recall: Optional[int] = None) -> "DetectionScores":
        """Build scores from confusion counts.

        ``tp_recall`` is the true-positive count seen from the ground-truth
        side when it differs from the prediction side (cross-category
        credit); it defaults to ``tp``.
        """
        tpr = tp if tp_recall is None else tp_recall
        if tp + fp == 0 and tpr + fn == 0:
            return cls(1.0, 1.0, 1.0, tp, fp, fn, tpr, vacuous=True)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tpr / (tpr + fn) if tpr + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, tp, fp, fn, tpr)


def match_entities(preds: Sequence[str], gts: Sequence[str], matcher: Matcher) -> MatchResult:
    """One-to-one greedy matching, highest score first.

    Pairs scoring below ``matcher.threshold`` are never matched. Ties go to
    the lower prediction index, then the lower ground-truth index.
    """
    matrix = matcher.score_matrix(list(preds), list(gts)) if preds and gts else []
    candidates = sorted(
        (-s, i, j)
        for i, row in enumerate(matrix)
        for j, s in enumerate(row)
        if s >= matcher.threshold
    )
    used_p: set[int] = set()
    used_g: set[int] = set()
    pairs = []
    for neg, i, j in candidates:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        pairs.append((i, j, -neg))
    pairs.sort()
    return MatchResult(
        tuple(pairs),
        tuple(i for i in range(len(preds)) if i not in used_p),
        tuple(j for j in range(len(gts)) if j not in used_g),
    )


def detection_scores(m: MatchResult) -> DetectionScores:
    return DetectionScores.from_counts(len(m.pairs), len(m.unmatched_pred), len(m.unmatched_gt))


@dataclass
class Tally:
    total: float = 0.0
    count: int = 0

    def add(self, value: float) -> None:
        self.total += value
        self.count += 1

    @property
    def mean(self) -> Optional[float]:
        return self.total / self.count if self.count else None


@dataclass
class EntityEval:
    """Detection scores plus attribute tallies over matched pairs.

    Attribute means are ``None`` when nothing was matched (or, for temporal
    scores, when the media is an image).
    """

    detection: DetectionScores
    match: MatchResult
    attributes: dict[str, Tally] = field(default_factory=dict)

    def attribute_means(self) -> dict[str, Optional[float]]:
        return {k: t.mean for k, t in self.attributes.items()}


def _localization(attrs: dict[str, Tally], pred_e, gt_e, media_kind: str) -> None:
    attrs["spatial_jaccard"].add(jaccard(pred_e.pos, gt_e.pos))
    if media_kind == "video":
        attrs["temporal_jaccard"].add(jaccard(pred_e.temp, gt_e.temp))


def _tallies(*names: str) -> dict[str, Tally]:
    return {n: Tally() for n in names}


def eval_objects(pred: AnnotationRecord, gt: AnnotationRecord, matcher: Matcher) -> EntityEval:
    """Object detection with credit for objects named in human activities.

    A predicted object left unmatched by the one-to-one pass still counts as
    a true positive for precision when a ground-truth human activity names
    it. Symmetrically, an unmatched ground-truth object counts towards
    recall when a predicted activity names it. Neither credit consumes an
    object on the other side.
    """
    pred_names = [o.name for o in pred.objects]
    gt_names = [o.name for o in gt.objects]
    m = match_entities(pred_names, gt_names, matcher)

    gt_activities = [h.activity for h in gt.humans if h.activity.strip()]
    pred_activities = [h.activity for h in pred.humans if h.activity.strip()]
    precision_credit = sum(1 for i in m.unmatched_pred if matcher.mentions(pred_names[i], gt_activities))
    recall_credit = sum(1 for j in m.unmatched_gt if matcher.mentions(gt_names[j], pred_activities))

    tp = len(m.pairs) + precision_credit
    tp_recall = len(m.pairs) + recall_credit
    det = DetectionScores.from_counts(tp, len(pred_names) - tp, len(gt_names) - tp_recall, tp_recall)

    attrs = _tallies("spatial_jaccard", "temporal_jaccard")
    for i, j, _ in m.pairs:
        _localization(attrs, pred.objects[i], gt.objects[j], gt.media_kind)
    return EntityEval(det, m, attrs)


def eval_humans(
    pred: AnnotationRecord,
    gt: AnnotationRecord,
    matcher: Matcher,
    judge: Optional[JudgeClient] = None,
) -> EntityEval:
    """Match humans on appearance plus activity, then score attributes per pair.

    Grid position is deliberately not part of the matching key. Activity and
    description quality need ``judge``; without one they are left out.
    """
    m = match_entities([h.match_key for h in pred.humans], [h.match_key for h in gt.humans], matcher)
    attrs = _tallies(
        "activity_score", "description_score", "age_accuracy", "expression_accuracy",
        "face_accuracy", "spatial_jaccard", "temporal_jaccard",
    )
    matched = [(pred.humans[i], gt.humans[j]) for i, j, _ in m.pairs]
    for ph, gh in matched:
        attrs["age_accuracy"].add(float(ph.age == gh.age))
        attrs["expression_accuracy"].add(float(ph.expression == gh.expression))
        attrs["face_accuracy"].add(float(ph.face_visible == gh.face_visible))
        _localization(attrs, ph, gh, gt.media_kind)
    if judge is not None and matched:
        activity = judge.scores_01([(ph.activity, gh.activity) for ph, gh in matched])
        description = judge.scores_01([(ph.description, gh.description) for ph, gh in matched])
        for a, d in zip(activity, description):
            attrs["activity_score"].add(a)
            attrs["description_score"].add(d)
    return EntityEval(detection_scores(m), m, attrs)


def eval_logos(pred: AnnotationRecord, gt: AnnotationRecord, matcher: Matcher) -> EntityEval:
    m = match_entities([lg.brand for lg in pred.logos], [lg.brand for lg in gt.logos], matcher)
    attrs = _tallies("spatial_jaccard", "temporal_jaccard")
    for i, j, _ in m.pairs:
        _localization(attrs, pred.logos[i], gt.logos[j], gt.media_kind)
    return EntityEval(detection_scores(m), m, attrs)
