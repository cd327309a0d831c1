"""Deterministic evaluation of structured vision-language model outputs."""

__version__ = "0.1.0"

from .blockweaver import SuperBlock, TextBlock, WeaveResult, weave
from .entities import (
    AliasMatcher,
    DetectionScores,
    ExactMatcher,
    JudgeMatcher,
    TokenJaccardMatcher,
    detection_scores,
    make_matcher,
    match_entities,
)
from .grid import jaccard, parse_grid, parse_temporal
from .harness import EvalConfig, EvalReport, ingest, render_report, run_eval
from .judge import JudgeClient
from .kiu import KIU, KiuScores, kiu_scores, match_kius
from .ocr_metrics import corpus_aggregate, levenshtein, sample_metrics
from .schema import AnnotationRecord, parse_record, reliability, validate_record
from .textmatch import MatchConfig, coverage_score, matching_blocks, normalize_text

__all__ = [
    "AliasMatcher", "AnnotationRecord", "DetectionScores", "EvalConfig", "EvalReport",
    "ExactMatcher", "JudgeClient", "JudgeMatcher", "KIU", "KiuScores", "MatchConfig",
    "SuperBlock", "TextBlock", "TokenJaccardMatcher", "WeaveResult", "corpus_aggregate",
    "coverage_score", "detection_scores", "ingest", "jaccard", "kiu_scores", "levenshtein",
    "make_matcher", "match_entities", "match_kius", "matching_blocks", "normalize_text",
    "parse_grid", "parse_record", "parse_temporal", "reliability", "render_report",
    "run_eval", "sample_metrics", "validate_record", "weave",
]
