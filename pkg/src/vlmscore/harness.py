"""Corpus-level evaluation: ingest paired JSONL files, score tasks, render reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .blockweaver import weave
from .entities import EntityEval, Matcher, make_matcher, eval_humans, eval_logos, eval_objects
from .judge import ConfigError, JudgeClient, JudgeError
from .kiu import eval_media, load_kiu_sidecar
from .ocr_metrics import OcrSampleMetrics, corpus_aggregate, sample_metrics
from .schema import (
    AnnotationRecord,
    ParseOutcome,
    Violation,
    has_errors,
    parse_record,
    reliability,
    validate_record,
)
from .textmatch import MatchConfig

logger = logging.getLogger(__name__)

TASKS = ("objects", "humans", "logos", "ocr", "media", "nsfw", "reliability")
FORMATS = ("json", "csv", "markdown")
HEADLINE_COLUMNS = ("Reliability", "Object F1", "Human F1", "Logo F1", "OCR F1", "Media F1")
CORPUS_LEVEL = "Corpus-Level"
PER_SAMPLE_AVERAGE = "Per-Sample Average"


class IngestError(RuntimeError):
    pass


@dataclass
class EvalConfig:
    """Everything that determines an evaluation run.

    ``parallelism`` and ``output_format`` do not affect results and are kept
    out of the config digest.
    """

    tasks: tuple[str, ...] = TASKS
    matcher: str = "exact_normalized"
    theta: float = 0.5
    alias_path: Optional[str] = None
    match: MatchConfig = field(default_factory=MatchConfig)
    judge: Optional[JudgeClient] = None
    kiu_sidecar: Optional[str] = None
    parallelism: int = 1
    output_format: str = "json"
    max_failed_fraction: float = 0.10

    def validate(self) -> None:
        if not self.tasks:
            raise ConfigError("at least one task is required")
        unknown = [t for t in self.tasks if t not in TASKS]
        if unknown:
            raise ConfigError(f"unknown task(s) {unknown}; expected a subset of {list(TASKS)}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"unknown output format {self.output_format!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.matcher == "judge" and self.judge is None:
            raise ConfigError("the judge matcher needs a judge endpoint or --judge stub")
        if "media" in self.tasks and self.judge is None and self.kiu_sidecar is None:
            raise ConfigError("the media task needs a judge or a KIU sidecar file")

    def describe(self) -> dict:
        return {
            "tasks": sorted(self.tasks, key=TASKS.index),
            "matcher": self.matcher,
            "theta": self.theta,
            "alias_path": str(self.alias_path) if self.alias_path else None,
            "tau": self.match.tau,
            "min_block_len": self.match.min_block_len,
            "case_sensitive": self.match.case_sensitive,
            "judge_model": self.judge.model if self.judge else None,
            "kiu_sidecar": str(self.kiu_sidecar) if self.kiu_sidecar else None,
            "max_failed_fraction": self.max_failed_fraction,
        }

    def digest(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Sample:
    sample_id: str
    gt: AnnotationRecord
    pred: ParseOutcome
    pred_violations: tuple[Violation, ...] = ()


@dataclass
class IngestResult:
    samples: list[Sample]
    missing_pred: list[str] = field(default_factory=list)
    missing_gt: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


# -- ingest ------------------------------------------------------------------

def read_jsonl(path: str | Path) -> dict[str, dict]:
    """Load a JSONL file keyed by its ``sample_id`` field."""
    rows: dict[str, dict] = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except ValueError as exc:
                    raise IngestError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc
                if not isinstance(row, dict) or not isinstance(row.get("sample_id"), str):
                    raise IngestError(f"{path}:{lineno}: line needs a string 'sample_id'")
                sid = row["sample_id"]
                if sid in rows:
                    raise IngestError(f"{path}:{lineno}: duplicate sample_id {sid!r}")
                rows[sid] = row
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    return rows


def _envelope_text(row: dict) -> str:
    if "raw_output" in row:
        raw = row["raw_output"]
        return raw if isinstance(raw, str) else json.dumps(raw)
    body = {k: v for k, v in row.items() if k != "sample_id"}
    return json.dumps(body, ensure_ascii=False)


def parse_ground_truth(row: dict) -> tuple[AnnotationRecord, list[Violation]]:
    outcome = parse_record(_envelope_text(row), "strict")
    if not outcome.ok:
        raise IngestError(f"ground truth {row['sample_id']!r} is invalid: {'; '.join(outcome.diagnostics)}")
    return outcome.record, validate_record(outcome.record, "ground_truth")


def parse_prediction(row: dict, media_kind: Optional[str]) -> tuple[ParseOutcome, list[Violation]]:
    outcome = parse_record(_envelope_text(row), "lenient", media_kind=media_kind)
    violations = validate_record(outcome.record, "prediction") if outcome.ok else []
    return outcome, violations


def ingest(gt_path: str | Path, pred_path: str | Path) -> IngestResult:
    """Pair ground truth with predictions by ``sample_id`` (inner join).

    Ground-truth lines are parsed strictly and must be valid records.
    Prediction lines are parsed leniently; they hold either a record or the
    raw model text under ``raw_output``.
    """
    gt_rows = read_jsonl(gt_path)
    pred_rows = read_jsonl(pred_path)
    samples = []
    warnings = []
    for sid in sorted(gt_rows):
        if sid not in pred_rows:
            continue
        gt, gt_violations = parse_ground_truth(gt_rows[sid])
        warnings.extend(f"ground truth {sid}: {v}" for v in gt_violations)
        outcome, violations = parse_prediction(pred_rows[sid], gt.media_kind)
        samples.append(Sample(sid, gt, outcome, tuple(violations)))
    missing_pred = sorted(set(gt_rows) - set(pred_rows))
    missing_gt = sorted(set(pred_rows) - set(gt_rows))
    if missing_pred:
        warnings.append(f"no prediction for sample(s): {', '.join(missing_pred)}")
    if missing_gt:
        warnings.append(f"no ground truth for sample(s): {', '.join(missing_gt)}")
    for w in warnings:
        logger.warning(w)
    return IngestResult(samples, missing_pred, missing_gt, warnings)


# -- per-sample evaluation ---------------------------------------------------

def _entity_metrics(ev: EntityEval) -> dict:
    out = asdict(ev.detection)
    out["attributes"] = {
        name: {"sum": t.total, "n": t.count, "mean": t.mean} for name, t in ev.attributes.items()
    }
    return out


def _usable(outcome: ParseOutcome, violations: Sequence[Violation]) -> bool:
    return outcome.ok and not has_errors(violations)


class _Runner:
    def __init__(self, config: EvalConfig, kius: Optional[dict]):
        self.config = config
        self.kius = kius
        self.matcher: Matcher = make_matcher(config.matcher, config.theta, config.alias_path, config.judge)

    def evaluate(self, sample: Sample) -> dict:
        cfg = self.config
        gt = sample.gt
        pred = sample.pred.record if sample.pred.ok else AnnotationRecord.empty(gt.media_kind)
        out: dict[str, Any] = {}
        for task in cfg.tasks:
            if task == "reliability":
                out[task] = {
                    "status": sample.pred.status,
                    "parsed": _usable(sample.pred, sample.pred_violations),
                    "strict": sample.pred.status == "valid" and not has_errors(sample.pred_violations),
                    "diagnostics": list(sample.pred.diagnostics),
                    "violations": [str(v) for v in sample.pred_violations],
                }
            elif task == "objects":
                out[task] = _entity_metrics(eval_objects(pred, gt, self.matcher))
            elif task == "humans":
                out[task] = _entity_metrics(eval_humans(pred, gt, self.matcher, cfg.judge))
            elif task == "logos":
                out[task] = _entity_metrics(eval_logos(pred, gt, self.matcher))
            elif task == "ocr":
                w = weave(list(pred.ocr), list(gt.ocr), cfg.match)
                out[task] = asdict(sample_metrics(w, cfg.match))
            elif task == "media":
                units = self.kius.get(sample.sample_id) if self.kius is not None else None
                judge = cfg.judge
                if units is None and judge is None:
                    out[task] = {"error": "no KIU units for sample"}
                    continue
                ms = eval_media(pred.media, gt.media, self.matcher, judge, units)
                d = ms.description
                out[task] = {
                    "quality_match": ms.quality_match,
                    "colors_jaccard": ms.colors_jaccard,
                    "scene_score": ms.scene_score,
                    "perspective_score": ms.perspective_score,
                    "description_f1": ms.description_f1,
                    "completeness": d.completeness if d else None,
                    "faithfulness": d.faithfulness if d else None,
                    "gt_units": d.gt_total if d else 0,
                    "gt_matched": d.gt_matched if d else 0,
                    "pred_units": d.pred_total if d else 0,
                    "pred_matched": d.pred_matched if d else 0,
                }
            elif task == "nsfw":
                p, g = pred.media.nsfw, gt.media.nsfw
                out[task] = {"match": float(p == g) if p is not None and g is not None else None}
        return out

    def __call__(self, sample: Sample) -> tuple[str, Optional[dict], Optional[str]]:
        try:
            return sample.sample_id, self.evaluate(sample), None
        except JudgeError as exc:
            return sample.sample_id, None, f"{type(exc).__name__}: {exc}"


# -- aggregation -------------------------------------------------------------

def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def _aggregate_entities(rows: list[dict]) -> dict:
    from .entities import DetectionScores

    tp = sum(r["tp"] for r in rows)
    fp = sum(r["fp"] for r in rows)
    fn = sum(r["fn"] for r in rows)
    tpr = sum(r["tp_recall"] for r in rows)
    pooled = asdict(DetectionScores.from_counts(tp, fp, fn, tpr))
    scored = [r for r in rows if not r["vacuous"]]
    average = {k: _mean([r[k] for r in scored]) for k in ("precision", "recall", "f1")}
    names = sorted({n for r in rows for n in r["attributes"]})
    for name in names:
        attrs = [r["attributes"][name] for r in rows]
        n = sum(a["n"] for a in attrs)
        pooled[name] = math.fsum(a["sum"] for a in attrs) / n if n else None
        average[name] = _mean([a["mean"] for a in attrs])
    average["samples"] = len(scored)
    pooled["samples"] = len(rows)
    return {"corpus_level": pooled, "per_sample_average": average}


def _aggregate_ocr(rows: list[dict]) -> dict:
    metrics = [OcrSampleMetrics(**r) for r in rows]
    try:
        agg = corpus_aggregate(metrics)
    except ValueError as exc:
        return {"error": str(exc)}
    return {
        "corpus_level": asdict(agg.corpus_level),
        "per_sample_average": asdict(agg.per_sample_average),
        "scored_samples": agg.scored_samples,
        "vacuous_samples": agg.vacuous_samples,
    }


_MEDIA_MEANS = ("quality_match", "colors_jaccard", "scene_score", "perspective_score")


def _aggregate_media(rows: list[dict]) -> dict:
    rows = [r for r in rows if "error" not in r]
    average = {k: _mean([r[k] for r in rows]) for k in _MEDIA_MEANS + ("description_f1", "completeness", "faithfulness")}
    pooled = {k: average[k] for k in _MEDIA_MEANS}
    described = [r for r in rows if r["description_f1"] is not None]
    if described:
        gt_total = sum(r["gt_units"] for r in described)
        pred_total = sum(r["pred_units"] for r in described)
        c = sum(r["gt_matched"] for r in described) / gt_total if gt_total else 1.0
        f = sum(r["pred_matched"] for r in described) / pred_total if pred_total else 1.0
        pooled.update(completeness=c, faithfulness=f, description_f1=2 * c * f / (c + f) if c + f else 0.0)
    else:
        pooled.update(completeness=None, faithfulness=None, description_f1=None)
    average["samples"] = len(rows)
    pooled["samples"] = len(rows)
    return {"corpus_level": pooled, "per_sample_average": average}


def _aggregate(task: str, rows: list[dict]) -> dict:
    if task == "reliability":
        outcomes = [ParseOutcome("valid" if r["strict"] else "repaired" if r["parsed"] else "invalid") for r in rows]
        rel = reliability(outcomes)
        return {"rate": rel.rate, "strict_rate": rel.strict_rate, "total": rel.total}
    if task in ("objects", "humans", "logos"):
        return _aggregate_entities(rows)
    if task == "ocr":
        return _aggregate_ocr(rows)
    if task == "media":
        return _aggregate_media(rows)
    matches = [r["match"] for r in rows if r["match"] is not None]
    return {"accuracy": _mean(matches), "n": len(matches)}


@dataclass
class EvalReport:
    per_sample: dict[str, dict]
    corpus: dict[str, dict]
    failed: list[dict]
    warnings: list[str]
    provenance: dict
    status: str = "ok"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "provenance": self.provenance,
            "corpus": self.corpus,
            "per_sample": self.per_sample,
            "failed": self.failed,
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        try:
            return cls(
                per_sample=data["per_sample"],
                corpus=data["corpus"],
                failed=data.get("failed", []),
                warnings=data.get("warnings", []),
                provenance=data["provenance"],
                status=data.get("status", "ok"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"not an evaluation report: missing {exc}") from exc


def run_eval(
    config: EvalConfig,
    samples: Sequence[Sample],
    warnings: Sequence[str] = (),
) -> EvalReport:
    """Score every sample for every configured task and aggregate.

    Samples whose judge calls fail are listed under ``failed`` and left out
    of all aggregates; if they exceed ``config.max_failed_fraction`` of the
    corpus the report status is ``failed``.
    """
    config.validate()
    if not samples:
        raise ValueError("no samples")
    kius = load_kiu_sidecar(config.kiu_sidecar) if config.kiu_sidecar else None
    runner = _Runner(config, kius)
    ordered = sorted(samples, key=lambda s: s.sample_id)
    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(runner, ordered))
    else:
        results = [runner(s) for s in ordered]

    per_sample: dict[str, dict] = {}
    failed = []
    for sid, metrics, error in results:
        if error is not None:
            failed.append({"sample_id": sid, "error": error})
            per_sample[sid] = {"error": error}
        else:
            per_sample[sid] = metrics
    good = [m for _, m, e in results if e is None]
    corpus = {}
    for task in config.tasks:
        rows = [m[task] for m in good]
        corpus[task] = _aggregate(task, rows) if rows else {"error": "no scorable samples"}

    status = "failed" if len(failed) > config.max_failed_fraction * len(ordered) else "ok"
    provenance = {
        "tool": "vlmscore",
        "version": __version__,
        "config_digest": config.digest(),
        "config": config.describe(),
        "judge_model": config.judge.model if config.judge else None,
        "samples": len(ordered),
        "failed_samples": len(failed),
    }
    return EvalReport(per_sample, corpus, failed, list(warnings), provenance, status)


# -- rendering ---------------------------------------------------------------

def _fmt(value: Any) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _get(corpus: dict, task: str, level: str, key: str) -> Optional[float]:
    block = corpus.get(task)
    if not block or "error" in block:
        return None
    if task == "reliability":
        return block["rate"]
    return block.get(level, {}).get(key)


def headline_rows(report: EvalReport) -> list[tuple[str, list[Optional[float]]]]:
    """The six headline scores at both aggregation levels."""
    keys = [
        ("reliability", None), ("objects", "f1"), ("humans", "f1"),
        ("logos", "f1"), ("ocr", "char_f1"), ("media", "description_f1"),
    ]
    rows = []
    for label, level in ((CORPUS_LEVEL, "corpus_level"), (PER_SAMPLE_AVERAGE, "per_sample_average")):
        rows.append((label, [_get(report.corpus, task, level, key) for task, key in keys]))
    return rows


def _table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(v) if not isinstance(v, str) else v for v in row) + " |")
    return lines


def _levels(block: dict, keys: Sequence[str]) -> list[list[Any]]:
    return [
        [label] + [block.get(level, {}).get(k) for k in keys]
        for label, level in ((CORPUS_LEVEL, "corpus_level"), (PER_SAMPLE_AVERAGE, "per_sample_average"))
    ]


def render_markdown(report: EvalReport) -> str:
    prov = report.provenance
    lines = [
        "# Evaluation report",
        "",
        f"- tool: {prov.get('tool')} {prov.get('version')}",
        f"- config digest: `{prov.get('config_digest')}`",
        f"- judge model: {prov.get('judge_model') or 'none'}",
        f"- samples: {prov.get('samples')} (failed: {prov.get('failed_samples')})",
        f"- status: {report.status}",
        "",
        "## Task summary",
        "",
    ]
    lines += _table(("Aggregation",) + HEADLINE_COLUMNS, [[label] + vals for label, vals in headline_rows(report)])

    c = report.corpus
    detail = [
        ("objects", "Objects", ("precision", "recall", "f1", "spatial_jaccard", "temporal_jaccard"),
         ("Precision", "Recall", "F1", "Spatial IoU", "Temporal IoU")),
        ("humans", "Humans",
         ("f1", "activity_score", "description_score", "age_accuracy", "expression_accuracy",
          "face_accuracy", "spatial_jaccard", "temporal_jaccard"),
         ("F1", "Activity Accuracy", "Description Quality", "Age Accuracy", "Expression Accuracy",
          "Face Det. Accuracy", "Spatial IoU", "Temporal IoU")),
        ("logos", "Logos", ("precision", "recall", "f1", "spatial_jaccard", "temporal_jaccard"),
         ("Precision", "Recall", "F1 Score", "Spatial IoU", "Temporal IoU")),
        ("ocr", "OCR", ("cer", "wer", "char_f1", "word_f1"), ("CER↓", "WER↓", "Char F1", "Word F1")),
        ("media", "Media",
         ("quality_match", "colors_jaccard", "perspective_score", "scene_score", "description_f1",
          "completeness", "faithfulness"),
         ("Media Quality", "Colors (Jaccard)", "Camera Perspective", "Scene Detection", "Description (F1)",
          "Completeness", "Faithfulness")),
    ]
    for task, title, keys, headers in detail:
        block = c.get(task)
        if block is None:
            continue
        lines += ["", f"## {title}", ""]
        if "error" in block:
            lines.append(f"_{block['error']}_")
            continue
        lines += _table(("Aggregation",) + headers, _levels(block, keys))
    if "reliability" in c and "error" not in c["reliability"]:
        r = c["reliability"]
        lines += ["", "## Reliability", "", f"- lenient parse rate: {_fmt(r['rate'])}",
                  f"- strict parse rate: {_fmt(r['strict_rate'])}", f"- outputs: {r['total']}"]
    if "nsfw" in c and "error" not in c["nsfw"]:
        lines += ["", "## NSFW", "", f"- accuracy: {_fmt(c['nsfw']['accuracy'])} over {c['nsfw']['n']} samples"]
    if report.failed:
        lines += ["", "## Failed samples", ""]
        lines += [f"- {f['sample_id']}: {f['error']}" for f in report.failed]
    if report.warnings:
        lines += ["", "## Warnings", ""]
        lines += [f"- {w}" for w in report.warnings]
    return "\n".join(lines) + "\n"


_CSV_SCORE = {
    "reliability": lambda m: 1.0 if m["parsed"] else 0.0,
    "objects": lambda m: m["f1"],
    "humans": lambda m: m["f1"],
    "logos": lambda m: m["f1"],
    "ocr": lambda m: m["char_f1"],
    "media": lambda m: m.get("description_f1"),
    "nsfw": lambda m: m["match"],
}


def render_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "task", "status", "score", "metrics"])
    tasks = report.provenance.get("config", {}).get("tasks", list(TASKS))
    for sid in sorted(report.per_sample):
        metrics = report.per_sample[sid]
        for task in tasks:
            if "error" in metrics and task not in metrics:
                writer.writerow([sid, task, "failed", "", json.dumps({"error": metrics["error"]})])
                continue
            m = metrics[task]
            if "error" in m:
                writer.writerow([sid, task, "skipped", "", json.dumps(m, sort_keys=True)])
                continue
            score = _CSV_SCORE[task](m)
            status = "vacuous" if m.get("vacuous") else "ok"
            writer.writerow([sid, task, status, "" if score is None else repr(float(score)),
                             json.dumps(m, sort_keys=True, ensure_ascii=False)])
    return buf.getvalue()


def render_report(report: EvalReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    elif fmt == "csv":
        text = render_csv(report)
    elif fmt == "markdown":
        text = render_markdown(report)
    else:
        raise ConfigError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    return text.encode("utf-8")
