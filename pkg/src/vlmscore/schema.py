"""Unified annotation records: data model, parsing, validation, reliability.

The same record shape carries ground truth and model predictions. Records are
immutable once parsed; sets are frozensets and lists are tuples.

JSON dialect (one object per record)::

    {
      "media_kind": "image" | "video",
      "objects":  [{"name", "pos", "temp"?, "conf"}],
      "humans":   [{"activity", "description", "age", "expression",
                    "face_visible", "pos", "temp"?, "conf"}],
      "logos":    [{"brand", "pos", "temp"?, "conf"}],
      "ocr":      ["block text", ...],
      "media_description": {"description", "scene", "camera_perspective",
                            "quality", "dominant_colors", "nsfw"?}
    }
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from .grid import GridError, parse_cells, parse_temporal, render_grid, render_temporal

MEDIA_KINDS = ("image", "video")
AGE_GROUPS = ("child", "teen", "adult", "elderly")
EXPRESSIONS = ("happy", "sad", "neutral", "angry")
MAX_OBJECTS = 10
MAX_HUMANS = 5


@dataclass(frozen=True)
class EntityObject:
    name: str
    pos: frozenset
    temp: frozenset = frozenset()
    conf: float = 1.0


@dataclass(frozen=True)
class EntityHuman:
    activity: str
    description: str
    age: str
    expression: str
    face_visible: bool
    pos: frozenset
    temp: frozenset = frozenset()
    conf: float = 1.0

    @property
    def match_key(self) -> str:
        return f"{self.description} {self.activity}".strip()


@dataclass(frozen=True)
class EntityLogo:
    brand: str
    pos: frozenset
    temp: frozenset = frozenset()
    conf: float = 1.0


@dataclass(frozen=True)
class MediaDescription:
    description: str = ""
    scene: str = ""
    camera_perspective: str = ""
    quality: str = ""
    dominant_colors: tuple[str, ...] = ()
    nsfw: Optional[bool] = None


@dataclass(frozen=True)
class AnnotationRecord:
    media_kind: str
    objects: tuple[EntityObject, ...] = ()
    humans: tuple[EntityHuman, ...] = ()
    logos: tuple[EntityLogo, ...] = ()
    ocr: tuple[str, ...] = ()
    media: MediaDescription = MediaDescription()

    @classmethod
    def empty(cls, media_kind: str) -> "AnnotationRecord":
        return cls(media_kind)


@dataclass(frozen=True)
class ParseOutcome:
    status: str  # "valid" | "repaired" | "invalid"
    record: Optional[AnnotationRecord] = None
    diagnostics: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status in ("valid", "repaired")


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.rule}"


@dataclass(frozen=True)
class Reliability:
    rate: float
    strict_rate: float
    total: int


class SchemaError(ValueError):
    pass


# -- parsing -----------------------------------------------------------------

_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)

_OBJECT_FIELDS = {"name", "pos", "temp", "conf"}
_HUMAN_FIELDS = {"activity", "description", "age", "expression", "face_visible", "pos", "temp", "conf"}
_LOGO_FIELDS = {"brand", "pos", "temp", "conf"}
_MEDIA_FIELDS = {"description", "scene", "camera_perspective", "quality", "dominant_colors", "nsfw"}
_TOP_FIELDS = {"media_kind", "objects", "humans", "logos", "ocr", "media_description"}


def _reject_constant(name):
    raise ValueError(f"non-standard JSON constant {name}")


def _loads(text: str) -> Any:
    return json.loads(text, parse_constant=_reject_constant)


def first_json_object(text: str) -> Optional[str]:
    """Return the first balanced ``{...}`` substring of ``text``, string-aware."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start:i + 1]
        start = text.find("{", start + 1)
    return None


class _Builder:
    def __init__(self, lenient: bool):
        self.lenient = lenient
        self.repairs: list[str] = []

    def fail(self, path: str, msg: str):
        raise SchemaError(f"{path}: {msg}" if path else msg)

    def fields(self, obj: Any, path: str, allowed: set[str], required: set[str]) -> dict:
        if not isinstance(obj, dict):
            self.fail(path, f"expected object, got {type(obj).__name__}")
        unknown = sorted(set(obj) - allowed)
        if unknown:
            if not self.lenient:
                self.fail(path, f"unknown field(s) {', '.join(unknown)}")
            for key in unknown:
                self.repairs.append(f"dropped unknown field {_join(path, key)}")
            obj = {k: v for k, v in obj.items() if k in allowed}
        missing = sorted(required - set(obj))
        if missing:
            self.fail(path, f"missing field(s) {', '.join(missing)}")
        return obj

    def string(self, value: Any, path: str) -> str:
        if not isinstance(value, str):
            self.fail(path, "expected string")
        return value

    def number(self, value: Any, path: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, "expected number")
        return float(value)

    def boolean(self, value: Any, path: str) -> bool:
        if not isinstance(value, bool):
            self.fail(path, "expected boolean")
        return value

    def array(self, value: Any, path: str) -> list:
        if not isinstance(value, list):
            self.fail(path, "expected array")
        return value

    def enum(self, value: Any, path: str, allowed: Sequence[str]) -> str:
        value = self.string(value, path)
        if value in allowed:
            return value
        folded = value.strip().casefold()
        if self.lenient and folded in allowed:
            self.repairs.append(f"coerced case of {path}")
            return folded
        self.fail(path, f"{value!r} not in {list(allowed)}")

    def cells(self, value: Any, path: str) -> frozenset:
        try:
            return parse_cells(self.array(value, path))
        except GridError as exc:
            self.fail(path, str(exc))

    def temporal(self, value: Any, path: str) -> frozenset:
        labels = self.array(value, path)
        try:
            return parse_temporal(labels, fold_case=False)
        except GridError:
            if not self.lenient:
                raise SchemaError(f"{path}: invalid temporal labels {labels!r}") from None
        try:
            out = parse_temporal(labels, fold_case=True)
        except GridError as exc:
            self.fail(path, str(exc))
        self.repairs.append(f"coerced case of {path}")
        return out

    def common(self, obj: dict, path: str) -> dict:
        return {
            "pos": self.cells(obj["pos"], f"{path}.pos"),
            "temp": self.temporal(obj.get("temp", []), f"{path}.temp"),
            "conf": self.number(obj["conf"], f"{path}.conf"),
        }

    def record(self, data: Any, media_kind: Optional[str]) -> AnnotationRecord:
        required = _TOP_FIELDS - ({"media_kind"} if media_kind else set())
        data = self.fields(data, "", _TOP_FIELDS, required)
        kind = self.enum(data["media_kind"], "media_kind", MEDIA_KINDS) if "media_kind" in data else media_kind
        if kind not in MEDIA_KINDS:
            self.fail("media_kind", f"{kind!r} not in {list(MEDIA_KINDS)}")

        objects = []
        for i, o in enumerate(self.array(data["objects"], "objects")):
            p = f"objects[{i}]"
            o = self.fields(o, p, _OBJECT_FIELDS, _OBJECT_FIELDS - {"temp"})
            objects.append(EntityObject(self.string(o["name"], f"{p}.name"), **self.common(o, p)))

        humans = []
        for i, h in enumerate(self.array(data["humans"], "humans")):
            p = f"humans[{i}]"
            h = self.fields(h, p, _HUMAN_FIELDS, _HUMAN_FIELDS - {"temp"})
            humans.append(EntityHuman(
                activity=self.string(h["activity"], f"{p}.activity"),
                description=self.string(h["description"], f"{p}.description"),
                age=self.enum(h["age"], f"{p}.age", AGE_GROUPS),
                expression=self.enum(h["expression"], f"{p}.expression", EXPRESSIONS),
                face_visible=self.boolean(h["face_visible"], f"{p}.face_visible"),
                **self.common(h, p),
            ))

        logos = []
        for i, lg in enumerate(self.array(data["logos"], "logos")):
            p = f"logos[{i}]"
            lg = self.fields(lg, p, _LOGO_FIELDS, _LOGO_FIELDS - {"temp"})
            logos.append(EntityLogo(self.string(lg["brand"], f"{p}.brand"), **self.common(lg, p)))

        ocr = tuple(self.string(t, f"ocr[{i}]") for i, t in enumerate(self.array(data["ocr"], "ocr")))

        m = self.fields(data["media_description"], "media_description", _MEDIA_FIELDS, _MEDIA_FIELDS - {"nsfw"})
        colors: list[str] = []
        for i, c in enumerate(self.array(m["dominant_colors"], "media_description.dominant_colors")):
            c = " ".join(self.string(c, f"media_description.dominant_colors[{i}]").casefold().split())
            if c and c not in colors:
                colors.append(c)
        nsfw = m.get("nsfw")
        if nsfw is not None:
            nsfw = self.boolean(nsfw, "media_description.nsfw")
        media = MediaDescription(
            description=self.string(m["description"], "media_description.description"),
            scene=self.string(m["scene"], "media_description.scene"),
            camera_perspective=self.string(m["camera_perspective"], "media_description.camera_perspective"),
            quality=self.string(m["quality"], "media_description.quality"),
            dominant_colors=tuple(colors),
            nsfw=nsfw,
        )
        return AnnotationRecord(kind, tuple(objects), tuple(humans), tuple(logos), ocr, media)


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def parse_record(raw_text: str, mode: str = "strict", media_kind: Optional[str] = None) -> ParseOutcome:
    """Parse model or annotator output into an :class:`AnnotationRecord`.

    ``strict`` accepts exactly one schema-conforming JSON object. ``lenient``
    may additionally strip a code fence, cut out the first balanced JSON
    object, drop unknown fields and fold enum case; each repair is listed in
    the diagnostics and marks the outcome ``repaired``. ``media_kind`` fills
    in a missing ``media_kind`` field. Never raises.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    lenient = mode == "lenient"
    try:
        if not isinstance(raw_text, str):
            return ParseOutcome("invalid", None, (f"expected text, got {type(raw_text).__name__}",))
        repairs: list[str] = []
        data, error = _decode(raw_text)
        if lenient and not isinstance(data, dict):
            fenced = _FENCE.search(raw_text)
            text = raw_text
            if fenced:
                text = fenced.group(1)
                repairs.append("stripped code fence")
                data, error = _decode(text)
            if not isinstance(data, dict):
                candidate = first_json_object(text)
                if candidate is not None:
                    data, error = _decode(candidate)
                    if isinstance(data, dict):
                        repairs.append("extracted first JSON object")
        if not isinstance(data, dict):
            return ParseOutcome("invalid", None, tuple(repairs) + (error or "top-level JSON value is not an object",))
        builder = _Builder(lenient)
        record = builder.record(data, media_kind)
        repairs.extend(builder.repairs)
        return ParseOutcome("repaired" if repairs else "valid", record, tuple(repairs))
    except SchemaError as exc:
        return ParseOutcome("invalid", None, (str(exc),))
    except (RecursionError, MemoryError, ValueError, TypeError) as exc:
        return ParseOutcome("invalid", None, (f"{type(exc).__name__}: {exc}",))


def _decode(text: str) -> tuple[Any, Optional[str]]:
    try:
        return _loads(text), None
    except (ValueError, RecursionError) as exc:
        return None, f"malformed JSON: {exc}"


# -- serialization -----------------------------------------------------------

def _entity_common(e) -> dict:
    return {"pos": render_grid(e.pos), "temp": render_temporal(e.temp), "conf": e.conf}


def record_to_dict(record: AnnotationRecord) -> dict:
    media = {
        "description": record.media.description,
        "scene": record.media.scene,
        "camera_perspective": record.media.camera_perspective,
        "quality": record.media.quality,
        "dominant_colors": list(record.media.dominant_colors),
    }
    if record.media.nsfw is not None:
        media["nsfw"] = record.media.nsfw
    return {
        "media_kind": record.media_kind,
        "objects": [{"name": o.name, **_entity_common(o)} for o in record.objects],
        "humans": [
            {
                "activity": h.activity,
                "description": h.description,
                "age": h.age,
                "expression": h.expression,
                "face_visible": h.face_visible,
                **_entity_common(h),
            }
            for h in record.humans
        ],
        "logos": [{"brand": lg.brand, **_entity_common(lg)} for lg in record.logos],
        "ocr": list(record.ocr),
        "media_description": media,
    }


def serialize_record(record: AnnotationRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False)


# -- validation --------------------------------------------------------------

def validate_record(record: AnnotationRecord, role: str = "ground_truth") -> list[Violation]:
    """Check record invariants for ``role`` ("ground_truth" or "prediction").

    Salient-instance caps are errors for ground truth and warnings for
    predictions.
    """
    if role not in ("ground_truth", "prediction"):
        raise ValueError(f"unknown role {role!r}")
    out: list[Violation] = []
    cap_severity = "error" if role == "ground_truth" else "warning"
    if len(record.objects) > MAX_OBJECTS:
        out.append(Violation("objects", f"objects.count>{MAX_OBJECTS}", cap_severity))
    if len(record.humans) > MAX_HUMANS:
        out.append(Violation("humans", f"humans.count>{MAX_HUMANS}", cap_severity))

    groups = (
        ("objects", record.objects, "name"),
        ("humans", record.humans, None),
        ("logos", record.logos, "brand"),
    )
    for key, entities, label_field in groups:
        for i, e in enumerate(entities):
            path = f"{key}[{i}]"
            if label_field and not " ".join(getattr(e, label_field).split()):
                out.append(Violation(f"{path}.{label_field}", f"{label_field}.empty"))
            if not e.pos:
                out.append(Violation(f"{path}.pos", "pos.empty"))
            if record.media_kind == "image" and e.temp:
                out.append(Violation(f"{path}.temp", "temp.on_image"))
            if record.media_kind == "video" and not e.temp:
                out.append(Violation(f"{path}.temp", "temp.missing_on_video"))
            if not 0.0 <= e.conf <= 1.0:
                out.append(Violation(f"{path}.conf", "conf.range"))
    return out


def has_errors(violations: Sequence[Violation]) -> bool:
    return any(v.severity == "error" for v in violations)


def reliability(outcomes: Sequence[ParseOutcome]) -> Reliability:
    """Share of outputs that parsed (``rate``) and that parsed without repair."""
    if not outcomes:
        raise ValueError("no samples")
    n = len(outcomes)
    ok = sum(1 for o in outcomes if o.status in ("valid", "repaired"))
    strict = sum(1 for o in outcomes if o.status == "valid")
    return Reliability(ok / n, strict / n, n)
