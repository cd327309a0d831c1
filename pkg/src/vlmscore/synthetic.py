"""Seeded generators for test corpora and walkthroughs.

Everything here is a pure function of its ``random.Random`` (or seed), so
the same seed always yields the same texts, records and files.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Optional

from .grid import GRID_CELLS, TEMPORAL_LABELS
from .schema import (
    AGE_GROUPS,
    EXPRESSIONS,
    AnnotationRecord,
    EntityHuman,
    EntityLogo,
    EntityObject,
    MediaDescription,
    record_to_dict,
)

# 26 + 26 + 10 + 24 Greek + 32 Cyrillic code points; enough that ~200 chars
# never has to reuse a bigram.
ALPHABET = (
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "0123456789"
    + "".join(chr(c) for c in range(0x3B1, 0x3CA) if c != 0x3C2)
    + "".join(chr(c) for c in range(0x430, 0x450))
)


def unique_bigram_text(rng: random.Random, length: int, word_len: tuple[int, int] = (4, 9)) -> str:
    """Space-separated words in which no character bigram occurs twice."""
    if length < word_len[0]:
        raise ValueError("length shorter than one word")
    for _ in range(1000):
        used: set[str] = set()
        out: list[str] = []
        remaining = length
        ok = True
        while remaining > 0 and ok:
            n = rng.randint(*word_len)
            if remaining - n < word_len[0] + 1:
                n = remaining
            word = ""
            for _ in range(n):
                prev = word[-1] if word else (" " if out else None)
                for _ in range(64):
                    c = rng.choice(ALPHABET)
                    if prev is None or prev + c not in used:
                        break
                else:
                    ok = False
                    break
                if prev is not None:
                    used.add(prev + c)
                word += c
            if not ok:
                break
            if remaining - n > 0:
                if word[-1] + " " in used:
                    ok = False
                    break
                used.add(word[-1] + " ")
                out.append(word)
                remaining -= n + 1
            else:
                out.append(word)
                remaining -= n
        text = " ".join(out)
        if ok and len(text) == length:
            return text
    raise RuntimeError("could not build a bigram-unique text")  # pragma: no cover


def segment_at_spaces(rng: random.Random, text: str, min_fragment: int = 4, cut_prob: float = 0.5) -> list[str]:
    """Split ``text`` at a random subset of its spaces.

    The space at a cut is dropped. Fragments shorter than ``min_fragment``
    are avoided, so some cut points are skipped.
    """
    words = text.split(" ")
    fragments: list[str] = []
    current = words[0]
    for w in words[1:]:
        if rng.random() < cut_prob and len(current) >= min_fragment and len(w) >= min_fragment:
            fragments.append(current)
            current = w
        else:
            current += " " + w
    fragments.append(current)
    return fragments


# -- synthetic annotation corpus --------------------------------------------

OBJECT_NAMES = ("cellphone", "sofa", "cup", "laptop", "bicycle", "lamp", "umbrella", "backpack", "vehicle", "bottle")
OBJECT_VARIANTS = {"cellphone": "mobile phone", "sofa": "couch", "cup": "coffee cup", "vehicle": "red sedan"}
BRANDS = ("McDonald's", "Nike", "Starbucks", "Adidas", "Shell")
BRAND_VARIANTS = {"McDonald's": "mcdonalds"}
ACTIVITIES = ("holding a cellphone", "sitting on a sofa", "drinking from a cup", "riding a bicycle", "walking")
DESCRIPTIONS = ("woman in a red coat", "man with glasses", "child in a yellow shirt", "older man with a hat")
SCENES = ("indoor cafe", "city street", "living room", "office")
PERSPECTIVES = ("eye level", "high angle", "close-up")
QUALITIES = ("high", "medium", "low")
COLORS = ("red", "blue", "green", "white", "black", "yellow")
OCR_WORDS = ("OPEN", "SALE", "Fresh", "Coffee", "Daily", "Menu", "Exit", "50%", "OFF", "Today", "Special", "Bakery")
SENTENCES = (
    "The woman is smiling.", "A cup sits on the table.", "The room is brightly lit.",
    "A laptop is open.", "Rain falls outside.", "A dog sleeps on the rug.",
)


def _cells(rng: random.Random) -> frozenset:
    return frozenset(rng.sample(GRID_CELLS, rng.randint(1, 3)))


def _temp(rng: random.Random, kind: str) -> frozenset:
    return frozenset(rng.sample(TEMPORAL_LABELS, rng.randint(1, 2))) if kind == "video" else frozenset()


def random_record(rng: random.Random, kind: Optional[str] = None) -> AnnotationRecord:
    kind = kind or rng.choice(("image", "video"))
    objects = tuple(
        EntityObject(name, _cells(rng), _temp(rng, kind), round(rng.uniform(0.5, 1.0), 2))
        for name in rng.sample(OBJECT_NAMES, rng.randint(0, 5))
    )
    humans = tuple(
        EntityHuman(rng.choice(ACTIVITIES), desc, rng.choice(AGE_GROUPS), rng.choice(EXPRESSIONS),
                    rng.random() < 0.7, _cells(rng), _temp(rng, kind), round(rng.uniform(0.5, 1.0), 2))
        for desc in rng.sample(DESCRIPTIONS, rng.randint(0, 3))
    )
    logos = tuple(
        EntityLogo(brand, _cells(rng), _temp(rng, kind), round(rng.uniform(0.5, 1.0), 2))
        for brand in rng.sample(BRANDS, rng.randint(0, 2))
    )
    ocr = tuple(" ".join(rng.sample(OCR_WORDS, rng.randint(1, 3))) for _ in range(rng.randint(0, 4)))
    media = MediaDescription(
        description=" ".join(rng.sample(SENTENCES, rng.randint(1, 3))),
        scene=rng.choice(SCENES),
        camera_perspective=rng.choice(PERSPECTIVES),
        quality=rng.choice(QUALITIES),
        dominant_colors=tuple(sorted(rng.sample(COLORS, rng.randint(1, 3)))),
        nsfw=False,
    )
    return AnnotationRecord(kind, objects, humans, logos, ocr, media)


def perturb_record(rng: random.Random, gt: AnnotationRecord) -> AnnotationRecord:
    """A plausible imperfect prediction of ``gt``."""
    objects = [
        EntityObject(OBJECT_VARIANTS.get(o.name, o.name) if rng.random() < 0.3 else o.name,
                     _cells(rng) if rng.random() < 0.3 else o.pos, o.temp, o.conf)
        for o in gt.objects if rng.random() < 0.8
    ]
    if rng.random() < 0.3:
        objects.append(EntityObject(rng.choice(OBJECT_NAMES), _cells(rng), _temp(rng, gt.media_kind), 0.5))
    humans = [
        EntityHuman(h.activity, h.description,
                    rng.choice(AGE_GROUPS) if rng.random() < 0.2 else h.age,
                    rng.choice(EXPRESSIONS) if rng.random() < 0.3 else h.expression,
                    h.face_visible, h.pos, h.temp, h.conf)
        for h in gt.humans if rng.random() < 0.85
    ]
    logos = [
        EntityLogo(BRAND_VARIANTS.get(lg.brand, lg.brand) if rng.random() < 0.5 else lg.brand, lg.pos, lg.temp, lg.conf)
        for lg in gt.logos if rng.random() < 0.9
    ]
    # regroup the OCR blocks: split or merge at word boundaries, then shuffle
    words = [w for block in gt.ocr for w in block.split()]
    ocr: list[str] = []
    i = 0
    while i < len(words):
        n = rng.randint(1, 3)
        ocr.append(" ".join(words[i:i + n]))
        i += n
    rng.shuffle(ocr)
    if rng.random() < 0.2:
        ocr.append(rng.choice(OCR_WORDS).lower())
    sentences = [s for s in SENTENCES if s in gt.media.description]
    if rng.random() < 0.5:
        sentences = sentences[:-1] + [rng.choice(SENTENCES)]
    media = MediaDescription(
        description=" ".join(dict.fromkeys(sentences)),
        scene=gt.media.scene,
        camera_perspective=rng.choice(PERSPECTIVES) if rng.random() < 0.3 else gt.media.camera_perspective,
        quality=gt.media.quality,
        dominant_colors=gt.media.dominant_colors,
        nsfw=False,
    )
    return AnnotationRecord(gt.media_kind, tuple(objects), tuple(humans), tuple(logos), tuple(ocr), media)


def raw_prediction_text(rng: random.Random, record: AnnotationRecord, style: str) -> str:
    """Render a prediction as model output: ``clean``, ``fenced`` or ``garbage``."""
    body = json.dumps(record_to_dict(record), ensure_ascii=False)
    if style == "clean":
        return body
    if style == "fenced":
        return f"Here is the annotation:\n```json\n{body}\n```\n"
    if style == "garbage":
        return "I'm sorry, I cannot describe this " + rng.choice(("image.", "video.", "media"))
    raise ValueError(f"unknown style {style!r}")


def synthetic_corpus(n: int, seed: int = 0, fenced: float = 0.1, garbage: float = 0.05) -> list[tuple[str, dict, dict]]:
    """``n`` rows of ``(sample_id, gt_line, pred_line)`` as JSONL-ready dicts."""
    rng = random.Random(seed)
    rows = []
    for k in range(n):
        sid = f"s{k:04d}"
        gt = random_record(rng)
        pred = perturb_record(rng, gt)
        u = rng.random()
        style = "garbage" if u < garbage else "fenced" if u < garbage + fenced else "clean"
        gt_line = {"sample_id": sid, **record_to_dict(gt)}
        pred_line = {"sample_id": sid, "raw_output": raw_prediction_text(rng, pred, style)}
        rows.append((sid, gt_line, pred_line))
    return rows


def write_corpus(directory: str | Path, n: int, seed: int = 0, **kwargs) -> tuple[Path, Path]:
    """Write ``gt.jsonl`` and ``pred.jsonl`` under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    gt_path, pred_path = directory / "gt.jsonl", directory / "pred.jsonl"
    rows = synthetic_corpus(n, seed, **kwargs)
    with open(gt_path, "w", encoding="utf-8") as g, open(pred_path, "w", encoding="utf-8") as p:
        for _, gt_line, pred_line in rows:
            g.write(json.dumps(gt_line, ensure_ascii=False) + "\n")
            p.write(json.dumps(pred_line, ensure_ascii=False) + "\n")
    return gt_path, pred_path
