"""Client for an external LLM judge, with on-disk caching and an offline stub.

Wire protocol (version ``vlmscore-judge/1``): a single POST endpoint taking::

    {"protocol": "vlmscore-judge/1", "model": "<judge model id>",
     "task": "entity_match" | "kiu_match" | "score_01" | "score_15" | "kiu_extract",
     "items": [{"id": "...", "candidate": "...", "reference": "...", "context": "..."}]}

and answering::

    {"results": [{"id": "...", "verdict": true} | {"id": "...", "score": 0.7}
                 | {"id": "...", "units": ["..."]}]}

``entity_match``/``kiu_match`` answer with ``verdict``, ``score_01`` with a
score in [0, 1], ``score_15`` with a score in [1, 5] and ``kiu_extract`` with
``units``. Every request id must be answered exactly once.

Environment variables: ``VLMSCORE_JUDGE_URL``, ``VLMSCORE_JUDGE_API_KEY``,
``VLMSCORE_JUDGE_MODEL`` and ``VLMSCORE_CACHE_DIR``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import tempfile
import threading
import time
import unicodedata
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

logger = logging.getLogger(__name__)

PROTOCOL = "vlmscore-judge/1"
TASKS = ("entity_match", "kiu_match", "score_01", "score_15", "kiu_extract")
_ANSWER_FIELD = {
    "entity_match": "verdict",
    "kiu_match": "verdict",
    "score_01": "score",
    "score_15": "score",
    "kiu_extract": "units",
}
MENTION_CONTEXT = "mention"
"""``context`` value asking whether the candidate is visibly mentioned in the reference text."""

STUB_MODEL_ID = "stub-judge/1"


class JudgeError(RuntimeError):
    pass


class JudgeTransportError(JudgeError):
    """The judge could not be reached after all retries."""


class JudgeProtocolError(JudgeError):
    """The judge answered with something that violates the protocol."""

    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class JudgeItem:
    id: str
    candidate: str
    reference: str = ""
    context: str = ""


@dataclass(frozen=True)
class JudgeRequest:
    task: str
    items: tuple[JudgeItem, ...]

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown judge task {self.task!r}")
        if not self.items:
            raise ValueError("judge request has no items")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("judge request ids must be unique")

    def to_wire(self, model: str) -> dict:
        return {
            "protocol": PROTOCOL,
            "model": model,
            "task": self.task,
            "items": [
                {"id": it.id, "candidate": it.candidate, "reference": it.reference, "context": it.context}
                for it in self.items
            ],
        }

    @classmethod
    def from_wire(cls, payload: dict) -> "JudgeRequest":
        items = tuple(JudgeItem(**it) for it in payload["items"])
        return cls(payload["task"], items)


@dataclass(frozen=True)
class JudgeResult:
    id: str
    verdict: Optional[bool] = None
    score: Optional[float] = None
    units: Optional[tuple[str, ...]] = None

    def answer(self) -> dict:
        if self.verdict is not None:
            return {"verdict": self.verdict}
        if self.score is not None:
            return {"score": self.score}
        return {"units": list(self.units or ())}


@dataclass(frozen=True)
class JudgeResponse:
    results: tuple[JudgeResult, ...]

    def by_id(self) -> dict[str, JudgeResult]:
        return {r.id: r for r in self.results}

    def to_wire(self) -> dict:
        return {"results": [{"id": r.id, **r.answer()} for r in self.results]}


def _result_from_answer(task: str, item_id: str, answer: Any, payload: Any) -> JudgeResult:
    if not isinstance(answer, dict):
        raise JudgeProtocolError(f"result for {item_id!r} is not an object", payload)
    expected = _ANSWER_FIELD[task]
    present = [k for k in ("verdict", "score", "units") if answer.get(k) is not None]
    if present != [expected]:
        raise JudgeProtocolError(
            f"result for {item_id!r} must carry exactly {expected!r}, got {present}", payload
        )
    value = answer[expected]
    if expected == "verdict":
        if not isinstance(value, bool):
            raise JudgeProtocolError(f"verdict for {item_id!r} is not a boolean", payload)
        return JudgeResult(item_id, verdict=value)
    if expected == "score":
        lo, hi = (0.0, 1.0) if task == "score_01" else (1.0, 5.0)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not lo <= value <= hi:
            raise JudgeProtocolError(f"score for {item_id!r} outside [{lo}, {hi}]", payload)
        return JudgeResult(item_id, score=float(value))
    if not isinstance(value, list) or not all(isinstance(u, str) for u in value):
        raise JudgeProtocolError(f"units for {item_id!r} must be a list of strings", payload)
    return JudgeResult(item_id, units=tuple(value))


def parse_response(request: JudgeRequest, payload: Any) -> JudgeResponse:
    """Validate a wire response against ``request`` and decode it."""
    if not isinstance(payload, dict) or not isinstance(payload.get("results"), list):
        raise JudgeProtocolError("response lacks a 'results' list", payload)
    wanted = {it.id for it in request.items}
    seen: dict[str, JudgeResult] = {}
    for entry in payload["results"]:
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            raise JudgeProtocolError("result entry without a string id", payload)
        item_id = entry["id"]
        if item_id not in wanted:
            raise JudgeProtocolError(f"unexpected id {item_id!r} in response", payload)
        if item_id in seen:
            raise JudgeProtocolError(f"id {item_id!r} answered twice", payload)
        answer = {k: v for k, v in entry.items() if k != "id"}
        seen[item_id] = _result_from_answer(request.task, item_id, answer, payload)
    missing = sorted(wanted - set(seen))
    if missing:
        raise JudgeProtocolError(f"response missing ids {missing}", payload)
    return JudgeResponse(tuple(seen[it.id] for it in request.items))


# -- stub ----------------------------------------------------------------------

# Only equivalences spelled out verbatim as examples of valid matches.
STUB_SYNONYMS: tuple[frozenset[str], ...] = (
    frozenset({"cellphone", "mobile phone"}),
    frozenset({"sofa", "couch"}),
    frozenset({"smartphone", "phone"}),
    frozenset({"cup", "coffee cup"}),
    frozenset({"vehicle", "red sedan", "2019 toyota camry"}),
    frozenset({"mcdonald's", "mcdonalds", "mcd's"}),
    frozenset({"the woman is smiling", "a woman shows a happy expression"}),
)

_EDGE_PUNCT = re.compile(r"^[^\w]+|[^\w]+$")
_SENTENCE = re.compile(r"[^.!?]*[.!?]+|[^.!?]+$")


def normalize_phrase(text: str) -> str:
    """Case-fold, collapse whitespace and trim edge punctuation of each token."""
    return " ".join(tokenize(text))


def tokenize(text: str) -> list[str]:
    text = unicodedata.normalize("NFC", text).casefold()
    out = []
    for tok in text.split():
        tok = _EDGE_PUNCT.sub("", tok)
        if tok:
            out.append(tok)
    return out


def token_jaccard(a: str, b: str) -> float:
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


def contains_phrase(haystack: str, needle: str) -> bool:
    """True when the tokens of ``needle`` occur contiguously in ``haystack``."""
    h, n = tokenize(haystack), tokenize(needle)
    if not n:
        return False
    return any(h[i:i + len(n)] == n for i in range(len(h) - len(n) + 1))


def _stub_equivalent(a: str, b: str) -> bool:
    na, nb = normalize_phrase(a), normalize_phrase(b)
    if na == nb:
        return bool(na)
    return any(na in group and nb in group for group in STUB_SYNONYMS)


def _stub_mentions(entity: str, text: str) -> bool:
    variants = {normalize_phrase(entity)}
    for group in STUB_SYNONYMS:
        if normalize_phrase(entity) in group:
            variants |= group
    return any(contains_phrase(text, v) for v in variants)


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE.findall(text) if s.strip()]


def stub_judge(req: JudgeRequest) -> JudgeResponse:
    """Deterministic offline judge.

    Matches by normalized equality or a small synonym table, scores by token
    Jaccard (``1 + round(4 * J)`` on the 1-5 scale, halves rounded up) and
    extracts units by splitting on terminal punctuation.
    """
    results = []
    for it in req.items:
        if req.task in ("entity_match", "kiu_match"):
            if it.context == MENTION_CONTEXT:
                verdict = _stub_mentions(it.candidate, it.reference)
            else:
                verdict = _stub_equivalent(it.candidate, it.reference)
            results.append(JudgeResult(it.id, verdict=verdict))
        elif req.task == "score_01":
            results.append(JudgeResult(it.id, score=token_jaccard(it.candidate, it.reference)))
        elif req.task == "score_15":
            j = token_jaccard(it.candidate, it.reference)
            results.append(JudgeResult(it.id, score=float(1 + math.floor(4 * j + 0.5))))
        else:
            results.append(JudgeResult(it.id, units=tuple(split_sentences(it.candidate))))
    return JudgeResponse(tuple(results))


def stub_transport(payload: dict) -> dict:
    return stub_judge(JudgeRequest.from_wire(payload)).to_wire()


# -- transport & cache ---------------------------------------------------------

class HttpTransport:
    """POSTs wire payloads as JSON to a single endpoint."""

    def __init__(self, url: str, api_key: Optional[str] = None, timeout: float = 60.0):
        self.url = url
        self.api_key = api_key
        self.timeout = timeout

    def __call__(self, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
            raise JudgeTransportError(f"judge request to {self.url} failed: {exc}") from exc
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise JudgeProtocolError(f"judge returned non-JSON body: {exc}", raw) from exc


class JudgeCache:
    """Directory of JSON files keyed by a content digest."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @staticmethod
    def key(task: str, item: JudgeItem, model: str) -> str:
        content = json.dumps([task, item.candidate, item.reference, item.context, model], ensure_ascii=False)
        return hashlib.sha256(content.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        path = self._path(key)
        try:
            with open(path, encoding="utf-8") as f:
                return json.load(f)["value"]
        except FileNotFoundError:
            return None
        except (ValueError, KeyError, OSError):
            logger.warning("ignoring corrupt cache entry %s", path)
            return None

    def put(self, key: str, value: dict) -> None:
        path = self._path(key)
        entry = {"key": key, "value": value, "timestamp": time.time()}
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(entry, f, ensure_ascii=False)
            os.replace(tmp, path)


class JudgeClient:
    """Batches, caches and validates judge calls.

    Args:
        transport: callable taking a wire payload and returning the decoded
            response; :class:`HttpTransport` or :func:`stub_transport`.
        model: judge model id, part of every cache key.
        cache: optional :class:`JudgeCache`.
        batch_size: items per request.
        retries: extra attempts after a transport failure.
        backoff: initial retry delay in seconds, doubled on each attempt.
    """

    def __init__(
        self,
        transport: Callable[[dict], dict],
        model: str,
        cache: Optional[JudgeCache] = None,
        batch_size: int = 16,
        retries: int = 3,
        backoff: float = 0.5,
        sleep: Optional[Callable[[float], None]] = None,
    ):
        if batch_size < 1:
            raise ConfigError("batch_size must be positive")
        self.transport = transport
        self.model = model
        self.cache = cache
        self.batch_size = batch_size
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep or time.sleep

    @classmethod
    def stub(cls, cache: Optional[JudgeCache] = None) -> "JudgeClient":
        return cls(stub_transport, STUB_MODEL_ID, cache=cache)

    @classmethod
    def from_env(cls, **kwargs) -> "JudgeClient":
        url = os.environ.get("VLMSCORE_JUDGE_URL")
        if not url:
            raise ConfigError("VLMSCORE_JUDGE_URL is not set")
        model = os.environ.get("VLMSCORE_JUDGE_MODEL", "unspecified")
        cache_dir = os.environ.get("VLMSCORE_CACHE_DIR")
        cache = JudgeCache(cache_dir) if cache_dir else None
        transport = HttpTransport(url, os.environ.get("VLMSCORE_JUDGE_API_KEY"))
        return cls(transport, model, cache=cache, **kwargs)

    def _send(self, request: JudgeRequest) -> JudgeResponse:
        payload = request.to_wire(self.model)
        delay = self.backoff
        for attempt in range(self.retries + 1):
            try:
                raw = self.transport(payload)
                break
            except JudgeTransportError:
                if attempt == self.retries:
                    raise
                logger.warning("judge transport failed (attempt %d), retrying in %.2fs", attempt + 1, delay)
                self._sleep(delay)
                delay *= 2
        return parse_response(request, raw)

    def judge_batch(self, req: JudgeRequest) -> JudgeResponse:
        answers: dict[str, JudgeResult] = {}
        misses = []
        for it in req.items:
            cached = self.cache.get(JudgeCache.key(req.task, it, self.model)) if self.cache else None
            if cached is not None:
                answers[it.id] = _result_from_answer(req.task, it.id, cached, cached)
            else:
                misses.append(it)
        for start in range(0, len(misses), self.batch_size):
            chunk = JudgeRequest(req.task, tuple(misses[start:start + self.batch_size]))
            response = self._send(chunk)
            for it, res in zip(chunk.items, response.results):
                answers[it.id] = res
                if self.cache:
                    self.cache.put(JudgeCache.key(req.task, it, self.model), res.answer())
        return JudgeResponse(tuple(answers[it.id] for it in req.items))

    # convenience wrappers -------------------------------------------------

    def _run(self, task: str, items: Sequence[tuple[str, str, str]]) -> list[JudgeResult]:
        if not items:
            return []
        req = JudgeRequest(task, tuple(JudgeItem(str(i), c, r, ctx) for i, (c, r, ctx) in enumerate(items)))
        return list(self.judge_batch(req).results)

    def verdicts(self, task: str, pairs: Sequence[tuple[str, str]], context: str = "") -> list[bool]:
        return [bool(r.verdict) for r in self._run(task, [(c, r, context) for c, r in pairs])]

    def scores_01(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [float(r.score) for r in self._run("score_01", [(c, r, "") for c, r in pairs])]

    def scores_15(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [float(r.score) for r in self._run("score_15", [(c, r, "") for c, r in pairs])]

    def extract_units(self, texts: Sequence[str]) -> list[list[str]]:
        return [list(r.units or ()) for r in self._run("kiu_extract", [(t, "", "") for t in texts])]
