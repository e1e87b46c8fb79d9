"""Chat-completions client, resumable answer journal and the two answer runners."""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import httpx

from .benchmark import QAItem, item_keys
from .errors import ValidationError
from .motion import Tolerances
from .reasoning import AnswerRecord, CannotAnswer, build_llm_prompt, extract_answer, rule_answer
from .tracks import SceneMetadata

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str | None = "OPENAI_API_KEY"  # None/"" = keyless endpoint
    timeout_s: float = 120.0
    max_retries: int = 3
    max_parallel: int = 4
    temperature: float = 0.0
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValidationError("timeout_s must be positive")
        if self.max_parallel < 1:
            raise ValidationError("max_parallel must be >= 1")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")


class LlmError(OSError):
    def __init__(self, message: str, item_key=None):
        self.item_key = item_key
        super().__init__(f"{message} (item {item_key})" if item_key is not None else message)


class LlmAuthError(LlmError):
    pass


class LlmRetryExhausted(LlmError):
    pass


class LlmResponseError(LlmError):
    """Body is not a chat completion we can read."""


class LlmRequestError(LlmError):
    """Non-retryable client error (4xx other than 401/403/429)."""


def _backoff(cfg: LlmEndpointConfig, attempt: int) -> float:
    delay = cfg.backoff_base_s * cfg.backoff_factor ** attempt
    return delay * random.uniform(0.75, 1.25)


def query_llm(cfg: LlmEndpointConfig, system_text: str, user_text: str,
              item_key=None, client: httpx.Client | None = None) -> str:
    headers = {"Content-Type": "application/json"}
    if cfg.api_key_env:
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise LlmAuthError(f"environment variable {cfg.api_key_env} is not set", item_key)
        headers["Authorization"] = f"Bearer {key}"
    body = {
        "model": cfg.model_name,
        "messages": [
            {"role": "system", "content": system_text},
            {"role": "user", "content": user_text},
        ],
        "temperature": cfg.temperature,
    }
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    own_client = client is None
    client = client or httpx.Client(timeout=cfg.timeout_s)
    try:
        last_problem = "no attempt made"
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                time.sleep(_backoff(cfg, attempt - 1))
            try:
                resp = client.post(url, json=body, headers=headers, timeout=cfg.timeout_s)
            except httpx.TimeoutException as exc:
                last_problem = f"timeout: {exc}"
                continue
            except httpx.TransportError as exc:
                last_problem = f"transport error: {exc}"
                continue
            if resp.status_code in (401, 403):
                raise LlmAuthError(f"authentication failed with HTTP {resp.status_code}", item_key)
            if resp.status_code == 429 or resp.status_code >= 500:
                last_problem = f"HTTP {resp.status_code}"
                log.warning("retryable %s from %s (attempt %d)", last_problem, url, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise LlmRequestError(f"HTTP {resp.status_code}: {resp.text[:200]}", item_key)
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise LlmResponseError(f"malformed completion body ({exc!r})", item_key) from None
            if not isinstance(content, str):
                raise LlmResponseError("completion content is not a string", item_key)
            return content
        raise LlmRetryExhausted(f"gave up after {cfg.max_retries + 1} attempts, last: {last_problem}", item_key)
    finally:
        if own_client:
            client.close()


class Journal:
    """Append-only NDJSON answer log keyed by (clip_id, index)."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._lock = threading.Lock()

    def load(self) -> dict[tuple[str, int], AnswerRecord]:
        records = {}
        if not os.path.exists(self.path):
            return records
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = AnswerRecord.from_json(line)
                    records[rec.key] = rec
        return records

    def append(self, record: AnswerRecord) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record.to_json() + "\n")


@dataclass
class RunSummary:
    answered: int = 0
    skipped: int = 0
    failed: int = 0
    failures: dict[str, int] = field(default_factory=dict)


def _pending(items: Sequence[QAItem], journal: Journal):
    done = journal.load()
    todo = [(k, it) for k, it in zip(item_keys(items), items) if k not in done]
    return todo, len(items) - len(todo)


def answer_with_oracle(items: Sequence[QAItem], scenes: Mapping[str, SceneMetadata],
                       journal: Journal, tol: Tolerances = Tolerances()) -> RunSummary:
    todo, skipped = _pending(items, journal)
    summary = RunSummary(skipped=skipped)
    for (clip_id, idx), item in todo:
        note = None
        try:
            scene = scenes[clip_id]
            answer = rule_answer(scene, item, tol)
        except KeyError:
            answer, note = None, f"cannot answer: no metadata for clip {clip_id}"
        except CannotAnswer as exc:
            answer, note = None, f"cannot answer: {exc}"
        journal.append(AnswerRecord(clip_id, idx, answer or "", answer, 0.0, "oracle", note))
        summary.answered += 1
    return summary


def answer_with_llm(items: Sequence[QAItem], scenes: Mapping[str, SceneMetadata],
                    cfg: LlmEndpointConfig, journal: Journal,
                    tol: Tolerances = Tolerances()) -> RunSummary:
    """Query the endpoint for every item not yet in the journal.

    At most ``cfg.max_parallel`` requests are in flight. Failed items are not
    journaled, so a rerun retries exactly those.
    """
    todo, skipped = _pending(items, journal)
    summary = RunSummary(skipped=skipped)
    lock = threading.Lock()
    limits = httpx.Limits(max_connections=cfg.max_parallel, max_keepalive_connections=cfg.max_parallel)

    with httpx.Client(timeout=cfg.timeout_s, limits=limits) as client:
        def work(entry):
            key, item = entry
            try:
                system, user = build_llm_prompt(scenes[key[0]], item, tol)
                t0 = time.perf_counter()
                raw = query_llm(cfg, system, user, item_key=key, client=client)
                latency = time.perf_counter() - t0
            except (LlmError, KeyError) as exc:
                with lock:
                    summary.failed += 1
                    name = type(exc).__name__
                    summary.failures[name] = summary.failures.get(name, 0) + 1
                log.error("item %s failed: %s", key, exc)
                return
            answer = extract_answer(raw, item)
            journal.append(AnswerRecord(key[0], key[1], raw, answer or None, latency, "llm"))
            with lock:
                summary.answered += 1

        with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
            list(pool.map(work, todo))
    return summary
