"""Language-model access: backends, response parsing, and judgement calls.

Two backends share one interface. The HTTP backend posts chat-completion
requests to a configured endpoint, reading the credential from a named
environment variable. The scripted backend replays canned responses keyed
by a fingerprint of the exact prompt, which makes whole pipeline runs
reproducible byte for byte.

Responses are free text; the gateway locates the outermost brace-delimited
object, tolerates ``#`` end-of-line comments and trailing commas (the
templates themselves show those), and retries with a "valid JSON only"
reminder before giving up.

Judgements (is the extraction consistent? does this subtree contain the
value?) run either deterministically or through the model; both modes
return the same shape so callers never branch on the mode.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from dataclasses import dataclass
from enum import Enum
from hashlib import sha256
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .dom import DocumentTree
from .executor import normalize_value, normalize_values
from .prompts import render_prompt


class GatewayError(Exception):
    """Base class for backend failures."""


class BackendTimeout(GatewayError):
    """The backend did not answer within the configured timeout."""


class AuthFailure(GatewayError):
    """Credentials missing or rejected."""


class MalformedOutput(GatewayError):
    """No parseable JSON object in the response, even after retries."""


class ScriptMiss(GatewayError):
    """The scripted backend has no entry for this prompt."""


JSON_REMINDER = "\nRemember: output valid JSON only."


class BackendKind(str, Enum):
    HTTP = "http"
    SCRIPTED = "scripted"


@dataclass
class BackendConfig:
    kind: BackendKind = BackendKind.SCRIPTED
    endpoint: str = ""
    credential_env: str = ""
    model: str = ""
    timeout_s: float = 30.0
    max_retries: int = 2
    rate_limit_per_minute: int = 0  # 0 disables limiting
    script_path: Optional[str] = None

    def validate(self) -> None:
        if self.kind is BackendKind.HTTP:
            if not self.endpoint or not self.credential_env:
                raise ValueError("http backend requires endpoint and credential_env")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "BackendConfig":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        script_path = raw.get("script_path")
        if script_path is not None:
            script_path = str((path.parent / script_path).resolve())
        config = cls(
            kind=BackendKind(raw.get("kind", "scripted")),
            endpoint=raw.get("endpoint", ""),
            credential_env=raw.get("credential_env", ""),
            model=raw.get("model", ""),
            timeout_s=float(raw.get("timeout_s", 30.0)),
            max_retries=int(raw.get("max_retries", 2)),
            rate_limit_per_minute=int(raw.get("rate_limit_per_minute", 0)),
            script_path=script_path,
        )
        config.validate()
        return config


@dataclass(frozen=True)
class LlmExchange:
    """One round trip: template, rendered prompt, raw answer, parsed fields.

    ``latency_s`` is in-memory diagnostics only; it is deliberately left out
    of serialized records so artifacts stay byte-stable across runs.
    """

    template: str
    prompt: str
    raw_response: str
    parsed: Optional[dict]
    attempts: int
    latency_s: float = 0.0

    def parsed_str(self, key: str) -> str:
        if not self.parsed:
            return ""
        value = self.parsed.get(key, "")
        return value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)

    def to_record(self) -> dict:
        return {
            "template": self.template,
            "prompt": self.prompt,
            "raw_response": self.raw_response,
            "parsed": self.parsed,
            "attempts": self.attempts,
        }

    @classmethod
    def from_record(cls, record: dict) -> "LlmExchange":
        return cls(
            template=record["template"],
            prompt=record["prompt"],
            raw_response=record["raw_response"],
            parsed=record["parsed"],
            attempts=record["attempts"],
        )


def prompt_fingerprint(template: str, prompt: str) -> str:
    """Stable key for a scripted exchange: template name plus exact prompt."""
    return sha256(f"{template}\x1f{prompt}".encode("utf-8")).hexdigest()


def extract_json_object(text: str) -> Optional[dict]:
    """Pull the outermost ``{...}`` object out of a possibly noisy response.

    Scans for balanced braces outside string literals, then parses the span,
    stripping ``#`` comments and trailing commas if plain parsing fails.
    """
    start = text.find("{")
    while start != -1:
        span = _balanced_span(text, start)
        if span is not None:
            candidate = text[start:span]
            parsed = _loads_lenient(candidate)
            if isinstance(parsed, dict):
                return parsed
        start = text.find("{", start + 1)
    return None


def _balanced_span(text: str, start: int) -> Optional[int]:
    depth = 0
    in_string: Optional[str] = None
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == in_string:
                in_string = None
            continue
        if ch in "\"'":
            in_string = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def _loads_lenient(candidate: str):
    try:
        return json.loads(candidate)
    except json.JSONDecodeError:
        pass
    cleaned = _strip_hash_comments(candidate)
    cleaned = re.sub(r",(\s*[}\]])", r"\1", cleaned)
    try:
        return json.loads(cleaned)
    except json.JSONDecodeError:
        return None


def _strip_hash_comments(text: str) -> str:
    out: list[str] = []
    i, n = 0, len(text)
    in_string: Optional[str] = None
    escaped = False
    while i < n:
        ch = text[i]
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == in_string:
                in_string = None
            i += 1
            continue
        if ch in "\"'":
            in_string = ch
            out.append(ch)
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _RateLimiter:
    """Sliding one-minute window; blocks callers that would exceed the rate."""

    def __init__(self, per_minute: int, clock: Callable[[], float] = time.monotonic,
                 sleeper: Callable[[float], None] = time.sleep) -> None:
        self.per_minute = per_minute
        self._clock = clock
        self._sleep = sleeper
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        if self.per_minute <= 0:
            return self._clock()
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= 60.0:
                    self._stamps.popleft()
                if len(self._stamps) < self.per_minute:
                    self._stamps.append(now)
                    return now
                wait = 60.0 - (now - self._stamps[0])
            self._sleep(max(wait, 0.001))


class ScriptTable:
    """Canned responses keyed by prompt fingerprint."""

    def __init__(self, entries: Optional[dict[str, str]] = None) -> None:
        self.entries: dict[str, str] = dict(entries or {})

    @classmethod
    def load(cls, path: str | Path) -> "ScriptTable":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(raw.get("entries", {}))

    def save(self, path: str | Path) -> None:
        record = {"entries": dict(sorted(self.entries.items()))}
        Path(path).write_text(
            json.dumps(record, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def lookup(self, fingerprint: str) -> Optional[str]:
        return self.entries.get(fingerprint)

    def add(self, fingerprint: str, response: str) -> None:
        self.entries[fingerprint] = response


class LlmGateway:
    """Renders prompts, talks to one backend, and parses structured replies.

    ``transport`` can be injected for tests: any callable taking
    ``(template_name, prompt)`` and returning raw response text.
    """

    def __init__(
        self,
        config: BackendConfig,
        script: Optional[ScriptTable] = None,
        transport: Optional[Callable[[str, str], str]] = None,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        config.validate()
        self.config = config
        self.script = script
        if script is None and config.kind is BackendKind.SCRIPTED and config.script_path:
            self.script = ScriptTable.load(config.script_path)
        self._transport = transport
        self._limiter = _RateLimiter(config.rate_limit_per_minute, clock, sleeper)
        self._clock = clock
        self.request_times: list[float] = []

    # -- raw transports ------------------------------------------------------
    def _send(self, template: str, prompt: str) -> str:
        if self._transport is not None:
            return self._transport(template, prompt)
        if self.config.kind is BackendKind.SCRIPTED:
            if self.script is None:
                raise ScriptMiss("scripted backend has no script table")
            response = self.script.lookup(prompt_fingerprint(template, prompt))
            if response is None:
                raise ScriptMiss(
                    f"no scripted entry for template {template!r} "
                    f"(fingerprint {prompt_fingerprint(template, prompt)[:12]}...)"
                )
            return response
        return self._send_http(prompt)

    def _send_http(self, prompt: str) -> str:
        credential = os.environ.get(self.config.credential_env, "")
        if not credential:
            raise AuthFailure(
                f"environment variable {self.config.credential_env!r} is not set"
            )
        body = json.dumps({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        }).encode("utf-8")
        request = urllib.request.Request(
            self.config.endpoint,
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {credential}",
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout_s) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise AuthFailure(f"backend rejected credentials ({exc.code})") from exc
            raise GatewayError(f"backend error {exc.code}") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError) or "timed out" in str(exc.reason):
                raise BackendTimeout(str(exc.reason)) from exc
            raise GatewayError(str(exc.reason)) from exc
        except TimeoutError as exc:
            raise BackendTimeout(str(exc)) from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"unexpected response shape: {payload!r}") from exc

    # -- structured completion ------------------------------------------------
    def complete(self, template: str, slots: Sequence[str]) -> LlmExchange:
        """Render, send, and parse; retries on malformed output."""
        prompt = render_prompt(template, list(slots))
        attempts = 0
        raw = ""
        started = self._clock()
        current_prompt = prompt
        while attempts <= self.config.max_retries:
            attempts += 1
            stamp = self._limiter.acquire()
            self.request_times.append(stamp)
            try:
                raw = self._send(template, current_prompt)
            except ScriptMiss:
                if attempts > 1:
                    # The original canned response was malformed and the
                    # script provides no corrected entry for the reminder.
                    raise MalformedOutput(
                        f"scripted response stayed malformed: {raw[:200]!r}"
                    ) from None
                raise
            parsed = extract_json_object(raw)
            if parsed is not None:
                return LlmExchange(
                    template=template,
                    prompt=current_prompt,
                    raw_response=raw,
                    parsed=parsed,
                    attempts=attempts,
                    latency_s=self._clock() - started,
                )
            current_prompt = prompt + JSON_REMINDER
        raise MalformedOutput(
            f"no JSON object after {attempts} attempt(s); last response: {raw[:200]!r}"
        )


class JudgeMode(str, Enum):
    DETERMINISTIC = "deterministic"
    LLM = "llm"


@dataclass(frozen=True)
class JudgeResult:
    verdict: bool
    exchange: Optional[LlmExchange] = None


def _yes(exchange: LlmExchange) -> bool:
    return exchange.parsed_str("judgement").strip().lower().startswith("yes")


def judge_consistent(
    extracted: Iterable[str],
    expected: Iterable[str],
    *,
    mode: JudgeMode = JudgeMode.DETERMINISTIC,
    gateway: Optional[LlmGateway] = None,
    strict: bool = False,
) -> JudgeResult:
    """Is the extracted value set consistent with the expected one?

    Deterministic mode compares normalized value sets (or raw lists with
    ``strict``); separator noise is forgiven, exactly the leniency the
    judgement prompt asks for. LLM mode delegates to that prompt.
    """
    extracted = list(extracted)
    expected = list(expected)
    if mode is JudgeMode.LLM:
        if gateway is None:
            raise ValueError("LLM judge mode requires a gateway")
        exchange = gateway.complete(
            "judgement",
            [json.dumps(extracted, ensure_ascii=False), json.dumps(expected, ensure_ascii=False)],
        )
        return JudgeResult(_yes(exchange), exchange)
    if strict:
        return JudgeResult(extracted == expected)
    return JudgeResult(set(normalize_values(extracted)) == set(normalize_values(expected)))


def judge_contains(
    tree: DocumentTree,
    values: Iterable[str],
    instruction: str,
    *,
    mode: JudgeMode = JudgeMode.DETERMINISTIC,
    gateway: Optional[LlmGateway] = None,
) -> JudgeResult:
    """Does the tree's text contain every expected value?

    Deterministic mode checks normalized substring containment over the
    tree's concatenated text; LLM mode asks the step-back prompt.
    """
    values = list(values)
    if mode is JudgeMode.LLM:
        if gateway is None:
            raise ValueError("LLM judge mode requires a gateway")
        exchange = gateway.complete(
            "stepback",
            [instruction, json.dumps(values, ensure_ascii=False), tree.to_html()],
        )
        return JudgeResult(_yes(exchange), exchange)
    haystack = normalize_value(tree.text_content())
    verdict = all(normalize_value(v) in haystack for v in values if normalize_value(v))
    return JudgeResult(verdict)
