"""Inference backends: an HTTP completion client and a deterministic mock."""

from __future__ import annotations

import abc
import hashlib
import json
import logging
import os
import socket
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from pathlib import Path

from ..errors import ArchiveIOError, BackendError, ValidationFailure

log = logging.getLogger(__name__)

BACKEND_ENV = "VORTEX_BACKEND_URL"


class BackendUnavailable(BackendError):
    pass


class BackendTimeout(BackendError):
    pass


class CompletionNotFound(BackendError):
    """The mock has no canned completion for this prompt."""


@dataclass(frozen=True)
class InferenceParams:
    temperature: float = 0.6
    top_p: float = 0.95
    max_tokens: int = 32768
    seed: int | None = None

    def to_request(self) -> dict:
        body = asdict(self)
        if self.seed is None:
            del body["seed"]
        return body

    @classmethod
    def from_json(cls, doc: dict) -> "InferenceParams":
        unknown = set(doc) - {"temperature", "top_p", "max_tokens", "seed"}
        if unknown:
            raise ValidationFailure(f"unknown inference parameters: {sorted(unknown)}")
        return cls(**doc)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class InferenceBackend(abc.ABC):
    @abc.abstractmethod
    def complete(self, prompt: str, params: InferenceParams) -> str:
        """Return the raw completion text, reasoning block included."""


class HttpBackend(InferenceBackend):
    """Client for a single JSON completion endpoint (see docs/backend.md)."""

    def __init__(self, url: str, timeout: float = 600.0, retries: int = 3, backoff: float = 0.5):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _post(self, body: bytes) -> bytes:
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read()

    def complete(self, prompt: str, params: InferenceParams) -> str:
        body = json.dumps({"prompt": prompt, **params.to_request()}).encode("utf-8")
        last: BackendError | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                raw = self._post(body)
            except (TimeoutError, socket.timeout):
                last = BackendTimeout(f"{self.url}: no response within {self.timeout}s")
            except urllib.error.HTTPError as exc:
                if exc.code < 500:
                    raise BackendError(f"{self.url}: HTTP {exc.code}") from exc
                last = BackendUnavailable(f"{self.url}: HTTP {exc.code}")
            except urllib.error.URLError as exc:
                if isinstance(exc.reason, (TimeoutError, socket.timeout)):
                    last = BackendTimeout(f"{self.url}: no response within {self.timeout}s")
                else:
                    last = BackendUnavailable(f"{self.url}: {exc.reason}")
            except (ConnectionError, OSError) as exc:
                last = BackendUnavailable(f"{self.url}: {exc}")
            else:
                return _completion_text(raw)
            log.warning("inference attempt %d failed: %s", attempt + 1, last)
        assert last is not None
        raise last


def _completion_text(raw: bytes) -> str:
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise BackendError("backend returned non-JSON body") from exc
    if isinstance(doc, dict):
        if isinstance(doc.get("completion"), str):
            return doc["completion"]
        choices = doc.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            if isinstance(first.get("text"), str):
                return first["text"]
            msg = first.get("message") or {}
            if isinstance(msg.get("content"), str):
                return msg["content"]
    raise BackendError("backend response has no completion text")


class MockBackend(InferenceBackend):
    """Canned completions keyed by the SHA-256 of the prompt.

    Records every call so tests can inspect what would have been sent.
    """

    def __init__(self, completions: dict[str, str], default: str | None = None):
        self.completions = dict(completions)
        self.default = default
        self.calls: list[tuple[str, InferenceParams]] = []

    @classmethod
    def from_path(cls, path: str | Path) -> "MockBackend":
        """Load ``<sha256>.txt`` files from a directory (``_default.txt`` is the
        fallback), or a JSON object mapping hashes to completions."""
        path = Path(path)
        if path.is_dir():
            completions = {p.stem: p.read_text(encoding="utf-8")
                           for p in sorted(path.glob("*.txt")) if p.stem != "_default"}
            default_file = path / "_default.txt"
            default = default_file.read_text(encoding="utf-8") if default_file.exists() else None
            return cls(completions, default)
        if path.is_file():
            doc = json.loads(path.read_text(encoding="utf-8"))
            return cls({k: v for k, v in doc.items() if k != "_default"}, doc.get("_default"))
        raise ArchiveIOError(f"mock completions not found: {path}")

    def complete(self, prompt: str, params: InferenceParams) -> str:
        self.calls.append((prompt, params))
        key = prompt_hash(prompt)
        if key in self.completions:
            return self.completions[key]
        if self.default is not None:
            return self.default
        raise CompletionNotFound(f"no canned completion for prompt {key[:12]}")


def make_backend(spec: str | None) -> InferenceBackend:
    """``mock:<path>`` or an http(s) URL; falls back to $VORTEX_BACKEND_URL."""
    spec = spec or os.environ.get(BACKEND_ENV)
    if not spec:
        raise BackendUnavailable(f"no backend given and {BACKEND_ENV} is unset")
    if spec.startswith("mock:"):
        return MockBackend.from_path(spec[len("mock:"):])
    if spec.startswith(("http://", "https://")):
        return HttpBackend(spec)
    raise BackendUnavailable(f"unrecognised backend {spec!r}")


def run_inference(prompt: str, params: InferenceParams, backend: InferenceBackend) -> str:
    return backend.complete(prompt, params)
