"""Generation backend driver: health probe, bounded concurrency, retries, cache.

The wire contract is deliberately tiny so any backend can implement it:
POST /generate with {"prompt": str, "max_new_tokens": int} returning
{"completion": str}, plus GET /health returning 200. Besides real HTTP
endpoints, two in-process backends are addressable by URL scheme for tests
and dry runs: "echo:" returns the prompt itself and "gold:PATH" replays the
target column of a prompt JSONL.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .exceptions import BackendError, SciexError
from .templates import PromptInstance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str
    timeout: float = 60.0
    max_concurrency: int = 4
    max_retries: int = 2
    max_new_tokens: int = 512
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0:
            raise SciexError("timeout must be positive")
        if self.max_concurrency < 1:
            raise SciexError("max_concurrency must be >= 1")
        if self.max_retries < 0:
            raise SciexError("max_retries must be >= 0")
        if self.max_new_tokens < 1:
            raise SciexError("max_new_tokens must be >= 1")


@dataclass
class GenerationResult:
    record_id: str
    template_id: str
    completion: str
    latency_ms: float = 0.0
    attempt: int = 1
    error: str | None = None

    def to_json(self) -> dict:
        out = {
            "record_id": self.record_id,
            "template_id": self.template_id,
            "completion": self.completion,
            "latency_ms": self.latency_ms,
            "attempt": self.attempt,
        }
        if self.error is not None:
            out["error"] = self.error
        return out


class Backend(Protocol):
    identity: str

    def health(self) -> None: ...

    def generate(self, prompt: str, max_new_tokens: int) -> str: ...


class EchoBackend:
    """Returns the prompt verbatim; useful for plumbing tests."""

    identity = "echo:"

    def health(self) -> None:
        return None

    def generate(self, prompt: str, max_new_tokens: int) -> str:
        return prompt


class GoldBackend:
    """Replays targets from a prompt JSONL, keyed by the prompt string."""

    def __init__(self, prompts_path: str | Path):
        self.identity = f"gold:{prompts_path}"
        self._targets: dict[str, str] = {}
        with open(prompts_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    self._targets[row["prompt"]] = row["target"]

    def health(self) -> None:
        if not self._targets:
            raise BackendError(f"{self.identity}: no prompts loaded")

    def generate(self, prompt: str, max_new_tokens: int) -> str:
        try:
            return self._targets[prompt]
        except KeyError:
            raise BackendError("gold backend: prompt not found in replay file") from None


class HttpBackend:
    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.identity = endpoint.rstrip("/")
        self._client = httpx.Client(base_url=self.identity, timeout=timeout)

    def health(self) -> None:
        try:
            response = self._client.get("/health")
        except httpx.HTTPError as exc:
            raise BackendError(f"health probe failed: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(f"health probe returned {response.status_code}")

    def generate(self, prompt: str, max_new_tokens: int) -> str:
        response = self._client.post(
            "/generate",
            json={"prompt": prompt, "max_new_tokens": max_new_tokens},
        )
        if response.status_code >= 500:
            raise TransientBackendFailure(f"server error {response.status_code}")
        if response.status_code != 200:
            raise BackendError(f"/generate returned {response.status_code}")
        try:
            completion = response.json()["completion"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise BackendError(f"malformed /generate response: {exc}") from exc
        if not isinstance(completion, str):
            raise BackendError("completion is not a string")
        return completion

    def close(self) -> None:
        self._client.close()


class TransientBackendFailure(Exception):
    """Retryable failure: connection trouble, timeout, or 5xx."""


def backend_from_url(endpoint: str, timeout: float = 60.0) -> Backend:
    if endpoint.startswith(("http://", "https://")):
        return HttpBackend(endpoint, timeout=timeout)
    if endpoint == "echo:" or endpoint == "echo://":
        return EchoBackend()
    if endpoint.startswith("gold:"):
        return GoldBackend(endpoint[len("gold:") :])
    raise SciexError(f"unknown backend endpoint: {endpoint!r}")


class ResponseCache:
    """File-per-key completion cache; concurrent reads, serialized writes."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    @staticmethod
    def key(prompt: str, backend_identity: str, max_new_tokens: int) -> str:
        payload = json.dumps(
            {
                "prompt": prompt,
                "backend": backend_identity,
                "max_new_tokens": max_new_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        try:
            return json.loads(path.read_text("utf-8"))["completion"]
        except (FileNotFoundError, json.JSONDecodeError, KeyError):
            return None

    def put(self, key: str, completion: str) -> None:
        path = self._path(key)
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(
                json.dumps({"completion": completion}, ensure_ascii=False), "utf-8"
            )
            tmp.replace(path)


def _generate_one(
    backend: Backend,
    prompt: PromptInstance,
    cfg: BackendConfig,
    cache: ResponseCache | None,
) -> GenerationResult:
    cache_key = None
    if cache is not None:
        cache_key = ResponseCache.key(
            prompt.prompt, backend.identity, cfg.max_new_tokens
        )
        cached = cache.get(cache_key)
        if cached is not None:
            return GenerationResult(
                record_id=prompt.record_id,
                template_id=prompt.template_id,
                completion=cached,
                latency_ms=0.0,
                attempt=0,
            )
    last_error = "unknown"
    for attempt in range(1, cfg.max_retries + 2):
        start = time.monotonic()
        try:
            completion = backend.generate(prompt.prompt, cfg.max_new_tokens)
        except (TransientBackendFailure, httpx.TransportError, httpx.TimeoutException) as exc:
            last_error = str(exc)
            if attempt <= cfg.max_retries:
                time.sleep(cfg.backoff_base * 2 ** (attempt - 1))
            continue
        except BackendError as exc:
            return GenerationResult(
                record_id=prompt.record_id,
                template_id=prompt.template_id,
                completion="",
                latency_ms=(time.monotonic() - start) * 1000,
                attempt=attempt,
                error=str(exc),
            )
        latency = (time.monotonic() - start) * 1000
        if cache is not None and cache_key is not None:
            cache.put(cache_key, completion)
        return GenerationResult(
            record_id=prompt.record_id,
            template_id=prompt.template_id,
            completion=completion,
            latency_ms=latency,
            attempt=attempt,
        )
    return GenerationResult(
        record_id=prompt.record_id,
        template_id=prompt.template_id,
        completion="",
        attempt=cfg.max_retries + 1,
        error=f"retries exhausted: {last_error}",
    )


def generate_batch(
    prompts: Sequence[PromptInstance],
    cfg: BackendConfig,
    backend: Backend | None = None,
    cache: ResponseCache | None = None,
) -> list[GenerationResult]:
    """One result per prompt, order-aligned with the input.

    The backend is health-probed before any work; per-item failures are
    carried in GenerationResult.error rather than aborting the batch.
    """
    owns_backend = backend is None
    if backend is None:
        backend = backend_from_url(cfg.endpoint, timeout=cfg.timeout)
    try:
        try:
            backend.health()
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"health probe failed: {exc}") from exc

        with ThreadPoolExecutor(max_workers=cfg.max_concurrency) as pool:
            futures = [
                pool.submit(_generate_one, backend, prompt, cfg, cache)
                for prompt in prompts
            ]
            results = [f.result() for f in futures]
    finally:
        if owns_backend and hasattr(backend, "close"):
            backend.close()
    failures = sum(1 for r in results if r.error)
    if failures:
        log.warning("generate_batch: %d/%d items failed", failures, len(results))
    return results


@dataclass
class ExportManifest:
    n_instances: int
    per_template: dict[str, int]
    formats: list[str]
    strategy: str | None
    subsample: float | None
    seed: int | None
    sha256: str
    includes_train_only: bool = False
    decoding: str = "backend-default"

    def to_json(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "per_template": dict(sorted(self.per_template.items())),
            "formats": self.formats,
            "strategy": self.strategy,
            "subsample": self.subsample,
            "seed": self.seed,
            "sha256": self.sha256,
            "includes_train_only": self.includes_train_only,
            "decoding": self.decoding,
        }


def export_finetune_dataset(
    prompt_set: Sequence[PromptInstance],
    path: str | Path,
    strategy: str | None = None,
    subsample: float | None = None,
    seed: int | None = None,
) -> ExportManifest:
    """Write {prompt, target} JSON-lines plus a manifest describing the export."""
    if not prompt_set:
        raise SciexError("prompt set is empty")
    path = Path(path)
    digest = hashlib.sha256()
    per_template: dict[str, int] = {}
    formats = set()
    with open(path, "w", encoding="utf-8") as fh:
        for instance in prompt_set:
            line = json.dumps(
                {"prompt": instance.prompt, "target": instance.target},
                ensure_ascii=False,
            )
            fh.write(line + "\n")
            digest.update((line + "\n").encode("utf-8"))
            per_template[instance.template_id] = (
                per_template.get(instance.template_id, 0) + 1
            )
            formats.add(instance.format.value)
    manifest = ExportManifest(
        n_instances=len(prompt_set),
        per_template=per_template,
        formats=sorted(formats),
        strategy=strategy,
        subsample=subsample,
        seed=seed,
        sha256=digest.hexdigest(),
        includes_train_only=any(
            i.template_id in ("drop-9", "drop-10") for i in prompt_set
        ),
    )
    manifest_path = path.with_name(path.name + ".manifest.json")
    manifest_path.write_text(
        json.dumps(manifest.to_json(), indent=2, ensure_ascii=False), "utf-8"
    )
    return manifest
