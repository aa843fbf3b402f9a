"""Backend driving, response parsing, and cost accounting for generation.

Backends are pluggable behind a one-method protocol so campaigns run the same
against the deterministic in-process mock and a real HTTP endpoint. All money
is `Decimal`; ledger identities must hold exactly, not within float noise.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Protocol

import httpx

from .canonical import sha256_hex
from .dataset import Provenance, QAPair, Sample, Turn, expected_turns
from .errors import (
    BackendTimeoutError,
    ContractError,
    ParseError,
    RefusalError,
    SchemaError,
    TransportError,
)
from .promptgen import DataKind, GenerationRequest

API_KEY_ENV = "FORGE_API_KEY"

_FENCE_RE = re.compile(r"```vifqa\s*\n(.*?)```", re.DOTALL)


def _as_decimal(value: Decimal | int | str | float) -> Decimal:
    # Floats go through str() so 0.035 becomes Decimal("0.035"), not the
    # nearest binary fraction.
    if isinstance(value, Decimal):
        return value
    return Decimal(str(value))


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = "mock://default"
    model_name: str = "mock-vision"
    timeout: float = 30.0
    max_retries: int = 2
    cost_per_call: Decimal = Decimal("0")
    parallelism_limit: int = 4
    backoff_base: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "cost_per_call", _as_decimal(self.cost_per_call))
        if self.max_retries < 0:
            raise ContractError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.parallelism_limit < 1:
            raise ContractError(
                f"parallelism_limit must be >= 1, got {self.parallelism_limit}"
            )
        if self.cost_per_call < 0:
            raise ContractError(f"cost_per_call must be >= 0, got {self.cost_per_call}")
        if self.timeout <= 0:
            raise ContractError(f"timeout must be positive, got {self.timeout}")


@dataclass(frozen=True)
class RawGeneration:
    request_id: str
    raw_text: str
    latency: float = 0.0
    cost: Decimal = Decimal("0")

    def __post_init__(self) -> None:
        object.__setattr__(self, "cost", _as_decimal(self.cost))
        if self.cost < 0:
            raise ContractError(f"cost must be >= 0, got {self.cost}")


class Backend(Protocol):
    def complete(self, request: GenerationRequest, config: BackendConfig) -> str: ...


class CostLedger:
    """Billed-call accounting; every mutation is under one lock.

    `calls` counts billed attempts, not logical requests: retried attempts
    and refused or unparseable calls all billed work and all count.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.calls = 0
        self.total_cost = Decimal("0")
        self.per_kind: dict[DataKind, Decimal] = {}

    def record(self, kind: DataKind, cost: Decimal) -> None:
        cost = _as_decimal(cost)
        if cost < 0:
            raise ContractError(f"cost must be >= 0, got {cost}")
        with self._lock:
            self.calls += 1
            self.total_cost += cost
            self.per_kind[kind] = self.per_kind.get(kind, Decimal("0")) + cost

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "calls": self.calls,
                "total_cost": str(self.total_cost),
                "per_kind": {
                    kind.value: str(total)
                    for kind, total in sorted(self.per_kind.items(), key=lambda kv: kv[0].value)
                },
            }


def cost_per_datapoint(total_cost: Decimal | int | str, datapoints: int) -> Decimal:
    if datapoints <= 0:
        raise ContractError(f"datapoints must be positive, got {datapoints}")
    return _as_decimal(total_cost) / Decimal(datapoints)


class MockBackend:
    """Deterministic offline backend; output depends only on the request.

    Instrumented for fault-injection tests: `fail_times` maps request_id to a
    number of leading transport failures, `timeout_times` does the same with
    timeouts, `refuse_ids` always refuse. Tracks the high-water mark of
    concurrent in-flight calls so parallelism caps are assertable.
    """

    def __init__(
        self,
        fail_times: dict[str, int] | None = None,
        timeout_times: dict[str, int] | None = None,
        refuse_ids: set[str] | None = None,
        call_delay: float = 0.0,
    ) -> None:
        self.fail_times = dict(fail_times or {})
        self.timeout_times = dict(timeout_times or {})
        self.refuse_ids = set(refuse_ids or ())
        self.call_delay = call_delay
        self._lock = threading.Lock()
        self._attempts: dict[str, int] = {}
        self._inflight = 0
        self.max_inflight_seen = 0
        self.total_calls = 0

    def complete(self, request: GenerationRequest, config: BackendConfig) -> str:
        rid = request.request_id
        with self._lock:
            self._inflight += 1
            self.total_calls += 1
            self.max_inflight_seen = max(self.max_inflight_seen, self._inflight)
            self._attempts[rid] = self._attempts.get(rid, 0) + 1
            attempt = self._attempts[rid]
        try:
            if self.call_delay:
                time.sleep(self.call_delay)
            if attempt <= self.fail_times.get(rid, 0):
                raise TransportError(f"injected transport failure for {rid}")
            if attempt <= self.timeout_times.get(rid, 0):
                raise BackendTimeoutError(f"injected timeout for {rid}")
            if rid in self.refuse_ids:
                raise RefusalError(
                    f"backend refused {rid}",
                    backend_message="content policy: declined to describe this image",
                )
            return self._render(request)
        finally:
            with self._lock:
                self._inflight -= 1

    def _render(self, request: GenerationRequest) -> str:
        digest = sha256_hex(request.request_id.encode("utf-8"))[:8]
        objects = request.image.object_names
        turns = []
        for t in range(1, expected_turns(request.kind) + 1):
            anchor = objects[(t - 1) % len(objects)]
            turn = {}
            for lang in request.languages:
                turn[lang] = {
                    "question": f"[{lang}] turn {t}: what about the {anchor}? ({digest})",
                    "answer": f"[{lang}] turn {t}: the {anchor} is one of "
                    f"{len(objects)} listed objects. ({digest})",
                }
            turns.append(turn)
        body = json.dumps({"turns": turns}, ensure_ascii=False)
        return f"Here is the data.\n```vifqa\n{body}\n```\n"


class HttpBackend:
    """Thin JSON-over-HTTP client: `{model, prompt, image}` in, `{text}` out.

    The image field is passed through untouched; callers hand us whatever
    reference or base64 payload their endpoint expects. A `refusal` key in
    the response body signals a content-policy decline.
    """

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None) -> None:
        self.endpoint = config.endpoint
        self._client = client

    def complete(self, request: GenerationRequest, config: BackendConfig) -> str:
        headers = {}
        api_key = os.environ.get(API_KEY_ENV, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": config.model_name,
            "prompt": request.rendered_prompt,
            "image": request.image.uri,
        }
        try:
            if self._client is not None:
                response = self._client.post(
                    self.endpoint, json=body, headers=headers, timeout=config.timeout
                )
            else:
                response = httpx.post(
                    self.endpoint, json=body, headers=headers, timeout=config.timeout
                )
        except httpx.TimeoutException as exc:
            raise BackendTimeoutError(f"backend timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        if response.status_code != 200:
            raise TransportError(
                f"backend returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
        except ValueError as exc:
            raise TransportError(f"backend response is not JSON: {exc}") from exc
        if payload.get("refusal"):
            raise RefusalError(
                "backend refused the request", backend_message=str(payload["refusal"])
            )
        if "text" not in payload:
            raise TransportError("backend response missing 'text' field")
        return str(payload["text"])


def make_backend(config: BackendConfig) -> Backend:
    if config.endpoint.startswith("mock:"):
        return MockBackend()
    if config.endpoint.startswith(("http://", "https://")):
        return HttpBackend(config)
    raise ContractError(f"unsupported backend endpoint {config.endpoint!r}")


def generate(
    request: GenerationRequest,
    config: BackendConfig,
    backend: Backend | None = None,
    ledger: CostLedger | None = None,
) -> RawGeneration:
    """Call the backend once, retrying transport failures with backoff.

    Every attempt that reaches the backend is billed to the ledger, success
    or not. Refusals are terminal: retrying a content-policy decline only
    spends money repeating it.
    """
    if backend is None:
        backend = make_backend(config)
    attempts = 0
    last_error: TransportError | None = None
    while attempts <= config.max_retries:
        attempts += 1
        started = time.monotonic()
        try:
            text = backend.complete(request, config)
        except RefusalError:
            if ledger is not None:
                ledger.record(request.kind, config.cost_per_call)
            raise
        except TransportError as exc:
            if ledger is not None:
                ledger.record(request.kind, config.cost_per_call)
            last_error = exc
            if attempts <= config.max_retries and config.backoff_base > 0:
                time.sleep(config.backoff_base * (2 ** (attempts - 1)))
            continue
        latency = time.monotonic() - started
        if ledger is not None:
            ledger.record(request.kind, config.cost_per_call)
        return RawGeneration(
            request_id=request.request_id,
            raw_text=text,
            latency=latency,
            cost=config.cost_per_call,
        )
    assert last_error is not None
    if isinstance(last_error, BackendTimeoutError):
        raise BackendTimeoutError(
            f"{request.request_id}: timed out after {attempts} attempts: {last_error}",
            attempts=attempts,
        )
    raise TransportError(
        f"{request.request_id}: transport failed after {attempts} attempts: {last_error}",
        attempts=attempts,
    )


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def parse_generation(
    raw: RawGeneration,
    kind: DataKind,
    languages: list[str] | tuple[str, ...],
    provenance: Provenance | None = None,
) -> Sample:
    """Turn a raw backend reply into a schema-valid Sample.

    The reply must carry exactly one ```vifqa fenced JSON object; language
    tags come from the response structure, never guessed from the text.
    """
    if not raw.raw_text.strip():
        raise ParseError(f"{raw.request_id}: empty backend reply", offset=0)
    match = _FENCE_RE.search(raw.raw_text)
    if match is None:
        raise ParseError(
            f"{raw.request_id}: no ```vifqa fenced block in reply", offset=0
        )
    fence_body = match.group(1)
    try:
        payload = json.loads(fence_body)
    except json.JSONDecodeError as exc:
        offset = _byte_offset(raw.raw_text, match.start(1) + exc.pos)
        raise ParseError(
            f"{raw.request_id}: bad JSON in vifqa block at byte {offset}: {exc.msg}",
            offset=offset,
        ) from exc

    if not isinstance(payload, dict) or not isinstance(payload.get("turns"), list):
        raise SchemaError(f"{raw.request_id}: vifqa payload must be an object with 'turns'")
    turns_raw = payload["turns"]
    want = expected_turns(kind)
    if len(turns_raw) != want:
        raise SchemaError(
            f"{raw.request_id}: expected {want} turns, got {len(turns_raw)}"
        )

    turns: list[Turn] = []
    for position, turn_raw in enumerate(turns_raw, start=1):
        if not isinstance(turn_raw, dict):
            raise SchemaError(f"{raw.request_id}: turn {position} is not an object")
        pairs: list[QAPair] = []
        for lang in languages:
            block = turn_raw.get(lang)
            if block is None:
                raise SchemaError(
                    f"{raw.request_id}: turn {position}: missing language block '{lang}'"
                )
            if (
                not isinstance(block, dict)
                or not isinstance(block.get("question"), str)
                or not isinstance(block.get("answer"), str)
            ):
                raise SchemaError(
                    f"{raw.request_id}: turn {position}: language block '{lang}' "
                    f"must carry string 'question' and 'answer'"
                )
            pairs.append(
                QAPair(language=lang, question=block["question"], answer=block["answer"])
            )
        turns.append(Turn(index=position, pairs=tuple(pairs)))

    image_id, _, _ = raw.request_id.rpartition(":")
    return Sample(
        sample_id=raw.request_id,
        image_id=image_id or raw.request_id,
        kind=kind,
        languages=tuple(languages),
        turns=tuple(turns),
        provenance=provenance or Provenance(),
    )


@dataclass(frozen=True)
class FailureRecord:
    request_id: str
    kind: DataKind
    error: str
    message: str
    attempts: int = 1

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "kind": self.kind.value,
            "error": self.error,
            "message": self.message,
            "attempts": self.attempts,
        }


def run_campaign(
    images: list,
    kinds: list[DataKind],
    config: BackendConfig,
    templates: dict[DataKind, "object"],
    languages: tuple[str, ...] = ("en", "ko", "zh"),
    backend: Backend | None = None,
) -> tuple[list[Sample], CostLedger, list[FailureRecord]]:
    """Generate every (image, kind) pair under the configured parallelism.

    Partial failures never abort the campaign; they come back as records in
    input order alongside the successes, also in input order.
    """
    from .promptgen import build_prompt  # local import avoids cycle at module load

    for kind in kinds:
        if kind not in templates:
            raise ContractError(f"no template provided for kind {kind.value}")
    if backend is None:
        backend = make_backend(config)
    ledger = CostLedger()

    requests = [
        build_prompt(image, kind, templates[kind], languages)
        for image in images
        for kind in kinds
    ]

    def attempt(request: GenerationRequest) -> Sample | FailureRecord:
        try:
            raw = generate(request, config, backend=backend, ledger=ledger)
            return parse_generation(
                raw,
                request.kind,
                request.languages,
                provenance=Provenance(
                    template_hash=request.template_hash,
                    model_name=config.model_name,
                ),
            )
        except TransportError as exc:
            return FailureRecord(
                request_id=request.request_id,
                kind=request.kind,
                error=type(exc).__name__,
                message=str(exc),
                attempts=exc.attempts,
            )
        except RefusalError as exc:
            return FailureRecord(
                request_id=request.request_id,
                kind=request.kind,
                error=type(exc).__name__,
                message=exc.backend_message or str(exc),
            )
        except (ParseError, SchemaError) as exc:
            return FailureRecord(
                request_id=request.request_id,
                kind=request.kind,
                error=type(exc).__name__,
                message=str(exc),
            )

    if not requests:
        return [], ledger, []
    with ThreadPoolExecutor(max_workers=config.parallelism_limit) as pool:
        outcomes = list(pool.map(attempt, requests))

    samples = [o for o in outcomes if isinstance(o, Sample)]
    failures = [o for o in outcomes if isinstance(o, FailureRecord)]
    return samples, ledger, failures
