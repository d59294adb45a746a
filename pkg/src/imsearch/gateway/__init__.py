"""Backend-agnostic clients for the five model roles.

The Gateway routes each role (captioner, reasoner, verifier, evaluator,
text/image encoder) to its configured backend, adds retry-with-backoff on
transport failures, caps per-role concurrency, normalizes embeddings, and
enforces a single embedding dimensionality across the encoder pair.
Parsers and prompt renderers are pure functions in sibling modules.
"""

from __future__ import annotations

import json
import threading
import time
from collections import Counter

from ..cache import IMAGE_EMBEDS, TEXT_EMBEDS, Cache
from ..errors import (
    BackendUnavailable,
    ConfigError,
    DimensionMismatch,
    MalformedResponse,
    ParseError,
    Timeout,
)
from ..model import Embedding, PipelineConfig
from ..util import text_digest
from .mock import MockBackend
from .parsing import (
    Answer,
    classify_answer,
    parse_evaluator_output,
    parse_stage1_output,
    parse_stage2_output,
    parse_yes_no,
)
from .prompts import render_prompt1, render_prompt2, render_prompt3
from .transport import (
    ChatMessage,
    ChatRequest,
    ChatResponse,
    HttpBackend,
    ImagePart,
    TextPart,
    TransportFailure,
)

ROLES = ("captioner", "reasoner", "verifier", "evaluator", "text_encoder", "image_encoder")
ENV_PREFIX = "LGIR_BACKEND_"

REPROMPT_NUDGE = "Return valid JSON only."


def env_var_for_role(role: str) -> str:
    return ENV_PREFIX + role.upper() + "_URL"


class Gateway:
    def __init__(self, backends: dict[str, object], config: PipelineConfig):
        self.config = config
        self._backends = dict(backends)
        self._semaphores = {
            role: threading.Semaphore(config.concurrency) for role in ROLES
        }
        self._dim: int | None = None
        self._dim_lock = threading.Lock()
        self.call_counts: Counter = Counter()
        self._count_lock = threading.Lock()

    @classmethod
    def from_config(cls, config: PipelineConfig, transport=None) -> "Gateway":
        backends: dict[str, object] = {}
        mocks: dict[str, MockBackend] = {}
        for role in ROLES:
            url = config.backend_url(role)
            if url is None:
                continue
            if url.startswith("mock:"):
                if url not in mocks:
                    mocks[url] = MockBackend.from_url(url)
                backends[role] = mocks[url]
            else:
                backends[role] = HttpBackend(url, timeout_s=config.timeout_s, transport=transport)
        return cls(backends, config)

    def backend_for(self, role: str):
        backend = self._backends.get(role)
        if backend is None:
            raise ConfigError(f"no backend endpoint configured for role {role!r}")
        return backend

    def _count(self, role: str) -> None:
        with self._count_lock:
            self.call_counts[role] += 1

    # -- chat completion ------------------------------------------------

    def complete(self, role: str, req: ChatRequest) -> ChatResponse:
        """Send a chat request, retrying transient transport failures.

        Parse failures downstream are never retried here; callers apply
        the re-prompt policy via complete_parsed.
        """
        backend = self.backend_for(role)
        attempts = self.config.max_retries + 1
        last: TransportFailure | None = None
        with self._semaphores[role]:
            for attempt in range(attempts):
                if attempt > 0:
                    time.sleep(self.config.retry_backoff_s * (2 ** (attempt - 1)))
                start = time.perf_counter()
                self._count(role)
                try:
                    text = backend.complete(role, req)
                except TransportFailure as failure:
                    last = failure
                    continue
                latency_ms = int((time.perf_counter() - start) * 1000)
                if text is None:
                    raise MalformedResponse(f"{role} backend returned null text")
                return ChatResponse(text=text, latency_ms=latency_ms, backend_id=getattr(backend, "id", role))
        assert last is not None
        if last.timeout:
            raise Timeout(f"{role} backend timed out after {attempts} attempts: {last}")
        raise BackendUnavailable(f"{role} backend unreachable after {attempts} attempts: {last}")

    def chat(
        self,
        role: str,
        prompt: str,
        images: tuple[ImagePart, ...] = (),
        system: str | None = None,
        max_tokens: int = 1024,
    ) -> ChatResponse:
        messages = []
        if system is not None:
            messages.append(ChatMessage(role="system", parts=(TextPart(system),)))
        parts: tuple = tuple(images) + (TextPart(prompt),)
        messages.append(ChatMessage(role="user", parts=parts))
        req = ChatRequest(
            messages=tuple(messages),
            temperature=self.config.temperature,
            top_p=self.config.top_p,
            max_tokens=max_tokens,
        )
        return self.complete(role, req)

    def complete_parsed(
        self,
        role: str,
        prompt: str,
        parser,
        images: tuple[ImagePart, ...] = (),
        nudge: str = REPROMPT_NUDGE,
    ):
        """Chat + parse with the re-prompt-once policy.

        On ParseError the request is retried once with a terse system
        nudge; a second ParseError propagates.
        """
        response = self.chat(role, prompt, images=images)
        try:
            return parser(response.text)
        except ParseError:
            retry = self.chat(role, prompt, images=images, system=nudge)
            return parser(retry.text)

    # -- embeddings -----------------------------------------------------

    def _check_dim(self, n: int) -> None:
        with self._dim_lock:
            if self._dim is None:
                self._dim = n
            elif self._dim != n:
                raise DimensionMismatch(f"encoder returned dim {n}, expected {self._dim}")

    @property
    def embedding_dim(self) -> int | None:
        return self._dim

    def _embed(self, role: str, modality: str, payload) -> Embedding:
        backend = self.backend_for(role)
        attempts = self.config.max_retries + 1
        last: TransportFailure | None = None
        with self._semaphores[role]:
            for attempt in range(attempts):
                if attempt > 0:
                    time.sleep(self.config.retry_backoff_s * (2 ** (attempt - 1)))
                self._count(role)
                try:
                    values = backend.embed(role, modality, payload)
                except TransportFailure as failure:
                    last = failure
                    continue
                self._check_dim(len(values))
                try:
                    return Embedding.unit(values)
                except ValueError as exc:
                    raise MalformedResponse(f"{role} returned a degenerate vector: {exc}")
        assert last is not None
        if last.timeout:
            raise Timeout(f"{role} backend timed out after {attempts} attempts: {last}")
        raise BackendUnavailable(f"{role} backend unreachable after {attempts} attempts: {last}")

    def embed_text(self, text: str, cache: Cache | None = None) -> Embedding:
        if not text:
            raise ValueError("cannot embed empty text")
        key = text_digest(text)
        if cache is not None:
            hit = cache.get(TEXT_EMBEDS, key)
            if hit is not None:
                return Embedding.from_dict(json.loads(hit))
        emb = self._embed("text_encoder", "text", text)
        if cache is not None:
            cache.put(TEXT_EMBEDS, key, json.dumps(emb.to_dict()))
        return emb

    def embed_image(self, part: ImagePart, content_hash: str, cache: Cache | None = None) -> Embedding:
        if cache is not None:
            hit = cache.get(IMAGE_EMBEDS, content_hash)
            if hit is not None:
                return Embedding.from_dict(json.loads(hit))
        emb = self._embed("image_encoder", "image", part)
        if cache is not None:
            cache.put(IMAGE_EMBEDS, content_hash, json.dumps(emb.to_dict()))
        return emb

    # -- health ---------------------------------------------------------

    def ping_all(self) -> dict[str, bool]:
        out = {}
        for role in ROLES:
            backend = self._backends.get(role)
            out[role] = bool(backend and backend.ping())
        return out

    def close(self) -> None:
        seen = set()
        for backend in self._backends.values():
            if id(backend) in seen:
                continue
            seen.add(id(backend))
            close = getattr(backend, "close", None)
            if close:
                close()


__all__ = [
    "Answer",
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "Gateway",
    "HttpBackend",
    "ImagePart",
    "MockBackend",
    "ROLES",
    "TextPart",
    "TransportFailure",
    "classify_answer",
    "env_var_for_role",
    "parse_evaluator_output",
    "parse_stage1_output",
    "parse_stage2_output",
    "parse_yes_no",
    "render_prompt1",
    "render_prompt2",
    "render_prompt3",
]
