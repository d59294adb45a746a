"""Wire types and the HTTP backend client.

The wire protocol is a chat-completion-style JSON POST plus an
embeddings-style JSON POST (documented in docs/protocol.md), so any
OpenAI-compatible shim or custom server can serve a role:

    POST {endpoint}/chat   {messages[], temperature, top_p, max_tokens} -> {text}
    POST {endpoint}/embed  {modality: "text"|"image", input}            -> {values[], dim}
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

import httpx

from ..errors import MalformedResponse
from ..util import sha256_hex


class TransportFailure(Exception):
    """Internal, retryable transport-level failure."""

    def __init__(self, message: str, timeout: bool = False):
        super().__init__(message)
        self.timeout = timeout


@dataclass(frozen=True)
class TextPart:
    text: str

    def to_wire(self) -> dict:
        return {"type": "text", "text": self.text}


@dataclass(frozen=True)
class ImagePart:
    """Image attachment carried as a URI, raw bytes, or both.

    When bytes are present they travel base64-encoded; a URI rides along
    as an identifier the server may prefer to fetch itself.
    """

    uri: str | None = None
    data: bytes | None = None

    def __post_init__(self):
        if self.uri is None and self.data is None:
            raise ValueError("image part needs a uri or bytes")

    def idents(self) -> tuple[str, ...]:
        out = []
        if self.uri:
            out.append(self.uri)
        if self.data is not None:
            out.append("sha256:" + sha256_hex(self.data))
        return tuple(out)

    def to_wire(self) -> dict:
        part: dict = {"type": "image"}
        if self.uri:
            part["uri"] = self.uri
        if self.data is not None:
            part["b64"] = base64.b64encode(self.data).decode("ascii")
        return part


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user"
    parts: tuple

    def to_wire(self) -> dict:
        return {"role": self.role, "parts": [p.to_wire() for p in self.parts]}


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float
    top_p: float
    max_tokens: int

    def __post_init__(self):
        n_images = sum(
            1 for m in self.messages for p in m.parts if isinstance(p, ImagePart)
        )
        if n_images > 2:
            raise ValueError(f"at most 2 image attachments per request, got {n_images}")

    def to_wire(self) -> dict:
        return {
            "messages": [m.to_wire() for m in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        }

    def text_content(self) -> str:
        return "\n".join(
            p.text for m in self.messages for p in m.parts if isinstance(p, TextPart)
        )

    def image_parts(self) -> tuple[ImagePart, ...]:
        return tuple(p for m in self.messages for p in m.parts if isinstance(p, ImagePart))


@dataclass(frozen=True)
class ChatResponse:
    text: str
    latency_ms: int
    backend_id: str


def embed_input_wire(modality: str, payload) -> dict:
    if modality == "text":
        return {"modality": "text", "input": payload}
    part: ImagePart = payload
    body: dict = {}
    if part.uri:
        body["uri"] = part.uri
    if part.data is not None:
        body["b64"] = base64.b64encode(part.data).decode("ascii")
    return {"modality": "image", "input": body}


class HttpBackend:
    """One role endpoint speaking the documented wire protocol."""

    def __init__(self, base_url: str, timeout_s: float = 30.0, transport=None):
        self.base_url = base_url.rstrip("/")
        self.id = self.base_url
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self._client.post(self.base_url + path, json=body)
        except httpx.TimeoutException as exc:
            raise TransportFailure(f"timeout calling {self.base_url}{path}: {exc}", timeout=True)
        except httpx.HTTPError as exc:
            raise TransportFailure(f"transport error calling {self.base_url}{path}: {exc}")
        if resp.status_code >= 500:
            raise TransportFailure(f"{self.base_url}{path} returned {resp.status_code}")
        if resp.status_code >= 400:
            raise MalformedResponse(f"{self.base_url}{path} returned {resp.status_code}")
        try:
            data = resp.json()
        except ValueError:
            raise MalformedResponse(f"{self.base_url}{path} returned non-JSON body")
        if not isinstance(data, dict):
            raise MalformedResponse(f"{self.base_url}{path} returned non-object JSON")
        return data

    def complete(self, role: str, req: ChatRequest) -> str:
        data = self._post("/chat", req.to_wire())
        text = data.get("text")
        if not isinstance(text, str):
            raise MalformedResponse(f"chat response from {self.base_url} lacks 'text'")
        return text

    def embed(self, role: str, modality: str, payload) -> list[float]:
        data = self._post("/embed", embed_input_wire(modality, payload))
        values = data.get("values")
        if not isinstance(values, list) or not values:
            raise MalformedResponse(f"embed response from {self.base_url} lacks 'values'")
        return [float(v) for v in values]

    def ping(self) -> bool:
        try:
            resp = self._client.get(self.base_url + "/health")
            return resp.status_code < 400
        except httpx.HTTPError:
            return False

    def close(self) -> None:
        self._client.close()
