"""Small shared helpers: hashing, canonical JSON, image byte resolution."""

from __future__ import annotations

import base64
import hashlib
import json
import urllib.parse
from pathlib import Path


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def text_digest(text: str) -> str:
    return sha256_hex(text.encode("utf-8"))


def canonical_json(obj) -> str:
    """Deterministic JSON used for digests and byte-compare tests."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def resolve_image_bytes(uri: str) -> bytes:
    """Fetch the raw bytes behind an image locator.

    Supports data: URIs (base64 or percent-encoded), file:// URIs, bare
    filesystem paths, and http(s) URLs.
    """
    if uri.startswith("data:"):
        header, _, payload = uri.partition(",")
        if ";base64" in header:
            return base64.b64decode(payload)
        return urllib.parse.unquote_to_bytes(payload)
    if uri.startswith("file://"):
        return Path(urllib.parse.urlparse(uri).path).read_bytes()
    if uri.startswith(("http://", "https://")):
        import httpx

        resp = httpx.get(uri, timeout=30.0)
        resp.raise_for_status()
        return resp.content
    return Path(uri).read_bytes()


_MAGIC_TYPES = [
    (b"\x89PNG\r\n\x1a\n", "image/png"),
    (b"\xff\xd8\xff", "image/jpeg"),
    (b"GIF87a", "image/gif"),
    (b"GIF89a", "image/gif"),
    (b"RIFF", "image/webp"),
    (b"BM", "image/bmp"),
]


def sniff_content_type(data: bytes) -> str:
    for magic, ctype in _MAGIC_TYPES:
        if data.startswith(magic):
            return ctype
    return "application/octet-stream"
