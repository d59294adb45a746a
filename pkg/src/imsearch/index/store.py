"""Paired caption/image embedding matrices over the image database.

Exact dense retrieval only: the databases this engine targets stay small
enough (~1e5 rows) that brute-force cosine keeps the ranking semantics
literal. The index is immutable once built; matrices are float32 with
unit-norm rows, scores accumulate in float64.

File format (little-endian):

    magic   8 bytes  b"IMSIDX1\\n"
    hlen    u32      header length in bytes
    header  JSON     {version, n, dim, ids, uris, content_hashes,
                      captions: [{image_id, text, captioner_id}]}
    V_T     n*dim f32 row-major
    V_I     n*dim f32 row-major
    digest  32 bytes sha256 over everything above
"""

from __future__ import annotations

import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import kernels
from ..cache import CAPTIONS, Cache
from ..errors import CorruptIndex, DimensionMismatch
from ..model import Embedding, ImageRecord
from ..util import resolve_image_bytes, sha256_hex

MAGIC = b"IMSIDX1\n"
FORMAT_VERSION = 1
NORM_TOL = 1e-6


@dataclass(frozen=True)
class CaptionRecord:
    image_id: str
    text: str
    captioner_id: str

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"caption for {self.image_id} is empty")

    def to_dict(self) -> dict:
        return {"image_id": self.image_id, "text": self.text, "captioner_id": self.captioner_id}

    @classmethod
    def from_dict(cls, d: dict) -> "CaptionRecord":
        return cls(image_id=d["image_id"], text=d["text"], captioner_id=d["captioner_id"])


class EmbeddingIndex:
    """Aligned (ids, records, captions, V_T, V_I) over N database images."""

    def __init__(self, records, captions, v_text: np.ndarray, v_image: np.ndarray):
        records = tuple(records)
        self.captions: tuple[CaptionRecord, ...] = tuple(captions)
        # records mirror their caption text (CaptionRecord is canonical)
        self.records: tuple[ImageRecord, ...] = tuple(
            r if (i >= len(self.captions) or r.caption == self.captions[i].text)
            else ImageRecord(id=r.id, uri=r.uri, content_hash=r.content_hash, caption=self.captions[i].text)
            for i, r in enumerate(records)
        )
        self.image_ids: tuple[str, ...] = tuple(r.id for r in self.records)
        self.v_text = np.ascontiguousarray(v_text, dtype=np.float32)
        self.v_image = np.ascontiguousarray(v_image, dtype=np.float32)
        n = len(self.records)
        if len(self.captions) != n:
            raise ValueError(f"{len(self.captions)} captions for {n} records")
        if self.v_text.shape != self.v_image.shape or self.v_text.ndim != 2 or self.v_text.shape[0] != n:
            raise ValueError(
                f"matrix shapes {self.v_text.shape}/{self.v_image.shape} do not match N={n}"
            )
        if len(set(self.image_ids)) != n:
            raise ValueError("duplicate image ids in index")
        for cap, rec in zip(self.captions, self.records):
            if cap.image_id != rec.id:
                raise ValueError(f"caption/record misalignment at {rec.id}")
        for name, matrix in (("V_T", self.v_text), ("V_I", self.v_image)):
            if n:
                norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
                bad = np.abs(norms - 1.0) > NORM_TOL
                if bad.any():
                    raise ValueError(f"{name} row {int(np.argmax(bad))} is not unit-norm")
        self.v_text.flags.writeable = False
        self.v_image.flags.writeable = False
        self._by_id = {r.id: i for i, r in enumerate(self.records)}

    def __len__(self) -> int:
        return len(self.records)

    @property
    def dim(self) -> int:
        return int(self.v_text.shape[1])

    def position(self, image_id: str) -> int:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise KeyError(f"unknown image id {image_id!r}")

    def record(self, image_id: str) -> ImageRecord:
        return self.records[self.position(image_id)]

    def caption(self, image_id: str) -> CaptionRecord:
        return self.captions[self.position(image_id)]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id


def cosine_scores(query, matrix: np.ndarray) -> np.ndarray:
    """Cosine similarity of one unit vector against unit-norm rows.

    Plain dot products (inputs are normalized); float64 accumulation.
    """
    if isinstance(query, Embedding):
        vec = np.asarray(query.values, dtype=np.float64)
    else:
        vec = np.asarray(query, dtype=np.float64)
    if vec.ndim != 1 or matrix.ndim != 2 or matrix.shape[1] != vec.shape[0]:
        raise DimensionMismatch(
            f"query dim {vec.shape} incompatible with matrix {matrix.shape}"
        )
    return kernels.dot_scores(np.ascontiguousarray(matrix, dtype=np.float32), vec)


def argsort_desc(scores) -> np.ndarray:
    """Stable descending argsort (0-based positions)."""
    return kernels.argsort_desc(scores)


def caption_image(gateway, record: ImageRecord, cache: Cache | None = None, data: bytes | None = None) -> str:
    """Caption one image via the captioner role, cached by content hash."""
    if cache is not None:
        hit = cache.get(CAPTIONS, record.content_hash)
        if hit is not None:
            return json.loads(hit)["text"]
    part = _image_part(record, data, inline=gateway.config.inline_images)
    prompt = "Describe this image in one concise sentence."
    response = gateway.chat("captioner", prompt, images=(part,), max_tokens=256)
    text = response.text.strip()
    if cache is not None:
        cache.put(
            CAPTIONS,
            record.content_hash,
            json.dumps({"text": text, "captioner_id": response.backend_id}),
        )
    return text


def _image_part(record: ImageRecord, data: bytes | None, inline: bool):
    from ..gateway import ImagePart

    if inline and data is None:
        data = resolve_image_bytes(record.uri)
    return ImagePart(uri=record.uri, data=data)


def load_manifest(path) -> list[ImageRecord]:
    """Read a JSON-lines ingest manifest: one {id, uri} object per line."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON ({exc})")
        if "id" not in obj or "uri" not in obj:
            raise ValueError(f"{path}:{lineno}: manifest entries need id and uri")
        data = resolve_image_bytes(obj["uri"])
        records.append(ImageRecord.from_bytes(id=str(obj["id"]), uri=obj["uri"], data=data))
    return records


def ingest(images, gateway, cache: Cache | None = None, concurrency: int | None = None) -> EmbeddingIndex:
    """Caption and embed every image, preserving input order.

    Captions and both embedding kinds are cached by content hash, so
    re-ingesting unchanged images makes no captioner calls and a failed
    run resumes from the cache.
    """
    records = list(images)
    if not records:
        raise ValueError("ingest requires at least one image")
    workers = concurrency or gateway.config.concurrency

    def process(record: ImageRecord):
        data = resolve_image_bytes(record.uri)
        if record.content_hash != sha256_hex(data):
            record = ImageRecord.from_bytes(record.id, record.uri, data, record.caption)
        caption_text = record.caption or caption_image(gateway, record, cache, data=data)
        part = _image_part(record, data, inline=gateway.config.inline_images)
        text_emb = gateway.embed_text(caption_text, cache=cache)
        image_emb = gateway.embed_image(part, record.content_hash, cache=cache)
        stored = ImageRecord(
            id=record.id, uri=record.uri, content_hash=record.content_hash, caption=caption_text
        )
        cap = CaptionRecord(
            image_id=record.id,
            text=caption_text,
            captioner_id=getattr(gateway.backend_for("captioner"), "id", "captioner"),
        )
        return stored, cap, text_emb.values, image_emb.values

    if workers > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process, records))
    else:
        results = [process(r) for r in records]

    stored, caps, text_rows, image_rows = zip(*results)
    v_text = np.asarray(text_rows, dtype=np.float32)
    v_image = np.asarray(image_rows, dtype=np.float32)
    return EmbeddingIndex(stored, caps, v_text, v_image)


def save_index(index: EmbeddingIndex, path) -> None:
    header = {
        "version": FORMAT_VERSION,
        "n": len(index),
        "dim": index.dim,
        "ids": list(index.image_ids),
        "uris": [r.uri for r in index.records],
        "content_hashes": [r.content_hash for r in index.records],
        "captions": [c.to_dict() for c in index.captions],
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    payload = b"".join(
        [
            MAGIC,
            struct.pack("<I", len(header_bytes)),
            header_bytes,
            np.ascontiguousarray(index.v_text, dtype="<f4").tobytes(),
            np.ascontiguousarray(index.v_image, dtype="<f4").tobytes(),
        ]
    )
    digest = hashlib.sha256(payload).digest()
    Path(path).write_bytes(payload + digest)


def load_index(path) -> EmbeddingIndex:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptIndex(f"cannot read index file {path}: {exc}")
    if len(blob) < len(MAGIC) + 4 + 32:
        raise CorruptIndex("index file truncated")
    if blob[: len(MAGIC)] != MAGIC:
        raise CorruptIndex("bad magic; not an index file")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptIndex("checksum mismatch")
    (hlen,) = struct.unpack_from("<I", blob, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + hlen
    if header_end > len(body):
        raise CorruptIndex("header extends past end of file")
    try:
        header = json.loads(blob[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptIndex("header is not valid JSON")
    if header.get("version") != FORMAT_VERSION:
        raise CorruptIndex(f"unsupported index version {header.get('version')!r}")
    n, dim = header.get("n"), header.get("dim")
    ids = header.get("ids") or []
    uris = header.get("uris") or []
    hashes = header.get("content_hashes") or []
    caps = header.get("captions") or []
    if not (len(ids) == len(uris) == len(hashes) == len(caps) == n):
        raise CorruptIndex("header N disagrees with id/uri/hash/caption lists")
    expected = header_end + 2 * n * dim * 4
    if expected != len(body):
        raise CorruptIndex(
            f"payload size mismatch: header implies {expected} bytes, file has {len(body)}"
        )
    matrix_bytes = n * dim * 4
    v_text = np.frombuffer(body, dtype="<f4", count=n * dim, offset=header_end).reshape(n, dim)
    v_image = np.frombuffer(
        body, dtype="<f4", count=n * dim, offset=header_end + matrix_bytes
    ).reshape(n, dim)
    records = [
        ImageRecord(id=i, uri=u, content_hash=h, caption=c["text"])
        for i, u, h, c in zip(ids, uris, hashes, caps)
    ]
    captions = [CaptionRecord.from_dict(c) for c in caps]
    try:
        return EmbeddingIndex(records, captions, v_text.copy(), v_image.copy())
    except ValueError as exc:
        raise CorruptIndex(f"index payload inconsistent: {exc}")
