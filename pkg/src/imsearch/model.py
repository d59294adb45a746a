"""Core domain types for the unified retrieval pipeline.

Everything here is an immutable value (frozen dataclasses over tuples), so
instances can be shared freely across worker threads. Each type has a
canonical JSON form — snake_case field names, enum string values — used by
the service API, trace dumps, and the UI.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from .errors import (
    ConfigError,
    EmptyText,
    MissingReference,
    UnexpectedReference,
)
from .util import sha256_hex


class QueryKind(str, enum.Enum):
    TIR = "TIR"
    CIR = "CIR"
    CHAT_IR = "ChatIR"


class Stage(str, enum.Enum):
    STAGE1 = "Stage1"
    STAGE2 = "Stage2"
    STAGE3 = "Stage3"


class InstructionKind(str, enum.Enum):
    ADDITION = "Addition"
    REMOVAL = "Removal"
    MODIFICATION = "Modification"
    COMPARISON = "Comparison"
    RETENTION = "Retention"


@dataclass(frozen=True)
class ImageRecord:
    """One database image: opaque bytes behind a locator, plus metadata."""

    id: str
    uri: str
    content_hash: str
    caption: str | None = None

    @classmethod
    def from_bytes(cls, id: str, uri: str, data: bytes, caption: str | None = None) -> "ImageRecord":
        return cls(id=id, uri=uri, content_hash=sha256_hex(data), caption=caption)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "uri": self.uri,
            "content_hash": self.content_hash,
            "caption": self.caption,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageRecord":
        return cls(
            id=d["id"],
            uri=d["uri"],
            content_hash=d["content_hash"],
            caption=d.get("caption"),
        )


@dataclass(frozen=True)
class Embedding:
    """A real vector in the joint text/image space."""

    values: tuple[float, ...]
    dim: int
    normalized: bool

    def __post_init__(self):
        if len(self.values) != self.dim or self.dim <= 0:
            raise ValueError(f"embedding has {len(self.values)} values, dim={self.dim}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding contains non-finite entries")
        if self.normalized:
            norm = math.sqrt(sum(v * v for v in self.values))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"embedding marked normalized but has norm {norm}")

    @classmethod
    def unit(cls, values) -> "Embedding":
        """Build a normalized embedding from arbitrary finite values."""
        vals = [float(v) for v in values]
        norm = math.sqrt(sum(v * v for v in vals))
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        return cls(values=tuple(v / norm for v in vals), dim=len(vals), normalized=True)

    def to_dict(self) -> dict:
        return {"values": list(self.values), "dim": self.dim, "normalized": self.normalized}

    @classmethod
    def from_dict(cls, d: dict) -> "Embedding":
        return cls(values=tuple(float(v) for v in d["values"]), dim=d["dim"], normalized=d["normalized"])


@dataclass(frozen=True)
class RetrievalQuery:
    """Unified input across the three task kinds.

    ``text`` is the description (TIR), the modification instruction (CIR),
    or the latest dialog turn (ChatIR); ``dialog`` holds prior turns.
    """

    kind: QueryKind
    text: str
    reference_image: ImageRecord | None = None
    dialog: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "text": self.text,
            "reference_image": self.reference_image.to_dict() if self.reference_image else None,
            "dialog": list(self.dialog),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RetrievalQuery":
        ref = d.get("reference_image")
        return cls(
            kind=QueryKind(d["kind"]),
            text=d["text"],
            reference_image=ImageRecord.from_dict(ref) if ref else None,
            dialog=tuple(d.get("dialog") or ()),
        )


def validate_query(query: RetrievalQuery) -> RetrievalQuery:
    """Check kind-specific invariants; returns the query or raises.

    Raises MissingReference (CIR without an image), UnexpectedReference
    (TIR with one), or EmptyText.
    """
    if not query.text or not query.text.strip():
        raise EmptyText(f"{query.kind.value} query has empty text")
    if query.kind is QueryKind.CIR and query.reference_image is None:
        raise MissingReference("CIR query requires a reference image")
    if query.kind is QueryKind.TIR and query.reference_image is not None:
        raise UnexpectedReference("TIR query must not carry a reference image")
    return query


@dataclass(frozen=True)
class AtomicInstruction:
    """One of the five operations on visual elements."""

    kind: InstructionKind
    text: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "AtomicInstruction":
        return cls(kind=InstructionKind(d["kind"]), text=d["text"])


@dataclass(frozen=True)
class TargetDescriptions:
    """The three granularity levels of the synthesized target description."""

    core_elements: str
    enhanced_details: str
    comprehensive_synthesis: str

    def as_ordered(self) -> tuple[str, str, str]:
        """Fixed summation order for score fusion: CE, ED, CS."""
        return (self.core_elements, self.enhanced_details, self.comprehensive_synthesis)

    def to_dict(self) -> dict:
        return {
            "core_elements": self.core_elements,
            "enhanced_details": self.enhanced_details,
            "comprehensive_synthesis": self.comprehensive_synthesis,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetDescriptions":
        return cls(
            core_elements=d["core_elements"],
            enhanced_details=d["enhanced_details"],
            comprehensive_synthesis=d["comprehensive_synthesis"],
        )


@dataclass(frozen=True)
class Proposition:
    """A verifiable predicate: statement, yes/no question, expected truth."""

    statement: str
    question: str
    truth_value: bool

    def to_dict(self) -> dict:
        return {"statement": self.statement, "question": self.question, "truth_value": self.truth_value}

    @classmethod
    def from_dict(cls, d: dict) -> "Proposition":
        return cls(statement=d["statement"], question=d["question"], truth_value=bool(d["truth_value"]))


@dataclass(frozen=True)
class EvaluatorVerdict:
    image_id: str
    accepted: bool
    justification: str

    def to_dict(self) -> dict:
        return {"image_id": self.image_id, "accepted": self.accepted, "justification": self.justification}

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluatorVerdict":
        return cls(image_id=d["image_id"], accepted=bool(d["accepted"]), justification=d["justification"])


@dataclass(frozen=True)
class StageTrace:
    """Interpretability surface accumulated as a query moves through stages."""

    atomic_instructions: tuple[AtomicInstruction, ...] = ()
    descriptions: TargetDescriptions | None = None
    propositions: tuple[Proposition, ...] = ()
    evaluator_verdicts: tuple[EvaluatorVerdict, ...] = ()
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "atomic_instructions": [a.to_dict() for a in self.atomic_instructions],
            "descriptions": self.descriptions.to_dict() if self.descriptions else None,
            "propositions": [p.to_dict() for p in self.propositions],
            "evaluator_verdicts": [v.to_dict() for v in self.evaluator_verdicts],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StageTrace":
        descs = d.get("descriptions")
        return cls(
            atomic_instructions=tuple(AtomicInstruction.from_dict(a) for a in d.get("atomic_instructions", ())),
            descriptions=TargetDescriptions.from_dict(descs) if descs else None,
            propositions=tuple(Proposition.from_dict(p) for p in d.get("propositions", ())),
            evaluator_verdicts=tuple(EvaluatorVerdict.from_dict(v) for v in d.get("evaluator_verdicts", ())),
            notes=tuple(d.get("notes", ())),
        )


@dataclass(frozen=True)
class RankedEntry:
    """One candidate with its per-stage keys.

    ``stage2_count`` is None until verified; -1 is the sentinel for a
    candidate whose verification failed (ranks below count 0).
    ``stage3_flag`` is None until evaluated.
    """

    image_id: str
    stage1_score: float
    stage1_rank: int
    stage2_count: int | None = None
    stage3_flag: bool | None = None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "stage1_score": self.stage1_score,
            "stage1_rank": self.stage1_rank,
            "stage2_count": self.stage2_count,
            "stage3_flag": self.stage3_flag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankedEntry":
        return cls(
            image_id=d["image_id"],
            stage1_score=float(d["stage1_score"]),
            stage1_rank=int(d["stage1_rank"]),
            stage2_count=d.get("stage2_count"),
            stage3_flag=d.get("stage3_flag"),
        )


@dataclass(frozen=True)
class RankedList:
    """Ordered candidates after a given stage, with the shared trace."""

    entries: tuple[RankedEntry, ...]
    stage: Stage
    trace: StageTrace = field(default_factory=StageTrace)

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("ranked list contains duplicate image ids")
        ranks = sorted(e.stage1_rank for e in self.entries)
        if ranks != list(range(1, len(self.entries) + 1)):
            raise ValueError("stage1_rank values must be a permutation of 1..N")
        # counts are bounded by M when the trace carries the propositions;
        # a bare list (standalone rerank) can only check the -1 sentinel floor
        max_count = len(self.trace.propositions) if self.trace.propositions else None
        for e in self.entries:
            if e.stage2_count is None:
                continue
            if e.stage2_count < -1 or (max_count is not None and e.stage2_count > max_count):
                raise ValueError(
                    f"stage2_count {e.stage2_count} outside [-1, {max_count}] for {e.image_id}"
                )

    def ids(self) -> tuple[str, ...]:
        return tuple(e.image_id for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "stage": self.stage.value,
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankedList":
        return cls(
            entries=tuple(RankedEntry.from_dict(e) for e in d["entries"]),
            stage=Stage(d["stage"]),
            trace=StageTrace.from_dict(d.get("trace") or {}),
        )


_ROLES = ("captioner", "reasoner", "verifier", "evaluator", "text_encoder", "image_encoder")


@dataclass(frozen=True)
class PipelineConfig:
    """Run-wide knobs. The retrieval hyperparameters default to the
    reference operating point: tau=0.15, k_verify=20, alpha_evaluate=3,
    temperature=0, top_p=1.
    """

    tau: float = 0.15
    k_verify: int = 20
    alpha_evaluate: int = 3
    temperature: float = 0.0
    top_p: float = 1.0
    backends: tuple[tuple[str, str], ...] = ()
    max_retries: int = 2
    retry_backoff_s: float = 0.1
    timeout_s: float = 30.0
    concurrency: int = 8
    top_k_return: int = 50
    chat_ref: str = "t_cs"
    inline_images: bool = True
    cache_path: str | None = None
    state_dir: str | None = None

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if self.k_verify < 1:
            raise ConfigError(f"k_verify must be >= 1, got {self.k_verify}")
        if not (1 <= self.alpha_evaluate <= self.k_verify):
            raise ConfigError(
                f"alpha_evaluate must lie in [1, k_verify={self.k_verify}], got {self.alpha_evaluate}"
            )
        if self.temperature < 0.0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if not (0.0 < self.top_p <= 1.0):
            raise ConfigError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.max_retries < 0 or self.concurrency < 1 or self.top_k_return < 1:
            raise ConfigError("max_retries >= 0, concurrency >= 1, top_k_return >= 1 required")
        if self.chat_ref not in ("t_cs", "top1_caption"):
            raise ConfigError(f"chat_ref must be 't_cs' or 'top1_caption', got {self.chat_ref!r}")
        for role, _url in self.backends:
            if role not in _ROLES:
                raise ConfigError(f"unknown backend role {role!r}; expected one of {_ROLES}")

    def backend_url(self, role: str) -> str | None:
        for r, url in self.backends:
            if r == role:
                return url
        return None

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "k_verify": self.k_verify,
            "alpha_evaluate": self.alpha_evaluate,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "backends": {r: u for r, u in self.backends},
            "max_retries": self.max_retries,
            "retry_backoff_s": self.retry_backoff_s,
            "timeout_s": self.timeout_s,
            "concurrency": self.concurrency,
            "top_k_return": self.top_k_return,
            "chat_ref": self.chat_ref,
            "inline_images": self.inline_images,
            "cache_path": self.cache_path,
            "state_dir": self.state_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        kwargs = dict(d)
        backends = kwargs.pop("backends", {})
        if isinstance(backends, dict):
            backends = tuple(backends.items())
        else:
            backends = tuple((r, u) for r, u in backends)
        known = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
        unknown = set(kwargs) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(backends=backends, **kwargs)


def to_json(obj) -> str:
    """Canonical JSON encoding for any core type (insertion-ordered keys)."""
    return json.dumps(obj.to_dict(), ensure_ascii=False)


def from_json(cls, payload: str):
    return cls.from_dict(json.loads(payload))
