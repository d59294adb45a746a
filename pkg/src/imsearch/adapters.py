"""Task adapters: map TIR, CIR, and Chat-IR inputs onto the one pipeline.

Every task reduces to an (instruction, reference description) pair:
TIR pairs the text with the blank-image description, CIR pairs it with
the reference image's caption, and Chat-IR pairs each round's feedback
with the previous round's comprehensive synthesis (or the top-1 result's
caption behind the ``chat_ref=top1_caption`` config switch).
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .cache import Cache
from .errors import EmptyText, SessionNotFound
from .gateway import Gateway
from .index.store import caption_image
from .model import ImageRecord, QueryKind

BLANK_REFERENCE_TEXT = "A blank image."


def adapt_tir(text: str) -> tuple[str, str]:
    """TIR: the description paired with the blank-image reference."""
    if not text or not text.strip():
        raise EmptyText("TIR query text is empty")
    return text, BLANK_REFERENCE_TEXT


def adapt_cir(
    instruction: str, ref_image: ImageRecord, gateway: Gateway, cache: Cache | None = None
) -> tuple[str, str]:
    """CIR: the instruction paired with the reference image's caption."""
    if not instruction or not instruction.strip():
        raise EmptyText("CIR instruction is empty")
    ref_desc = caption_image(gateway, ref_image, cache)
    return instruction, ref_desc


@dataclass
class RoundRecord:
    user_text: str
    ref_desc: str
    stage1_result: dict
    final_ranking: list[dict]

    def to_dict(self) -> dict:
        return {
            "user_text": self.user_text,
            "ref_desc": self.ref_desc,
            "stage1_result": self.stage1_result,
            "final_ranking": self.final_ranking,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            user_text=d["user_text"],
            ref_desc=d["ref_desc"],
            stage1_result=d.get("stage1_result", {}),
            final_ranking=d.get("final_ranking", []),
        )


@dataclass
class Session:
    """Multi-round retrieval state. Rounds are append-only."""

    session_id: str
    kind: QueryKind
    rounds: list[RoundRecord] = field(default_factory=list)
    current_ref_desc: str = BLANK_REFERENCE_TEXT

    @property
    def round_count(self) -> int:
        return len(self.rounds)

    def dialog(self) -> tuple[str, ...]:
        return tuple(r.user_text for r in self.rounds)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "kind": self.kind.value,
            "rounds": [r.to_dict() for r in self.rounds],
            "current_ref_desc": self.current_ref_desc,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Session":
        return cls(
            session_id=d["session_id"],
            kind=QueryKind(d["kind"]),
            rounds=[RoundRecord.from_dict(r) for r in d.get("rounds", [])],
            current_ref_desc=d.get("current_ref_desc", BLANK_REFERENCE_TEXT),
        )


def adapt_chatir(session: Session, new_feedback: str) -> tuple[str, str]:
    """Chat-IR: feedback paired with the carried-forward description.

    Round 1 uses the blank-image text; later rounds use whatever the
    previous round stored (comprehensive synthesis by default).
    """
    if not new_feedback or not new_feedback.strip():
        raise EmptyText("Chat-IR feedback is empty")
    return new_feedback, session.current_ref_desc


class SessionStore:
    """One JSON file per session under a state directory.

    In-memory only when no directory is given. Each session is
    single-writer; per-id locks serialize concurrent access.
    """

    def __init__(self, state_dir: str | None = None):
        self._dir = Path(state_dir) if state_dir else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        assert self._dir is not None
        return self._dir / f"{session_id}.json"

    def create(self, kind: QueryKind) -> Session:
        session = Session(session_id=uuid.uuid4().hex, kind=kind)
        self.save(session)
        return session

    def get(self, session_id: str) -> Session:
        if self._dir is not None:
            path = self._path(session_id)
            if not path.exists():
                raise SessionNotFound(f"no session {session_id!r}")
            return Session.from_dict(json.loads(path.read_text(encoding="utf-8")))
        try:
            return self._mem[session_id]
        except KeyError:
            raise SessionNotFound(f"no session {session_id!r}")

    def save(self, session: Session) -> None:
        if self._dir is not None:
            path = self._path(session.session_id)
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(session.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8")
            tmp.replace(path)
        else:
            self._mem[session.session_id] = session
