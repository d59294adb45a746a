"""Pipeline orchestration: one engine object shared by CLI, service, and
benchmark harness, so every surface runs the identical code path.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field

from .adapters import Session, SessionStore, adapt_chatir, adapt_cir, adapt_tir
from .cache import Cache
from .errors import IngestInProgress
from .gateway import Gateway
from .index import EmbeddingIndex, ingest
from .model import (
    EvaluatorVerdict,
    PipelineConfig,
    QueryKind,
    RankedList,
    RetrievalQuery,
    validate_query,
)
from .stages import Stage1Result, VerificationMatrix, run_stage1, run_stage2, run_stage3

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineResult:
    query: RetrievalQuery
    instruction: str
    ref_desc: str
    stage1: Stage1Result
    verification: VerificationMatrix | None
    verdicts: tuple[EvaluatorVerdict, ...]
    final: RankedList
    timings: dict = field(default_factory=dict)

    @property
    def trace(self):
        return self.final.trace

    def ranking_payload(self, top_k: int | None = None) -> dict:
        """Deterministic JSON-ready view of the final ranking + trace."""
        entries = self.final.entries if top_k is None else self.final.entries[:top_k]
        payload = {
            "stage": self.final.stage.value,
            "ranking": [e.to_dict() for e in entries],
            "trace": self.final.trace.to_dict(),
        }
        if self.verification is not None:
            payload["verification"] = self.verification.to_dict()
        return payload


class RetrievalEngine:
    def __init__(
        self,
        config: PipelineConfig,
        gateway: Gateway | None = None,
        index: EmbeddingIndex | None = None,
        cache: Cache | None = None,
        sessions: SessionStore | None = None,
    ):
        self.config = config
        self.gateway = gateway or Gateway.from_config(config)
        self.index = index
        self.cache = cache if cache is not None else Cache(config.cache_path)
        self.sessions = sessions or SessionStore(config.state_dir)
        self._ingest_lock = threading.Lock()

    # -- ingest ----------------------------------------------------------

    def ingest_images(self, images) -> EmbeddingIndex:
        """Build a fresh index and swap it in atomically.

        A second concurrent ingest is refused (IngestInProgress).
        """
        if not self._ingest_lock.acquire(blocking=False):
            raise IngestInProgress("an ingest is already running")
        try:
            new_index = ingest(images, self.gateway, cache=self.cache)
            self.index = new_index
            return new_index
        finally:
            self._ingest_lock.release()

    def require_index(self) -> EmbeddingIndex:
        if self.index is None:
            raise ValueError("no index loaded; ingest images or load an index file first")
        return self.index

    # -- query -----------------------------------------------------------

    def adapt(self, query: RetrievalQuery, session: Session | None = None) -> tuple[str, str]:
        if query.kind is QueryKind.TIR:
            return adapt_tir(query.text)
        if query.kind is QueryKind.CIR:
            assert query.reference_image is not None
            return adapt_cir(query.text, query.reference_image, self.gateway, self.cache)
        if session is None:
            session = Session(session_id="adhoc", kind=QueryKind.CHAT_IR)
        return adapt_chatir(session, query.text)

    def run(
        self,
        query: RetrievalQuery,
        stages: int = 3,
        session: Session | None = None,
    ) -> PipelineResult:
        """Validate, adapt, then run stages 1..``stages`` (ablation knob)."""
        if stages not in (1, 2, 3):
            raise ValueError(f"stages must be 1, 2, or 3, got {stages}")
        validate_query(query)
        index = self.require_index()
        config = self.config
        timings: dict[str, float] = {}

        t0 = time.perf_counter()
        instruction, ref_desc = self.adapt(query, session=session)
        timings["adapt_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        stage1 = run_stage1(instruction, ref_desc, index, self.gateway, config.tau, self.cache)
        timings["stage1_s"] = time.perf_counter() - t0
        final = stage1.ranking

        verification: VerificationMatrix | None = None
        if stages >= 2:
            t0 = time.perf_counter()
            k = min(config.k_verify, len(index))
            verification, final = run_stage2(
                instruction, final, index, self.gateway, k, self.cache
            )
            timings["stage2_s"] = time.perf_counter() - t0

        verdicts: tuple[EvaluatorVerdict, ...] = ()
        if stages >= 3:
            t0 = time.perf_counter()
            verdicts, final = run_stage3(
                instruction,
                query.reference_image,
                final,
                index,
                self.gateway,
                config.alpha_evaluate,
            )
            timings["stage3_s"] = time.perf_counter() - t0

        result = PipelineResult(
            query=query,
            instruction=instruction,
            ref_desc=ref_desc,
            stage1=stage1,
            verification=verification,
            verdicts=verdicts,
            final=final,
            timings=timings,
        )
        if session is not None:
            self._record_round(session, result)
        return result

    def _record_round(self, session: Session, result: PipelineResult) -> None:
        from .adapters import RoundRecord

        descs = result.stage1.descriptions
        top = [e.to_dict() for e in result.final.entries[: self.config.top_k_return]]
        session.rounds.append(
            RoundRecord(
                user_text=result.query.text,
                ref_desc=result.ref_desc,
                stage1_result={
                    "atomic_instructions": [a.to_dict() for a in result.stage1.atomic_instructions],
                    "descriptions": descs.to_dict(),
                },
                final_ranking=top,
            )
        )
        if session.kind is QueryKind.CHAT_IR:
            if self.config.chat_ref == "top1_caption" and result.final.entries:
                top_id = result.final.entries[0].image_id
                session.current_ref_desc = self.require_index().caption(top_id).text
            else:
                session.current_ref_desc = descs.comprehensive_synthesis
        self.sessions.save(session)

    def run_round(
        self,
        session_id: str,
        text: str,
        reference=None,
        stages: int = 3,
    ) -> tuple[Session, PipelineResult]:
        """One session round (any kind), serialized per session id."""
        with self.sessions.lock_for(session_id):
            session = self.sessions.get(session_id)
            query = RetrievalQuery(
                kind=session.kind,
                text=text,
                reference_image=reference,
                dialog=session.dialog(),
            )
            result = self.run(query, stages=stages, session=session)
            return session, result
