"""Stage 1: decompose the query, synthesize target descriptions at three
granularities, fuse dual-path similarity scores, and rank the database.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..cache import Cache
from ..errors import DimensionMismatch
from ..gateway import Gateway, parse_stage1_output, render_prompt1
from ..index import EmbeddingIndex
from ..model import (
    AtomicInstruction,
    InstructionKind,
    RankedEntry,
    RankedList,
    Stage,
    StageTrace,
    TargetDescriptions,
)

log = logging.getLogger(__name__)

SYNTHETIC_RETENTION_NOTE = "stage1: empty decomposition; synthesized a Retention instruction from the raw text"


@dataclass(frozen=True)
class Stage1Result:
    atomic_instructions: tuple[AtomicInstruction, ...]
    descriptions: TargetDescriptions
    scores: np.ndarray
    ranking: RankedList

    @property
    def notes(self) -> tuple[str, ...]:
        return self.ranking.trace.notes


def synthesize(
    instruction: str, ref_desc: str, gateway: Gateway
) -> tuple[tuple[AtomicInstruction, ...], TargetDescriptions, tuple[str, ...]]:
    """Run the stage-1 reasoner and normalize its output.

    Returns (instructions, descriptions, notes). Guarantees at least one
    instruction (a synthetic Retention wrapping the raw text if the model
    decomposed to nothing) and three non-empty descriptions (the raw
    instruction substitutes for any empty granularity).
    """
    prompt = render_prompt1(instruction, ref_desc)
    instructions, descriptions = gateway.complete_parsed("reasoner", prompt, parse_stage1_output)
    notes: list[str] = []
    if not instructions:
        instructions = (AtomicInstruction(kind=InstructionKind.RETENTION, text=instruction),)
        notes.append(SYNTHETIC_RETENTION_NOTE)
        log.warning("reasoner returned zero atomic instructions; using synthetic retention")
    filled = {}
    for field_name, value in (
        ("core_elements", descriptions.core_elements),
        ("enhanced_details", descriptions.enhanced_details),
        ("comprehensive_synthesis", descriptions.comprehensive_synthesis),
    ):
        if not value.strip():
            filled[field_name] = instruction
            notes.append(f"stage1: empty {field_name}; substituted the raw instruction")
        else:
            filled[field_name] = value
    descriptions = TargetDescriptions(**filled)
    return instructions, descriptions, tuple(notes)


def fuse_scores(
    descriptions: TargetDescriptions,
    index: EmbeddingIndex,
    tau: float,
    gateway: Gateway,
    cache: Cache | None = None,
) -> np.ndarray:
    """Dual-path score fusion over the whole database.

    s_j = (1/3) * sum over the three granularities of
          tau * cos(v_g, caption_j) + (1 - tau) * cos(v_g, image_j).
    """
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if len(index) == 0:
        raise ValueError("index is empty")
    rows = []
    for text in descriptions.as_ordered():
        emb = gateway.embed_text(text, cache=cache)
        if emb.dim != index.dim:
            raise DimensionMismatch(f"encoder dim {emb.dim} != index dim {index.dim}")
        rows.append(emb.values)
    queries = np.asarray(rows, dtype=np.float64)
    return kernels.fused_scores(index.v_text, index.v_image, queries, float(tau))


def rank_stage1(scores, image_ids, trace: StageTrace | None = None) -> RankedList:
    """Stable descending ranking; records stage1_rank 1..N."""
    arr = np.asarray(scores, dtype=np.float64)
    ids = tuple(image_ids)
    if arr.shape != (len(ids),):
        raise ValueError(f"scores shape {arr.shape} != number of ids {len(ids)}")
    order = kernels.argsort_desc(arr)
    entries = tuple(
        RankedEntry(image_id=ids[int(pos)], stage1_score=float(arr[int(pos)]), stage1_rank=rank)
        for rank, pos in enumerate(order, start=1)
    )
    return RankedList(entries=entries, stage=Stage.STAGE1, trace=trace or StageTrace())


def run_stage1(
    instruction: str,
    ref_desc: str,
    index: EmbeddingIndex,
    gateway: Gateway,
    tau: float,
    cache: Cache | None = None,
) -> Stage1Result:
    instructions, descriptions, notes = synthesize(instruction, ref_desc, gateway)
    scores = fuse_scores(descriptions, index, tau, gateway, cache=cache)
    trace = StageTrace(
        atomic_instructions=instructions, descriptions=descriptions, notes=notes
    )
    ranking = rank_stage1(scores, index.image_ids, trace=trace)
    return Stage1Result(
        atomic_instructions=instructions,
        descriptions=descriptions,
        scores=scores,
        ranking=ranking,
    )
