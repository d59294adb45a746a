"""Stage 2: generate predicate propositions, verify the top-k candidates
with the verifier LMM, count satisfied predicates, and stably re-rank.

One verifier call per (candidate, proposition) pair; answers are cached
by (image content hash, question digest). A candidate whose verification
dies on transport failure gets the -1 sentinel: it ranks below count 0
but keeps its stage-1 order among failures.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..cache import VERIFIER, Cache
from ..errors import BackendUnavailable
from ..gateway import Answer, Gateway, ImagePart, classify_answer, parse_stage2_output, render_prompt2
from ..index import EmbeddingIndex
from ..model import (
    AtomicInstruction,
    ImageRecord,
    Proposition,
    RankedEntry,
    RankedList,
    Stage,
    StageTrace,
)
from ..util import resolve_image_bytes, text_digest

log = logging.getLogger(__name__)

FAILED_COUNT = -1


def count_satisfied(answers, propositions) -> int:
    """Relaxation count: answers agreeing with their proposition's truth.

    Ambiguous answers never count.
    """
    answers = tuple(answers)
    propositions = tuple(propositions)
    if len(answers) != len(propositions):
        raise ValueError(f"{len(answers)} answers for {len(propositions)} propositions")
    return sum(1 for ans, prop in zip(answers, propositions) if ans.matches(prop.truth_value))


@dataclass(frozen=True)
class VerificationMatrix:
    """Per-candidate, per-proposition verifier answers and match counts."""

    candidate_ids: tuple[str, ...]
    propositions: tuple[Proposition, ...]
    answers: tuple[tuple[Answer, ...], ...]
    counts: tuple[int, ...]
    failed_ids: tuple[str, ...] = ()

    def __post_init__(self):
        k, m = len(self.candidate_ids), len(self.propositions)
        if len(self.answers) != k or len(self.counts) != k:
            raise ValueError("answers/counts not aligned with candidates")
        for j, row in enumerate(self.answers):
            if len(row) != m:
                raise ValueError(f"answer row {j} has {len(row)} entries, expected {m}")
            expected = count_satisfied(row, self.propositions)
            if self.counts[j] != expected:
                raise ValueError(
                    f"count for {self.candidate_ids[j]} is {self.counts[j]}, recount gives {expected}"
                )

    def to_dict(self) -> dict:
        return {
            "candidate_ids": list(self.candidate_ids),
            "propositions": [p.to_dict() for p in self.propositions],
            "answers": [[a.value for a in row] for row in self.answers],
            "counts": list(self.counts),
            "failed_ids": list(self.failed_ids),
        }


def derive_propositions(
    instruction: str, atomic_instructions, gateway: Gateway
) -> tuple[Proposition, ...]:
    """Prompt2 round-trip: atomic instructions -> M propositions."""
    insts = tuple(atomic_instructions)
    prompt = render_prompt2(instruction, insts)
    return gateway.complete_parsed("reasoner", prompt, parse_stage2_output)


def _candidate_part(image: ImageRecord, inline: bool) -> ImagePart:
    data = resolve_image_bytes(image.uri) if inline else None
    return ImagePart(uri=image.uri, data=data)


def verify_candidate(
    image: ImageRecord,
    propositions,
    gateway: Gateway,
    cache: Cache | None = None,
) -> tuple[int, tuple[Answer, ...]]:
    """Ask the verifier every question against one candidate image.

    Returns (count of satisfied propositions, per-question answers).
    Ambiguous answers never count. BackendUnavailable propagates; the
    stage runner maps it to the -1 sentinel.
    """
    props = tuple(propositions)
    if not props:
        raise ValueError("verify_candidate requires at least one proposition")
    part = _candidate_part(image, gateway.config.inline_images)
    answers: list[Answer] = []
    for prop in props:
        key = image.content_hash + ":" + text_digest(prop.question)
        cached = cache.get(VERIFIER, key) if cache is not None else None
        if cached is not None:
            answer = Answer(cached)
        else:
            prompt = (
                "Look at the image and answer the question with a single Yes or No.\n"
                f"Question: {prop.question}"
            )
            response = gateway.chat("verifier", prompt, images=(part,), max_tokens=8)
            answer = classify_answer(response.text)
            if cache is not None:
                cache.put(VERIFIER, key, answer.value)
        answers.append(answer)
    return count_satisfied(answers, props), tuple(answers)


def rerank_stage2(stage1: RankedList, counts, k: int, trace: StageTrace | None = None) -> RankedList:
    """Reorder the first k entries by (count desc, stage1_rank asc).

    Entries beyond k keep their stage-1 order after the reordered block.
    """
    counts = list(counts)
    if k > len(stage1.entries):
        raise ValueError(f"k={k} exceeds ranking length {len(stage1.entries)}")
    if len(counts) != k:
        raise ValueError(f"got {len(counts)} counts for k={k}")
    head = [
        RankedEntry(
            image_id=e.image_id,
            stage1_score=e.stage1_score,
            stage1_rank=e.stage1_rank,
            stage2_count=int(c),
            stage3_flag=e.stage3_flag,
        )
        for e, c in zip(stage1.entries[:k], counts)
    ]
    head.sort(key=lambda e: (-e.stage2_count, e.stage1_rank))
    entries = tuple(head) + stage1.entries[k:]
    return RankedList(entries=entries, stage=Stage.STAGE2, trace=trace or stage1.trace)


def run_stage2(
    instruction: str,
    stage1_ranking: RankedList,
    index: EmbeddingIndex,
    gateway: Gateway,
    k: int,
    cache: Cache | None = None,
) -> tuple[VerificationMatrix, RankedList]:
    propositions = derive_propositions(
        instruction, stage1_ranking.trace.atomic_instructions, gateway
    )
    k_eff = min(k, len(stage1_ranking.entries))
    candidates = [index.record(e.image_id) for e in stage1_ranking.entries[:k_eff]]

    def task(image: ImageRecord):
        try:
            return verify_candidate(image, propositions, gateway, cache=cache)
        except BackendUnavailable as exc:
            log.warning("verification failed for %s: %s", image.id, exc)
            return None

    workers = min(gateway.config.concurrency, max(1, k_eff))
    if workers > 1 and k_eff > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, candidates))
    else:
        results = [task(c) for c in candidates]

    matrix_counts: list[int] = []
    answer_rows: list[tuple[Answer, ...]] = []
    rank_counts: list[int] = []
    failed: list[str] = []
    m = len(propositions)
    for image, outcome in zip(candidates, results):
        if outcome is None:
            failed.append(image.id)
            matrix_counts.append(0)
            answer_rows.append(tuple([Answer.AMBIGUOUS] * m))
            rank_counts.append(FAILED_COUNT)
        else:
            count, answers = outcome
            matrix_counts.append(count)
            answer_rows.append(answers)
            rank_counts.append(count)

    matrix = VerificationMatrix(
        candidate_ids=tuple(c.id for c in candidates),
        propositions=propositions,
        answers=tuple(answer_rows),
        counts=tuple(matrix_counts),
        failed_ids=tuple(failed),
    )
    trace = StageTrace(
        atomic_instructions=stage1_ranking.trace.atomic_instructions,
        descriptions=stage1_ranking.trace.descriptions,
        propositions=propositions,
        evaluator_verdicts=stage1_ranking.trace.evaluator_verdicts,
        notes=stage1_ranking.trace.notes,
    )
    ranking = rerank_stage2(stage1_ranking, rank_counts, k_eff, trace=trace)
    return matrix, ranking
