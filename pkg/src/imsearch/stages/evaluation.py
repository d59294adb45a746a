"""Stage 3: holistic pairwise evaluation of the top candidates.

The evaluator sees the reference image (left, when the query has one) and
one candidate (right), and answers with an ANSWER: Yes/No line plus a
justification. Candidates are assessed sequentially and evaluation stops
at the first acceptance, which is promoted to the top of the ranking.
"""

from __future__ import annotations

import logging

from ..errors import AmbiguousAnswer, BackendUnavailable
from ..gateway import Gateway, ImagePart, parse_evaluator_output, render_prompt3
from ..index import EmbeddingIndex
from ..model import EvaluatorVerdict, ImageRecord, RankedEntry, RankedList, Stage, StageTrace
from ..util import resolve_image_bytes

log = logging.getLogger(__name__)


def _part(image: ImageRecord, inline: bool) -> ImagePart:
    data = resolve_image_bytes(image.uri) if inline else None
    return ImagePart(uri=image.uri, data=data)


def evaluate_pairwise(
    ref_image: ImageRecord | None,
    candidate: ImageRecord,
    instruction: str,
    gateway: Gateway,
) -> EvaluatorVerdict:
    """One evaluator call: reference (if any) left, candidate right.

    Unparseable or unreachable evaluator output counts as rejection —
    a candidate is never promoted on unparseable evidence.
    """
    prompt = render_prompt3(instruction)
    inline = gateway.config.inline_images
    images = ((_part(ref_image, inline),) if ref_image is not None else ()) + (
        _part(candidate, inline),
    )
    try:
        response = gateway.chat("evaluator", prompt, images=images, max_tokens=512)
        accepted, justification = parse_evaluator_output(response.text)
    except AmbiguousAnswer as exc:
        log.warning("evaluator output unparseable for %s: %s", candidate.id, exc)
        return EvaluatorVerdict(image_id=candidate.id, accepted=False, justification=str(exc))
    except BackendUnavailable as exc:
        log.warning("evaluator unavailable for %s: %s", candidate.id, exc)
        return EvaluatorVerdict(image_id=candidate.id, accepted=False, justification=str(exc))
    return EvaluatorVerdict(image_id=candidate.id, accepted=accepted, justification=justification)


def promote(stage2: RankedList, verdicts, alpha: int, trace: StageTrace | None = None) -> RankedList:
    """Move the first accepted candidate (within the top alpha) to the top.

    All other relative orders are preserved; with no acceptance the
    stage-2 order is returned unchanged (stage relabeled Stage3).
    """
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    verdicts = list(verdicts)
    if len(verdicts) > alpha:
        raise ValueError(f"{len(verdicts)} verdicts exceed alpha={alpha}")
    accepted_pos: int | None = None
    verdict_by_id = {}
    for i, verdict in enumerate(verdicts):
        if verdict.image_id != stage2.entries[i].image_id:
            raise ValueError(
                f"verdict {i} is for {verdict.image_id}, expected {stage2.entries[i].image_id}"
            )
        verdict_by_id[verdict.image_id] = verdict
        if verdict.accepted and accepted_pos is None:
            accepted_pos = i

    def flagged(entry: RankedEntry) -> RankedEntry:
        verdict = verdict_by_id.get(entry.image_id)
        if verdict is None:
            return entry
        return RankedEntry(
            image_id=entry.image_id,
            stage1_score=entry.stage1_score,
            stage1_rank=entry.stage1_rank,
            stage2_count=entry.stage2_count,
            stage3_flag=verdict.accepted,
        )

    entries = [flagged(e) for e in stage2.entries]
    if accepted_pos is not None and accepted_pos > 0:
        winner = entries.pop(accepted_pos)
        entries.insert(0, winner)
    return RankedList(entries=tuple(entries), stage=Stage.STAGE3, trace=trace or stage2.trace)


def run_stage3(
    instruction: str,
    ref_image: ImageRecord | None,
    stage2_ranking: RankedList,
    index: EmbeddingIndex,
    gateway: Gateway,
    alpha: int,
) -> tuple[tuple[EvaluatorVerdict, ...], RankedList]:
    """Sequential evaluation with early stop at the first acceptance."""
    verdicts: list[EvaluatorVerdict] = []
    notes = list(stage2_ranking.trace.notes)
    limit = min(alpha, len(stage2_ranking.entries))
    for entry in stage2_ranking.entries[:limit]:
        candidate = index.record(entry.image_id)
        if ref_image is not None and ref_image.content_hash == candidate.content_hash:
            notes.append(f"stage3: candidate {candidate.id} equals the reference image")
        verdict = evaluate_pairwise(ref_image, candidate, instruction, gateway)
        verdicts.append(verdict)
        if verdict.accepted:
            break
    base = stage2_ranking.trace
    trace = StageTrace(
        atomic_instructions=base.atomic_instructions,
        descriptions=base.descriptions,
        propositions=base.propositions,
        evaluator_verdicts=tuple(verdicts),
        notes=tuple(notes),
    )
    ranking = promote(stage2_ranking, verdicts, alpha, trace=trace)
    return tuple(verdicts), ranking
