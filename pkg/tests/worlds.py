"""Synthetic corpora plus scripted mock stacks for end-to-end tests.

Two constructions:

- oracle_world: captioner/reasoner/verifier/evaluator are all scripted
  consistently with ground truth, so every stage agrees on the target
  (used for the Recall@1 = 1.0 end-to-end checks).

- misrank_world: image-encoder vectors are scripted so stage 1 ranks a
  distractor above the target; the verifier fixes half the cases and the
  evaluator the other half, giving the strict stage1 < stage2 < stage3
  Recall@1 ordering.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

from imsearch import (
    BLANK_REFERENCE_TEXT,
    Gateway,
    ImageRecord,
    InstructionKind,
    PipelineConfig,
    Proposition,
    RetrievalEngine,
    TargetDescriptions,
)
from imsearch.gateway.mock import MockBackend
from imsearch.gateway.parsing import stage1_reasoner_json, stage2_reasoner_text
from imsearch.model import AtomicInstruction

DIM = 32


def make_record(i: int) -> ImageRecord:
    data = f"synthetic-image-bytes-{i:03d}".encode()
    uri = "data:application/octet-stream;base64," + base64.b64encode(data).decode()
    return ImageRecord.from_bytes(id=f"img{i:02d}", uri=uri, data=data)


def noun(i: int) -> str:
    return f"object {i:02d}"


def caption(i: int) -> str:
    return f"a photo of {noun(i)} in a plain room"


def ident(record: ImageRecord) -> str:
    return "sha256:" + record.content_hash


@dataclass
class World:
    records: list[ImageRecord]
    mock: MockBackend
    config: PipelineConfig
    engine: RetrievalEngine = field(init=False)

    def __post_init__(self):
        gateway = Gateway({role: self.mock for role in
                           ("captioner", "reasoner", "verifier", "evaluator",
                            "text_encoder", "image_encoder")}, self.config)
        self.engine = RetrievalEngine(self.config, gateway=gateway)

    def ingest(self) -> None:
        """Build the index; call after all encoder rules are scripted."""
        self.engine.ingest_images(self.records)

    def record(self, i: int) -> ImageRecord:
        return self.records[i]


def base_world(n: int = 32, oracle_images: bool = True, **config_kwargs) -> World:
    """Corpus + captioner rules; optionally V_I rows tied to captions.

    The index is NOT built yet: encoder rules must land before ingest.
    """
    records = [make_record(i) for i in range(n)]
    mock = MockBackend(dim=DIM, backend_id="mock-world")
    for i, record in enumerate(records):
        mock.script(role="captioner", image_contains=[ident(record)], response=caption(i))
        if oracle_images:
            mock.script(role="image_encoder", image_contains=[ident(record)], vector_of_text=caption(i))
    config = PipelineConfig.from_dict({"backends": {}, **config_kwargs})
    return World(records=records, mock=mock, config=config)


def _stage1_rules(world: World, instruction: str, ref_desc: str, descriptions: TargetDescriptions,
                  atomic: list[AtomicInstruction]):
    world.mock.script(
        role="reasoner",
        text_contains=["Instruction Classification", f"- Instruction: {instruction}",
                       f"- Reference Image: {ref_desc}"],
        response=stage1_reasoner_json(atomic, descriptions),
    )


def _stage2_rules(world: World, instruction: str, propositions: list[Proposition]):
    world.mock.script(
        role="reasoner",
        text_contains=["Atomic Proposition Generation", f"- Instruction: {instruction}"],
        response=stage2_reasoner_text(propositions),
    )


def _verifier_rules(world: World, question: str, yes_for: list[ImageRecord]):
    for record in yes_for:
        world.mock.script(role="verifier", text_contains=[question],
                          image_contains=[ident(record)], response="Yes")
    world.mock.script(role="verifier", text_contains=[question], response="No")


def _evaluator_rules(world: World, instruction: str, yes_for: list[ImageRecord]):
    for record in yes_for:
        world.mock.script(role="evaluator", text_contains=[f'"{instruction}"'],
                          last_image_contains=ident(record),
                          response=f"ANSWER: Yes\nThe image shows {noun(world.records.index(record))}.")
    world.mock.script(role="evaluator", text_contains=[f'"{instruction}"'],
                      response="ANSWER: No\nNot the requested image.")


def add_tir_case(world: World, gt: int) -> str:
    """Script a TIR query whose every stage points at records[gt]."""
    instruction = f"find {noun(gt)}"
    descs = TargetDescriptions(core_elements=caption(gt), enhanced_details=caption(gt),
                               comprehensive_synthesis=caption(gt))
    atomic = [AtomicInstruction(kind=InstructionKind.RETENTION, text=f"Show {noun(gt)}.")]
    _stage1_rules(world, instruction, BLANK_REFERENCE_TEXT, descs, atomic)
    question = f"Is there {noun(gt)}?"
    props = [Proposition(statement=f"There is {noun(gt)}.", question=question, truth_value=True)]
    _stage2_rules(world, instruction, props)
    _verifier_rules(world, question, [world.record(gt)])
    _evaluator_rules(world, instruction, [world.record(gt)])
    return instruction


def add_cir_case(world: World, ref: int, gt: int) -> str:
    """Script a CIR query: modify records[ref] toward records[gt]."""
    instruction = f"replace it with {noun(gt)}"
    descs = TargetDescriptions(core_elements=caption(gt), enhanced_details=caption(gt),
                               comprehensive_synthesis=caption(gt))
    atomic = [AtomicInstruction(kind=InstructionKind.MODIFICATION, text=f"Swap in {noun(gt)}.")]
    _stage1_rules(world, instruction, caption(ref), descs, atomic)
    question = f"Does the image contain {noun(gt)}?"
    props = [Proposition(statement=f"The image contains {noun(gt)}.", question=question,
                         truth_value=True)]
    _stage2_rules(world, instruction, props)
    _verifier_rules(world, question, [world.record(gt)])
    _evaluator_rules(world, instruction, [world.record(gt)])
    return instruction


def add_chat_case(world: World, gt: int, rounds: int = 3) -> list[str]:
    """Script a Chat-IR session converging on records[gt] at the last round.

    Intermediate rounds use deliberately off-target descriptions with
    all-No verifier/evaluator fallbacks, so only the last round retrieves.
    """
    texts = [f"chat feedback {gt:02d} round {r}" for r in range(1, rounds + 1)]
    t_cs = [f"intermediate synthesis {gt:02d} round {r}" for r in range(1, rounds)] + [caption(gt)]
    prev = BLANK_REFERENCE_TEXT
    for r, text in enumerate(texts):
        final_round = r == rounds - 1
        descs = TargetDescriptions(core_elements=t_cs[r], enhanced_details=t_cs[r],
                                   comprehensive_synthesis=t_cs[r])
        atomic = [AtomicInstruction(kind=InstructionKind.RETENTION, text=f"Keep round {r + 1} intent.")]
        _stage1_rules(world, text, prev, descs, atomic)
        question = f"Does the image match round {r + 1} of chat {gt:02d}?"
        props = [Proposition(statement=f"The image matches round {r + 1}.", question=question,
                             truth_value=True)]
        _stage2_rules(world, text, props)
        _verifier_rules(world, question, [world.record(gt)] if final_round else [])
        _evaluator_rules(world, text, [world.record(gt)] if final_round else [])
        prev = t_cs[r]
    return texts


def oracle_world(n: int = 32) -> World:
    world = base_world(n=n, oracle_images=True)
    world.ingest()
    return world


def unit_axis(axis: int, dim: int = DIM) -> list[float]:
    vec = [0.0] * dim
    vec[axis] = 1.0
    return vec


def mixed_axis(a: int, b: int, wa: float, wb: float, dim: int = DIM) -> list[float]:
    vec = [0.0] * dim
    vec[a] = wa
    vec[b] = wb
    return vec


@dataclass
class MisrankCase:
    case_id: str
    instruction: str
    gt: int
    distractor: int
    fixed_by: str  # "verifier" | "evaluator"


def misrank_world(n: int = 24) -> tuple[World, list[MisrankCase]]:
    """Stage-1 misranks each case's target below a distractor.

    The query description embeds to a basis axis; the distractor's image
    vector sits exactly on that axis (cos 1) and the target's at cos 0.8,
    with every other image on a hash-seeded vector (|cos| well below 0.8).
    Half the cases are fixed by the verifier (target satisfies the
    proposition, distractor does not), half only by the evaluator
    (verifier ties both at count M).
    """
    world = base_world(n=n, oracle_images=False)
    cases = []
    layout = [(0, 1, "verifier"), (2, 3, "verifier"), (4, 5, "evaluator"), (6, 7, "evaluator")]
    for axis, (gt, distractor, fixer) in enumerate(layout):
        instruction = f"find {noun(gt)} precisely"
        desc = f"query description targeting {noun(gt)}"
        world.mock.script(role="text_encoder", text_contains=[desc],
                          vector_values=unit_axis(axis))
        world.mock.script(role="image_encoder", image_contains=[ident(world.record(distractor))],
                          vector_values=unit_axis(axis))
        world.mock.script(role="image_encoder", image_contains=[ident(world.record(gt))],
                          vector_values=mixed_axis(axis, DIM - 1 - axis, 0.8, 0.6))
        descs = TargetDescriptions(core_elements=desc, enhanced_details=desc,
                                   comprehensive_synthesis=desc)
        atomic = [AtomicInstruction(kind=InstructionKind.ADDITION, text=f"Show {noun(gt)}.")]
        _stage1_rules(world, instruction, BLANK_REFERENCE_TEXT, descs, atomic)
        question = f"Is {noun(gt)} clearly visible?"
        props = [Proposition(statement=f"{noun(gt)} is clearly visible.", question=question,
                             truth_value=True)]
        _stage2_rules(world, instruction, props)
        yes_for = [world.record(gt)] if fixer == "verifier" else [world.record(gt), world.record(distractor)]
        _verifier_rules(world, question, yes_for)
        _evaluator_rules(world, instruction, [world.record(gt)])
        cases.append(MisrankCase(case_id=f"mis-{gt:02d}", instruction=instruction, gt=gt,
                                 distractor=distractor, fixed_by=fixer))
    world.ingest()
    return world, cases
