"""Prompt template loading and rendering.

Templates ship as versioned resource files under ``templates/``: a body
per template plus numbered in-context example blocks. Rendering is pure —
identical bindings produce byte-identical output — and fails loudly if a
required placeholder survives substitution.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from importlib import resources

from ..errors import EmptyDecomposition, TemplateError
from ..model import AtomicInstruction

INSTRUCTION_SLOT = "[[INSTRUCTION]]"
REF_IMAGE_DESC_SLOT = "[[REF_IMAGE_DESC]]"
ATOMIC_INST_SLOT = "[[ATOMIC_INST]]"
_EXAMPLES_SLOT = "[[EXAMPLES]]"


class TemplateId(str, enum.Enum):
    PROMPT1 = "Prompt1"
    PROMPT2 = "Prompt2"
    PROMPT3 = "Prompt3"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: TemplateId
    body: str
    in_context_examples: tuple[str, ...]

    def assemble(self) -> str:
        """Splice the example blocks into the body (still has task slots)."""
        if _EXAMPLES_SLOT in self.body:
            return self.body.replace(_EXAMPLES_SLOT, "\n---\n".join(self.in_context_examples))
        return self.body


def _read_resource(name: str) -> str:
    root = resources.files("imsearch.gateway") / "templates"
    return (root / name).read_text(encoding="utf-8").rstrip("\n")


@functools.lru_cache(maxsize=None)
def load_template(template_id: TemplateId) -> PromptTemplate:
    prefix = template_id.value.lower()
    body = _read_resource(f"{prefix}_body.txt")
    examples = []
    root = resources.files("imsearch.gateway") / "templates"
    names = sorted(
        entry.name
        for entry in root.iterdir()
        if entry.name.startswith(f"{prefix}_example_") and entry.name.endswith(".txt")
    )
    for name in names:
        examples.append(_read_resource(name))
    return PromptTemplate(template_id=template_id, body=body, in_context_examples=tuple(examples))


_ALL_SLOTS = (INSTRUCTION_SLOT, REF_IMAGE_DESC_SLOT, ATOMIC_INST_SLOT, _EXAMPLES_SLOT)


def _finish(text: str, template_id: TemplateId) -> str:
    for slot in _ALL_SLOTS:
        if slot in text:
            raise TemplateError(f"{template_id.value}: unsubstituted placeholder {slot}")
    return text


def format_atomic_instructions(instructions) -> str:
    """Numbered block: one '(i) Kind: text' line per instruction."""
    lines = []
    for i, inst in enumerate(instructions, start=1):
        kind = inst.kind.value if isinstance(inst, AtomicInstruction) else str(inst[0])
        text = inst.text if isinstance(inst, AtomicInstruction) else str(inst[1])
        lines.append(f"    ({i}) {kind}: {text}")
    return "\n".join(lines)


def render_prompt1(instruction: str, ref_desc: str) -> str:
    """Stage-1 reasoner prompt: classify the instruction, describe the target."""
    if not instruction.strip():
        raise TemplateError("Prompt1: instruction must be non-empty")
    if not ref_desc.strip():
        raise TemplateError("Prompt1: reference description must be non-empty")
    tpl = load_template(TemplateId.PROMPT1)
    text = tpl.assemble().replace(INSTRUCTION_SLOT, instruction).replace(REF_IMAGE_DESC_SLOT, ref_desc)
    return _finish(text, TemplateId.PROMPT1)


def render_prompt2(instruction: str, atomic_insts) -> str:
    """Stage-2 reasoner prompt: statements, questions, truth values."""
    if not instruction.strip():
        raise TemplateError("Prompt2: instruction must be non-empty")
    insts = list(atomic_insts)
    if not insts:
        raise EmptyDecomposition("Prompt2 requires at least one atomic instruction")
    tpl = load_template(TemplateId.PROMPT2)
    text = (
        tpl.assemble()
        .replace(INSTRUCTION_SLOT, instruction)
        .replace(ATOMIC_INST_SLOT, format_atomic_instructions(insts))
    )
    return _finish(text, TemplateId.PROMPT2)


def render_prompt3(instruction: str) -> str:
    """Stage-3 evaluator prompt: pairwise yes/no with justification."""
    if not instruction.strip():
        raise TemplateError("Prompt3: instruction must be non-empty")
    tpl = load_template(TemplateId.PROMPT3)
    return _finish(tpl.assemble().replace(INSTRUCTION_SLOT, instruction), TemplateId.PROMPT3)
