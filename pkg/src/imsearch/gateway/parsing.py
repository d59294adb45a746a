"""Parsers for model outputs, plus canonical emitters used by mocks/tests.

The parsers tolerate the usual LLM noise (surrounding prose, fenced code
blocks, casing drift in keys) but refuse to invent structure: anything
that cannot be mapped onto the expected shape is a ParseError.
"""

from __future__ import annotations

import enum
import json
import re

from ..errors import AmbiguousAnswer, ParseError
from ..model import AtomicInstruction, InstructionKind, Proposition, TargetDescriptions


class Answer(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    AMBIGUOUS = "Ambiguous"

    def matches(self, truth_value: bool) -> bool:
        """Whether this answer satisfies the proposition's truth value.

        Ambiguous never matches.
        """
        if self is Answer.YES:
            return truth_value
        if self is Answer.NO:
            return not truth_value
        return False


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL | re.IGNORECASE)


def extract_json_object(raw: str) -> dict:
    """Pull the first JSON object out of free-form text.

    Fenced ```json blocks are preferred; otherwise the first balanced
    top-level {...} span is attempted.
    """
    decoder = json.JSONDecoder()

    def scan(text: str):
        for i, ch in enumerate(text):
            if ch != "{":
                continue
            try:
                obj, _ = decoder.raw_decode(text[i:])
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                return obj
        return None

    for match in _FENCE_RE.finditer(raw):
        obj = scan(match.group(1))
        if obj is not None:
            return obj
    obj = scan(raw)
    if obj is not None:
        return obj
    raise ParseError("no JSON object found in model output")


def _norm_key(key: str) -> str:
    return re.sub(r"[^a-z]", "", key.lower())


_DESC_KEYS = {
    "coreelements": "core_elements",
    "enhanceddetails": "enhanced_details",
    "comprehensivesynthesis": "comprehensive_synthesis",
}
_INSTRUCTION_LIST_KEYS = {"atomicinstructions", "instructions", "operations"}
_KIND_BY_NORM = {kind.value.lower(): kind for kind in InstructionKind}


def _parse_instruction_entry(entry) -> AtomicInstruction:
    if isinstance(entry, str):
        label, sep, text = entry.partition(":")
        if not sep:
            raise ParseError(f"atomic instruction missing 'Kind: text' form: {entry!r}")
        kind_raw, text = label.strip(), text.strip()
    elif isinstance(entry, dict):
        kind_raw = text = None
        for key, value in entry.items():
            norm = _norm_key(key)
            if norm in ("type", "kind"):
                kind_raw = str(value)
            elif norm in ("instruction", "text", "operation"):
                text = str(value)
        if kind_raw is None or text is None:
            raise ParseError(f"atomic instruction object missing type/instruction: {entry!r}")
    else:
        raise ParseError(f"unsupported atomic instruction entry: {entry!r}")
    kind = _KIND_BY_NORM.get(kind_raw.strip().lower())
    if kind is None:
        raise ParseError(f"unknown instruction type {kind_raw!r}")
    if not text:
        raise ParseError("atomic instruction has empty text")
    return AtomicInstruction(kind=kind, text=text)


def parse_stage1_output(raw: str) -> tuple[tuple[AtomicInstruction, ...], TargetDescriptions]:
    """Extract atomic instructions and the three target descriptions."""
    obj = extract_json_object(raw)
    instructions = None
    descs: dict[str, str] = {}
    for key, value in obj.items():
        norm = _norm_key(key)
        if norm in _INSTRUCTION_LIST_KEYS:
            if not isinstance(value, list):
                raise ParseError(f"{key!r} must be a list")
            instructions = tuple(_parse_instruction_entry(e) for e in value)
        elif norm in _DESC_KEYS:
            descs[_DESC_KEYS[norm]] = "" if value is None else str(value)
    if instructions is None:
        raise ParseError("output lacks an atomic-instructions list")
    missing = [k for k in ("core_elements", "enhanced_details", "comprehensive_synthesis") if k not in descs]
    if missing:
        raise ParseError(f"output lacks description keys: {missing}")
    return instructions, TargetDescriptions(**descs)


_QA_RE = re.compile(
    r"Q\s*[:.]\s*(?P<question>[^\n?]*\?)\s*A\s*[:.]\s*(?P<answer>Yes|No)\b[^()\n]*(?:\((?P<truth>True|False)\))?",
    re.IGNORECASE,
)
_NUMBERED_RE = re.compile(r"^\s*\((\d+)\)\s+(.*\S)\s*$")


def parse_stage2_output(raw: str) -> tuple[Proposition, ...]:
    """Extract propositions: statements paired with Q/A(+truth) lines.

    Statements come from numbered lines outside the Q/A matches; when a
    statement is missing for an index, the question restated as a period
    sentence stands in.
    """
    qa_items = []
    for m in _QA_RE.finditer(raw):
        question = m.group("question").strip()
        truth_token = m.group("truth")
        if truth_token is not None:
            truth = truth_token.lower() == "true"
        else:
            truth = m.group("answer").lower() == "yes"
        qa_items.append((question, truth))
    if not qa_items:
        raise ParseError("no propositions recovered from model output")

    statements: list[str] = []
    for line in raw.splitlines():
        if "?" in line or re.search(r"\bQ\s*[:.]", line, re.IGNORECASE):
            continue
        m = _NUMBERED_RE.match(line)
        if m:
            statements.append(m.group(2).strip())

    props = []
    for i, (question, truth) in enumerate(qa_items):
        if i < len(statements):
            statement = statements[i]
        else:
            statement = question.rstrip("?").strip() + "."
        props.append(Proposition(statement=statement, question=question, truth_value=truth))
    return tuple(props)


_FIRST_TOKEN_RE = re.compile(r"[a-zA-Z]+")


def classify_answer(raw: str) -> Answer:
    """Yes/No/Ambiguous from the first alphabetic token; never raises."""
    if not isinstance(raw, str):
        return Answer.AMBIGUOUS
    m = _FIRST_TOKEN_RE.search(raw)
    if m is None:
        return Answer.AMBIGUOUS
    token = m.group(0).lower()
    if token == "yes":
        return Answer.YES
    if token == "no":
        return Answer.NO
    return Answer.AMBIGUOUS


def parse_yes_no(raw: str) -> bool:
    """Strict boolean from a verifier reply; AmbiguousAnswer otherwise."""
    answer = classify_answer(raw)
    if answer is Answer.AMBIGUOUS:
        raise AmbiguousAnswer(f"neither yes nor no: {raw[:80]!r}")
    return answer is Answer.YES


_ANSWER_LINE_RE = re.compile(r"^[\s*_>#-]*ANSWER\s*[:：]\s*(?P<rest>.*)$", re.IGNORECASE)


def parse_evaluator_output(raw: str) -> tuple[bool, str]:
    """Locate the first ANSWER line; returns (accepted, justification)."""
    lines = raw.splitlines()
    for i, line in enumerate(lines):
        m = _ANSWER_LINE_RE.match(line)
        if m is None:
            continue
        token = m.group("rest").strip().strip("[]*")
        answer = classify_answer(token)
        if answer is Answer.AMBIGUOUS:
            raise AmbiguousAnswer(f"ANSWER line does not parse: {line[:80]!r}")
        justification = "\n".join(lines[i + 1 :]).strip()
        return answer is Answer.YES, justification
    raise AmbiguousAnswer("no ANSWER line found in evaluator output")


def stage1_reasoner_json(instructions, descriptions: TargetDescriptions) -> str:
    """Canonical stage-1 reasoner output (what a cooperative model emits)."""
    obj = {
        "Atomic Instructions": [
            {"type": inst.kind.value, "instruction": inst.text} for inst in instructions
        ],
        "Core Elements": descriptions.core_elements,
        "Enhanced Details": descriptions.enhanced_details,
        "Comprehensive Synthesis": descriptions.comprehensive_synthesis,
    }
    return json.dumps(obj, ensure_ascii=False)


def stage2_reasoner_text(propositions) -> str:
    """Canonical stage-2 reasoner output: statements then Q/A(+truth) lines."""
    props = list(propositions)
    lines = ["1. **Step 1.** Based on the atomic instructions, the statements are:"]
    for i, p in enumerate(props, start=1):
        lines.append(f"    ({i}) {p.statement}")
    lines.append("")
    lines.append("2. **Step 2.** Based on step 1, the questions and answers are:")
    for i, p in enumerate(props, start=1):
        answer = "Yes" if p.truth_value else "No"
        truth = "True" if p.truth_value else "False"
        lines.append(f"    ({i}) Q: {p.question} A: {answer}. ({truth})")
    return "\n".join(lines)
