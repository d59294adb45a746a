"""Deterministic scripted backend for tests, demos, and offline runs.

Responses are a pure function of (role, request content) for single
``response`` rules: matching walks the rule list in order and returns the
first hit, so two processes loading the same script agree. Rules with a
``responses`` list are consumed sequentially (failure-injection scripts);
after exhaustion the last entry repeats.

Unscripted requests fall back to role-appropriate defaults that keep the
whole pipeline runnable on a bare mock stack: captions derived from the
attachment identity, canonical reasoner output echoing the query, "Yes"
verdicts, and hash-seeded unit embeddings.
"""

from __future__ import annotations

import json
import re
import threading
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MalformedResponse
from ..model import AtomicInstruction, InstructionKind, Proposition, TargetDescriptions
from ..util import sha256_hex
from .parsing import stage1_reasoner_json, stage2_reasoner_text
from .transport import ChatRequest, ImagePart, TransportFailure

DEFAULT_DIM = 32


def seeded_unit_vector(key: str, dim: int) -> np.ndarray:
    """Deterministic unit vector from a string key (process-independent)."""
    digest = sha256_hex(key.encode("utf-8"))
    rng = np.random.default_rng(int(digest[:16], 16))
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def text_vector(text: str, dim: int) -> np.ndarray:
    return seeded_unit_vector("text:" + text, dim)


@dataclass
class MockRule:
    role: str | None = None
    text_contains: tuple[str, ...] = ()
    image_contains: tuple[str, ...] = ()
    last_image_contains: str | None = None
    response: str | None = None
    responses: tuple[str, ...] = ()
    error: str | None = None  # "unavailable" | "timeout"
    vector_of_text: str | None = None
    vector_mix: tuple[tuple[str, float], ...] = ()
    vector_values: tuple[float, ...] = ()
    _cursor: int = field(default=0, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "MockRule":
        def as_tuple(v):
            if v is None:
                return ()
            if isinstance(v, str):
                return (v,)
            return tuple(v)

        return cls(
            role=d.get("role"),
            text_contains=as_tuple(d.get("text_contains")),
            image_contains=as_tuple(d.get("image_contains")),
            last_image_contains=d.get("last_image_contains"),
            response=d.get("response"),
            responses=as_tuple(d.get("responses")),
            error=d.get("error"),
            vector_of_text=d.get("vector_of_text"),
            vector_mix=tuple((t, float(w)) for t, w in d.get("vector_mix", ())),
            vector_values=tuple(float(v) for v in d.get("vector_values", ())),
        )

    def matches(self, role: str, text: str, idents: tuple[str, ...], last_idents: tuple[str, ...]) -> bool:
        if self.role is not None and self.role != role:
            return False
        if any(needle not in text for needle in self.text_contains):
            return False
        for needle in self.image_contains:
            if not any(needle in ident for ident in idents):
                return False
        if self.last_image_contains is not None:
            if not any(self.last_image_contains in ident for ident in last_idents):
                return False
        return True


@dataclass(frozen=True)
class MockCall:
    role: str
    kind: str  # "chat" | "embed"
    text: str
    image_idents: tuple[str, ...]


_INSTRUCTION_LINE_RE = re.compile(r"-\s*Instruction:\s*(.+)")


class MockBackend:
    """In-process backend satisfying the same protocol as HttpBackend."""

    def __init__(self, rules=(), dim: int = DEFAULT_DIM, backend_id: str = "mock"):
        self.rules = [r if isinstance(r, MockRule) else MockRule.from_dict(r) for r in rules]
        self.dim = dim
        self.id = backend_id
        self.calls: list[MockCall] = []
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, script: dict, backend_id: str = "mock") -> "MockBackend":
        return cls(
            rules=[MockRule.from_dict(r) for r in script.get("rules", ())],
            dim=int(script.get("dim", DEFAULT_DIM)),
            backend_id=backend_id,
        )

    @classmethod
    def from_url(cls, url: str) -> "MockBackend":
        """Parse mock:// URLs; the path (if any) is a JSON script file.

        Example: mock:///tmp/script.json?dim=16 or mock://?dim=8
        """
        parsed = urllib.parse.urlparse(url)
        params = urllib.parse.parse_qs(parsed.query)
        path = parsed.path or (parsed.netloc if parsed.netloc not in ("", "builtin") else "")
        script: dict = {}
        if path:
            script = json.loads(Path(path).read_text(encoding="utf-8"))
        if "dim" in params:
            script["dim"] = int(params["dim"][0])
        return cls.from_script(script, backend_id=url)

    def script(self, **kwargs) -> MockRule:
        """Append a rule programmatically; returns it for inspection."""
        rule = MockRule.from_dict(kwargs)
        self.rules.append(rule)
        return rule

    def calls_for(self, role: str) -> list[MockCall]:
        return [c for c in self.calls if c.role == role]

    def reset_calls(self) -> None:
        with self._lock:
            self.calls.clear()

    # -- matching -----------------------------------------------------

    def _find(self, role: str, text: str, idents: tuple[str, ...], last_idents: tuple[str, ...]):
        for rule in self.rules:
            if rule.matches(role, text, idents, last_idents):
                return rule
        return None

    def _rule_response(self, rule: MockRule) -> str:
        if rule.error == "unavailable":
            raise TransportFailure(f"scripted outage ({self.id})")
        if rule.error == "timeout":
            raise TransportFailure(f"scripted timeout ({self.id})", timeout=True)
        if rule.responses:
            with self._lock:
                idx = min(rule._cursor, len(rule.responses) - 1)
                rule._cursor += 1
            return rule.responses[idx]
        return rule.response if rule.response is not None else ""

    # -- chat ---------------------------------------------------------

    def complete(self, role: str, req: ChatRequest) -> str:
        text = req.text_content()
        images = req.image_parts()
        idents = tuple(i for p in images for i in p.idents())
        last_idents = images[-1].idents() if images else ()
        with self._lock:
            self.calls.append(MockCall(role=role, kind="chat", text=text, image_idents=idents))
        rule = self._find(role, text, idents, last_idents)
        if rule is not None:
            return self._rule_response(rule)
        return self._default_completion(role, text, idents)

    def _default_completion(self, role: str, text: str, idents: tuple[str, ...]) -> str:
        if role == "captioner":
            ident = idents[0] if idents else "blank"
            tag = sha256_hex(ident.encode("utf-8"))[:8]
            return f"A synthetic scene {tag}."
        if role == "reasoner":
            matches = _INSTRUCTION_LINE_RE.findall(text)
            instruction = matches[-1].strip() if matches else "the requested content"
            if "Atomic Proposition Generation" in text:
                prop = Proposition(
                    statement=f"The image shows {instruction}.",
                    question=f"Does the image show {instruction}?",
                    truth_value=True,
                )
                return stage2_reasoner_text([prop])
            descs = TargetDescriptions(
                core_elements=instruction,
                enhanced_details=instruction,
                comprehensive_synthesis=instruction,
            )
            insts = (AtomicInstruction(kind=InstructionKind.RETENTION, text=instruction),)
            return stage1_reasoner_json(insts, descs)
        if role == "verifier":
            return "Yes"
        if role == "evaluator":
            return "ANSWER: Yes\nConsistent with the request."
        return ""

    # -- embeddings ---------------------------------------------------

    def embed(self, role: str, modality: str, payload) -> list[float]:
        if modality == "text":
            text = payload
            idents: tuple[str, ...] = ()
            seed_key = "text:" + text
        else:
            part: ImagePart = payload
            idents = part.idents()
            text = ""
            content_ident = next((i for i in idents if i.startswith("sha256:")), None)
            seed_key = "image:" + (content_ident or idents[0])
        with self._lock:
            self.calls.append(MockCall(role=role, kind="embed", text=text, image_idents=idents))
        rule = self._find(role, text, idents, idents)
        if rule is not None:
            if rule.error:
                self._rule_response(rule)
            if rule.vector_values:
                return list(rule.vector_values)
            if rule.vector_of_text is not None:
                return list(text_vector(rule.vector_of_text, self.dim))
            if rule.vector_mix:
                acc = np.zeros(self.dim)
                for t, w in rule.vector_mix:
                    acc += w * text_vector(t, self.dim)
                norm = np.linalg.norm(acc)
                if norm == 0:
                    raise MalformedResponse("vector_mix summed to zero")
                return list(acc / norm)
        return list(seeded_unit_vector(seed_key, self.dim))

    def ping(self) -> bool:
        return True

    def close(self) -> None:
        pass
