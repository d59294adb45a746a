"""Benchmark runner: JSONL cases in, metric report (JSON + Markdown) out.

Cases run the full pipeline (``stages`` selects the ablation point);
per-case failures are recorded in the report without aborting the batch.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..adapters import Session
from ..errors import EngineError
from ..model import ImageRecord, QueryKind, RetrievalQuery
from ..util import resolve_image_bytes
from .metrics import average_precision_at_k, hits_at_k, recall_at_k, recall_subset_at_k

DEFAULT_KS = (1, 5, 10)


@dataclass(frozen=True)
class BenchmarkCase:
    case_id: str
    kind: QueryKind
    ground_truth: frozenset[str]
    text: str = ""
    reference_image_id: str | None = None
    reference_uri: str | None = None
    subset_group: tuple[str, ...] | None = None
    dialog_rounds: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.ground_truth:
            raise ValueError(f"case {self.case_id}: ground_truth must be non-empty")
        if self.kind is QueryKind.CHAT_IR:
            if not self.dialog_rounds:
                raise ValueError(f"case {self.case_id}: ChatIR case needs dialog_rounds")
        elif not self.text:
            raise ValueError(f"case {self.case_id}: text required")
        if self.kind is QueryKind.CIR and not (self.reference_image_id or self.reference_uri):
            raise ValueError(f"case {self.case_id}: CIR case needs a reference image")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkCase":
        return cls(
            case_id=str(d["case_id"]),
            kind=QueryKind(d["kind"]),
            ground_truth=frozenset(d.get("ground_truth") or ()),
            text=d.get("text") or "",
            reference_image_id=d.get("reference_image_id"),
            reference_uri=d.get("reference_uri"),
            subset_group=tuple(d["subset_group"]) if d.get("subset_group") else None,
            dialog_rounds=tuple(d["dialog_rounds"]) if d.get("dialog_rounds") else None,
        )

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "kind": self.kind.value,
            "text": self.text,
            "ground_truth": sorted(self.ground_truth),
            "reference_image_id": self.reference_image_id,
            "reference_uri": self.reference_uri,
            "subset_group": list(self.subset_group) if self.subset_group else None,
            "dialog_rounds": list(self.dialog_rounds) if self.dialog_rounds else None,
        }


def load_cases(path) -> list[BenchmarkCase]:
    cases = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            cases.append(BenchmarkCase.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}")
    return cases


def validate_cases(cases, database_ids=None) -> list[str]:
    """Schema/consistency problems as human-readable strings."""
    problems = []
    ids = set(database_ids) if database_ids is not None else None
    seen = set()
    for case in cases:
        if case.case_id in seen:
            problems.append(f"{case.case_id}: duplicate case_id")
        seen.add(case.case_id)
        if ids is not None:
            missing = case.ground_truth - ids
            if missing:
                problems.append(f"{case.case_id}: ground_truth ids not in database: {sorted(missing)}")
            if case.subset_group:
                extra = set(case.subset_group) - ids
                if extra:
                    problems.append(f"{case.case_id}: subset ids not in database: {sorted(extra)}")
            if case.reference_image_id and case.reference_image_id not in ids:
                problems.append(f"{case.case_id}: reference_image_id not in database")
        if case.subset_group and not (set(case.subset_group) & case.ground_truth):
            problems.append(f"{case.case_id}: subset_group contains no ground-truth id")
    return problems


@dataclass
class MetricReport:
    metrics: dict = field(default_factory=dict)
    hits: dict = field(default_factory=dict)
    per_case: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    runtime: dict = field(default_factory=dict)
    stages: int = 3

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "metrics": self.metrics,
            "hits": self.hits,
            "per_case": self.per_case,
            "failures": self.failures,
            "runtime": self.runtime,
        }


def _best_rank(ranking_ids, ground_truth) -> int | None:
    for pos, image_id in enumerate(ranking_ids, start=1):
        if image_id in ground_truth:
            return pos
    return None


def _resolve_reference(case: BenchmarkCase, engine) -> ImageRecord | None:
    if case.kind is not QueryKind.CIR:
        return None
    if case.reference_image_id:
        return engine.require_index().record(case.reference_image_id)
    assert case.reference_uri is not None
    data = resolve_image_bytes(case.reference_uri)
    return ImageRecord.from_bytes(
        id=f"ref-{case.case_id}", uri=case.reference_uri, data=data
    )


def _run_case(case: BenchmarkCase, engine, stages: int, ks, hits_mode: str) -> dict:
    start = time.perf_counter()
    row: dict = {"case_id": case.case_id, "kind": case.kind.value}
    if case.kind is QueryKind.CHAT_IR:
        session = Session(session_id=f"bench-{case.case_id}", kind=QueryKind.CHAT_IR)
        per_round_ids = []
        for text in case.dialog_rounds or ():
            query = RetrievalQuery(
                kind=QueryKind.CHAT_IR, text=text, dialog=session.dialog()
            )
            result = engine.run(query, stages=stages, session=session)
            per_round_ids.append(result.final.ids())
        final_ids = per_round_ids[-1]
        for k in ks:
            row[f"hits@{k}"] = list(hits_at_k(per_round_ids, case.ground_truth, k, mode=hits_mode))
    else:
        reference = _resolve_reference(case, engine)
        query = RetrievalQuery(kind=case.kind, text=case.text, reference_image=reference)
        result = engine.run(query, stages=stages)
        final_ids = result.final.ids()

    row["rank"] = _best_rank(final_ids, case.ground_truth)
    for k in ks:
        row[f"recall@{k}"] = recall_at_k(final_ids, case.ground_truth, k)
        row[f"map@{k}"] = average_precision_at_k(final_ids, case.ground_truth, k)
        if case.subset_group:
            row[f"recall_subset@{k}"] = recall_subset_at_k(
                final_ids, case.subset_group, case.ground_truth, k
            )
    row["elapsed_s"] = time.perf_counter() - start
    return row


def run_benchmark(
    cases,
    engine,
    stages: int = 3,
    ks=DEFAULT_KS,
    workers: int = 1,
    hits_mode: str = "cumulative",
) -> MetricReport:
    cases = list(cases)
    report = MetricReport(stages=stages)
    start = time.perf_counter()

    def safe(case: BenchmarkCase):
        try:
            return _run_case(case, engine, stages, ks, hits_mode)
        except EngineError as exc:
            return {"case_id": case.case_id, "error": exc.to_dict()}
        except Exception as exc:  # keep the batch alive on surprises
            return {"case_id": case.case_id, "error": {"code": "InternalError", "message": str(exc)}}

    if workers > 1 and len(cases) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(safe, cases))
    else:
        rows = [safe(c) for c in cases]

    ok_rows = [r for r in rows if "error" not in r]
    report.per_case = rows
    report.failures = [
        {"case_id": r["case_id"], **r["error"]} for r in rows if "error" in r
    ]
    for k in ks:
        for name in (f"recall@{k}", f"map@{k}", f"recall_subset@{k}"):
            values = [r[name] for r in ok_rows if name in r]
            if values:
                report.metrics[name] = sum(values) / len(values)
        hit_vectors = [r[f"hits@{k}"] for r in ok_rows if f"hits@{k}" in r]
        if hit_vectors:
            n_rounds = max(len(v) for v in hit_vectors)
            means = []
            for round_idx in range(n_rounds):
                vals = [v[round_idx] for v in hit_vectors if len(v) > round_idx]
                means.append(sum(vals) / len(vals))
            report.hits[f"hits@{k}"] = means
    elapsed = time.perf_counter() - start
    report.runtime = {
        "total_s": elapsed,
        "cases": len(cases),
        "failed": len(report.failures),
        "mean_case_s": (sum(r.get("elapsed_s", 0.0) for r in ok_rows) / len(ok_rows)) if ok_rows else 0.0,
    }
    return report


def write_reports(report: MetricReport, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    md_path = out / "report.md"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, ensure_ascii=False), encoding="utf-8")

    lines = ["# Benchmark report", "", f"Stages run: {report.stages}", ""]
    if report.metrics:
        lines += ["| metric | value |", "| --- | --- |"]
        for name in sorted(report.metrics):
            lines.append(f"| {name} | {report.metrics[name]:.4f} |")
        lines.append("")
    for name, values in sorted(report.hits.items()):
        rounds = " ".join(f"{v:.3f}" for v in values)
        lines.append(f"- {name} by round: {rounds}")
    if report.hits:
        lines.append("")
    lines.append(
        f"{report.runtime.get('cases', 0)} cases, {report.runtime.get('failed', 0)} failed, "
        f"{report.runtime.get('total_s', 0.0):.2f}s total"
    )
    if report.failures:
        lines += ["", "## Failures", ""]
        for failure in report.failures:
            lines.append(f"- {failure['case_id']}: {failure['code']}: {failure['message']}")
    md_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return json_path, md_path
