"""Operator CLI: ingest, search, chat, bench, serve, validate.

Backends come from --config (YAML), LGIR_BACKEND_<ROLE>_URL env vars, or
--mock for a fully in-process deterministic stack. Any structured engine
error exits non-zero with a one-line message.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bench import load_cases, run_benchmark, validate_cases, write_reports
from .config import load_config, mock_backends
from .engine import RetrievalEngine
from .errors import EngineError
from .index import load_index, load_manifest, save_index
from .model import ImageRecord, QueryKind, RetrievalQuery
from .util import resolve_image_bytes


def _build_config(config_path, mock, mock_script, **overrides):
    backends = None
    if mock or mock_script:
        backends = mock_backends(script_path=mock_script)
    clean = {k: v for k, v in overrides.items() if v is not None}
    if backends:
        clean["backends"] = backends
    return load_config(config_path, overrides=clean)


def _engine(config, index_path=None) -> RetrievalEngine:
    engine = RetrievalEngine(config)
    if index_path:
        engine.index = load_index(index_path)
    return engine


def _print_ranking(result, top_k: int):
    click.echo(f"{'rank':>4}  {'image_id':<20} {'score':>9} {'count':>6} {'eval':>5}")
    for pos, entry in enumerate(result.final.entries[:top_k], start=1):
        count = "-" if entry.stage2_count is None else str(entry.stage2_count)
        flag = "-" if entry.stage3_flag is None else ("yes" if entry.stage3_flag else "no")
        click.echo(f"{pos:>4}  {entry.image_id:<20} {entry.stage1_score:>9.4f} {count:>6} {flag:>5}")


@click.group()
def main():
    """Language-guided image retrieval engine."""


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="YAML config file.")(fn)
    fn = click.option("--mock", is_flag=True, help="Use the in-process deterministic mock stack for every role.")(fn)
    fn = click.option("--mock-script", type=click.Path(exists=True), default=None, help="Mock rule script (implies --mock).")(fn)
    return fn


@main.command()
@common_options
@click.argument("manifest", type=click.Path(exists=True))
@click.option("-o", "--output", "output", type=click.Path(), required=True, help="Index file to write.")
def ingest(config_path, mock, mock_script, manifest, output):
    """Caption + embed every image in a JSONL manifest; write the index."""
    try:
        config = _build_config(config_path, mock, mock_script)
        engine = _engine(config)
        records = load_manifest(manifest)
        index = engine.ingest_images(records)
        save_index(index, output)
    except (EngineError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"ingested {len(index)} images (dim={index.dim}) -> {output}")


@main.command()
@common_options
@click.option("--kind", type=click.Choice(["tir", "cir"]), required=True)
@click.option("--text", required=True, help="Description (TIR) or modification instruction (CIR).")
@click.option("--ref", "ref_uri", default=None, help="Reference image path/URI (CIR).")
@click.option("--index", "index_path", type=click.Path(exists=True), required=True)
@click.option("--stages", type=click.IntRange(1, 3), default=3, show_default=True)
@click.option("--top-k", type=int, default=10, show_default=True)
@click.option("--tau", type=float, default=None, help="Override the fusion weight.")
@click.option("--trace-out", type=click.Path(), default=None, help="Write the trace JSON here.")
def search(config_path, mock, mock_script, kind, text, ref_uri, index_path, stages, top_k, tau, trace_out):
    """One-shot retrieval; prints the ranked table."""
    try:
        config = _build_config(config_path, mock, mock_script, tau=tau)
        engine = _engine(config, index_path)
        reference = None
        if ref_uri:
            data = resolve_image_bytes(ref_uri)
            reference = ImageRecord.from_bytes(id=f"ref-{Path(ref_uri).name}", uri=ref_uri, data=data)
        query = RetrievalQuery(
            kind=QueryKind.TIR if kind == "tir" else QueryKind.CIR,
            text=text,
            reference_image=reference,
        )
        result = engine.run(query, stages=stages)
    except (EngineError, ValueError) as exc:
        raise click.ClickException(str(exc))
    _print_ranking(result, top_k)
    if trace_out:
        Path(trace_out).write_text(
            json.dumps(result.ranking_payload(top_k=engine.config.top_k_return), indent=2, ensure_ascii=False),
            encoding="utf-8",
        )
        click.echo(f"trace written to {trace_out}")


@main.command()
@common_options
@click.option("--index", "index_path", type=click.Path(exists=True), required=True)
@click.option("--stages", type=click.IntRange(1, 3), default=3, show_default=True)
@click.option("--top-k", type=int, default=5, show_default=True)
def chat(config_path, mock, mock_script, index_path, stages, top_k):
    """Interactive Chat-IR loop: one line of feedback per round."""
    try:
        config = _build_config(config_path, mock, mock_script)
        engine = _engine(config, index_path)
        session = engine.sessions.create(QueryKind.CHAT_IR)
    except (EngineError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"session {session.session_id}; empty line or Ctrl-D ends the chat")
    for line in sys.stdin:
        feedback = line.strip()
        if not feedback:
            break
        try:
            session, result = engine.run_round(session.session_id, feedback, stages=stages)
        except EngineError as exc:
            raise click.ClickException(str(exc))
        click.echo(f"round {session.round_count}: {result.stage1.descriptions.comprehensive_synthesis}")
        _print_ranking(result, top_k)


@main.command()
@common_options
@click.argument("cases", type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True), required=True)
@click.option("--stages", type=click.IntRange(1, 3), default=3, show_default=True)
@click.option("--tau", type=float, default=None)
@click.option("--k-verify", type=int, default=None)
@click.option("--alpha", "alpha_evaluate", type=int, default=None)
@click.option("--ks", default="1,5,10", show_default=True, help="Comma-separated metric cutoffs.")
@click.option("--hits-mode", type=click.Choice(["cumulative", "per_round"]), default="cumulative", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("-o", "--out", "out_dir", type=click.Path(), default="bench-out", show_default=True)
def bench(config_path, mock, mock_script, cases, index_path, stages, tau, k_verify, alpha_evaluate, ks, hits_mode, workers, out_dir):
    """Run a benchmark JSONL through the pipeline and emit reports."""
    try:
        config = _build_config(
            config_path, mock, mock_script, tau=tau, k_verify=k_verify, alpha_evaluate=alpha_evaluate
        )
        engine = _engine(config, index_path)
        case_list = load_cases(cases)
        k_values = tuple(int(k.strip()) for k in ks.split(",") if k.strip())
        report = run_benchmark(
            case_list, engine, stages=stages, ks=k_values, workers=workers, hits_mode=hits_mode
        )
        json_path, md_path = write_reports(report, out_dir)
    except (EngineError, ValueError) as exc:
        raise click.ClickException(str(exc))
    for name in sorted(report.metrics):
        click.echo(f"{name}: {report.metrics[name]:.4f}")
    for name, values in sorted(report.hits.items()):
        click.echo(f"{name} by round: " + " ".join(f"{v:.3f}" for v in values))
    if report.failures:
        click.echo(f"{len(report.failures)} case(s) failed; see {json_path}", err=True)
    click.echo(f"reports: {json_path} {md_path}")


@main.command()
@common_options
@click.option("--index", "index_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True), default=None, help="Serve a static UI from /ui.")
def serve(config_path, mock, mock_script, index_path, host, port, ui_dir):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        config = _build_config(config_path, mock, mock_script)
        engine = _engine(config, index_path)
    except (EngineError, ValueError) as exc:
        raise click.ClickException(str(exc))
    app = create_app(engine, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.argument("cases", type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True), default=None, help="Check ids against this index.")
def validate(cases, index_path):
    """Validate a benchmark JSONL (schema; id membership with --index)."""
    try:
        case_list = load_cases(cases)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    database_ids = None
    if index_path:
        try:
            database_ids = load_index(index_path).image_ids
        except EngineError as exc:
            raise click.ClickException(str(exc))
    problems = validate_cases(case_list, database_ids)
    if problems:
        for problem in problems:
            click.echo(problem, err=True)
        raise click.ClickException(f"{len(problems)} problem(s) in {cases}")
    click.echo(f"{len(case_list)} case(s) valid")


if __name__ == "__main__":
    main()
