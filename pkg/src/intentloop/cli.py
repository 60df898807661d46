"""Command line entry points: bench, run, serve."""

from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

import click

from .bench import ARMS, BenchConfig, emit_report, run_benchmark
from .errors import IntentLoopError
from .loop import RefinementConfig, config_digest, default_policy, run_refinement
from .presets import load_presets
from .prompts import load_defaults_table

_TASK_ALIASES = {"attribute": "attribute_binding", "numeracy": "numeracy",
                 "attribute_binding": "attribute_binding", "spatial": "spatial"}


def _parse_tasks(raw: str) -> tuple[str, ...]:
    tasks = []
    for token in raw.split(","):
        token = token.strip()
        if token not in _TASK_ALIASES:
            raise click.BadParameter(f"unknown task {token!r}")
        tasks.append(_TASK_ALIASES[token])
    return tuple(tasks)


def _parse_arms(raw: str) -> tuple[str, ...]:
    arms = tuple(a.strip() for a in raw.split(","))
    for arm in arms:
        if arm not in ARMS:
            raise click.BadParameter(f"unknown arm {arm!r}")
    return arms


@click.group()
def main():
    """Iterative scene-generation refinement: benchmark, single runs,
    and the interactive session service."""


@main.command()
@click.option("--tasks", default="numeracy,attribute,spatial", show_default=True)
@click.option("--n", default=100, show_default=True, help="Prompts per task.")
@click.option("--seed", default=42, show_default=True)
@click.option("--arms", default="unconditioned,conditioned,refined",
              show_default=True)
@click.option("--presets", "presets_path", type=click.Path(exists=True),
              default=None, help="Preset bundle (defaults to packaged).")
@click.option("--out", type=click.Path(), default=None,
              help="Write the JSON report here.")
@click.option("--table", type=click.Path(), default=None,
              help="Write the markdown table here.")
def bench(tasks, n, seed, arms, presets_path, out, table):
    """Run the three-task benchmark and report per-arm accuracies."""
    bundle = load_presets(presets_path)
    cfg = BenchConfig(tasks=_parse_tasks(tasks), n_prompts=n, seed=seed,
                      arms=_parse_arms(arms), bundle=bundle)
    result = run_benchmark(cfg)
    markdown = emit_report(result, "md")
    if out:
        Path(out).write_text(emit_report(result, "json"))
    if table:
        Path(table).write_text(markdown)
    click.echo(markdown, nl=False)


@main.command()
@click.option("--prompt", required=True)
@click.option("--preset", default="refined", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--presets", "presets_path", type=click.Path(exists=True),
              default=None)
@click.option("--enrich/--no-enrich", default=True, show_default=True,
              help="Apply the packaged enrichment rules before layout.")
@click.option("--out", type=click.Path(), default="trace.json",
              show_default=True)
def run(prompt, preset, seed, presets_path, enrich, out):
    """Run one refinement session and write its trace document."""
    bundle = load_presets(presets_path)
    table = None
    if enrich:
        with resources.as_file(
            resources.files("intentloop").joinpath("data/defaults.toml")
        ) as path:
            table = load_defaults_table(path)
    cfg = RefinementConfig(
        generator=bundle.preset(preset),
        detector=bundle.detector(preset),
        max_iterations=bundle.max_iterations,
        policy=default_policy(bundle.max_signals_per_iteration),
        defaults_table=table,
    )
    try:
        trace = run_refinement(prompt, cfg, seed)
    except IntentLoopError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    state = trace.final_state
    doc = trace.to_document(state.spec, state.graph, config_digest(cfg, seed))
    Path(out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    click.echo(f"{trace.status} after {len(trace.iterations)} iteration(s); "
               f"trace written to {out}")


@main.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store", default="./sessions", show_default=True,
              help="Session store directory.")
@click.option("--presets", "presets_path", type=click.Path(exists=True),
              default=None)
@click.option("--frontend", "frontend_dir", type=click.Path(), default=None,
              help="Static frontend directory to serve at /.")
def serve(port, host, store, presets_path, frontend_dir):
    """Start the interactive session service."""
    import uvicorn

    from .service import SessionService, create_app

    bundle = load_presets(presets_path)
    with resources.as_file(
        resources.files("intentloop").joinpath("data/defaults.toml")
    ) as path:
        table = load_defaults_table(path)
    if frontend_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = candidate if candidate.is_dir() else None
    service = SessionService(store, bundle=bundle, defaults_table=table)
    app = create_app(service, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
