"""Command-line surface: ask, chat, predict, generate, eval, tables, serve.

Settings resolve in precedence order flag > environment > config file >
default. Session exit codes mirror outcome labels: 0 answered,
2 token_limit, 3 logic_error; configuration problems exit 1.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

from . import bench
from .agent import (RulesBackend, ToolContext, default_toolkit, run_session,
                    trace_to_jsonl)
from .core import MofsmithError, OutcomeLabel
from .dataset import Registry, load_registry, resolve_data_root
from .generator import (GAConfig, parse_gen_plan, registry_surrogate, run_ga,
                        write_generation_csv, write_result_json)
from .llm import (DEFAULT_TOKEN_LIMIT, HttpBackend, ReplayBackend, ScriptedBackend,
                  TokenBudget)
from .predictor import (MaterialSelector, SelectorKind, predict, resolve_materials,
                        write_predictions_csv)

EXIT_FOR_LABEL = {
    OutcomeLabel.ANSWERED: 0,
    OutcomeLabel.TOKEN_LIMIT: 2,
    OutcomeLabel.LOGIC_ERROR: 3,
}


@dataclass
class Settings:
    data: Optional[str] = None
    backend: str = "rules"
    budget: int = DEFAULT_TOKEN_LIMIT
    seed: int = 0
    workers: int = 1
    port: int = 8234
    max_steps: int = 8
    script: Optional[str] = None
    transcript: Optional[str] = None


def parse_config_file(path: str) -> dict:
    """Flat `key = value` lines; # comments; quotes optional on strings."""
    values: dict = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(),
                                  start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{line_no}: expected key = value")
        key, _, value = line.partition("=")
        value = value.strip().strip("\"'")
        values[key.strip()] = value
    return values


_INT_KEYS = {"budget", "seed", "workers", "port", "max_steps"}


def resolve_settings(config_path: Optional[str], **flags) -> Settings:
    settings = Settings()
    if config_path:
        for key, value in parse_config_file(config_path).items():
            if not hasattr(settings, key):
                raise click.ClickException(f"unknown config key {key!r}")
            setattr(settings, key, int(value) if key in _INT_KEYS else value)
    # env sits between config file and flags
    env_data = os.environ.get("MOFSMITH_DATA")
    if env_data:
        settings.data = env_data
    for key, value in flags.items():
        if value is not None:
            setattr(settings, key, value)
    return settings


def open_registry(settings: Settings) -> Registry:
    try:
        root = resolve_data_root(settings.data)
        return load_registry(root)
    except MofsmithError as exc:
        raise click.ClickException(str(exc)) from None


def build_backend(settings: Settings, registry: Registry):
    name = settings.backend
    if name == "rules":
        return RulesBackend(registry)
    if name == "scripted":
        if not settings.script:
            raise click.ClickException("--script FILE is required with the scripted backend")
        raw = json.loads(Path(settings.script).read_text(encoding="utf-8"))
        return ScriptedBackend(raw)
    if name == "replay":
        if not settings.transcript:
            raise click.ClickException("--transcript FILE is required with the replay backend")
        return ReplayBackend(settings.transcript)
    if name == "http":
        try:
            return HttpBackend.from_env(os.environ)
        except MofsmithError as exc:
            raise click.ClickException(str(exc)) from None
    raise click.ClickException(f"unknown backend {name!r}")


def _print_pretty(trace_events, out=None) -> None:
    out = out or click.get_text_stream("stdout")
    for event in trace_events:
        if event.kind == "thought":
            click.echo(f"Thought: {event.payload['text']}", file=out)
        elif event.kind == "action":
            click.echo(f"Action: {event.payload['tool']}", file=out)
            click.echo(f"Action Input: {event.payload['input']}", file=out)
        elif event.kind == "observation":
            for note in event.payload.get("notes", []):
                click.echo(note, file=out)
            click.echo(f"Observation: {event.payload['text']}", file=out)
        elif event.kind == "final":
            click.echo(f"Thought: {event.payload['thought']}", file=out)
            click.echo(f"Final Answer: {event.payload['answer']}", file=out)
        elif event.kind == "error":
            click.echo(f"[{event.payload['label']}] {event.payload['detail']}",
                       file=out)


def _run_question(question: str, settings: Settings, registry: Registry,
                  backend, as_json: bool) -> int:
    budget = TokenBudget(limit=settings.budget)
    context = ToolContext(registry=registry, budget=budget,
                          ga_config=GAConfig(seed=settings.seed))
    outcome = run_session(question, default_toolkit(), backend, budget, context,
                          max_steps=settings.max_steps)
    if as_json:
        click.echo(trace_to_jsonl(outcome.trace, uuid.uuid4().hex))
    else:
        _print_pretty(outcome.trace.events)
        if outcome.label is not OutcomeLabel.ANSWERED:
            click.echo(f"Session ended with {outcome.label.value}: {outcome.detail}")
    return EXIT_FOR_LABEL[outcome.label]


def _common_options(fn):
    fn = click.option("--data", help="dataset directory (default: $MOFSMITH_DATA)")(fn)
    fn = click.option("--backend",
                      type=click.Choice(["rules", "scripted", "replay", "http"]),
                      default=None, help="completion backend (default rules)")(fn)
    fn = click.option("--budget", type=int, default=None,
                      help=f"session token budget (default {DEFAULT_TOKEN_LIMIT})")(fn)
    fn = click.option("--seed", type=int, default=None, help="generator seed")(fn)
    fn = click.option("--max-steps", "max_steps", type=int, default=None)(fn)
    fn = click.option("--script", help="question→completions JSON for --backend scripted")(fn)
    fn = click.option("--transcript", help="JSONL transcript for --backend replay")(fn)
    fn = click.option("--config", "config_path", help="key = value settings file")(fn)
    return fn


@click.group()
def main() -> None:
    """Materials question-answering agent over tabulated and surrogate data."""


@main.command()
@click.argument("question")
@click.option("--json", "as_json", is_flag=True, help="print trace events as JSON lines")
@_common_options
def ask(question, as_json, config_path, **flags):
    """Answer one question and print the trace."""
    settings = resolve_settings(config_path, **flags)
    registry = open_registry(settings)
    backend = build_backend(settings, registry)
    code = _run_question(question, settings, registry, backend, as_json)
    raise SystemExit(code)


@main.command()
@_common_options
def chat(config_path, **flags):
    """Interactive loop: one session per line, empty line or EOF to stop."""
    settings = resolve_settings(config_path, **flags)
    registry = open_registry(settings)
    click.echo("Ask about materials (blank line to exit).")
    while True:
        try:
            question = click.prompt(">", prompt_suffix=" ", default="",
                                    show_default=False)
        except (EOFError, click.Abort):
            break
        if not question.strip():
            break
        backend = build_backend(settings, registry)
        _run_question(question.strip(), settings, registry, backend, as_json=False)


@main.command()
@click.option("--property", "properties", multiple=True, required=True,
              help="gene-keyed property (repeatable)")
@click.option("--objective", "objectives", multiple=True, required=True,
              help='one of: max | min | "near X" | "range A B" (repeatable)')
@click.option("--cycles", type=int, default=None)
@click.option("--parents", type=int, default=None)
@click.option("--children", type=int, default=None)
@click.option("--topologies", help="comma-separated topology list")
@click.option("--out", "out_json", help="write the full result JSON here")
@click.option("--csv", "out_csv", help="write per-generation summaries here")
@_common_options
def generate(properties, objectives, cycles, parents, children, topologies,
             out_json, out_csv, config_path, **flags):
    """Run the inverse-design loop for an objective."""
    settings = resolve_settings(config_path, **flags)
    registry = open_registry(settings)
    plan_text = (f"Property: {', '.join(properties)}\n"
                 f"Objective: {', '.join(objectives)}")
    try:
        plan = parse_gen_plan(plan_text, registry)
        defaults = GAConfig()
        config = GAConfig(
            cycles=defaults.cycles if cycles is None else cycles,
            topologies=tuple(topologies.split(",")) if topologies else defaults.topologies,
            parents_per_topology=parents or defaults.parents_per_topology,
            children_per_topology=children or defaults.children_per_topology,
            seed=settings.seed,
        )
        pool = registry.pool()
        if pool is None:
            raise click.ClickException("no gene pool table registered")
        result = run_ga(plan, config, pool, registry_surrogate(registry))
    except MofsmithError as exc:
        raise click.ClickException(str(exc)) from None
    best = result.best
    click.echo(f"best gene: {best.gene}")
    for prop, value in zip(plan.properties, best.values):
        click.echo(f"  {prop} = {value}")
    if out_json:
        click.echo(f"wrote {write_result_json(result, out_json)}")
    if out_csv:
        click.echo(f"wrote {write_generation_csv(result, out_csv)}")


@main.command(name="predict")
@click.option("--property", "property_name", required=True)
@click.option("--material", "materials", multiple=True, help="material id (repeatable)")
@click.option("--all-materials", "all_materials", is_flag=True)
@click.option("--topology", help="restrict to one topology")
@click.option("--out", "out_dir", help="also write a CSV under this directory")
@_common_options
def predict_cmd(property_name, materials, all_materials, topology, out_dir,
                config_path, **flags):
    """Predict a property for selected materials."""
    settings = resolve_settings(config_path, **flags)
    registry = open_registry(settings)
    if all_materials:
        selector = MaterialSelector(SelectorKind.ALL)
    elif topology:
        selector = MaterialSelector(SelectorKind.TOPOLOGY, topology=topology)
    elif materials:
        selector = MaterialSelector(SelectorKind.NAMED, names=tuple(materials))
    else:
        raise click.ClickException("pick --material, --all-materials, or --topology")
    by_fold = {name.casefold(): name for name in registry.lookups}
    property_name = by_fold.get(property_name.casefold(), property_name)
    try:
        registration = registry.lookup(property_name)
        if registration is None:
            raise click.ClickException(
                f"unknown property {property_name!r}; see `mofsmith tables`")
        lookup_table = registry.table(registration.table)
        ids = resolve_materials(selector, lookup_table)
        table = predict(property_name, ids, registry)
    except MofsmithError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(table.to_markdown(token_budget=1_000_000))
    if table.is_log_scale:
        click.echo("note: values are logarithmic")
    if out_dir:
        click.echo(f"wrote {write_predictions_csv(table, out_dir)}")


@main.command(name="eval")
@click.option("--suite", required=True, help="JSONL suite file")
@click.option("--out", "out_path", help="write the JSON report here")
@click.option("--workers", type=int, default=None)
@_common_options
def eval_cmd(suite, out_path, workers, config_path, **flags):
    """Run a question suite and print per-item labels plus accuracy."""
    settings = resolve_settings(config_path, **flags)
    registry = open_registry(settings)
    try:
        items = bench.load_suite(suite)
    except MofsmithError as exc:
        raise click.ClickException(str(exc)) from None

    def runner(item: bench.SuiteItem):
        backend = build_backend(settings, registry)
        budget = TokenBudget(limit=settings.budget)
        context = ToolContext(registry=registry, budget=budget,
                              ga_config=GAConfig(seed=settings.seed))
        return run_session(item.question, default_toolkit(), backend, budget,
                           context, max_steps=settings.max_steps)

    report = bench.run_suite(items, runner, workers=workers or settings.workers)
    click.echo(report.render_table())
    if out_path:
        click.echo(f"wrote {bench.write_report(report, out_path)}")


@main.command()
@_common_options
def tables(config_path, **flags):
    """List registered tables, their key columns, and column dtypes."""
    settings = resolve_settings(config_path, **flags)
    registry = open_registry(settings)
    for name in sorted(registry.tables):
        table = registry.table(name)
        click.echo(f"{name} ({len(table.rows)} rows, key={table.key_column})")
        for column in table.columns:
            click.echo(f"  {column.header}: {column.dtype.value}")
    if registry.lookups:
        click.echo("properties:")
        for prop in registry.property_names():
            registration = registry.lookup(prop)
            click.echo(f"  {prop} -> {registration.table}.{registration.column} "
                       f"[{registration.material_kind.value}]")


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--webroot", help="directory of static UI files to serve")
@_common_options
def serve(port, host, webroot, config_path, **flags):
    """Expose sessions, generation runs, and table schemas over HTTP."""
    import uvicorn

    from .serve import create_app

    settings = resolve_settings(config_path, **flags)
    registry = open_registry(settings)
    app = create_app(registry,
                     backend_factory=lambda name: build_backend(
                         Settings(**{**settings.__dict__, "backend": name}), registry),
                     budget_limit=settings.budget,
                     seed=settings.seed,
                     webroot=webroot)
    uvicorn.run(app, host=host, port=port or settings.port, log_level="warning")


if __name__ == "__main__":
    main()
