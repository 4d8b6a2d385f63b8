"""Operator entry points: corpus build, interactive chat, server launch,
benchmark runs, annotation export/import, and report rendering.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, ConfigError, build_provider, build_retriever, load_config
from .harness import (
    ClaimExtractor,
    FactualityLedger,
    Judge,
    SimulatedDialogue,
    UserSimulator,
    build_report,
    export_annotation_tasks,
    extract_claim_records,
    import_labels,
    run_benchmark,
    write_report,
    write_tasks_csv,
)
from .model import ConversationLog, ConversationState, DialogueTurn, PipelineTrace, canonical_json
from .pipeline import BaselineResponder, ChatEngine, StageError
from .retrieval import CorpusIndex, RetrievalError, build_corpus_index, load_articles_dir
from .wiki import TopicSpec, WikiError, load_topic_file


@click.group()
def main() -> None:
    """Knowledge-grounded chatbot engine and evaluation harness."""


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _load_config(config_path: str | None) -> AppConfig:
    try:
        return load_config(config_path)
    except (ConfigError, ValueError) as exc:
        _fail(str(exc))


def _build_system(cfg: AppConfig, system_name: str, index_override: str | None):
    retrieval = cfg.retrieval
    if index_override:
        from .config import RetrievalSettings

        retrieval = RetrievalSettings(index_path=index_override)
    provider = build_provider(cfg.provider)
    if system_name == "baseline":
        return BaselineResponder(cfg.engine, provider, model_id=cfg.provider.model_id), None
    retriever = build_retriever(retrieval)
    engine = ChatEngine(
        cfg.engine, provider, retriever, model_id=cfg.provider.model_id
    )
    return engine, retriever


@main.command("corpus-build")
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("output_index", type=click.Path(dir_okay=False, writable=True))
@click.option("--word-limit", default=120, show_default=True, help="Max words of title + body per passage.")
def cmd_corpus_build(input_dir: str, output_index: str, word_limit: int) -> None:
    """Chunk a directory of article text files into a passage index."""
    try:
        articles = load_articles_dir(input_dir)
        index = build_corpus_index(articles, word_limit)
        index.save(output_index)
    except (RetrievalError, OSError, ValueError) as exc:
        _fail(str(exc))
    if not articles:
        click.echo("warning: no articles found; wrote an empty index", err=True)
    words = [p.word_count() for p in index.passages]
    mean_words = sum(words) / len(words) if words else 0.0
    click.echo(f"articles: {len(articles)}")
    click.echo(f"passages: {len(index.passages)}")
    click.echo(f"mean passage words: {mean_words:.1f}")
    click.echo(f"index written to {output_index}")


@main.command("chat")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--index", "index_override", type=click.Path(exists=True), default=None,
              help="Passage index file (overrides the config's retrieval backend).")
@click.option("--show-trace", is_flag=True, help="Print a per-stage summary after each reply.")
def cmd_chat(config_path: str | None, index_override: str | None, show_trace: bool) -> None:
    """Interactive chat on stdin/stdout; EOF exits cleanly."""
    cfg = _load_config(config_path)
    try:
        engine, _ = _build_system(cfg, "engine", index_override)
    except (ConfigError, RetrievalError, OSError) as exc:
        _fail(str(exc))
    state = ConversationState()
    log = ConversationLog(cfg.log_path) if cfg.log_path else None
    while True:
        try:
            utterance = input("You: ")
        except EOFError:
            click.echo()
            break
        if not utterance.strip():
            continue
        try:
            final, trace = engine.run_turn(state, utterance)
        except StageError as exc:
            click.echo(f"[turn failed at stage {exc.stage}: {exc.cause}]", err=True)
            continue
        click.echo(f"Bot: {final}")
        if log is not None:
            log.append(state.topic_id, len(state.turns) - 1, state.turns[-1])
        if show_trace:
            _print_trace_summary(trace)


def _print_trace_summary(trace: PipelineTrace) -> None:
    for outcome in trace.stages:
        status = "skipped" if outcome.skipped else ("fallback" if outcome.fallback_used else "ok")
        click.echo(f"  [{outcome.stage}] {status}")
    if trace.search_decision:
        click.echo(f"  query: {trace.search_decision.query!r} time={trace.search_decision.time}")
    click.echo(f"  passages: {len(trace.reranked)}/{len(trace.retrieved)} reranked/retrieved")
    labels = [v.label for _, v in trace.claims]
    click.echo(f"  claims: {len(labels)} {labels}")
    click.echo(f"  bullets: {len(trace.bullets_final)}")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--index", "index_override", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None,
              help="Directory of static web UI files to serve under /ui.")
def cmd_serve(config_path: str | None, index_override: str | None, host: str, port: int,
              ui_dir: str | None) -> None:
    """Launch the HTTP service."""
    import uvicorn

    from .server import create_app

    cfg = _load_config(config_path)
    try:
        engine, _ = _build_system(cfg, "engine", index_override)
    except (ConfigError, RetrievalError, OSError) as exc:
        _fail(str(exc))
    app = create_app(engine, log_path=cfg.log_path or None, static_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("eval")
@click.argument("topics_file", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--index", "index_override", type=click.Path(exists=True), default=None)
@click.option("--system", "system_name", type=click.Choice(["engine", "baseline"]), default="engine",
              show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_eval(topics_file: str, config_path: str | None, index_override: str | None,
             system_name: str, out_dir: str, figures: bool) -> None:
    """Run the simulated benchmark over a topic file and write the report."""
    cfg = _load_config(config_path)
    if not Path(topics_file).exists():
        _fail(f"topics file not found: {topics_file}")
    try:
        from .wiki import WikiClient

        wiki = WikiClient(base_url=cfg.wiki_base_url)
        topics = load_topic_file(topics_file, fetch_lead=wiki.fetch_article_lead)
        system, retriever = _build_system(cfg, system_name, index_override)
        simulator = UserSimulator(cfg.engine, build_provider(cfg.simulator_provider),
                                  model_id=cfg.simulator_provider.model_id)
        judge_provider = build_provider(cfg.judge_provider)
        judge = Judge(cfg.engine, judge_provider, model_id=cfg.judge_provider.model_id)
        extractor = ClaimExtractor(cfg.engine, judge_provider, model_id=cfg.judge_provider.model_id)
    except (ConfigError, WikiError, RetrievalError, OSError) as exc:
        _fail(str(exc))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = run_benchmark(topics, system, simulator,
                        turns_per_dialogue=cfg.turns_per_dialogue, log_dir=out)
    _write_meta(out, system.system_id, cfg.turns_per_dialogue, topics)

    ledger_path = out / "ledger.json"
    ledger = FactualityLedger.load(ledger_path) if ledger_path.exists() else None
    report = build_report(run.dialogues, judge=judge, extractor=extractor,
                          ledger=ledger, failures=run.failures)
    write_report(report, out, figures=figures)
    click.echo(f"dialogues: {len(run.dialogues)} ok, {len(run.failures)} failed")
    click.echo(f"report written to {out / 'report.json'}")


def _write_meta(out: Path, system_id: str, turns_per_dialogue: int, topics: list[TopicSpec]) -> None:
    meta = {
        "system_id": system_id,
        "turns_per_dialogue": turns_per_dialogue,
        "topics": [
            {"title": t.title, "class": t.topic_class, "lead": t.first_paragraph} for t in topics
        ],
    }
    (out / "meta.json").write_text(canonical_json(meta) + "\n", encoding="utf-8")


def _read_run(run_dir: Path) -> tuple[str, list[SimulatedDialogue]]:
    meta_path = run_dir / "meta.json"
    if not meta_path.exists():
        _fail(f"not a benchmark run directory (no meta.json): {run_dir}")
    meta = json.loads(meta_path.read_text("utf-8"))
    system_id = meta["system_id"]
    topics = {
        t["title"]: TopicSpec(title=t["title"], first_paragraph=t["lead"], topic_class=t["class"])
        for t in meta["topics"]
    }
    log_path = run_dir / f"{system_id}.jsonl"
    if not log_path.exists():
        _fail(f"missing conversation log: {log_path}")
    turns_by_topic: dict[str, list[DialogueTurn]] = {}
    for row in ConversationLog(str(log_path)).read():
        turn = DialogueTurn(
            user_utterance=row["user"],
            agent_utterance=row["agent"],
            trace=PipelineTrace.from_dict(row["trace"]) if row.get("trace") else None,
        )
        turns_by_topic.setdefault(row["topic_id"], []).append(turn)
    dialogues = []
    for title, turns in turns_by_topic.items():
        if title not in topics:
            _fail(f"log references topic {title!r} missing from meta.json")
        dialogues.append(SimulatedDialogue(topic=topics[title], system_id=system_id, turns=tuple(turns)))
    return system_id, dialogues


@main.command("report")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--index", "index_override", type=click.Path(exists=True), default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_report(run_dir: str, config_path: str | None, index_override: str | None, figures: bool) -> None:
    """Re-render the report for a finished run (picks up ledger.json)."""
    cfg = _load_config(config_path)
    out = Path(run_dir)
    _, dialogues = _read_run(out)
    judge_provider = build_provider(cfg.judge_provider)
    judge = Judge(cfg.engine, judge_provider, model_id=cfg.judge_provider.model_id)
    extractor = ClaimExtractor(cfg.engine, judge_provider, model_id=cfg.judge_provider.model_id)
    ledger_path = out / "ledger.json"
    ledger = FactualityLedger.load(ledger_path) if ledger_path.exists() else None
    report = build_report(dialogues, judge=judge, extractor=extractor, ledger=ledger)
    write_report(report, out, figures=figures)
    click.echo(f"report written to {out / 'report.json'}")


@main.command("topic-stats")
@click.argument("title")
@click.option("--start", default="20230101", show_default=True, help="Window start, YYYYMMDD.")
@click.option("--end", default="20230430", show_default=True, help="Window end, YYYYMMDD.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_topic_stats(title: str, start: str, end: str, config_path: str | None) -> None:
    """Raw view/edit counts for one article, for curating benchmark topics.

    High view counts suggest head topics, low ones tail topics; high edit
    counts over a recent window suggest recent topics. Cutoffs are yours to
    choose; review candidates by hand before adding them to a topic file.
    """
    from .wiki import WikiClient, WikiError

    cfg = _load_config(config_path)
    try:
        stats = WikiClient(base_url=cfg.wiki_base_url).fetch_topic_stats(title, start, end)
    except WikiError as exc:
        _fail(str(exc))
    click.echo(f"title: {stats.title}")
    click.echo(f"total views [{start}..{end}]: {stats.total_views}")
    click.echo(f"edits [{start}..{end}]: {stats.edit_count_window}")


@main.group("annotations")
def cmd_annotations() -> None:
    """Export annotation tasks for human grading; import the labeled votes."""


@cmd_annotations.command("export")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--index", "index_override", type=click.Path(exists=True), default=None)
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), default=None,
              help="Defaults to RUN_DIR/tasks.csv")
def cmd_annotations_export(run_dir: str, config_path: str | None,
                           index_override: str | None, out_csv: str | None) -> None:
    """Write one grading task per extracted claim, with evidence passages."""
    cfg = _load_config(config_path)
    out = Path(run_dir)
    _, dialogues = _read_run(out)
    try:
        if index_override:
            retriever = CorpusIndex.load(index_override)
        else:
            retriever = build_retriever(cfg.retrieval)
        judge_provider = build_provider(cfg.judge_provider)
    except (ConfigError, RetrievalError, OSError) as exc:
        _fail(str(exc))
    extractor = ClaimExtractor(cfg.engine, judge_provider, model_id=cfg.judge_provider.model_id)
    records = extract_claim_records(dialogues, extractor)
    tasks = export_annotation_tasks(records, retriever, cfg.engine)
    target = Path(out_csv) if out_csv else out / "tasks.csv"
    write_tasks_csv(tasks, target, n_evidence_eval=cfg.engine.n_evidence_eval)
    click.echo(f"{len(tasks)} tasks written to {target}")


@cmd_annotations.command("import")
@click.argument("tasks_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Ledger JSON output (place it in the run dir as ledger.json).")
def cmd_annotations_import(tasks_csv: str, labels_csv: str, out_path: str) -> None:
    """Resolve 3-way votes into labels (ties become not_enough_info)."""
    try:
        ledger = import_labels(tasks_csv, labels_csv)
    except Exception as exc:  # noqa: BLE001
        _fail(str(exc))
    ledger.save(out_path)
    counts: dict[str, int] = {}
    for _, _, _, label in ledger.entries:
        counts[label] = counts.get(label, 0) + 1
    click.echo(f"{len(ledger.entries)} labels written to {out_path} {counts}")


if __name__ == "__main__":
    sys.exit(main())
