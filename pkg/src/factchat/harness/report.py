"""Benchmark report: one JSON document per run, a flat CSV for spreadsheets,
and bar-chart figures rendered next to them.

Factual accuracy appears only when human labels were imported; the
trace-derived verification rate is always reported as model-estimated.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..model import canonical_json
from .annotations import FactualityLedger
from .judge import Judge, JudgeError
from .metrics import ClaimExtractor, bleu, mean
from .simulator import SimulatedDialogue

REPORT_FORMAT = "factchat-report/1"
CLASSES = ("head", "tail", "recent", "all")
JUDGE_FIELDS = ("relevant", "informational", "natural", "non_repetitive", "temporally_correct")


def _round(value: float | None, digits: int = 6) -> float | None:
    return None if value is None else round(value, digits)


def build_report(
    dialogues: Sequence[SimulatedDialogue],
    judge: Judge | None = None,
    extractor: ClaimExtractor | None = None,
    ledger: FactualityLedger | None = None,
    failures: Sequence[tuple[str, str]] = (),
) -> dict:
    """Fold every dialogue into per-(system, topic class) metric cells."""
    # accumulators keyed by (system, class)
    turns: dict[tuple[str, str], int] = {}
    dialogue_counts: dict[tuple[str, str], int] = {}
    judge_sums: dict[tuple[str, str], dict[str, list[int]]] = {}
    unjudged: dict[tuple[str, str], int] = {}
    claim_counts: dict[tuple[str, str], list[int]] = {}
    verified: dict[tuple[str, str], tuple[int, int]] = {}  # (supported, total claims)
    bleus: dict[tuple[str, str], list[float]] = {}

    def keys_for(dialogue: SimulatedDialogue) -> tuple[tuple[str, str], tuple[str, str]]:
        return (
            (dialogue.system_id, dialogue.topic.topic_class),
            (dialogue.system_id, "all"),
        )

    for dialogue in dialogues:
        for key in keys_for(dialogue):
            dialogue_counts[key] = dialogue_counts.get(key, 0) + 1
        for index, turn in enumerate(dialogue.turns):
            history = dialogue.turns[:index]
            for key in keys_for(dialogue):
                turns[key] = turns.get(key, 0) + 1

            if judge is not None:
                try:
                    scores = judge.judge_turn(history, turn.user_utterance, turn.agent_utterance)
                    for key in keys_for(dialogue):
                        bucket = judge_sums.setdefault(key, {f: [] for f in JUDGE_FIELDS})
                        for f in JUDGE_FIELDS:
                            bucket[f].append(getattr(scores, f))
                except JudgeError:
                    for key in keys_for(dialogue):
                        unjudged[key] = unjudged.get(key, 0) + 1

            if extractor is not None:
                n_claims = len(extractor.extract(history, turn.user_utterance, turn.agent_utterance))
                for key in keys_for(dialogue):
                    claim_counts.setdefault(key, []).append(n_claims)

            if turn.trace is not None:
                supports = sum(1 for _, v in turn.trace.claims if v.label == "SUPPORTS")
                total = len(turn.trace.claims)
                for key in keys_for(dialogue):
                    s, t = verified.get(key, (0, 0))
                    verified[key] = (s + supports, t + total)
                if turn.trace.draft:
                    for key in keys_for(dialogue):
                        bleus.setdefault(key, []).append(bleu(turn.trace.final, turn.trace.draft))

    fa = ledger.factual_accuracy() if ledger is not None else {}

    systems: dict[str, dict] = {}
    for key in sorted(set(dialogue_counts) | set(fa)):
        system, topic_class = key
        cell: dict = {
            "dialogues": dialogue_counts.get(key, 0),
            "agent_turns": turns.get(key, 0),
        }
        if judge is not None:
            bucket = judge_sums.get(key, {f: [] for f in JUDGE_FIELDS})
            cell["judge"] = {f: _round(mean(bucket[f])) for f in JUDGE_FIELDS}
            cell["judge"]["judged"] = len(bucket[JUDGE_FIELDS[0]])
            cell["judge"]["unjudged"] = unjudged.get(key, 0)
        if extractor is not None:
            cell["claims_per_turn"] = _round(mean(claim_counts.get(key, [])))
        s, t = verified.get(key, (0, 0))
        cell["pct_verified_model_estimated"] = _round(s / t) if t else None
        cell["bleu_draft_final"] = _round(mean(bleus.get(key, [])))
        cell["factual_accuracy"] = _round(fa.get(key))
        cell["factual_accuracy_source"] = "human-labels" if key in fa else None
        systems.setdefault(system, {})[topic_class] = cell

    return {
        "format": REPORT_FORMAT,
        "systems": systems,
        "failures": [{"topic": t, "error": e} for t, e in failures],
        "notes": {
            "pct_verified_model_estimated": "fraction of extracted claims the pipeline's own verifier "
            "labeled SUPPORTS; model-estimated, not a substitute for human factual accuracy",
            "factual_accuracy": "present only when human annotation labels were imported",
        },
    }


def write_report(report: dict, out_dir: str | Path, figures: bool = True) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(canonical_json(report) + "\n", encoding="utf-8")
    _write_csv(report, out_dir / "report.csv")
    if figures:
        render_figures(report, out_dir / "figures")


def _flat_rows(report: dict) -> list[tuple[str, str, str, str]]:
    rows = []
    for system in sorted(report["systems"]):
        for topic_class in CLASSES:
            cell = report["systems"][system].get(topic_class)
            if cell is None:
                continue
            for metric, value in sorted(_flatten(cell).items()):
                rows.append((system, topic_class, metric, "" if value is None else str(value)))
    return rows


def _flatten(cell: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in cell.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def _write_csv(report: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["system", "topic_class", "metric", "value"])
        writer.writerows(_flat_rows(report))


def render_figures(report: dict, fig_dir: str | Path) -> list[Path]:
    """Bar charts per metric across systems and topic classes."""
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    metric_specs = [
        ("claims_per_turn", "Claims per agent turn", None),
        ("pct_verified_model_estimated", "Verified claim fraction (model-estimated)", (0, 1)),
        ("bleu_draft_final", "BLEU, refined vs draft", (0, 1)),
        ("factual_accuracy", "Factual accuracy (human labels)", (0, 1)),
    ]
    for metric, title, ylim in metric_specs:
        path = _bar_chart(report, metric, title, ylim, fig_dir / f"{metric}.png")
        if path is not None:
            written.append(path)

    path = _judge_chart(report, fig_dir / "judge_means.png")
    if path is not None:
        written.append(path)
    return written


def _bar_chart(report: dict, metric: str, title: str, ylim, path: Path) -> Path | None:
    systems = sorted(report["systems"])
    series = {}
    for system in systems:
        values = [report["systems"][system].get(c, {}).get(metric) for c in CLASSES]
        if any(v is not None for v in values):
            series[system] = [0.0 if v is None else v for v in values]
    if not series:
        return None
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / len(series)
    for i, (system, values) in enumerate(sorted(series.items())):
        positions = [x + i * width for x in range(len(CLASSES))]
        ax.bar(positions, values, width=width, label=system)
    ax.set_xticks([x + 0.4 - width / 2 for x in range(len(CLASSES))])
    ax.set_xticklabels(CLASSES)
    ax.set_title(title)
    if ylim:
        ax.set_ylim(*ylim)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={})
    plt.close(fig)
    return path


def _judge_chart(report: dict, path: Path) -> Path | None:
    systems = sorted(report["systems"])
    rows = []
    for system in systems:
        cell = report["systems"][system].get("all", {})
        judge = cell.get("judge")
        if judge and all(judge.get(f) is not None for f in JUDGE_FIELDS):
            rows.append((system, [judge[f] for f in JUDGE_FIELDS]))
    if not rows:
        return None
    fig, ax = plt.subplots(figsize=(7, 3.5))
    width = 0.8 / len(rows)
    for i, (system, values) in enumerate(rows):
        positions = [x + i * width for x in range(len(JUDGE_FIELDS))]
        ax.bar(positions, values, width=width, label=system)
    ax.set_xticks([x + 0.4 - width / 2 for x in range(len(JUDGE_FIELDS))])
    ax.set_xticklabels([f.replace("_", " ") for f in JUDGE_FIELDS], fontsize=8)
    ax.set_ylim(0, 100)
    ax.set_title("Judge criterion means (all topics)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={})
    plt.close(fig)
    return path
