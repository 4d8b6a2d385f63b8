"""Annotation exchange: export one task per extracted claim (with the
evidence passages a human grader needs) and import the 3-way vote results
back into a factuality ledger. Grading itself stays human; nothing here
fabricates labels."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..model import Claim, EngineConfig, Passage, canonical_json
from ..retrieval import Retriever, rerank_temporal
from .metrics import ClaimExtractor
from .simulator import SimulatedDialogue

log = logging.getLogger(__name__)

LABELS = ("supported", "refuted", "not_enough_info")
EVIDENCE_SEP = " ||| "


class AnnotationError(Exception):
    pass


@dataclass(frozen=True)
class ClaimRecord:
    system_id: str
    topic_title: str
    topic_class: str
    turn_index: int
    user_utterance: str
    agent_utterance: str
    claim: Claim

    @property
    def base_id(self) -> str:
        return f"{self.system_id}|{self.topic_title}|{self.turn_index}"


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    record: ClaimRecord
    evidence: tuple[Passage, ...]
    short_evidence: bool = False  # retrieval failed or returned fewer than required


@dataclass
class FactualityLedger:
    """Per-claim labels with (system, topic class) provenance. Factual
    accuracy is computed only over labeled claims."""

    entries: list[tuple[str, str, str, str]] = field(default_factory=list)  # (task_id, system, class, label)

    def add(self, task_id: str, system_id: str, topic_class: str, label: str) -> None:
        if label not in LABELS:
            raise AnnotationError(f"bad label {label!r}; expected one of {LABELS}")
        self.entries.append((task_id, system_id, topic_class, label))

    def factual_accuracy(self) -> dict[tuple[str, str], float]:
        """supported / labeled per (system, topic class), plus an "all" class
        rollup per system. Empty cells are absent, never 0."""
        labeled: dict[tuple[str, str], int] = {}
        supported: dict[tuple[str, str], int] = {}
        for _, system, topic_class, label in self.entries:
            for cls in (topic_class, "all"):
                key = (system, cls)
                labeled[key] = labeled.get(key, 0) + 1
                supported[key] = supported.get(key, 0) + (1 if label == "supported" else 0)
        return {key: supported[key] / count for key, count in labeled.items() if count > 0}

    def save(self, path: str | Path) -> None:
        rows = [
            {"task_id": t, "system_id": s, "topic_class": c, "label": lb}
            for t, s, c, lb in self.entries
        ]
        Path(path).write_text(canonical_json(rows) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FactualityLedger":
        import json

        rows = json.loads(Path(path).read_text("utf-8"))
        ledger = cls()
        for row in rows:
            ledger.add(row["task_id"], row["system_id"], row["topic_class"], row["label"])
        return ledger


def majority_label(votes: Sequence[str]) -> str:
    """Majority of 3-way votes; any tie resolves to not_enough_info."""
    for vote in votes:
        if vote not in LABELS:
            raise AnnotationError(f"bad vote {vote!r}; expected one of {LABELS}")
    counts = {label: votes.count(label) for label in LABELS}
    best = max(counts.values())
    winners = [label for label, count in counts.items() if count == best]
    return winners[0] if len(winners) == 1 else "not_enough_info"


def extract_claim_records(
    dialogues: Iterable[SimulatedDialogue], extractor: ClaimExtractor
) -> list[ClaimRecord]:
    records = []
    for dialogue in dialogues:
        for index, turn in enumerate(dialogue.turns):
            claims = extractor.extract(dialogue.turns[:index], turn.user_utterance, turn.agent_utterance)
            for claim in claims:
                records.append(
                    ClaimRecord(
                        system_id=dialogue.system_id,
                        topic_title=dialogue.topic.title,
                        topic_class=dialogue.topic.topic_class,
                        turn_index=index,
                        user_utterance=turn.user_utterance,
                        agent_utterance=turn.agent_utterance,
                        claim=claim,
                    )
                )
    return records


def export_annotation_tasks(
    records: Sequence[ClaimRecord],
    retriever: Retriever,
    cfg: EngineConfig,
) -> list[AnnotationTask]:
    """One task per claim with n_evidence_eval re-ranked passages. Retrieval
    failures emit the task with whatever evidence was obtained, flagged."""
    tasks = []
    claim_counter: dict[str, int] = {}
    for record in records:
        k = claim_counter.get(record.base_id, 0)
        claim_counter[record.base_id] = k + 1
        task_id = f"{record.base_id}|{k}"
        evidence: tuple[Passage, ...] = ()
        short = False
        try:
            candidates = retriever.search(record.claim.text, cfg.retrieval_overfetch)
            evidence = tuple(
                rerank_temporal(
                    candidates,
                    record.claim.time,
                    cfg.n_evidence_eval,
                    cfg.recency_weight,
                    cfg.recency_timescale_days,
                    cfg.today,
                )
            )
        except Exception as exc:  # noqa: BLE001 - per-task, flagged
            log.warning("evidence retrieval failed for %s: %s", task_id, exc)
            short = True
        if len(evidence) < cfg.n_evidence_eval:
            short = True
        tasks.append(AnnotationTask(task_id=task_id, record=record, evidence=evidence, short_evidence=short))
    return tasks


def write_tasks_csv(tasks: Sequence[AnnotationTask], path: str | Path, n_evidence_eval: int = 5) -> None:
    header = [
        "task_id", "system_id", "topic_title", "topic_class", "turn_index",
        "user_utterance", "agent_utterance", "claim_text", "claim_time", "short_evidence",
    ] + [f"evidence_{i + 1}" for i in range(n_evidence_eval)]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for task in tasks:
            r = task.record
            cells = [
                task.task_id, r.system_id, r.topic_title, r.topic_class, r.turn_index,
                r.user_utterance, r.agent_utterance, r.claim.text, str(r.claim.time),
                "1" if task.short_evidence else "0",
            ]
            for i in range(n_evidence_eval):
                if i < len(task.evidence):
                    p = task.evidence[i]
                    cells.append(f"{p.id}{EVIDENCE_SEP}{p.title}{EVIDENCE_SEP}{p.body}")
                else:
                    cells.append("")
            writer.writerow(cells)


def read_tasks_csv(path: str | Path) -> dict[str, tuple[str, str]]:
    """task_id -> (system_id, topic_class), for joining labels on import."""
    mapping = {}
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            mapping[row["task_id"]] = (row["system_id"], row["topic_class"])
    return mapping


def import_labels(tasks_csv: str | Path, labels_csv: str | Path) -> FactualityLedger:
    """Labels file columns: task_id, vote_1, vote_2, vote_3. The final label
    is the majority vote; ties become not_enough_info."""
    tasks = read_tasks_csv(tasks_csv)
    ledger = FactualityLedger()
    with open(labels_csv, encoding="utf-8", newline="") as f:
        for lineno, row in enumerate(csv.DictReader(f), start=2):
            task_id = row.get("task_id", "")
            if task_id not in tasks:
                raise AnnotationError(f"labels line {lineno}: unknown task_id {task_id!r}")
            votes = [row.get(f"vote_{i}", "").strip() for i in (1, 2, 3)]
            label = majority_label(votes)
            system_id, topic_class = tasks[task_id]
            ledger.add(task_id, system_id, topic_class, label)
    return ledger
