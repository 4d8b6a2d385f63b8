"""LLM user simulator and the benchmark runner that pairs it with a system
under test: one dialogue per topic, user speaks first, a fixed number of
user/agent turn pairs, every trace persisted to a conversation log."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from ..llm import CompletionRequest, Provider
from ..model import ConversationState, ConversationLog, DialogueTurn, EngineConfig, PipelineTrace
from ..pipeline import format_day
from ..templating import load_prompt
from ..wiki import TopicSpec

log = logging.getLogger(__name__)

DEFAULT_TURNS_PER_DIALOGUE = 5
SIMULATOR_MAX_TOKENS = 256
SIMULATOR_STOPS = ("\nChatbot:", "\nYou:")


class SimulatorError(Exception):
    pass


class ChatSystem(Protocol):
    system_id: str

    def respond(self, state: ConversationState, user_utterance: str) -> tuple[str, PipelineTrace | None]: ...


@dataclass(frozen=True)
class SimulatedDialogue:
    topic: TopicSpec
    system_id: str
    turns: tuple[DialogueTurn, ...]

    def __post_init__(self) -> None:
        if any(not t.user_utterance.strip() or not t.agent_utterance.strip() for t in self.turns):
            raise SimulatorError("dialogue contains an empty utterance")


@dataclass
class BenchmarkRun:
    dialogues: list[SimulatedDialogue] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (topic title, error)


class UserSimulator:
    """Plays the human side of a benchmark conversation, primed with the
    topic's title and first paragraph."""

    def __init__(self, cfg: EngineConfig, provider: Provider, model_id: str = "simulator-default") -> None:
        self.cfg = cfg
        self.provider = provider
        self.model_id = model_id
        self.template = load_prompt("user-simulator")

    def simulate_turn(self, topic: TopicSpec, history: Sequence[DialogueTurn]) -> str:
        prompt = self.template.render(
            {
                "current_year": self.cfg.today.year,
                "today": format_day(self.cfg.today),
                "title": topic.title,
                "passage": topic.first_paragraph,
                "dlg": [
                    {"user_utterance": t.user_utterance, "agent_utterance": t.agent_utterance}
                    for t in history
                ],
            }
        )
        req = CompletionRequest(
            prompt=prompt,
            model_id=self.model_id,
            temperature=self.cfg.temperature,
            max_tokens=SIMULATOR_MAX_TOKENS,
            stop_sequences=SIMULATOR_STOPS,
        )
        utterance = self.provider.complete(req).text.strip()
        if not utterance:
            raise SimulatorError(f"simulator produced an empty utterance for {topic.title!r}")
        return utterance


def run_benchmark(
    topics: Sequence[TopicSpec],
    system: ChatSystem,
    simulator: UserSimulator,
    turns_per_dialogue: int = DEFAULT_TURNS_PER_DIALOGUE,
    log_dir: str | Path | None = None,
) -> BenchmarkRun:
    """Simulate one dialogue per topic. Per-topic failures are recorded and
    skipped; the run always continues."""
    run = BenchmarkRun()
    conversation_log = None
    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_path = log_dir / f"{system.system_id}.jsonl"
        if log_path.exists():
            os.remove(log_path)
        conversation_log = ConversationLog(str(log_path))

    for topic in topics:
        state = ConversationState(topic_id=topic.title)
        try:
            for _ in range(turns_per_dialogue):
                utterance = simulator.simulate_turn(topic, state.turns)
                system.respond(state, utterance)
            dialogue = SimulatedDialogue(topic=topic, system_id=system.system_id, turns=tuple(state.turns))
        except Exception as exc:  # noqa: BLE001 - any per-topic failure is recorded, not raised
            log.warning("topic %r failed: %s", topic.title, exc)
            run.failures.append((topic.title, str(exc)))
            continue
        run.dialogues.append(dialogue)
        if conversation_log is not None:
            for index, turn in enumerate(dialogue.turns):
                conversation_log.append(topic.title, index, turn)
    return run
